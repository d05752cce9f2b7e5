// SPDX-License-Identifier: Apache-2.0
//
// risce - link-level simulator for RIS-aided multi-user uplink channel estimation
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "risce/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace risce
{

namespace
{

constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix64(std::uint64_t x)
{
    x += golden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_stream_key(std::uint64_t master, std::initializer_list<std::uint64_t> path)
{
    std::uint64_t state = splitmix64(master);
    for (const std::uint64_t index : path)
        state = splitmix64(state ^ (index * golden + 1));
    return state;
}

double Substream::uniform()
{
    // Top 53 bits of the engine output, mapped to [0, 1).
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Substream::uniform(double lo, double hi)
{
    if (!(lo < hi))
        throw std::invalid_argument("Substream::uniform: empty interval");
    return lo + (hi - lo) * uniform();
}

double Substream::standard_normal()
{
    if (have_spare_)
    {
        have_spare_ = false;
        return spare_;
    }

    // Box-Muller; u1 is shifted into (0, 1] so the logarithm is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * arma::datum::pi * u2;

    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
}

std::complex<double> Substream::complex_normal(double variance)
{
    if (variance < 0.0 || !std::isfinite(variance))
        throw std::invalid_argument("Substream::complex_normal: variance must be finite and >= 0");
    if (variance == 0.0)
        return {0.0, 0.0};

    const double scale = std::sqrt(0.5 * variance);
    const double re = scale * standard_normal();
    const double im = scale * standard_normal();
    return {re, im};
}

arma::cx_vec Substream::complex_normal_vector(arma::uword n, double variance)
{
    arma::cx_vec out(n, arma::fill::zeros);
    if (variance == 0.0)
        return out;
    for (arma::uword i = 0; i < n; ++i)
        out(i) = complex_normal(variance);
    return out;
}

arma::cx_mat Substream::complex_normal_matrix(arma::uword rows, arma::uword cols, double variance)
{
    arma::cx_mat out(rows, cols, arma::fill::zeros);
    if (variance == 0.0)
        return out;
    for (arma::uword c = 0; c < cols; ++c)      // column-major draw order
        for (arma::uword r = 0; r < rows; ++r)
            out(r, c) = complex_normal(variance);
    return out;
}

} // namespace risce
