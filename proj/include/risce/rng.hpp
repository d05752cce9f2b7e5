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

#ifndef risce_rng_H
#define risce_rng_H

#include <armadillo>

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace risce
{

// Derives an independent substream key from a master seed and a path of
// indices (e.g. {scheme, snr point, purpose, counter}). Built on splitmix64
// so nearby paths decorrelate; the same (seed, path) always yields the same
// key, which is what makes Monte-Carlo runs reproducible regardless of how
// trials are scheduled across worker threads.
std::uint64_t derive_stream_key(std::uint64_t master, std::initializer_list<std::uint64_t> path);

// Random stream with a fully specified draw sequence: mt19937_64 (exactly
// defined by the standard) plus explicit 53-bit uniform conversion and a
// Box-Muller normal generator. Nothing here depends on implementation-defined
// standard-library distributions, so two builds of this code produce
// identical draw sequences for the same key.
class Substream
{
public:
    explicit Substream(std::uint64_t key) : engine_(key) {}

    double uniform();                        // in [0, 1)
    double uniform(double lo, double hi);    // in [lo, hi)
    double standard_normal();                // N(0, 1)

    // Circularly-symmetric complex Gaussian CN(0, variance); real and
    // imaginary parts are independent N(0, variance/2).
    std::complex<double> complex_normal(double variance);
    arma::cx_vec complex_normal_vector(arma::uword n, double variance);
    arma::cx_mat complex_normal_matrix(arma::uword rows, arma::uword cols, double variance);

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace risce

#endif
