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

#include "risce/array_geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace risce
{

void PlanarArrayGeometry::validate() const
{
    if (n_h < 1 || n_v < 1)
        throw std::invalid_argument("PlanarArrayGeometry: panel dimensions must be >= 1");
    if (!std::isfinite(spacing_h) || !std::isfinite(spacing_v) || spacing_h <= 0.0 || spacing_v <= 0.0)
        throw std::invalid_argument("PlanarArrayGeometry: spacings must be finite and > 0");
}

arma::cx_vec ula_response(arma::uword size, double angle, double spacing)
{
    if (size < 1)
        throw std::invalid_argument("ula_response: size must be >= 1");
    if (!std::isfinite(angle))
        throw std::invalid_argument("ula_response: angle must be finite");
    if (!std::isfinite(spacing) || spacing <= 0.0)
        throw std::invalid_argument("ula_response: spacing must be finite and > 0");

    const double step = 2.0 * arma::datum::pi * spacing * std::cos(angle);
    const double scale = 1.0 / std::sqrt(static_cast<double>(size));

    arma::cx_vec e(size);
    for (arma::uword k = 0; k < size; ++k)
    {
        const double phase = step * static_cast<double>(k);
        e(k) = std::complex<double>(scale * std::cos(phase), scale * std::sin(phase));
    }
    return e;
}

arma::vec sampling_angles(arma::uword count)
{
    if (count < 1)
        throw std::invalid_argument("sampling_angles: count must be >= 1");

    arma::vec angles(count);
    for (arma::uword n = 0; n < count; ++n)
    {
        const double c = 1.0 - 2.0 * static_cast<double>(n) / static_cast<double>(count);
        angles(n) = std::acos(c);
    }
    return angles;
}

AngleGrid sampling_grid(const PlanarArrayGeometry &geometry)
{
    geometry.validate();
    return AngleGrid{sampling_angles(geometry.n_h), sampling_angles(geometry.n_v)};
}

arma::cx_vec upa_response(const PlanarArrayGeometry &geometry, double azimuth, double elevation)
{
    geometry.validate();
    if (!std::isfinite(azimuth) || !std::isfinite(elevation))
        throw std::invalid_argument("upa_response: angles must be finite");

    return arma::kron(ula_response(geometry.n_v, elevation, geometry.spacing_v),
                      ula_response(geometry.n_h, azimuth, geometry.spacing_h));
}

arma::cx_mat beam_matrix(const PlanarArrayGeometry &geometry)
{
    geometry.validate();
    const AngleGrid grid = sampling_grid(geometry);

    arma::cx_mat v_h(geometry.n_h, geometry.n_h);
    for (arma::uword n = 0; n < geometry.n_h; ++n)
        v_h.col(n) = ula_response(geometry.n_h, grid.azimuth(n), geometry.spacing_h);

    arma::cx_mat v_v(geometry.n_v, geometry.n_v);
    for (arma::uword n = 0; n < geometry.n_v; ++n)
        v_v.col(n) = ula_response(geometry.n_v, grid.elevation(n), geometry.spacing_v);

    return arma::kron(v_v, v_h);
}

} // namespace risce
