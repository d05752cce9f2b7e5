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

#ifndef risce_array_geometry_H
#define risce_array_geometry_H

#include <armadillo>

namespace risce
{

// Uniform planar array laid out row-major: element n (0-based) sits at
// horizontal index n % n_h and vertical index n / n_h. Element spacings are
// in wavelengths; the beam-domain orthogonality properties below hold at the
// default half-wavelength spacing.
struct PlanarArrayGeometry
{
    arma::uword n_h = 1;      // elements per row (horizontal)
    arma::uword n_v = 1;      // elements per column (vertical)
    double spacing_h = 0.5;   // horizontal spacing in wavelengths
    double spacing_v = 0.5;   // vertical spacing in wavelengths

    arma::uword num_elements() const { return n_h * n_v; }
    arma::uword row_index(arma::uword n) const { return n % n_h; } // horizontal index i_H(n)
    arma::uword col_index(arma::uword n) const { return n / n_h; } // vertical index i_V(n)

    void validate() const; // throws std::invalid_argument
};

// Sampled azimuth/elevation angles of the beam grid; azimuth has n_h entries,
// elevation n_v. Angles increase with index (their cosines decrease).
struct AngleGrid
{
    arma::vec azimuth;
    arma::vec elevation;
};

// Steering vector of a uniform linear array: element k (0-based) equals
// (1/sqrt(size)) * exp(j * 2*pi * spacing * k * cos(angle)).
// At spacing = 1/2 wavelength the phase step is pi*cos(angle) and the
// sampled-angle responses below form an orthonormal basis.
arma::cx_vec ula_response(arma::uword size, double angle, double spacing = 0.5);

// Beam-grid angles arccos(1 - 2n/count), n = 0..count-1: count points whose
// cosines are uniformly spaced by 2/count starting at 1. A full-rank grid
// uses exactly count points so the resulting beam matrix is square.
arma::vec sampling_angles(arma::uword count);

// Sampled angle grid of a planar array (azimuth from n_h, elevation from n_v).
AngleGrid sampling_grid(const PlanarArrayGeometry &geometry);

// Planar-array steering vector: Kronecker product of the vertical response
// with the horizontal response, e(azimuth, elevation) = e_v(elev) (x) e_h(azim).
// Element n carries phase 2*pi*(i_H(n)*spacing_h*cos(azimuth) + i_V(n)*spacing_v*cos(elevation)).
arma::cx_vec upa_response(const PlanarArrayGeometry &geometry, double azimuth, double elevation);

// Beam matrix V: columns are planar responses at all grid angle pairs, laid
// out so column n corresponds to (azimuth[i_H(n)], elevation[i_V(n)]).
// Equivalently V = V_v (x) V_h with V_h, V_v the per-axis sampled-response
// matrices. Unitary at half-wavelength spacing.
arma::cx_mat beam_matrix(const PlanarArrayGeometry &geometry);

} // namespace risce

#endif
