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

#ifndef risce_channel_model_H
#define risce_channel_model_H

#include "risce/array_geometry.hpp"
#include "risce/rng.hpp"

#include <vector>

namespace risce
{

// Scatter cluster seen from the panel: truncated-Laplacian power angular
// spectrum, separable in azimuth and elevation, plus the number of users the
// cluster serves. Angles in radians, support [0, pi).
struct ClusterProfile
{
    double mean_azimuth = 0.0;
    double mean_elevation = 0.0;
    double asd_azimuth = 0.1;     // angular standard deviation, azimuth
    double asd_elevation = 0.1;   // angular standard deviation, elevation
    arma::uword num_users = 1;

    void validate() const;
};

// Beam-domain covariance of one cluster: the covariance is diagonalized by
// the beam matrix V, so it is fully described by per-beam eigenvalues plus
// the subset of beams retained after truncation/conflict resolution.
struct CovarianceModel
{
    arma::vec eigenvalues;                 // length N, one per beam, >= 0
    std::vector<arma::uword> kept_beams;   // retained beams, descending own-eigenvalue order
    std::vector<arma::uword> ceded_beams;  // beams with larger own-eigenvalue lost to other clusters
    int cluster_id = 0;
    double trace_norm = 0.0;               // eigenvalues sum to this (= N by convention)

    void validate() const;
};

enum class TruncationMode
{
    fixed_dimension,  // keep a fixed number of strongest beams
    energy_fraction   // keep the smallest prefix capturing a given energy share
};

// Per-cluster claim fed to conflict resolution: the full eigenvalue sequence
// plus the beams the cluster wants to keep.
struct BeamClaim
{
    arma::vec eigenvalues;
    std::vector<arma::uword> kept;
};

// Result of conflict resolution: disjoint kept sets (same cardinality as the
// claims when enough beams exist) and, per cluster, the beams it lost.
struct BeamAssignment
{
    std::vector<std::vector<arma::uword>> kept;
    std::vector<std::vector<arma::uword>> ceded;
};

// Geometric RIS-to-BS channel: num_paths plane waves with complex gains,
// per-path departure angle at the panel (azimuth/elevation pair) and arrival
// angle at the BS line array. All sequences have length num_paths.
struct RisBsChannelParams
{
    arma::uword num_paths = 1;
    arma::uword m_antennas = 1;
    arma::cx_vec gains;          // rho_l
    arma::vec bs_angles;         // arrival angle per path at the BS array
    arma::vec ris_azimuths;      // departure azimuth per path at the panel
    arma::vec ris_elevations;    // departure elevation per path at the panel

    void validate() const;
};

// User channels indexed [cluster][user within cluster].
using UserChannelSet = std::vector<std::vector<arma::cx_vec>>;

// One drawn propagation environment: the RIS-BS matrix plus every user's
// panel channel, with the linear path-loss gains they were scaled by.
struct ScenarioRealization
{
    arma::cx_mat ris_bs;            // G, m_antennas x N
    UserChannelSet user_channels;   // each vector has length N
    double pathloss_ris_bs = 1.0;   // rho_g
    double pathloss_ris_user = 1.0; // rho_h
};

// Laplacian density with standard deviation sd, truncated to [0, pi) and
// renormalized: f(x) proportional to exp(-sqrt(2)*|x - mean|/sd).
double truncated_laplacian_pdf(double angle, double mean, double sd);

// Per-beam power profile of a cluster: entry n is trace_norm times the PAS
// mass falling into beam n's angular bin, where a direction belongs to the
// grid point nearest in cosine (bins are intervals in cosine space). The
// separable azimuth/elevation masses are evaluated by midpoint quadrature on
// a uniform angle grid (2048 points per axis) and renormalized, so the
// entries sum to trace_norm exactly up to rounding.
arma::vec beam_power_profile(const ClusterProfile &profile, const PlanarArrayGeometry &geometry,
                             double trace_norm);

// Full covariance matrix R = V * diag(eigenvalues) * V^H.
arma::cx_mat build_covariance(const arma::vec &eigenvalues, const arma::cx_mat &V);

// Strongest-beam selection. fixed_dimension: value is the number of beams to
// keep (1 <= value <= N, integral). energy_fraction: value is the energy
// share in (0, 1]; the smallest descending-order prefix reaching it is kept.
// Ties in eigenvalue break toward the lower beam index. The result is in
// descending-eigenvalue order.
std::vector<arma::uword> truncate_eigenspace(const arma::vec &eigenvalues, TruncationMode mode,
                                             double value);

// Makes the kept sets of all clusters disjoint. A beam claimed by several
// clusters goes to the one with the larger eigenvalue on it (tie: lower
// cluster id); each losing cluster then refills from its next-strongest
// beams not held by anyone. Beams a cluster passes over because another
// cluster holds them are recorded as ceded. Already-disjoint claims pass
// through unchanged. Throws if the total kept count exceeds the beam count.
BeamAssignment resolve_beam_conflicts(const std::vector<BeamClaim> &clusters);

// profile -> power profile -> truncation -> conflict resolution, producing
// one CovarianceModel per cluster. dims gives the kept-beam count per
// cluster (fixed_dimension mode).
std::vector<CovarianceModel> build_cluster_covariances(const std::vector<ClusterProfile> &profiles,
                                                       const PlanarArrayGeometry &geometry,
                                                       const std::vector<arma::uword> &dims,
                                                       double trace_norm);

// Same, keeping per cluster the smallest prefix with the given energy share.
std::vector<CovarianceModel> build_cluster_covariances(const std::vector<ClusterProfile> &profiles,
                                                       const PlanarArrayGeometry &geometry,
                                                       double energy_fraction, double trace_norm);

// Draws h = V * sqrt(diag(eigenvalues)) * z with z standard complex normal.
// With full_spectrum the whole profile is used; otherwise the draw is
// restricted to the kept beams, so the sample lies in their span.
arma::cx_vec sample_user_channel(const CovarianceModel &cov, const arma::cx_mat &V,
                                 bool full_spectrum, Substream &rng);

// Draws path gains and angles for the RIS-BS channel: gains are CN(0,
// los_gain_var) for the first path and CN(0, nlos_gain_var) for the rest;
// all angles are uniform on [0, pi).
RisBsChannelParams draw_ris_bs_params(arma::uword num_paths, arma::uword m_antennas,
                                      double los_gain_var, double nlos_gain_var, Substream &rng);

// Assembles G = sqrt(M*N/L) * sum_l rho_l * e_M(bs_angle_l) * e(ris_azimuth_l,
// ris_elevation_l)^H from already-drawn parameters.
arma::cx_mat sample_ris_bs_channel(const RisBsChannelParams &params,
                                   const PlanarArrayGeometry &geometry);

// Empirical covariance (1/count) * sum_i h_i * h_i^H; observations are the
// columns of the input. Throws on an empty input.
arma::cx_mat sample_covariance(const arma::cx_mat &observations);

} // namespace risce

#endif
