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

#ifndef risce_ep_estimator_H
#define risce_ep_estimator_H

#include "risce/channel_model.hpp"
#include "risce/pilot_protocol.hpp"

#include <complex>
#include <vector>

namespace risce
{

// Direct sum of the clusters' kept eigenspaces, flattened cluster-major:
// subframe t probes beam beams[t], owned by cluster owner[t], with prior
// variance eigenvalues[t]. Owners form contiguous blocks 0, 1, ... and the
// beams are pairwise distinct.
struct SumEigenspace
{
    std::vector<arma::uword> beams;
    arma::vec eigenvalues;
    std::vector<int> owner;

    arma::uword dimension() const { return beams.size(); }
    arma::uword num_clusters() const { return owner.empty() ? 0 : static_cast<arma::uword>(owner.back()) + 1; }
    void validate() const;
};

// Concatenates the clusters' kept beams (which must be disjoint) with the
// owner's eigenvalue attached to each beam.
SumEigenspace build_sum_eigenspace(const std::vector<CovarianceModel> &models);

// Receive combiner taken from the principal SVD triple of G: w^H * G =
// delta * v^H with unit-norm w (BS side) and v (panel side), delta > 0.
struct CombinerConfig
{
    arma::cx_vec w;
    double delta = 0.0;
    arma::cx_vec v;
};

CombinerConfig compute_combiner(const arma::cx_mat &G);

// Per-subframe reflection coefficients stored as amplitude/phase pairs
// (that is what reflecting elements physically apply). Subframe t is built
// so that Phi_t^H * v = kappa_t * d_t, where d_t is the beam column probed in
// subframe t: amplitude_n = |d_n/v_n| / max_ratio and phase_n = -arg(d_n/v_n),
// with kappa_t = 1/max_ratio. The division keeps the largest amplitude at
// exactly 1. Elements where |v_n| falls below the masking threshold (or
// where d_n = 0) get coefficient 0.
struct ReflectionSchedule
{
    arma::mat amplitudes; // N x T, in [0, 1]
    arma::mat phases;     // N x T
    arma::vec kappas;     // T, > 0

    arma::uword num_subframes() const { return kappas.n_elem; }
    arma::cx_vec coefficients(arma::uword t) const;
    arma::cx_mat coefficient_matrix() const; // N x T, column t = diag(Phi_t)
    void validate() const;
};

// epsilon_v is relative to max_n |v_n|: elements with |v_n| <= epsilon_v *
// max|v| are masked off. Throws if v vanishes or if some basis beam has no
// support on the unmasked elements.
constexpr double default_mask_epsilon = 1e-9;

ReflectionSchedule build_reflection_schedule(const SumEigenspace &basis, const arma::cx_mat &V,
                                             const arma::cx_vec &v,
                                             double epsilon_v = default_mask_epsilon);

// w^H * observation.
std::complex<double> combine(const arma::cx_vec &observation, const arma::cx_vec &w);

// Scalar MMSE estimate of a beam coefficient eta ~ CN(0, lambda) observed as
// r = delta*kappa*eta + z, z ~ CN(0, noise_power/(tau*power)):
//   eta_hat = (power*tau*delta*kappa*lambda) / (power*tau*delta^2*kappa^2*lambda + noise_power) * r.
// With noise_power = 0 this inverts the observation exactly; with lambda = 0
// it returns 0.
std::complex<double> mmse_project(std::complex<double> r, double lambda, double delta, double kappa,
                                  arma::uword tau, double power, double noise_power);

// Estimates for every pilot index: the coefficient matrix eta_hat (dimension
// x tau), per-cluster channel estimates, and their sum. sum_channels[pi] is
// formed by adding the per-cluster estimates in cluster order, so splitting
// and summing are consistent to the last bit.
struct EstimationResult
{
    arma::cx_mat coefficients;
    std::vector<std::vector<arma::cx_vec>> cluster_channels; // [cluster][pilot]
    std::vector<arma::cx_vec> sum_channels;                  // [pilot]
};

EstimationResult reconstruct_and_split(const arma::cx_mat &coefficients, const SumEigenspace &basis,
                                       const arma::cx_mat &V);

// Full small-timescale estimation pass: combine each subframe, matched-filter
// every pilot, MMSE-project onto the probed beam, then reconstruct.
EstimationResult estimate_all(const ReceivedFrame &frame, const FramePlan &plan, const PilotBook &book,
                              const CombinerConfig &combiner, const ReflectionSchedule &schedule,
                              const SumEigenspace &basis, const arma::cx_mat &V);

} // namespace risce

#endif
