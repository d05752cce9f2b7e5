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

#ifndef risce_pilot_protocol_H
#define risce_pilot_protocol_H

#include "risce/channel_model.hpp"
#include "risce/rng.hpp"

#include <vector>

namespace risce
{

// Orthogonal pilot set: column pi of `sequences` is the pilot of index pi,
// entry k equal to sqrt(power) * exp(j*2*pi*k*pi/tau). Every entry has
// magnitude sqrt(power) and the Gram matrix is tau*power*I.
struct PilotBook
{
    arma::uword tau = 1;       // pilot length = slots per subframe
    double power = 1.0;        // per-symbol transmit power P
    arma::cx_mat sequences;    // tau x tau

    void validate() const;
};

PilotBook make_pilot_book(arma::uword tau, double power);

// Who transmits which pilot: assignment[cluster][user] is the pilot index.
// Pilots are unique within a cluster; clusters may reuse the same indices
// (the estimator separates them in the beam domain) or the plan may assign
// globally unique pilots for schemes that need them.
struct FramePlan
{
    arma::uword num_subframes = 1;                     // T
    std::vector<std::vector<arma::uword>> assignment;  // [cluster][user] -> pilot

    arma::uword num_clusters() const { return assignment.size(); }
    arma::uword pilot_of(arma::uword cluster, arma::uword user) const;
    arma::uword max_pilot() const;

    // Pilot i for user i of every cluster (pilots reused across clusters).
    static FramePlan reuse_across_clusters(arma::uword num_subframes,
                                           const std::vector<arma::uword> &users_per_cluster);
    // Globally unique pilots, numbered cluster-major.
    static FramePlan unique_pilots(arma::uword num_subframes,
                                   const std::vector<arma::uword> &users_per_cluster);

    void validate() const;
};

// Received pilot observations: one m x tau matrix per subframe, plus the
// per-entry noise variance they were synthesized with.
struct ReceivedFrame
{
    std::vector<arma::cx_mat> subframes;
    double noise_power = 0.0;
};

// Synthesizes Y_t = sum_users G * Phi_t * h * x_pilot^T + N_t for every
// subframe t. Column t of `reflections` holds the diagonal of Phi_t, so the
// frame layout works for any reflection design. Noise entries are CN(0,
// noise_power), drawn subframe by subframe from `rng`.
ReceivedFrame transmit_frame(const arma::cx_mat &G, const arma::cx_mat &reflections,
                             const UserChannelSet &channels, const FramePlan &plan,
                             const PilotBook &book, double noise_power, Substream &rng);

// Pilot-matched filter: (1/(tau*P)) * Y_t * conj(x_pilot). For orthogonal
// pilots this returns G*Phi_t*(sum of channels on that pilot) plus noise of
// per-entry variance noise_power/(tau*P).
arma::cx_vec matched_filter(const arma::cx_mat &subframe, arma::uword pilot_index,
                            const PilotBook &book);

} // namespace risce

#endif
