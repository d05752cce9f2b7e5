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

#ifndef risce_baselines_H
#define risce_baselines_H

#include "risce/pilot_protocol.hpp"

#include <vector>

namespace risce
{

// Reflection design for the least-squares baseline: N subframes whose
// pattern vectors (columns) stack into an invertible N x N matrix. The
// bundled pilot book assigns every user a unique pilot.
struct LsDesign
{
    arma::cx_mat patterns; // N x N, column t = diag(Phi_t), unit-modulus entries
    PilotBook book;

    void validate() const;
};

// Fourier pattern matrix: entry (n, t) = exp(j*2*pi*n*t/N). Rows stack into
// sqrt(N) times a unitary matrix, so the design is maximally well-conditioned.
LsDesign make_ls_design(arma::uword n_elements, const PilotBook &book);

// Precomputed least-squares solver for a fixed (G, design) pair: stacks the
// per-subframe effective matrices G*Phi_t into A ((M*N) x N), checks
// conditioning, and caches the pseudoinverse so per-user solves are a single
// matrix-vector product.
class LsSolver
{
public:
    static LsSolver build(const arma::cx_mat &G, const LsDesign &design);

    // Matched-filters every subframe for the pilot, stacks, and solves.
    arma::cx_vec estimate(const ReceivedFrame &frame, arma::uword pilot_index) const;

    double condition_number() const { return condition_; }

private:
    arma::cx_mat pseudoinverse_; // N x (M*N)
    PilotBook book_;
    double condition_ = 0.0;
};

// One-shot convenience wrapper around LsSolver.
arma::cx_vec ls_estimate(const ReceivedFrame &frame, arma::uword pilot_index, const arma::cx_mat &G,
                         const LsDesign &design);

// Training-overhead operating point: panel size n, BS antennas m, users k,
// clusters c, summed eigenspace dimension e, large-to-small timescale ratio
// alpha, and the per-element covariance observation count beta.
struct OverheadParams
{
    arma::uword m_antennas = 16;
    arma::uword n_elements = 256;
    arma::uword k_users = 8;
    arma::uword c_clusters = 4;
    arma::uword e_dimension = 32;
    double alpha = 16.0;
    arma::uword beta = 4;

    void validate() const;
};

// Average pilot overhead (symbols per coherence frame) of the four schemes.
// Ceilings are evaluated in integer arithmetic; only the division by alpha
// leaves the integers.
struct OverheadTable
{
    double ls = 0.0;            // N*K
    double three_phase = 0.0;   // N + max(K-1, ceil((K-1)*N/M))
    double two_timescale = 0.0; // 2*(N-1)/alpha + K*ceil(N/M)
    double proposed = 0.0;      // (2*(N-1) + beta*K*ceil(N/M))/alpha + K*E/C
};

OverheadTable overhead_table(const OverheadParams &params);

} // namespace risce

#endif
