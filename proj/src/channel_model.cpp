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

#include "risce/channel_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace risce
{

namespace
{

constexpr arma::uword quadrature_points = 2048; // per-axis angle grid for PAS integration

// Integral of exp(-|t - mu|/b) over [lo, hi], piecewise around the peak.
double laplace_segment(double lo, double hi, double mu, double b)
{
    if (hi <= lo)
        return 0.0;
    if (hi <= mu)
        return b * (std::exp((hi - mu) / b) - std::exp((lo - mu) / b));
    if (lo >= mu)
        return b * (std::exp((mu - lo) / b) - std::exp((mu - hi) / b));
    return laplace_segment(lo, mu, mu, b) + laplace_segment(mu, hi, mu, b);
}

// PAS mass per grid index along one axis: midpoint quadrature over angle,
// each node binned to the grid point nearest in cosine, then renormalized to
// unit sum so downstream totals are exact.
arma::vec axis_beam_mass(arma::uword count, double mean, double sd)
{
    arma::vec mass(count, arma::fill::zeros);
    const double step = arma::datum::pi / static_cast<double>(quadrature_points);
    const double half_count = 0.5 * static_cast<double>(count);

    for (arma::uword q = 0; q < quadrature_points; ++q)
    {
        const double angle = (static_cast<double>(q) + 0.5) * step;
        const double density = truncated_laplacian_pdf(angle, mean, sd);

        // Grid cosines are 1 - 2n/count, so the nearest grid index of a
        // direction with cosine u is round((1 - u) * count / 2).
        const double position = (1.0 - std::cos(angle)) * half_count;
        arma::uword index = static_cast<arma::uword>(std::llround(position));
        if (index >= count)
            index = count - 1;

        mass(index) += density * step;
    }

    const double total = arma::accu(mass);
    if (!(total > 0.0))
        throw std::runtime_error("beam_power_profile: PAS mass vanished on the quadrature grid");
    return mass / total;
}

// Indices 0..n-1 ordered by descending value; ties go to the lower index.
std::vector<arma::uword> descending_order(const arma::vec &values)
{
    std::vector<arma::uword> order(values.n_elem);
    std::iota(order.begin(), order.end(), arma::uword(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](arma::uword a, arma::uword b) { return values(a) > values(b); });
    return order;
}

void check_claims(const std::vector<BeamClaim> &clusters, arma::uword &n_beams, arma::uword &total_kept)
{
    if (clusters.empty())
        throw std::invalid_argument("resolve_beam_conflicts: no clusters given");

    n_beams = clusters.front().eigenvalues.n_elem;
    total_kept = 0;
    for (const BeamClaim &claim : clusters)
    {
        if (claim.eigenvalues.n_elem != n_beams || n_beams == 0)
            throw std::invalid_argument("resolve_beam_conflicts: eigenvalue sequences must share one nonzero length");
        if (claim.kept.empty())
            throw std::invalid_argument("resolve_beam_conflicts: every cluster must keep at least one beam");

        std::vector<arma::uword> sorted = claim.kept;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("resolve_beam_conflicts: kept set contains duplicate beams");
        if (sorted.back() >= n_beams)
            throw std::invalid_argument("resolve_beam_conflicts: kept beam index out of range");

        total_kept += claim.kept.size();
    }
    if (total_kept > n_beams)
        throw std::runtime_error("resolve_beam_conflicts: infeasible configuration, kept beams exceed beam count (" +
                                 std::to_string(total_kept) + " > " + std::to_string(n_beams) + ")");
}

std::vector<CovarianceModel> assemble_models(const std::vector<ClusterProfile> &profiles,
                                             std::vector<arma::vec> &&eigenvalue_sets,
                                             std::vector<BeamClaim> &&claims, double trace_norm)
{
    BeamAssignment assignment = resolve_beam_conflicts(claims);

    std::vector<CovarianceModel> models(profiles.size());
    for (size_t c = 0; c < profiles.size(); ++c)
    {
        models[c].eigenvalues = std::move(eigenvalue_sets[c]);
        models[c].kept_beams = std::move(assignment.kept[c]);
        models[c].ceded_beams = std::move(assignment.ceded[c]);
        models[c].cluster_id = static_cast<int>(c);
        models[c].trace_norm = trace_norm;
        models[c].validate();
    }
    return models;
}

} // namespace

void ClusterProfile::validate() const
{
    const double pi = arma::datum::pi;
    if (!std::isfinite(mean_azimuth) || mean_azimuth < 0.0 || mean_azimuth >= pi)
        throw std::invalid_argument("ClusterProfile: mean azimuth must lie in [0, pi)");
    if (!std::isfinite(mean_elevation) || mean_elevation < 0.0 || mean_elevation >= pi)
        throw std::invalid_argument("ClusterProfile: mean elevation must lie in [0, pi)");
    if (!std::isfinite(asd_azimuth) || asd_azimuth <= 0.0 || !std::isfinite(asd_elevation) || asd_elevation <= 0.0)
        throw std::invalid_argument("ClusterProfile: angular standard deviations must be finite and > 0");
    if (num_users < 1)
        throw std::invalid_argument("ClusterProfile: clusters serve at least one user");
}

void CovarianceModel::validate() const
{
    const arma::uword n = eigenvalues.n_elem;
    if (n == 0)
        throw std::invalid_argument("CovarianceModel: empty eigenvalue sequence");
    if (!eigenvalues.is_finite() || eigenvalues.min() < 0.0)
        throw std::invalid_argument("CovarianceModel: eigenvalues must be finite and >= 0");
    if (!(trace_norm > 0.0))
        throw std::invalid_argument("CovarianceModel: trace_norm must be > 0");
    if (std::abs(arma::accu(eigenvalues) - trace_norm) > 1e-9 * std::max(1.0, trace_norm))
        throw std::invalid_argument("CovarianceModel: eigenvalues do not sum to trace_norm");

    if (kept_beams.empty())
        throw std::invalid_argument("CovarianceModel: kept set is empty");

    std::vector<char> in_kept(n, 0), in_ceded(n, 0);
    for (size_t j = 0; j < kept_beams.size(); ++j)
    {
        const arma::uword b = kept_beams[j];
        if (b >= n || in_kept[b])
            throw std::invalid_argument("CovarianceModel: kept set has an invalid or duplicate beam");
        in_kept[b] = 1;
        if (j > 0 && eigenvalues(kept_beams[j - 1]) < eigenvalues(b))
            throw std::invalid_argument("CovarianceModel: kept set is not in descending eigenvalue order");
    }
    for (const arma::uword b : ceded_beams)
    {
        if (b >= n || in_kept[b] || in_ceded[b])
            throw std::invalid_argument("CovarianceModel: ceded set overlaps kept set or has duplicates");
        in_ceded[b] = 1;
    }

    // Kept beams dominate the remainder of the spectrum, except for beams
    // lost to other clusters.
    const double kept_min = eigenvalues(kept_beams.back());
    const double slack = 1e-12 * (1.0 + std::abs(kept_min));
    for (arma::uword b = 0; b < n; ++b)
        if (!in_kept[b] && !in_ceded[b] && eigenvalues(b) > kept_min + slack)
            throw std::invalid_argument("CovarianceModel: a non-kept, non-ceded beam outranks the kept set");
}

void RisBsChannelParams::validate() const
{
    if (num_paths < 1)
        throw std::invalid_argument("RisBsChannelParams: at least one path is required");
    if (m_antennas < 1)
        throw std::invalid_argument("RisBsChannelParams: at least one BS antenna is required");
    if (gains.n_elem != num_paths || bs_angles.n_elem != num_paths || ris_azimuths.n_elem != num_paths ||
        ris_elevations.n_elem != num_paths)
        throw std::invalid_argument("RisBsChannelParams: per-path sequences must have length num_paths");
    if (!gains.is_finite() || !bs_angles.is_finite() || !ris_azimuths.is_finite() || !ris_elevations.is_finite())
        throw std::invalid_argument("RisBsChannelParams: parameters must be finite");
}

double truncated_laplacian_pdf(double angle, double mean, double sd)
{
    const double pi = arma::datum::pi;
    if (!std::isfinite(angle) || angle < 0.0 || angle >= pi)
        throw std::invalid_argument("truncated_laplacian_pdf: angle outside the support [0, pi)");
    if (!std::isfinite(mean) || mean < 0.0 || mean >= pi)
        throw std::invalid_argument("truncated_laplacian_pdf: mean outside the support [0, pi)");
    if (!std::isfinite(sd) || sd <= 0.0)
        throw std::invalid_argument("truncated_laplacian_pdf: sd must be finite and > 0");

    const double b = sd / std::sqrt(2.0);
    const double normalizer = laplace_segment(0.0, pi, mean, b);
    return std::exp(-std::abs(angle - mean) / b) / normalizer;
}

arma::vec beam_power_profile(const ClusterProfile &profile, const PlanarArrayGeometry &geometry,
                             double trace_norm)
{
    profile.validate();
    geometry.validate();
    if (!std::isfinite(trace_norm) || trace_norm <= 0.0)
        throw std::invalid_argument("beam_power_profile: trace_norm must be finite and > 0");

    const arma::vec mass_az = axis_beam_mass(geometry.n_h, profile.mean_azimuth, profile.asd_azimuth);
    const arma::vec mass_el = axis_beam_mass(geometry.n_v, profile.mean_elevation, profile.asd_elevation);

    const arma::uword n = geometry.num_elements();
    arma::vec eigenvalues(n);
    for (arma::uword b = 0; b < n; ++b)
        eigenvalues(b) = trace_norm * mass_az(geometry.row_index(b)) * mass_el(geometry.col_index(b));
    return eigenvalues;
}

arma::cx_mat build_covariance(const arma::vec &eigenvalues, const arma::cx_mat &V)
{
    if (V.n_rows != V.n_cols || V.n_cols != eigenvalues.n_elem)
        throw std::invalid_argument("build_covariance: V must be square with one column per eigenvalue");
    if (!eigenvalues.is_finite() || eigenvalues.min() < 0.0)
        throw std::invalid_argument("build_covariance: eigenvalues must be finite and >= 0");

    return V * arma::diagmat(arma::conv_to<arma::cx_vec>::from(eigenvalues)) * V.t();
}

std::vector<arma::uword> truncate_eigenspace(const arma::vec &eigenvalues, TruncationMode mode,
                                             double value)
{
    const arma::uword n = eigenvalues.n_elem;
    if (n == 0)
        throw std::invalid_argument("truncate_eigenspace: empty eigenvalue sequence");
    if (!eigenvalues.is_finite() || eigenvalues.min() < 0.0)
        throw std::invalid_argument("truncate_eigenspace: eigenvalues must be finite and >= 0");

    const std::vector<arma::uword> order = descending_order(eigenvalues);

    arma::uword keep = 0;
    if (mode == TruncationMode::fixed_dimension)
    {
        if (!std::isfinite(value) || value < 1.0 || value > static_cast<double>(n) ||
            std::floor(value) != value)
            throw std::invalid_argument("truncate_eigenspace: dimension must be an integer in [1, N]");
        keep = static_cast<arma::uword>(value);
    }
    else
    {
        if (!std::isfinite(value) || value <= 0.0 || value > 1.0)
            throw std::invalid_argument("truncate_eigenspace: energy fraction must lie in (0, 1]");
        const double target = value * arma::accu(eigenvalues);
        double cumulative = 0.0;
        for (keep = 0; keep < n; ++keep)
        {
            cumulative += eigenvalues(order[keep]);
            if (cumulative >= target)
            {
                ++keep;
                break;
            }
        }
        if (keep == 0)
            keep = 1;
    }

    return std::vector<arma::uword>(order.begin(), order.begin() + keep);
}

BeamAssignment resolve_beam_conflicts(const std::vector<BeamClaim> &clusters)
{
    arma::uword n_beams = 0, total_kept = 0;
    check_claims(clusters, n_beams, total_kept);
    const size_t n_clusters = clusters.size();

    // Award each claimed beam to the claimant with the largest eigenvalue on
    // it; ties break toward the lower cluster id.
    std::vector<int> winner(n_beams, -1);
    for (size_t c = 0; c < n_clusters; ++c)
        for (const arma::uword b : clusters[c].kept)
        {
            if (winner[b] < 0 ||
                clusters[c].eigenvalues(b) > clusters[static_cast<size_t>(winner[b])].eigenvalues(b))
                winner[b] = static_cast<int>(c);
        }

    std::vector<char> taken(n_beams, 0);
    BeamAssignment assignment;
    assignment.kept.resize(n_clusters);
    assignment.ceded.resize(n_clusters);
    std::vector<std::vector<char>> awarded(n_clusters, std::vector<char>(n_beams, 0));

    for (size_t c = 0; c < n_clusters; ++c)
        for (const arma::uword b : clusters[c].kept)
            if (winner[b] == static_cast<int>(c))
            {
                awarded[c][b] = 1;
                taken[b] = 1;
                assignment.kept[c].push_back(b);
            }

    // Losing clusters refill, in cluster-id order, from their strongest beams
    // not held by anyone. Beams passed over because another cluster holds
    // them are recorded as ceded; they are exactly the beams that may outrank
    // the cluster's final kept set.
    for (size_t c = 0; c < n_clusters; ++c)
    {
        size_t deficit = clusters[c].kept.size() - assignment.kept[c].size();
        if (deficit == 0)
            continue;

        const std::vector<arma::uword> order = descending_order(clusters[c].eigenvalues);
        for (const arma::uword b : order)
        {
            if (deficit == 0)
                break;
            if (awarded[c][b])
                continue;
            if (taken[b])
            {
                assignment.ceded[c].push_back(b);
                continue;
            }
            awarded[c][b] = 1;
            taken[b] = 1;
            assignment.kept[c].push_back(b);
            --deficit;
        }
    }

    // Normalize each kept set to descending own-eigenvalue order (lower beam
    // index first among ties).
    for (size_t c = 0; c < n_clusters; ++c)
    {
        std::vector<arma::uword> &kept = assignment.kept[c];
        std::stable_sort(kept.begin(), kept.end(), [&](arma::uword a, arma::uword b) {
            if (clusters[c].eigenvalues(a) != clusters[c].eigenvalues(b))
                return clusters[c].eigenvalues(a) > clusters[c].eigenvalues(b);
            return a < b;
        });
    }
    return assignment;
}

std::vector<CovarianceModel> build_cluster_covariances(const std::vector<ClusterProfile> &profiles,
                                                       const PlanarArrayGeometry &geometry,
                                                       const std::vector<arma::uword> &dims,
                                                       double trace_norm)
{
    if (profiles.empty() || dims.size() != profiles.size())
        throw std::invalid_argument("build_cluster_covariances: one kept-dimension per cluster is required");

    std::vector<arma::vec> eigenvalue_sets;
    std::vector<BeamClaim> claims;
    for (size_t c = 0; c < profiles.size(); ++c)
    {
        arma::vec eig = beam_power_profile(profiles[c], geometry, trace_norm);
        claims.push_back({eig, truncate_eigenspace(eig, TruncationMode::fixed_dimension,
                                                   static_cast<double>(dims[c]))});
        eigenvalue_sets.push_back(std::move(eig));
    }
    return assemble_models(profiles, std::move(eigenvalue_sets), std::move(claims), trace_norm);
}

std::vector<CovarianceModel> build_cluster_covariances(const std::vector<ClusterProfile> &profiles,
                                                       const PlanarArrayGeometry &geometry,
                                                       double energy_fraction, double trace_norm)
{
    if (profiles.empty())
        throw std::invalid_argument("build_cluster_covariances: at least one cluster is required");

    std::vector<arma::vec> eigenvalue_sets;
    std::vector<BeamClaim> claims;
    for (size_t c = 0; c < profiles.size(); ++c)
    {
        arma::vec eig = beam_power_profile(profiles[c], geometry, trace_norm);
        claims.push_back({eig, truncate_eigenspace(eig, TruncationMode::energy_fraction, energy_fraction)});
        eigenvalue_sets.push_back(std::move(eig));
    }
    return assemble_models(profiles, std::move(eigenvalue_sets), std::move(claims), trace_norm);
}

arma::cx_vec sample_user_channel(const CovarianceModel &cov, const arma::cx_mat &V,
                                 bool full_spectrum, Substream &rng)
{
    const arma::uword n = cov.eigenvalues.n_elem;
    if (V.n_rows != n || V.n_cols != n)
        throw std::invalid_argument("sample_user_channel: beam matrix does not match the eigenvalue length");

    if (full_spectrum)
    {
        arma::cx_vec z = rng.complex_normal_vector(n, 1.0);
        for (arma::uword b = 0; b < n; ++b)
            z(b) *= std::sqrt(cov.eigenvalues(b));
        return V * z;
    }

    arma::cx_vec h(n, arma::fill::zeros);
    for (const arma::uword b : cov.kept_beams)
        h += V.col(b) * (std::sqrt(cov.eigenvalues(b)) * rng.complex_normal(1.0));
    return h;
}

RisBsChannelParams draw_ris_bs_params(arma::uword num_paths, arma::uword m_antennas,
                                      double los_gain_var, double nlos_gain_var, Substream &rng)
{
    if (num_paths < 1)
        throw std::invalid_argument("draw_ris_bs_params: at least one path is required");
    if (!std::isfinite(los_gain_var) || los_gain_var < 0.0 || !std::isfinite(nlos_gain_var) ||
        nlos_gain_var < 0.0)
        throw std::invalid_argument("draw_ris_bs_params: gain variances must be finite and >= 0");

    RisBsChannelParams params;
    params.num_paths = num_paths;
    params.m_antennas = m_antennas;
    params.gains.set_size(num_paths);
    params.bs_angles.set_size(num_paths);
    params.ris_azimuths.set_size(num_paths);
    params.ris_elevations.set_size(num_paths);

    for (arma::uword l = 0; l < num_paths; ++l)
        params.gains(l) = rng.complex_normal(l == 0 ? los_gain_var : nlos_gain_var);
    for (arma::uword l = 0; l < num_paths; ++l)
        params.bs_angles(l) = rng.uniform(0.0, arma::datum::pi);
    for (arma::uword l = 0; l < num_paths; ++l)
        params.ris_azimuths(l) = rng.uniform(0.0, arma::datum::pi);
    for (arma::uword l = 0; l < num_paths; ++l)
        params.ris_elevations(l) = rng.uniform(0.0, arma::datum::pi);

    params.validate();
    return params;
}

arma::cx_mat sample_ris_bs_channel(const RisBsChannelParams &params, const PlanarArrayGeometry &geometry)
{
    params.validate();
    geometry.validate();

    const arma::uword m = params.m_antennas;
    const arma::uword n = geometry.num_elements();
    const double scale = std::sqrt(static_cast<double>(m) * static_cast<double>(n) /
                                   static_cast<double>(params.num_paths));

    arma::cx_mat g(m, n, arma::fill::zeros);
    for (arma::uword l = 0; l < params.num_paths; ++l)
    {
        const arma::cx_vec e_bs = ula_response(m, params.bs_angles(l));
        const arma::cx_vec e_ris = upa_response(geometry, params.ris_azimuths(l), params.ris_elevations(l));
        g += params.gains(l) * (e_bs * e_ris.t());
    }
    return scale * g;
}

arma::cx_mat sample_covariance(const arma::cx_mat &observations)
{
    if (observations.n_cols == 0 || observations.n_rows == 0)
        throw std::invalid_argument("sample_covariance: at least one observation is required");

    return (observations * observations.t()) / static_cast<double>(observations.n_cols);
}

} // namespace risce
