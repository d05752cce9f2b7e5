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

#include "risce/ep_estimator.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace risce
{

void SumEigenspace::validate() const
{
    const size_t dim = beams.size();
    if (dim == 0)
        throw std::invalid_argument("SumEigenspace: empty basis");
    if (eigenvalues.n_elem != dim || owner.size() != dim)
        throw std::invalid_argument("SumEigenspace: beams, eigenvalues and owners must have equal length");
    if (!eigenvalues.is_finite() || eigenvalues.min() <= 0.0)
        throw std::invalid_argument("SumEigenspace: eigenvalues must be finite and > 0");

    std::vector<char> seen;
    for (const arma::uword b : beams)
    {
        if (b >= seen.size())
            seen.resize(b + 1, 0);
        if (seen[b])
            throw std::invalid_argument("SumEigenspace: duplicate beam index");
        seen[b] = 1;
    }

    if (owner.front() != 0)
        throw std::invalid_argument("SumEigenspace: owners must start at cluster 0");
    for (size_t t = 1; t < dim; ++t)
    {
        const int step = owner[t] - owner[t - 1];
        if (step != 0 && step != 1)
            throw std::invalid_argument("SumEigenspace: owners must form contiguous cluster-major blocks");
    }
}

SumEigenspace build_sum_eigenspace(const std::vector<CovarianceModel> &models)
{
    if (models.empty())
        throw std::invalid_argument("build_sum_eigenspace: at least one cluster is required");

    SumEigenspace basis;
    std::vector<double> eig;
    for (size_t c = 0; c < models.size(); ++c)
    {
        models[c].validate();
        for (const arma::uword b : models[c].kept_beams)
        {
            basis.beams.push_back(b);
            basis.owner.push_back(static_cast<int>(c));
            eig.push_back(models[c].eigenvalues(b));
        }
    }
    basis.eigenvalues = arma::vec(eig);

    try
    {
        basis.validate();
    }
    catch (const std::invalid_argument &err)
    {
        throw std::invalid_argument(std::string("build_sum_eigenspace: kept sets are not disjoint or invalid: ") +
                                    err.what());
    }
    return basis;
}

CombinerConfig compute_combiner(const arma::cx_mat &G)
{
    if (G.n_rows == 0 || G.n_cols == 0 || !G.is_finite())
        throw std::invalid_argument("compute_combiner: G must be a finite, non-empty matrix");

    arma::cx_mat u, vmat;
    arma::vec s;
    if (!arma::svd_econ(u, s, vmat, G, "both"))
        throw std::runtime_error("compute_combiner: SVD failed");
    if (!(s(0) > 0.0))
        throw std::runtime_error("compute_combiner: degenerate input, G has no nonzero singular value");

    CombinerConfig combiner;
    combiner.w = u.col(0);
    combiner.delta = s(0);
    combiner.v = vmat.col(0);
    return combiner;
}

arma::cx_vec ReflectionSchedule::coefficients(arma::uword t) const
{
    if (t >= num_subframes())
        throw std::invalid_argument("ReflectionSchedule: subframe index out of range");

    const arma::uword n = amplitudes.n_rows;
    arma::cx_vec c(n);
    for (arma::uword i = 0; i < n; ++i)
        c(i) = std::complex<double>(amplitudes(i, t) * std::cos(phases(i, t)),
                                    amplitudes(i, t) * std::sin(phases(i, t)));
    return c;
}

arma::cx_mat ReflectionSchedule::coefficient_matrix() const
{
    arma::cx_mat m(amplitudes.n_rows, num_subframes());
    for (arma::uword t = 0; t < num_subframes(); ++t)
        m.col(t) = coefficients(t);
    return m;
}

void ReflectionSchedule::validate() const
{
    const arma::uword t = kappas.n_elem;
    if (t == 0 || amplitudes.n_cols != t || phases.n_cols != t || amplitudes.n_rows != phases.n_rows)
        throw std::invalid_argument("ReflectionSchedule: inconsistent dimensions");
    if (!amplitudes.is_finite() || !phases.is_finite() || !kappas.is_finite())
        throw std::invalid_argument("ReflectionSchedule: entries must be finite");
    if (amplitudes.min() < 0.0 || amplitudes.max() > 1.0 + 1e-12)
        throw std::invalid_argument("ReflectionSchedule: amplitudes must lie in [0, 1]");
    if (kappas.min() <= 0.0)
        throw std::invalid_argument("ReflectionSchedule: kappas must be > 0");
}

ReflectionSchedule build_reflection_schedule(const SumEigenspace &basis, const arma::cx_mat &V,
                                             const arma::cx_vec &v, double epsilon_v)
{
    basis.validate();
    if (V.n_rows != v.n_elem)
        throw std::invalid_argument("build_reflection_schedule: v must match the beam matrix rows");
    if (!v.is_finite())
        throw std::invalid_argument("build_reflection_schedule: v must be finite");
    if (!(epsilon_v >= 0.0) || !std::isfinite(epsilon_v))
        throw std::invalid_argument("build_reflection_schedule: epsilon_v must be finite and >= 0");
    for (const arma::uword b : basis.beams)
        if (b >= V.n_cols)
            throw std::invalid_argument("build_reflection_schedule: basis beam outside the beam matrix");

    const arma::uword n = v.n_elem;
    const arma::uword dim = basis.dimension();

    const arma::vec v_abs = arma::abs(v);
    const double v_max = v_abs.max();
    if (!(v_max > 0.0))
        throw std::runtime_error("build_reflection_schedule: degenerate combiner direction, v = 0");
    const double threshold = epsilon_v * v_max;

    ReflectionSchedule schedule;
    schedule.amplitudes.zeros(n, dim);
    schedule.phases.zeros(n, dim);
    schedule.kappas.set_size(dim);

    arma::cx_vec ratio(n);
    arma::vec ratio_abs(n);

    for (arma::uword t = 0; t < dim; ++t)
    {
        const arma::cx_vec d = V.col(basis.beams[t]);

        double max_ratio = 0.0;
        for (arma::uword i = 0; i < n; ++i)
        {
            if (v_abs(i) <= threshold)
            {
                ratio(i) = 0.0;
                ratio_abs(i) = 0.0;
                continue;
            }
            ratio(i) = d(i) / v(i);
            ratio_abs(i) = std::abs(ratio(i));
            max_ratio = std::max(max_ratio, ratio_abs(i));
        }
        if (!(max_ratio > 0.0))
            throw std::runtime_error("build_reflection_schedule: degenerate schedule, basis beam " +
                                     std::to_string(basis.beams[t]) +
                                     " has no support on unmasked elements");

        schedule.kappas(t) = 1.0 / max_ratio;
        for (arma::uword i = 0; i < n; ++i)
        {
            if (ratio_abs(i) == 0.0)
                continue; // masked element or vanishing beam entry: coefficient 0
            schedule.amplitudes(i, t) = ratio_abs(i) / max_ratio; // exactly 1 at the maximizer
            schedule.phases(i, t) = -std::arg(ratio(i));
        }
    }
    return schedule;
}

std::complex<double> combine(const arma::cx_vec &observation, const arma::cx_vec &w)
{
    if (observation.n_elem != w.n_elem)
        throw std::invalid_argument("combine: dimension mismatch");
    return arma::cdot(w, observation);
}

std::complex<double> mmse_project(std::complex<double> r, double lambda, double delta, double kappa,
                                  arma::uword tau, double power, double noise_power)
{
    if (!std::isfinite(lambda) || lambda < 0.0)
        throw std::invalid_argument("mmse_project: lambda must be finite and >= 0");
    if (!std::isfinite(delta) || delta <= 0.0 || !std::isfinite(kappa) || kappa <= 0.0)
        throw std::invalid_argument("mmse_project: delta and kappa must be finite and > 0");
    if (tau < 1 || !std::isfinite(power) || power <= 0.0)
        throw std::invalid_argument("mmse_project: tau must be >= 1 and power > 0");
    if (!std::isfinite(noise_power) || noise_power < 0.0)
        throw std::invalid_argument("mmse_project: noise power must be finite and >= 0");

    const double pt = power * static_cast<double>(tau);
    const double denominator = pt * delta * delta * kappa * kappa * lambda + noise_power;
    if (denominator <= 0.0)
        return {0.0, 0.0}; // lambda = 0 and noiseless: the prior pins eta to 0
    const double gain = pt * delta * kappa * lambda / denominator;
    return gain * r;
}

EstimationResult reconstruct_and_split(const arma::cx_mat &coefficients, const SumEigenspace &basis,
                                       const arma::cx_mat &V)
{
    basis.validate();
    if (coefficients.n_rows != basis.dimension())
        throw std::invalid_argument("reconstruct_and_split: coefficient rows must match the basis dimension");
    if (!coefficients.is_finite())
        throw std::invalid_argument("reconstruct_and_split: coefficients must be finite");
    for (const arma::uword b : basis.beams)
        if (b >= V.n_cols)
            throw std::invalid_argument("reconstruct_and_split: basis beam outside the beam matrix");

    const arma::uword n = V.n_rows;
    const arma::uword n_pilots = coefficients.n_cols;
    const arma::uword n_clusters = basis.num_clusters();

    EstimationResult result;
    result.coefficients = coefficients;
    result.cluster_channels.assign(n_clusters, std::vector<arma::cx_vec>(n_pilots));
    result.sum_channels.assign(n_pilots, arma::cx_vec());

    for (arma::uword p = 0; p < n_pilots; ++p)
    {
        for (arma::uword c = 0; c < n_clusters; ++c)
            result.cluster_channels[c][p] = arma::cx_vec(n, arma::fill::zeros);

        for (arma::uword t = 0; t < basis.dimension(); ++t)
            result.cluster_channels[static_cast<arma::uword>(basis.owner[t])][p] +=
                coefficients(t, p) * V.col(basis.beams[t]);

        // The sum estimate is defined as the ordered sum of the per-cluster
        // estimates, so the two views are identical down to the last bit.
        arma::cx_vec sum(n, arma::fill::zeros);
        for (arma::uword c = 0; c < n_clusters; ++c)
            sum += result.cluster_channels[c][p];
        result.sum_channels[p] = std::move(sum);
    }
    return result;
}

EstimationResult estimate_all(const ReceivedFrame &frame, const FramePlan &plan, const PilotBook &book,
                              const CombinerConfig &combiner, const ReflectionSchedule &schedule,
                              const SumEigenspace &basis, const arma::cx_mat &V)
{
    basis.validate();
    schedule.validate();
    book.validate();
    plan.validate();

    const arma::uword dim = basis.dimension();
    if (frame.subframes.size() != dim)
        throw std::invalid_argument("estimate_all: one subframe per basis beam is required");
    if (schedule.num_subframes() != dim)
        throw std::invalid_argument("estimate_all: schedule length must match the basis dimension");
    if (plan.num_subframes != dim)
        throw std::invalid_argument("estimate_all: frame plan length must match the basis dimension");
    if (combiner.v.n_elem != V.n_rows)
        throw std::invalid_argument("estimate_all: combiner direction must match the beam matrix");
    if (!(combiner.delta > 0.0))
        throw std::invalid_argument("estimate_all: combiner gain must be > 0");

    const arma::uword tau = book.tau;
    const double scale = 1.0 / (static_cast<double>(tau) * book.power);

    arma::cx_mat coefficients(dim, tau);
    for (arma::uword t = 0; t < dim; ++t)
    {
        const arma::cx_mat &y = frame.subframes[t];
        if (y.n_rows != combiner.w.n_elem || y.n_cols != tau)
            throw std::invalid_argument("estimate_all: subframe dimensions do not match combiner/book");

        // r_{t,pi} = (1/(tau*P)) * w^H * Y_t * conj(x_pi), all pilots at once.
        const arma::cx_rowvec combined = combiner.w.t() * y;
        const arma::cx_rowvec r = scale * (combined * arma::conj(book.sequences));

        for (arma::uword p = 0; p < tau; ++p)
            coefficients(t, p) = mmse_project(r(p), basis.eigenvalues(t), combiner.delta,
                                              schedule.kappas(t), tau, book.power, frame.noise_power);
    }

    return reconstruct_and_split(coefficients, basis, V);
}

} // namespace risce
