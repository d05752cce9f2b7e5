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

#include "risce/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace risce
{

namespace
{

constexpr double max_condition = 1e6;

arma::uword ceil_div(arma::uword a, arma::uword b)
{
    return (a + b - 1) / b;
}

} // namespace

void LsDesign::validate() const
{
    book.validate();
    if (patterns.n_rows == 0 || patterns.n_rows != patterns.n_cols)
        throw std::invalid_argument("LsDesign: pattern matrix must be square and non-empty");
    if (!patterns.is_finite())
        throw std::invalid_argument("LsDesign: patterns must be finite");
    for (const std::complex<double> &c : patterns)
        if (std::abs(std::abs(c) - 1.0) > 1e-9)
            throw std::invalid_argument("LsDesign: pattern entries must have unit modulus");
}

LsDesign make_ls_design(arma::uword n_elements, const PilotBook &book)
{
    if (n_elements < 1)
        throw std::invalid_argument("make_ls_design: at least one element is required");
    book.validate();

    LsDesign design;
    design.book = book;
    design.patterns.set_size(n_elements, n_elements);
    const double step = 2.0 * arma::datum::pi / static_cast<double>(n_elements);
    for (arma::uword t = 0; t < n_elements; ++t)
        for (arma::uword n = 0; n < n_elements; ++n)
        {
            const double phase = step * static_cast<double>(n) * static_cast<double>(t);
            design.patterns(n, t) = std::complex<double>(std::cos(phase), std::sin(phase));
        }
    return design;
}

LsSolver LsSolver::build(const arma::cx_mat &G, const LsDesign &design)
{
    design.validate();
    const arma::uword n = design.patterns.n_rows;
    if (G.n_cols != n || G.n_rows == 0 || !G.is_finite())
        throw std::invalid_argument("LsSolver: G must be finite with one column per element");

    const arma::uword m = G.n_rows;
    const arma::uword t_count = design.patterns.n_cols;

    arma::cx_mat stacked(m * t_count, n);
    for (arma::uword t = 0; t < t_count; ++t)
    {
        arma::cx_mat block = G;
        for (arma::uword col = 0; col < n; ++col)
            block.col(col) *= design.patterns(col, t);
        stacked.rows(t * m, (t + 1) * m - 1) = block;
    }

    arma::cx_mat u, v;
    arma::vec s;
    if (!arma::svd_econ(u, s, v, stacked, "both"))
        throw std::runtime_error("LsSolver: SVD of the stacked design failed");

    const double s_max = s(0);
    const double s_min = s(s.n_elem - 1);
    if (!(s_min > 0.0) || s_max / s_min >= max_condition)
        throw std::runtime_error("LsSolver: degenerate design, stacked system is ill-conditioned");

    LsSolver solver;
    solver.book_ = design.book;
    solver.condition_ = s_max / s_min;
    solver.pseudoinverse_ = v * arma::diagmat(arma::conv_to<arma::cx_vec>::from(1.0 / s)) * u.t();
    return solver;
}

arma::cx_vec LsSolver::estimate(const ReceivedFrame &frame, arma::uword pilot_index) const
{
    const arma::uword n = pseudoinverse_.n_rows;
    if (frame.subframes.size() != n)
        throw std::invalid_argument("LsSolver: one subframe per reflection pattern is required");

    const arma::uword m = pseudoinverse_.n_cols / n;
    arma::cx_vec stacked(m * n);
    for (arma::uword t = 0; t < n; ++t)
    {
        if (frame.subframes[t].n_rows != m)
            throw std::invalid_argument("LsSolver: subframe rows do not match the design");
        stacked.subvec(t * m, (t + 1) * m - 1) = matched_filter(frame.subframes[t], pilot_index, book_);
    }
    return pseudoinverse_ * stacked;
}

arma::cx_vec ls_estimate(const ReceivedFrame &frame, arma::uword pilot_index, const arma::cx_mat &G,
                         const LsDesign &design)
{
    return LsSolver::build(G, design).estimate(frame, pilot_index);
}

void OverheadParams::validate() const
{
    if (m_antennas < 1 || n_elements < 1 || k_users < 1 || c_clusters < 1 || e_dimension < 1)
        throw std::invalid_argument("OverheadParams: all counts must be >= 1");
    if (e_dimension > n_elements)
        throw std::invalid_argument("OverheadParams: eigenspace dimension cannot exceed the element count");
    if (!std::isfinite(alpha) || alpha < 1.0)
        throw std::invalid_argument("OverheadParams: alpha must be finite and >= 1");
    if (beta < 1)
        throw std::invalid_argument("OverheadParams: beta must be >= 1");
}

OverheadTable overhead_table(const OverheadParams &params)
{
    params.validate();

    const arma::uword m = params.m_antennas;
    const arma::uword n = params.n_elements;
    const arma::uword k = params.k_users;

    const arma::uword per_element_rounds = ceil_div(n, m);           // ceil(N/M)
    const arma::uword large_timescale = 2 * (n - 1);                 // RIS-BS estimation term

    OverheadTable table;
    table.ls = static_cast<double>(n * k);

    const arma::uword phase23 = std::max(k - 1, ceil_div((k - 1) * n, m));
    table.three_phase = static_cast<double>(n + phase23);

    table.two_timescale = static_cast<double>(large_timescale) / params.alpha +
                          static_cast<double>(k * per_element_rounds);

    table.proposed = static_cast<double>(large_timescale + params.beta * k * per_element_rounds) /
                         params.alpha +
                     static_cast<double>(k * params.e_dimension) / static_cast<double>(params.c_clusters);
    return table;
}

} // namespace risce
