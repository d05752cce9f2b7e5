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

#include "risce/pilot_protocol.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace risce
{

void PilotBook::validate() const
{
    if (tau < 1)
        throw std::invalid_argument("PilotBook: tau must be >= 1");
    if (!std::isfinite(power) || power <= 0.0)
        throw std::invalid_argument("PilotBook: power must be finite and > 0");
    if (sequences.n_rows != tau || sequences.n_cols != tau)
        throw std::invalid_argument("PilotBook: sequence matrix must be tau x tau");
}

PilotBook make_pilot_book(arma::uword tau, double power)
{
    if (tau < 1)
        throw std::invalid_argument("make_pilot_book: tau must be >= 1");
    if (!std::isfinite(power) || power <= 0.0)
        throw std::invalid_argument("make_pilot_book: power must be finite and > 0");

    const double amplitude = std::sqrt(power);
    const double step = 2.0 * arma::datum::pi / static_cast<double>(tau);

    PilotBook book;
    book.tau = tau;
    book.power = power;
    book.sequences.set_size(tau, tau);
    for (arma::uword p = 0; p < tau; ++p)
        for (arma::uword k = 0; k < tau; ++k)
        {
            const double phase = step * static_cast<double>(k) * static_cast<double>(p);
            book.sequences(k, p) = std::complex<double>(amplitude * std::cos(phase),
                                                        amplitude * std::sin(phase));
        }
    return book;
}

arma::uword FramePlan::pilot_of(arma::uword cluster, arma::uword user) const
{
    if (cluster >= assignment.size() || user >= assignment[cluster].size())
        throw std::invalid_argument("FramePlan: no such cluster/user pair");
    return assignment[cluster][user];
}

arma::uword FramePlan::max_pilot() const
{
    arma::uword top = 0;
    for (const auto &cluster : assignment)
        for (const arma::uword p : cluster)
            top = std::max(top, p);
    return top;
}

FramePlan FramePlan::reuse_across_clusters(arma::uword num_subframes,
                                           const std::vector<arma::uword> &users_per_cluster)
{
    FramePlan plan;
    plan.num_subframes = num_subframes;
    for (const arma::uword users : users_per_cluster)
    {
        std::vector<arma::uword> pilots(users);
        for (arma::uword i = 0; i < users; ++i)
            pilots[i] = i;
        plan.assignment.push_back(std::move(pilots));
    }
    plan.validate();
    return plan;
}

FramePlan FramePlan::unique_pilots(arma::uword num_subframes,
                                   const std::vector<arma::uword> &users_per_cluster)
{
    FramePlan plan;
    plan.num_subframes = num_subframes;
    arma::uword next = 0;
    for (const arma::uword users : users_per_cluster)
    {
        std::vector<arma::uword> pilots(users);
        for (arma::uword i = 0; i < users; ++i)
            pilots[i] = next++;
        plan.assignment.push_back(std::move(pilots));
    }
    plan.validate();
    return plan;
}

void FramePlan::validate() const
{
    if (num_subframes < 1)
        throw std::invalid_argument("FramePlan: at least one subframe is required");
    if (assignment.empty())
        throw std::invalid_argument("FramePlan: at least one cluster is required");
    for (const auto &cluster : assignment)
    {
        if (cluster.empty())
            throw std::invalid_argument("FramePlan: every cluster must have at least one user");
        std::set<arma::uword> seen(cluster.begin(), cluster.end());
        if (seen.size() != cluster.size())
            throw std::invalid_argument("FramePlan: pilots must be unique within a cluster");
    }
}

ReceivedFrame transmit_frame(const arma::cx_mat &G, const arma::cx_mat &reflections,
                             const UserChannelSet &channels, const FramePlan &plan,
                             const PilotBook &book, double noise_power, Substream &rng)
{
    plan.validate();
    book.validate();
    if (!std::isfinite(noise_power) || noise_power < 0.0)
        throw std::invalid_argument("transmit_frame: noise power must be finite and >= 0");

    const arma::uword m = G.n_rows;
    const arma::uword n = G.n_cols;
    if (reflections.n_rows != n || reflections.n_cols != plan.num_subframes)
        throw std::invalid_argument("transmit_frame: reflection matrix must be N x num_subframes");
    if (plan.max_pilot() >= book.tau)
        throw std::invalid_argument("transmit_frame: plan uses a pilot index outside the book");
    if (channels.size() != plan.num_clusters())
        throw std::invalid_argument("transmit_frame: channel set does not match the plan's clusters");
    for (size_t c = 0; c < channels.size(); ++c)
    {
        if (channels[c].size() != plan.assignment[c].size())
            throw std::invalid_argument("transmit_frame: channel set does not match the plan's users");
        for (const arma::cx_vec &h : channels[c])
            if (h.n_elem != n)
                throw std::invalid_argument("transmit_frame: user channel length does not match G");
    }

    // Users sharing a pilot contribute through the sum of their channels.
    std::vector<arma::cx_vec> pilot_channel(book.tau);
    for (size_t c = 0; c < channels.size(); ++c)
        for (size_t i = 0; i < channels[c].size(); ++i)
        {
            const arma::uword p = plan.assignment[c][i];
            if (pilot_channel[p].n_elem == 0)
                pilot_channel[p] = channels[c][i];
            else
                pilot_channel[p] += channels[c][i];
        }

    ReceivedFrame frame;
    frame.noise_power = noise_power;
    frame.subframes.reserve(plan.num_subframes);

    for (arma::uword t = 0; t < plan.num_subframes; ++t)
    {
        arma::cx_mat y(m, book.tau, arma::fill::zeros);
        for (arma::uword p = 0; p < book.tau; ++p)
        {
            if (pilot_channel[p].n_elem == 0)
                continue;
            const arma::cx_vec faded = G * (reflections.col(t) % pilot_channel[p]);
            y += faded * arma::strans(book.sequences.col(p)); // x^T, no conjugation
        }
        y += rng.complex_normal_matrix(m, book.tau, noise_power);
        frame.subframes.push_back(std::move(y));
    }
    return frame;
}

arma::cx_vec matched_filter(const arma::cx_mat &subframe, arma::uword pilot_index,
                            const PilotBook &book)
{
    book.validate();
    if (pilot_index >= book.tau)
        throw std::invalid_argument("matched_filter: pilot index outside the book");
    if (subframe.n_cols != book.tau)
        throw std::invalid_argument("matched_filter: subframe must have tau columns");

    const double scale = 1.0 / (static_cast<double>(book.tau) * book.power);
    return scale * (subframe * arma::conj(book.sequences.col(pilot_index)));
}

} // namespace risce
