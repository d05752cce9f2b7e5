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

#include "risce/harness.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace risce
{

namespace
{

using nlohmann::json;

constexpr std::uint64_t purpose_block = 0; // RIS-BS redraw substreams
constexpr std::uint64_t purpose_trial = 1; // per-trial channel + noise substreams

std::string format_double(double value)
{
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

// Runs fn(0..count-1) under the chosen policy. Each index writes only its
// own output slots, so scheduling never changes results; the first exception
// thrown by any index is rethrown after the loop.
void for_each_index(arma::uword count, Execution execution, int threads,
                    const std::function<void(arma::uword)> &fn)
{
    if (execution == Execution::serial)
    {
        for (arma::uword i = 0; i < count; ++i)
            fn(i);
        return;
    }

#ifdef _OPENMP
    std::exception_ptr first_error = nullptr;
    const long long n = static_cast<long long>(count);
    if (threads > 0)
    {
#pragma omp parallel for schedule(static) num_threads(threads)
        for (long long i = 0; i < n; ++i)
        {
            try
            {
                fn(static_cast<arma::uword>(i));
            }
            catch (...)
            {
#pragma omp critical
                if (!first_error)
                    first_error = std::current_exception();
            }
        }
    }
    else
    {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < n; ++i)
        {
            try
            {
                fn(static_cast<arma::uword>(i));
            }
            catch (...)
            {
#pragma omp critical
                if (!first_error)
                    first_error = std::current_exception();
            }
        }
    }
    if (first_error)
        std::rethrow_exception(first_error);
#else
    (void)threads;
    for (arma::uword i = 0; i < count; ++i)
        fn(i);
#endif
}

// Everything derived from the config once, shared read-only by all trials.
struct ExperimentModel
{
    PlanarArrayGeometry geometry;
    arma::uword n = 0;
    arma::uword m = 0;
    arma::cx_mat V;
    std::vector<CovarianceModel> covariances;
    SumEigenspace basis; // prior eigenvalues already scaled by rho_h
    std::vector<arma::uword> users_per_cluster;
    arma::uword k_users = 0;
    FramePlan ep_plan;
    PilotBook ep_book;
    FramePlan ls_plan;
    PilotBook ls_book;
    std::optional<LsDesign> ls_design;
    double rho_g = 1.0;
    double rho_h = 1.0;
    double sqrt_rho_h = 1.0;
    arma::uword block_size = 1;
    OverheadTable overhead;
};

// Per large-timescale block: the drawn RIS-BS channel and the artifacts the
// estimators derive from it.
struct BlockArtifacts
{
    arma::cx_mat g;
    CombinerConfig combiner;
    ReflectionSchedule schedule;
    arma::cx_mat schedule_coeffs;
    std::optional<LsSolver> solver;
};

bool scheme_enabled(const ExperimentConfig &config, Scheme scheme)
{
    for (const Scheme s : config.schemes)
        if (s == scheme)
            return true;
    return false;
}

std::vector<arma::uword> fixed_dimension_split(arma::uword total, arma::uword clusters)
{
    std::vector<arma::uword> dims(clusters, total / clusters);
    for (arma::uword c = 0; c < total % clusters; ++c)
        ++dims[c];
    return dims;
}

ExperimentModel build_model(const ExperimentConfig &config)
{
    config.validate();

    ExperimentModel model;
    model.geometry = config.geometry;
    model.n = config.geometry.num_elements();
    model.m = config.bs_antennas;
    model.V = beam_matrix(config.geometry);

    const double trace_norm = static_cast<double>(model.n);
    if (config.eigenspace.mode == TruncationMode::fixed_dimension)
        model.covariances = build_cluster_covariances(
            config.clusters, config.geometry,
            fixed_dimension_split(config.eigenspace.total_dimension, config.clusters.size()), trace_norm);
    else
        model.covariances =
            build_cluster_covariances(config.clusters, config.geometry, config.eigenspace.energy_eta, trace_norm);

    model.rho_g = config.pathloss.gain_ris_bs();
    model.rho_h = config.pathloss.gain_ris_user();
    model.sqrt_rho_h = std::sqrt(model.rho_h);

    model.basis = build_sum_eigenspace(model.covariances);
    model.basis.eigenvalues *= model.rho_h; // prior variance of the physically scaled channels

    arma::uword tau_ep = 0;
    for (const ClusterProfile &cluster : config.clusters)
    {
        model.users_per_cluster.push_back(cluster.num_users);
        model.k_users += cluster.num_users;
        tau_ep = std::max(tau_ep, cluster.num_users);
    }

    model.ep_plan = FramePlan::reuse_across_clusters(model.basis.dimension(), model.users_per_cluster);
    model.ep_book = make_pilot_book(tau_ep, config.transmit_power);

    if (scheme_enabled(config, Scheme::ls))
    {
        model.ls_book = make_pilot_book(model.k_users, config.transmit_power);
        model.ls_plan = FramePlan::unique_pilots(model.n, model.users_per_cluster);
        model.ls_design = make_ls_design(model.n, model.ls_book);
    }

    model.block_size = std::max<arma::uword>(1, static_cast<arma::uword>(std::llround(config.timescale_ratio)));

    OverheadParams overhead;
    overhead.m_antennas = model.m;
    overhead.n_elements = model.n;
    overhead.k_users = model.k_users;
    overhead.c_clusters = config.clusters.size();
    overhead.e_dimension = model.basis.dimension();
    overhead.alpha = config.timescale_ratio;
    overhead.beta = config.covariance_observations;
    model.overhead = overhead_table(overhead);

    return model;
}

BlockArtifacts build_block(const ExperimentConfig &config, const ExperimentModel &model, Scheme scheme,
                           std::uint64_t snr_index, arma::uword block_index)
{
    Substream rng(derive_stream_key(config.seed, {static_cast<std::uint64_t>(scheme), snr_index,
                                                  purpose_block, block_index}));

    const RisBsChannelParams params =
        draw_ris_bs_params(config.ris_bs_paths.count, model.m, config.ris_bs_paths.los_gain_var,
                           config.ris_bs_paths.nlos_gain_var, rng);

    BlockArtifacts block;
    block.g = std::sqrt(model.rho_g) * sample_ris_bs_channel(params, model.geometry);

    if (scheme == Scheme::ep)
    {
        block.combiner = compute_combiner(block.g);
        block.schedule = build_reflection_schedule(model.basis, model.V, block.combiner.v, config.mask_epsilon);
        block.schedule_coeffs = block.schedule.coefficient_matrix();
    }
    else
    {
        block.solver = LsSolver::build(block.g, *model.ls_design);
    }
    return block;
}

// Per-user error statistics for one trial.
struct TrialMetrics
{
    double cascaded = 0.0;
    double direct = 0.0;
    double worst_direct = 0.0;
    arma::uword excluded = 0;
};

TrialMetrics trial_metrics(const UserChannelSet &estimates, const UserChannelSet &truths,
                           const arma::cx_mat &g)
{
    TrialMetrics metrics;
    arma::uword excluded_cascaded = 0;
    metrics.cascaded = cascaded_nmse(estimates, truths, g, &excluded_cascaded);

    double acc = 0.0;
    arma::uword used = 0;
    for (size_t c = 0; c < truths.size(); ++c)
        for (size_t i = 0; i < truths[c].size(); ++i)
        {
            const double den = std::pow(arma::norm(truths[c][i]), 2);
            if (den == 0.0)
            {
                ++metrics.excluded;
                continue;
            }
            const double ratio = std::pow(arma::norm(truths[c][i] - estimates[c][i]), 2) / den;
            acc += ratio;
            metrics.worst_direct = std::max(metrics.worst_direct, ratio);
            ++used;
        }
    metrics.direct = used > 0 ? acc / used : 0.0;
    return metrics;
}

TrialMetrics run_trial(const ExperimentConfig &config, const ExperimentModel &model,
                       const BlockArtifacts &block, Scheme scheme, std::uint64_t snr_index,
                       arma::uword trial, double noise_power)
{
    Substream rng(derive_stream_key(config.seed, {static_cast<std::uint64_t>(scheme), snr_index,
                                                  purpose_trial, trial}));

    UserChannelSet truths(model.users_per_cluster.size());
    for (size_t c = 0; c < model.users_per_cluster.size(); ++c)
    {
        truths[c].resize(model.users_per_cluster[c]);
        for (arma::uword i = 0; i < model.users_per_cluster[c]; ++i)
            truths[c][i] = model.sqrt_rho_h * sample_user_channel(model.covariances[c], model.V,
                                                                  config.full_spectrum_channels, rng);
    }

    UserChannelSet estimates(truths.size());
    if (scheme == Scheme::ep)
    {
        const ReceivedFrame frame = transmit_frame(block.g, block.schedule_coeffs, truths, model.ep_plan,
                                                   model.ep_book, noise_power, rng);
        const EstimationResult result = estimate_all(frame, model.ep_plan, model.ep_book, block.combiner,
                                                     block.schedule, model.basis, model.V);
        for (size_t c = 0; c < truths.size(); ++c)
        {
            estimates[c].resize(truths[c].size());
            for (arma::uword i = 0; i < truths[c].size(); ++i)
                estimates[c][i] = result.cluster_channels[c][model.ep_plan.pilot_of(c, i)];
        }
    }
    else
    {
        const ReceivedFrame frame = transmit_frame(block.g, model.ls_design->patterns, truths, model.ls_plan,
                                                   model.ls_book, noise_power, rng);
        for (size_t c = 0; c < truths.size(); ++c)
        {
            estimates[c].resize(truths[c].size());
            for (arma::uword i = 0; i < truths[c].size(); ++i)
                estimates[c][i] = block.solver->estimate(frame, model.ls_plan.pilot_of(c, i));
        }
    }

    return trial_metrics(estimates, truths, block.g);
}

json record_to_json(const MetricRecord &record)
{
    return json{{"scheme", record.scheme},
                {"snr_db", record.snr_db},
                {"nmse_cascaded", record.nmse_cascaded},
                {"nmse_direct", record.nmse_direct},
                {"stderr", record.stderr_cascaded},
                {"trials", record.trials},
                {"pilot_overhead", record.pilot_overhead}};
}

const json &require_key(const json &j, const char *key)
{
    if (!j.contains(key))
        throw std::runtime_error(std::string("config: missing key '") + key + "'");
    return j.at(key);
}

void reject_unknown_keys(const json &j, std::initializer_list<const char *> known, const char *scope)
{
    for (const auto &item : j.items())
    {
        bool found = false;
        for (const char *key : known)
            if (item.key() == key)
            {
                found = true;
                break;
            }
        if (!found)
            throw std::runtime_error(std::string("config: unknown key '") + item.key() + "' in " + scope);
    }
}

} // namespace

std::string to_string(Scheme scheme)
{
    return scheme == Scheme::ep ? "ep" : "ls";
}

Scheme scheme_from_string(const std::string &name)
{
    if (name == "ep")
        return Scheme::ep;
    if (name == "ls")
        return Scheme::ls;
    throw std::runtime_error("config: unknown scheme '" + name + "' (expected \"ep\" or \"ls\")");
}

double pathloss_gain(double rho0_db, double distance, double reference_distance, double exponent)
{
    if (!std::isfinite(rho0_db) || !std::isfinite(exponent))
        throw std::invalid_argument("pathloss_gain: parameters must be finite");
    if (!(distance > 0.0) || !(reference_distance > 0.0))
        throw std::invalid_argument("pathloss_gain: distances must be > 0");
    return std::pow(10.0, rho0_db / 10.0) * std::pow(distance / reference_distance, -exponent);
}

double snr_to_noise(double power, double pathloss_g, double pathloss_h, double snr_db)
{
    if (!(power > 0.0) || !std::isfinite(power))
        throw std::invalid_argument("snr_to_noise: power must be finite and > 0");
    if (!(pathloss_g > 0.0) || !(pathloss_h > 0.0) || !std::isfinite(pathloss_g) || !std::isfinite(pathloss_h))
        throw std::invalid_argument("snr_to_noise: path-loss gains must be finite and > 0");
    if (!std::isfinite(snr_db))
        throw std::invalid_argument("snr_to_noise: snr_db must be finite");
    return power * pathloss_g * pathloss_h / std::pow(10.0, snr_db / 10.0);
}

double PathlossSpec::gain_ris_bs() const
{
    return pathloss_gain(rho0_db, ris_bs_distance_m, reference_distance_m, ris_bs_exponent);
}

double PathlossSpec::gain_ris_user() const
{
    return pathloss_gain(rho0_db, ris_user_distance_m, reference_distance_m, ris_user_exponent);
}

arma::uword ExperimentConfig::total_users() const
{
    arma::uword k = 0;
    for (const ClusterProfile &cluster : clusters)
        k += cluster.num_users;
    return k;
}

void ExperimentConfig::validate() const
{
    geometry.validate();
    if (bs_antennas < 1)
        throw std::invalid_argument("ExperimentConfig: at least one BS antenna is required");
    if (clusters.empty())
        throw std::invalid_argument("ExperimentConfig: at least one cluster is required");
    for (const ClusterProfile &cluster : clusters)
        cluster.validate();

    const arma::uword n = geometry.num_elements();
    if (eigenspace.mode == TruncationMode::fixed_dimension)
    {
        if (eigenspace.total_dimension < clusters.size())
            throw std::invalid_argument("ExperimentConfig: eigenspace dimension must cover every cluster");
        if (eigenspace.total_dimension > n)
            throw std::invalid_argument("ExperimentConfig: eigenspace dimension cannot exceed the element count");
    }
    else if (!(eigenspace.energy_eta > 0.0) || eigenspace.energy_eta > 1.0)
        throw std::invalid_argument("ExperimentConfig: energy fraction must lie in (0, 1]");

    if (ris_bs_paths.count < 1)
        throw std::invalid_argument("ExperimentConfig: at least one RIS-BS path is required");
    if (ris_bs_paths.los_gain_var < 0.0 || ris_bs_paths.nlos_gain_var < 0.0)
        throw std::invalid_argument("ExperimentConfig: gain variances must be >= 0");
    if (!(transmit_power > 0.0) || !std::isfinite(transmit_power))
        throw std::invalid_argument("ExperimentConfig: transmit power must be finite and > 0");
    if (snr_db.empty())
        throw std::invalid_argument("ExperimentConfig: at least one SNR point is required");
    for (const double snr : snr_db)
        if (!std::isfinite(snr))
            throw std::invalid_argument("ExperimentConfig: SNR points must be finite");
    if (trials < 1)
        throw std::invalid_argument("ExperimentConfig: at least one trial is required");
    if (schemes.empty())
        throw std::invalid_argument("ExperimentConfig: at least one scheme is required");
    if (!(timescale_ratio >= 1.0) || !std::isfinite(timescale_ratio))
        throw std::invalid_argument("ExperimentConfig: timescale ratio must be finite and >= 1");
    if (covariance_observations < 1)
        throw std::invalid_argument("ExperimentConfig: covariance observation count must be >= 1");
    if (noise_override && (!std::isfinite(*noise_override) || *noise_override < 0.0))
        throw std::invalid_argument("ExperimentConfig: noise override must be finite and >= 0");
    if (!(mask_epsilon >= 0.0) || !std::isfinite(mask_epsilon))
        throw std::invalid_argument("ExperimentConfig: mask epsilon must be finite and >= 0");
}

ExperimentConfig default_config()
{
    const double deg = arma::datum::pi / 180.0;

    ExperimentConfig config;
    config.geometry = PlanarArrayGeometry{16, 16};
    config.bs_antennas = 16;
    for (const double azimuth : {0.9273, 1.3694, 1.7722, 2.2143})
        config.clusters.push_back(ClusterProfile{azimuth, 20.0 * deg, 14.0 * deg, 2.0 * deg, 2});
    return config;
}

ExperimentConfig config_from_json(const std::string &json_text)
{
    json j;
    try
    {
        j = json::parse(json_text);
    }
    catch (const json::parse_error &err)
    {
        throw std::runtime_error(std::string("config: JSON parse error: ") + err.what());
    }

    try
    {
        reject_unknown_keys(j,
                            {"geometry", "bs_antennas", "clusters", "eigenspace", "ris_bs_paths", "pathloss",
                             "transmit_power", "snr_db", "trials", "seed", "schemes", "timescale_ratio",
                             "covariance_observations", "full_spectrum_channels", "noise_override",
                             "mask_epsilon", "output"},
                            "the top level");

        ExperimentConfig config;

        const json &geometry = require_key(j, "geometry");
        reject_unknown_keys(geometry, {"n_h", "n_v", "spacing_h", "spacing_v"}, "'geometry'");
        config.geometry.n_h = require_key(geometry, "n_h").get<arma::uword>();
        config.geometry.n_v = require_key(geometry, "n_v").get<arma::uword>();
        config.geometry.spacing_h = geometry.value("spacing_h", 0.5);
        config.geometry.spacing_v = geometry.value("spacing_v", 0.5);

        config.bs_antennas = require_key(j, "bs_antennas").get<arma::uword>();

        config.clusters.clear();
        for (const json &cluster : require_key(j, "clusters"))
        {
            reject_unknown_keys(cluster,
                                {"mean_azimuth", "mean_elevation", "asd_azimuth", "asd_elevation", "num_users"},
                                "'clusters'");
            config.clusters.push_back(ClusterProfile{require_key(cluster, "mean_azimuth").get<double>(),
                                                     require_key(cluster, "mean_elevation").get<double>(),
                                                     require_key(cluster, "asd_azimuth").get<double>(),
                                                     require_key(cluster, "asd_elevation").get<double>(),
                                                     require_key(cluster, "num_users").get<arma::uword>()});
        }

        const json &eigenspace = require_key(j, "eigenspace");
        reject_unknown_keys(eigenspace, {"mode", "total_dimension", "energy_eta"}, "'eigenspace'");
        const std::string mode = require_key(eigenspace, "mode").get<std::string>();
        if (mode == "fixed_dimension")
        {
            config.eigenspace.mode = TruncationMode::fixed_dimension;
            config.eigenspace.total_dimension = require_key(eigenspace, "total_dimension").get<arma::uword>();
        }
        else if (mode == "energy_fraction")
        {
            config.eigenspace.mode = TruncationMode::energy_fraction;
            config.eigenspace.energy_eta = require_key(eigenspace, "energy_eta").get<double>();
        }
        else
            throw std::runtime_error("config: unknown eigenspace mode '" + mode + "'");

        if (j.contains("ris_bs_paths"))
        {
            const json &paths = j.at("ris_bs_paths");
            reject_unknown_keys(paths, {"count", "los_gain_var", "nlos_gain_var"}, "'ris_bs_paths'");
            config.ris_bs_paths.count = require_key(paths, "count").get<arma::uword>();
            config.ris_bs_paths.los_gain_var = paths.value("los_gain_var", 1.0);
            config.ris_bs_paths.nlos_gain_var = paths.value("nlos_gain_var", config.ris_bs_paths.nlos_gain_var);
        }

        if (j.contains("pathloss"))
        {
            const json &pathloss = j.at("pathloss");
            reject_unknown_keys(pathloss,
                                {"rho0_db", "reference_distance_m", "ris_bs_distance_m", "ris_user_distance_m",
                                 "ris_bs_exponent", "ris_user_exponent"},
                                "'pathloss'");
            config.pathloss.rho0_db = pathloss.value("rho0_db", config.pathloss.rho0_db);
            config.pathloss.reference_distance_m =
                pathloss.value("reference_distance_m", config.pathloss.reference_distance_m);
            config.pathloss.ris_bs_distance_m = pathloss.value("ris_bs_distance_m", config.pathloss.ris_bs_distance_m);
            config.pathloss.ris_user_distance_m =
                pathloss.value("ris_user_distance_m", config.pathloss.ris_user_distance_m);
            config.pathloss.ris_bs_exponent = pathloss.value("ris_bs_exponent", config.pathloss.ris_bs_exponent);
            config.pathloss.ris_user_exponent = pathloss.value("ris_user_exponent", config.pathloss.ris_user_exponent);
        }

        config.transmit_power = j.value("transmit_power", 1.0);

        config.snr_db.clear();
        for (const json &snr : require_key(j, "snr_db"))
            config.snr_db.push_back(snr.get<double>());

        config.trials = require_key(j, "trials").get<arma::uword>();
        config.seed = require_key(j, "seed").get<std::uint64_t>();

        config.schemes.clear();
        for (const json &scheme : require_key(j, "schemes"))
            config.schemes.push_back(scheme_from_string(scheme.get<std::string>()));

        config.timescale_ratio = j.value("timescale_ratio", 16.0);
        config.covariance_observations = j.value("covariance_observations", arma::uword(4));
        config.full_spectrum_channels = j.value("full_spectrum_channels", false);
        if (j.contains("noise_override") && !j.at("noise_override").is_null())
            config.noise_override = j.at("noise_override").get<double>();
        config.mask_epsilon = j.value("mask_epsilon", default_mask_epsilon);
        config.output = j.value("output", std::string("records.csv"));

        config.validate();
        return config;
    }
    catch (const json::exception &err)
    {
        throw std::runtime_error(std::string("config: malformed value: ") + err.what());
    }
}

std::string config_to_json(const ExperimentConfig &config)
{
    json clusters = json::array();
    for (const ClusterProfile &cluster : config.clusters)
        clusters.push_back(json{{"mean_azimuth", cluster.mean_azimuth},
                                {"mean_elevation", cluster.mean_elevation},
                                {"asd_azimuth", cluster.asd_azimuth},
                                {"asd_elevation", cluster.asd_elevation},
                                {"num_users", cluster.num_users}});

    json eigenspace;
    if (config.eigenspace.mode == TruncationMode::fixed_dimension)
        eigenspace = json{{"mode", "fixed_dimension"}, {"total_dimension", config.eigenspace.total_dimension}};
    else
        eigenspace = json{{"mode", "energy_fraction"}, {"energy_eta", config.eigenspace.energy_eta}};

    json schemes = json::array();
    for (const Scheme scheme : config.schemes)
        schemes.push_back(to_string(scheme));

    json j{{"geometry",
            {{"n_h", config.geometry.n_h},
             {"n_v", config.geometry.n_v},
             {"spacing_h", config.geometry.spacing_h},
             {"spacing_v", config.geometry.spacing_v}}},
           {"bs_antennas", config.bs_antennas},
           {"clusters", clusters},
           {"eigenspace", eigenspace},
           {"ris_bs_paths",
            {{"count", config.ris_bs_paths.count},
             {"los_gain_var", config.ris_bs_paths.los_gain_var},
             {"nlos_gain_var", config.ris_bs_paths.nlos_gain_var}}},
           {"pathloss",
            {{"rho0_db", config.pathloss.rho0_db},
             {"reference_distance_m", config.pathloss.reference_distance_m},
             {"ris_bs_distance_m", config.pathloss.ris_bs_distance_m},
             {"ris_user_distance_m", config.pathloss.ris_user_distance_m},
             {"ris_bs_exponent", config.pathloss.ris_bs_exponent},
             {"ris_user_exponent", config.pathloss.ris_user_exponent}}},
           {"transmit_power", config.transmit_power},
           {"snr_db", config.snr_db},
           {"trials", config.trials},
           {"seed", config.seed},
           {"schemes", schemes},
           {"timescale_ratio", config.timescale_ratio},
           {"covariance_observations", config.covariance_observations},
           {"full_spectrum_channels", config.full_spectrum_channels},
           {"mask_epsilon", config.mask_epsilon},
           {"output", config.output}};
    if (config.noise_override)
        j["noise_override"] = *config.noise_override;
    return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("config: cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return config_from_json(buffer.str());
}

double cascaded_nmse(const UserChannelSet &estimates, const UserChannelSet &truths, const arma::cx_mat &G,
                     arma::uword *excluded)
{
    if (estimates.size() != truths.size())
        throw std::invalid_argument("cascaded_nmse: estimate/truth cluster counts differ");

    // |G diag(x)|_F^2 = sum_n |g_n|^2 |x_n|^2 with g_n the n-th column of G.
    const arma::rowvec column_power = arma::sum(arma::square(arma::abs(G)), 0);

    double acc = 0.0;
    arma::uword used = 0, skipped = 0;
    for (size_t c = 0; c < truths.size(); ++c)
    {
        if (estimates[c].size() != truths[c].size())
            throw std::invalid_argument("cascaded_nmse: estimate/truth user counts differ");
        for (size_t i = 0; i < truths[c].size(); ++i)
        {
            const arma::cx_vec &h = truths[c][i];
            const arma::cx_vec &e = estimates[c][i];
            if (h.n_elem != G.n_cols || e.n_elem != G.n_cols)
                throw std::invalid_argument("cascaded_nmse: channel length does not match G");

            double num = 0.0, den = 0.0;
            for (arma::uword n = 0; n < G.n_cols; ++n)
            {
                den += column_power(n) * std::norm(h(n));
                num += column_power(n) * std::norm(h(n) - e(n));
            }
            if (den == 0.0)
            {
                ++skipped;
                continue;
            }
            acc += num / den;
            ++used;
        }
    }
    if (excluded)
        *excluded = skipped;
    return used > 0 ? acc / used : 0.0;
}

double direct_nmse(const UserChannelSet &estimates, const UserChannelSet &truths, arma::uword *excluded)
{
    if (estimates.size() != truths.size())
        throw std::invalid_argument("direct_nmse: estimate/truth cluster counts differ");

    double acc = 0.0;
    arma::uword used = 0, skipped = 0;
    for (size_t c = 0; c < truths.size(); ++c)
    {
        if (estimates[c].size() != truths[c].size())
            throw std::invalid_argument("direct_nmse: estimate/truth user counts differ");
        for (size_t i = 0; i < truths[c].size(); ++i)
        {
            const double den = std::pow(arma::norm(truths[c][i]), 2);
            if (den == 0.0)
            {
                ++skipped;
                continue;
            }
            acc += std::pow(arma::norm(truths[c][i] - estimates[c][i]), 2) / den;
            ++used;
        }
    }
    if (excluded)
        *excluded = skipped;
    return used > 0 ? acc / used : 0.0;
}

std::vector<MetricRecord> ExperimentDetail::records() const
{
    std::vector<MetricRecord> out;
    out.reserve(details.size());
    for (const RecordDetail &detail : details)
        out.push_back(detail.record);
    return out;
}

ExperimentDetail run_experiment_detailed(const ExperimentConfig &config, Execution execution, int threads)
{
    const ExperimentModel model = build_model(config);

    ExperimentDetail result;
    for (const Scheme scheme : config.schemes)
    {
        for (size_t snr_index = 0; snr_index < config.snr_db.size(); ++snr_index)
        {
            const double snr_db = config.snr_db[snr_index];
            const double noise_power =
                config.noise_override ? *config.noise_override
                                      : snr_to_noise(config.transmit_power, model.rho_g, model.rho_h, snr_db);

            const arma::uword n_blocks = (config.trials + model.block_size - 1) / model.block_size;
            std::vector<BlockArtifacts> blocks(n_blocks);
            for_each_index(n_blocks, execution, threads, [&](arma::uword b) {
                blocks[b] = build_block(config, model, scheme, snr_index, b);
            });

            RecordDetail detail;
            detail.trial_cascaded.resize(config.trials);
            detail.trial_direct.resize(config.trials);
            detail.trial_worst_direct.resize(config.trials);
            std::vector<arma::uword> trial_excluded(config.trials);

            for_each_index(config.trials, execution, threads, [&](arma::uword t) {
                const TrialMetrics metrics = run_trial(config, model, blocks[t / model.block_size], scheme,
                                                       snr_index, t, noise_power);
                detail.trial_cascaded[t] = metrics.cascaded;
                detail.trial_direct[t] = metrics.direct;
                detail.trial_worst_direct[t] = metrics.worst_direct;
                trial_excluded[t] = metrics.excluded;
            });

            // Fixed-order reduction over the stored per-trial values.
            double mean_cascaded = 0.0, mean_direct = 0.0;
            for (arma::uword t = 0; t < config.trials; ++t)
            {
                mean_cascaded += detail.trial_cascaded[t];
                mean_direct += detail.trial_direct[t];
                detail.excluded_users += trial_excluded[t];
            }
            mean_cascaded /= static_cast<double>(config.trials);
            mean_direct /= static_cast<double>(config.trials);

            // Standard error of the mean. Trials inside one large-timescale
            // block share a RIS-BS draw, so blocks are the independent units:
            // use the between-block (ultimate-cluster) estimator when there is
            // more than one block, the plain i.i.d. formula otherwise.
            double stderr_cascaded = 0.0;
            if (n_blocks > 1)
            {
                std::vector<double> block_total(n_blocks, 0.0);
                for (arma::uword t = 0; t < config.trials; ++t)
                    block_total[t / model.block_size] += detail.trial_cascaded[t];
                double grand_total = 0.0;
                for (const double total : block_total)
                    grand_total += total;
                const double mean_total = grand_total / static_cast<double>(n_blocks);
                double between = 0.0;
                for (const double total : block_total)
                {
                    const double dev = total - mean_total;
                    between += dev * dev;
                }
                stderr_cascaded = std::sqrt(between * static_cast<double>(n_blocks) /
                                            static_cast<double>(n_blocks - 1)) /
                                  static_cast<double>(config.trials);
            }
            else if (config.trials > 1)
            {
                double variance = 0.0;
                for (arma::uword t = 0; t < config.trials; ++t)
                {
                    const double dev = detail.trial_cascaded[t] - mean_cascaded;
                    variance += dev * dev;
                }
                stderr_cascaded = std::sqrt(variance / static_cast<double>(config.trials - 1) /
                                            static_cast<double>(config.trials));
            }

            detail.record = MetricRecord{to_string(scheme),
                                         snr_db,
                                         mean_cascaded,
                                         mean_direct,
                                         stderr_cascaded,
                                         config.trials,
                                         scheme == Scheme::ep ? model.overhead.proposed : model.overhead.ls};
            result.details.push_back(std::move(detail));
        }
    }
    return result;
}

std::vector<MetricRecord> run_experiment(const ExperimentConfig &config, Execution execution, int threads)
{
    return run_experiment_detailed(config, execution, threads).records();
}

std::string records_to_csv(const std::vector<MetricRecord> &records)
{
    std::string out = "scheme,snr_db,nmse_cascaded,nmse_direct,stderr,trials,pilot_overhead\n";
    for (const MetricRecord &record : records)
    {
        out += record.scheme;
        out += ',' + format_double(record.snr_db);
        out += ',' + format_double(record.nmse_cascaded);
        out += ',' + format_double(record.nmse_direct);
        out += ',' + format_double(record.stderr_cascaded);
        out += ',' + std::to_string(record.trials);
        out += ',' + format_double(record.pilot_overhead);
        out += '\n';
    }
    return out;
}

std::string records_to_json(const std::vector<MetricRecord> &records)
{
    json array = json::array();
    for (const MetricRecord &record : records)
        array.push_back(record_to_json(record));
    return array.dump(2) + "\n";
}

void export_records(const std::vector<MetricRecord> &records, const std::string &path, ExportFormat format)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("export_records: cannot open '" + path + "' for writing");
    out << (format == ExportFormat::csv ? records_to_csv(records) : records_to_json(records));
    if (!out)
        throw std::runtime_error("export_records: write to '" + path + "' failed");
}

std::vector<MetricRecord> import_records_csv(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("import_records_csv: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line) || line != "scheme,snr_db,nmse_cascaded,nmse_direct,stderr,trials,pilot_overhead")
        throw std::runtime_error("import_records_csv: unexpected header in '" + path + "'");

    std::vector<MetricRecord> records;
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        std::stringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ','))
            fields.push_back(field);
        if (fields.size() != 7)
            throw std::runtime_error("import_records_csv: malformed row '" + line + "'");

        MetricRecord record;
        record.scheme = fields[0];
        record.snr_db = std::strtod(fields[1].c_str(), nullptr);
        record.nmse_cascaded = std::strtod(fields[2].c_str(), nullptr);
        record.nmse_direct = std::strtod(fields[3].c_str(), nullptr);
        record.stderr_cascaded = std::strtod(fields[4].c_str(), nullptr);
        record.trials = std::strtoull(fields[5].c_str(), nullptr, 10);
        record.pilot_overhead = std::strtod(fields[6].c_str(), nullptr);
        records.push_back(std::move(record));
    }
    return records;
}

void init_runtime()
{
    // Respect an explicit user setting; otherwise keep the BLAS backend
    // single-threaded for reproducibility and to avoid oversubscribing the
    // OpenMP trial loop.
    setenv("OPENBLAS_NUM_THREADS", "1", 0);
}

} // namespace risce
