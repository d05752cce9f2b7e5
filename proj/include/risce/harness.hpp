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

#ifndef risce_harness_H
#define risce_harness_H

#include "risce/baselines.hpp"
#include "risce/channel_model.hpp"
#include "risce/ep_estimator.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace risce
{

enum class Scheme
{
    ep, // eigenspace-projection estimator
    ls  // per-element least squares
};

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string &name);

// Distance-power path-loss law: gain(d) = rho0 * (d/d0)^(-exponent), with
// rho0 given in dB.
double pathloss_gain(double rho0_db, double distance, double reference_distance, double exponent);

// Noise power realizing a target SNR: snr = power * pathloss_g * pathloss_h /
// noise_power, so noise_power = power * pathloss_g * pathloss_h / 10^(snr_db/10).
double snr_to_noise(double power, double pathloss_g, double pathloss_h, double snr_db);

struct PathlossSpec
{
    double rho0_db = -20.0;
    double reference_distance_m = 1.0;
    double ris_bs_distance_m = 20.0;
    double ris_user_distance_m = 10.0;
    double ris_bs_exponent = 2.1;
    double ris_user_exponent = 2.2;

    double gain_ris_bs() const;   // rho_g
    double gain_ris_user() const; // rho_h
};

struct EigenspaceSpec
{
    TruncationMode mode = TruncationMode::fixed_dimension;
    arma::uword total_dimension = 32; // summed over clusters (fixed_dimension)
    double energy_eta = 0.9;          // per-cluster share (energy_fraction)
};

struct RisBsPathSpec
{
    arma::uword count = 5;
    double los_gain_var = 1.0;
    double nlos_gain_var = 0.31622776601683794; // 10^(-1/2)
};

// Full experiment description; serializable to/from JSON. The embedded
// defaults describe the reference operating point (16x16 panel, 16 BS
// antennas, 4 clusters of 2 users, 32-dimensional summed eigenspace).
struct ExperimentConfig
{
    PlanarArrayGeometry geometry{16, 16};
    arma::uword bs_antennas = 16;
    std::vector<ClusterProfile> clusters;
    EigenspaceSpec eigenspace;
    RisBsPathSpec ris_bs_paths;
    PathlossSpec pathloss;
    double transmit_power = 1.0;
    std::vector<double> snr_db{0, 5, 10, 15, 20, 25, 30};
    arma::uword trials = 1000;
    std::uint64_t seed = 1;
    std::vector<Scheme> schemes{Scheme::ep, Scheme::ls};
    double timescale_ratio = 16.0;          // trials between RIS-BS redraws; alpha in the overhead model
    arma::uword covariance_observations = 4; // beta in the overhead model
    bool full_spectrum_channels = false;     // draw channels from the full profile, not just kept beams
    std::optional<double> noise_override;    // fixed noise power, bypassing the SNR mapping
    double mask_epsilon = default_mask_epsilon;
    std::string output = "records.csv";

    arma::uword total_users() const;
    void validate() const;
};

ExperimentConfig default_config();

// JSON (de)serialization; config_from_json throws std::runtime_error with
// the offending key on malformed input.
ExperimentConfig config_from_json(const std::string &json_text);
std::string config_to_json(const ExperimentConfig &config);
ExperimentConfig load_config(const std::string &path);

// One (scheme, SNR) result row. `stderr_cascaded` is the standard error of
// the mean cascaded NMSE, with trials that share a large-timescale RIS-BS
// draw counted as one independent unit; `pilot_overhead` is the scheme's
// average training overhead at this configuration.
struct MetricRecord
{
    std::string scheme;
    double snr_db = 0.0;
    double nmse_cascaded = 0.0;
    double nmse_direct = 0.0;
    double stderr_cascaded = 0.0;
    arma::uword trials = 0;
    double pilot_overhead = 0.0;
};

// Normalized error of the cascaded (panel-to-BS) channels G*diag(h): mean
// over users of |G diag(h - h_hat)|_F^2 / |G diag(h)|_F^2. Users with a
// zero-norm truth are excluded and counted in *excluded if given.
double cascaded_nmse(const UserChannelSet &estimates, const UserChannelSet &truths,
                     const arma::cx_mat &G, arma::uword *excluded = nullptr);

// Mean over users of |h - h_hat|^2 / |h|^2, same exclusion rule.
double direct_nmse(const UserChannelSet &estimates, const UserChannelSet &truths,
                   arma::uword *excluded = nullptr);

enum class Execution
{
    serial, // reference implementation: plain loop, used for testing
    openmp  // OpenMP-parallel trial loop; identical output by construction
};

// Per-(scheme, SNR) trial-level outcomes, kept for tests and diagnostics.
struct RecordDetail
{
    MetricRecord record;
    std::vector<double> trial_cascaded;
    std::vector<double> trial_direct;
    std::vector<double> trial_worst_direct; // worst per-user direct NMSE in the trial
    arma::uword excluded_users = 0;
};

struct ExperimentDetail
{
    std::vector<RecordDetail> details;
    std::vector<MetricRecord> records() const;
};

// Runs the Monte-Carlo sweep. Trials are independent substreams keyed by
// (seed, scheme, SNR index, trial), the RIS-BS channel is redrawn every
// `timescale_ratio` trials, and aggregation happens in a fixed order after
// all trials complete - so results are identical for any execution policy
// and worker-thread count. threads = 0 leaves the OpenMP default.
ExperimentDetail run_experiment_detailed(const ExperimentConfig &config,
                                         Execution execution = Execution::openmp, int threads = 0);
std::vector<MetricRecord> run_experiment(const ExperimentConfig &config,
                                         Execution execution = Execution::openmp, int threads = 0);

enum class ExportFormat
{
    csv,
    json
};

// CSV schema (fixed): header "scheme,snr_db,nmse_cascaded,nmse_direct,stderr,trials,pilot_overhead",
// doubles with 17 significant digits so parsing returns the exact values.
std::string records_to_csv(const std::vector<MetricRecord> &records);
std::string records_to_json(const std::vector<MetricRecord> &records);
void export_records(const std::vector<MetricRecord> &records, const std::string &path,
                    ExportFormat format);
std::vector<MetricRecord> import_records_csv(const std::string &path);

// Pins the BLAS backend to one thread (unless the user already set it) so
// numerical results do not depend on BLAS-internal threading. Call first in
// every executable.
void init_runtime();

} // namespace risce

#endif
