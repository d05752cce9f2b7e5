// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "risce/harness.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

using namespace risce;

namespace
{

const bool runtime_ready = (init_runtime(), true);

std::string thrown_message(const std::function<void()> &fn)
{
    try
    {
        fn();
    }
    catch (const std::exception &e)
    {
        return e.what();
    }
    return {};
}

// Two clusters of one user each on a 4x4 panel: small enough that a full
// Monte-Carlo run takes milliseconds.
ExperimentConfig tiny_config()
{
    ExperimentConfig config = default_config();
    config.geometry = PlanarArrayGeometry{4, 4};
    config.bs_antennas = 4;
    config.clusters = {ClusterProfile{1.0, 0.35, 0.2, 0.06, 1}, ClusterProfile{2.1, 0.35, 0.2, 0.06, 1}};
    config.eigenspace.mode = TruncationMode::fixed_dimension;
    config.eigenspace.total_dimension = 8;
    config.snr_db = {0.0, 10.0};
    config.trials = 24;
    config.seed = 7;
    config.schemes = {Scheme::ep, Scheme::ls};
    return config;
}

struct TempFile
{
    std::string path;
    explicit TempFile(const std::string &name) : path("/tmp/risce_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

} // namespace

TEST_CASE("path-loss law and SNR-to-noise mapping")
{
    CHECK(runtime_ready);
    CHECK(pathloss_gain(-20.0, 1.0, 1.0, 2.1) == doctest::Approx(0.01).epsilon(1e-15));
    // frozen reference gains for the default link distances
    CHECK(pathloss_gain(-20.0, 20.0, 1.0, 2.1) == doctest::Approx(1.8528361227673688e-05).epsilon(1e-14));
    CHECK(pathloss_gain(-20.0, 10.0, 1.0, 2.2) == doctest::Approx(6.3095734448019307e-05).epsilon(1e-14));

    const PathlossSpec spec;
    CHECK(spec.gain_ris_bs() == doctest::Approx(1.8528361227673688e-05).epsilon(1e-14));
    CHECK(spec.gain_ris_user() == doctest::Approx(6.3095734448019307e-05).epsilon(1e-14));

    const double unit = snr_to_noise(1.0, spec.gain_ris_bs(), spec.gain_ris_user(), 0.0);
    CHECK(unit == spec.gain_ris_bs() * spec.gain_ris_user());
    CHECK(snr_to_noise(1.0, spec.gain_ris_bs(), spec.gain_ris_user(), 10.0) == unit / 10.0);
    CHECK(snr_to_noise(4.0, spec.gain_ris_bs(), spec.gain_ris_user(), 0.0) == 4.0 * unit);

    CHECK_THROWS_AS(pathloss_gain(-20.0, 0.0, 1.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(snr_to_noise(0.0, 1.0, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(snr_to_noise(1.0, 0.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("error metrics: exact values on hand-built channels")
{
    const arma::cx_mat I2 = arma::eye<arma::cx_mat>(2, 2);
    UserChannelSet truths(1), estimates(1);
    truths[0] = {arma::cx_vec{{1.0, 0.0}, {1.0, 0.0}}};

    estimates[0] = {truths[0][0]};
    arma::uword excluded = 99;
    CHECK(cascaded_nmse(estimates, truths, I2, &excluded) == 0.0);
    CHECK(excluded == 0);
    CHECK(direct_nmse(estimates, truths) == 0.0);

    estimates[0] = {arma::cx_vec(2, arma::fill::zeros)};
    CHECK(cascaded_nmse(estimates, truths, I2) == 1.0);
    CHECK(direct_nmse(estimates, truths) == 1.0);

    // estimate misses one of two equal-power entries: error exactly 1/2
    estimates[0] = {arma::cx_vec{{1.0, 0.0}, {0.0, 0.0}}};
    CHECK(cascaded_nmse(estimates, truths, I2) == 0.5);
    CHECK(direct_nmse(estimates, truths) == doctest::Approx(0.5).epsilon(1e-15));

    // 3-4-5 triple keeps every intermediate exact: error 16/25
    UserChannelSet pyth_truth(1), pyth_est(1);
    pyth_truth[0] = {arma::cx_vec{{3.0, 0.0}, {4.0, 0.0}}};
    pyth_est[0] = {arma::cx_vec{{3.0, 0.0}, {0.0, 0.0}}};
    CHECK(direct_nmse(pyth_est, pyth_truth) == 0.64);
    CHECK(cascaded_nmse(pyth_est, pyth_truth, I2) == 0.64);

    // column weighting: |g_0|^2 = 4, |g_1|^2 = 1, error on element 0 only
    arma::cx_mat G(2, 2, arma::fill::zeros);
    G(0, 0) = {2.0, 0.0};
    G(1, 1) = {1.0, 0.0};
    estimates[0] = {arma::cx_vec{{0.0, 0.0}, {1.0, 0.0}}};
    CHECK(cascaded_nmse(estimates, truths, G) == 0.8);

    // zero-norm truths are excluded; with nobody left the mean is zero
    truths[0] = {arma::cx_vec(2, arma::fill::zeros)};
    estimates[0] = {arma::cx_vec(2, arma::fill::ones)};
    CHECK(cascaded_nmse(estimates, truths, I2, &excluded) == 0.0);
    CHECK(excluded == 1);
    CHECK(direct_nmse(estimates, truths, &excluded) == 0.0);
    CHECK(excluded == 1);

    UserChannelSet bad(2);
    CHECK_THROWS_AS(cascaded_nmse(bad, truths, I2), std::invalid_argument);
    CHECK_THROWS_AS(direct_nmse(bad, truths), std::invalid_argument);
}

TEST_CASE("scheme names round-trip")
{
    CHECK(to_string(Scheme::ep) == "ep");
    CHECK(to_string(Scheme::ls) == "ls");
    CHECK(scheme_from_string("ep") == Scheme::ep);
    CHECK(scheme_from_string("ls") == Scheme::ls);
    CHECK_THROWS_AS(scheme_from_string("mmse"), std::runtime_error);
}

TEST_CASE("default configuration is valid and JSON round-trips byte-for-byte")
{
    const ExperimentConfig config = default_config();
    CHECK_NOTHROW(config.validate());
    CHECK(config.total_users() == 8);
    CHECK(config.geometry.num_elements() == 256);

    const std::string text = config_to_json(config);
    const ExperimentConfig parsed = config_from_json(text);
    CHECK(config_to_json(parsed) == text);
}

TEST_CASE("config parsing reports the offending key")
{
    const std::string text = config_to_json(default_config());
    nlohmann::json j = nlohmann::json::parse(text);

    nlohmann::json extra = j;
    extra["bogus"] = 1;
    std::string message = thrown_message([&] { config_from_json(extra.dump()); });
    CHECK(message.find("bogus") != std::string::npos);

    nlohmann::json nested = j;
    nested["geometry"]["tilt"] = 2.0;
    message = thrown_message([&] { config_from_json(nested.dump()); });
    CHECK(message.find("tilt") != std::string::npos);
    CHECK(message.find("geometry") != std::string::npos);

    nlohmann::json missing = j;
    missing.erase("trials");
    message = thrown_message([&] { config_from_json(missing.dump()); });
    CHECK(message.find("trials") != std::string::npos);

    nlohmann::json bad_scheme = j;
    bad_scheme["schemes"] = {"mmse"};
    CHECK_THROWS_AS(config_from_json(bad_scheme.dump()), std::runtime_error);

    CHECK_THROWS_AS(config_from_json("{"), std::runtime_error);
    CHECK_THROWS_AS(load_config("/nonexistent/risce_config.json"), std::runtime_error);
}

TEST_CASE("optional config fields parse and survive a round trip")
{
    nlohmann::json j = nlohmann::json::parse(config_to_json(default_config()));

    j["noise_override"] = 0.25;
    ExperimentConfig config = config_from_json(j.dump());
    REQUIRE(config.noise_override.has_value());
    CHECK(*config.noise_override == 0.25);
    CHECK(config_to_json(config_from_json(config_to_json(config))) == config_to_json(config));

    j["noise_override"] = nullptr;
    config = config_from_json(j.dump());
    CHECK_FALSE(config.noise_override.has_value());

    j.erase("noise_override");
    j["eigenspace"] = {{"mode", "energy_fraction"}, {"energy_eta", 0.8}};
    config = config_from_json(j.dump());
    CHECK(config.eigenspace.mode == TruncationMode::energy_fraction);
    CHECK(config.eigenspace.energy_eta == 0.8);
    CHECK(config_to_json(config_from_json(config_to_json(config))) == config_to_json(config));
}

TEST_CASE("config validation rejects out-of-range fields")
{
    ExperimentConfig config = tiny_config();
    config.trials = 0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);

    config = tiny_config();
    config.clusters.clear();
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);

    config = tiny_config();
    config.eigenspace.total_dimension = 17; // exceeds the 16-element panel
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);

    config = tiny_config();
    config.timescale_ratio = 0.5;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);

    config = tiny_config();
    config.noise_override = -1.0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("record serialization: exact header and lossless round trip")
{
    CHECK(records_to_csv({}) == "scheme,snr_db,nmse_cascaded,nmse_direct,stderr,trials,pilot_overhead\n");

    std::vector<MetricRecord> records(2);
    records[0] = {"ep", 0.0, 0.1, 1e-18, 1.2345678901234567e-3, 1000, 127.875};
    records[1] = {"ls", -5.0, 3.0303030303030304e+33, 0.0, 4.9406564584124654e-324, 1, 2048.0};

    TempFile file("records.csv");
    export_records(records, file.path, ExportFormat::csv);
    const std::vector<MetricRecord> loaded = import_records_csv(file.path);
    REQUIRE(loaded.size() == records.size());
    for (size_t i = 0; i < records.size(); ++i)
    {
        CHECK(loaded[i].scheme == records[i].scheme);
        CHECK(loaded[i].snr_db == records[i].snr_db);
        CHECK(loaded[i].nmse_cascaded == records[i].nmse_cascaded);
        CHECK(loaded[i].nmse_direct == records[i].nmse_direct);
        CHECK(loaded[i].stderr_cascaded == records[i].stderr_cascaded);
        CHECK(loaded[i].trials == records[i].trials);
        CHECK(loaded[i].pilot_overhead == records[i].pilot_overhead);
    }

    const nlohmann::json parsed = nlohmann::json::parse(records_to_json(records));
    REQUIRE(parsed.is_array());
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0]["scheme"] == "ep");
    CHECK(parsed[1]["pilot_overhead"] == 2048.0);

    CHECK_THROWS_AS(export_records(records, "/nonexistent/dir/records.csv", ExportFormat::csv),
                    std::runtime_error);
    CHECK_THROWS_AS(import_records_csv("/nonexistent/records.csv"), std::runtime_error);

    TempFile wrong("wrong_header.csv");
    {
        FILE *f = std::fopen(wrong.path.c_str(), "w");
        REQUIRE(f != nullptr);
        std::fputs("scheme,snr\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(import_records_csv(wrong.path), std::runtime_error);
}

TEST_CASE("Monte-Carlo runs are reproducible for any execution policy")
{
    const ExperimentConfig config = tiny_config();

    const std::string serial_a = records_to_csv(run_experiment(config, Execution::serial));
    const std::string serial_b = records_to_csv(run_experiment(config, Execution::serial));
    const std::string omp_default = records_to_csv(run_experiment(config, Execution::openmp));
    const std::string omp_two = records_to_csv(run_experiment(config, Execution::openmp, 2));
    const std::string omp_three = records_to_csv(run_experiment(config, Execution::openmp, 3));

    CHECK(serial_a == serial_b);
    CHECK(serial_a == omp_default);
    CHECK(serial_a == omp_two);
    CHECK(serial_a == omp_three);

    ExperimentConfig reseeded = config;
    reseeded.seed = config.seed + 1;
    CHECK(records_to_csv(run_experiment(reseeded, Execution::serial)) != serial_a);
}

TEST_CASE("records carry the right layout, trial counts, and overhead")
{
    const ExperimentConfig config = tiny_config();
    const ExperimentDetail detail = run_experiment_detailed(config, Execution::serial);
    const std::vector<MetricRecord> records = detail.records();

    REQUIRE(records.size() == 4); // schemes x SNR points, scheme-major
    CHECK(records[0].scheme == "ep");
    CHECK(records[0].snr_db == 0.0);
    CHECK(records[1].scheme == "ep");
    CHECK(records[1].snr_db == 10.0);
    CHECK(records[2].scheme == "ls");
    CHECK(records[3].scheme == "ls");

    OverheadParams params;
    params.m_antennas = config.bs_antennas;
    params.n_elements = config.geometry.num_elements();
    params.k_users = config.total_users();
    params.c_clusters = config.clusters.size();
    params.e_dimension = config.eigenspace.total_dimension;
    params.alpha = config.timescale_ratio;
    params.beta = config.covariance_observations;
    const OverheadTable table = overhead_table(params);

    for (const RecordDetail &d : detail.details)
    {
        CHECK(d.record.trials == config.trials);
        CHECK(d.trial_cascaded.size() == config.trials);
        CHECK(d.trial_direct.size() == config.trials);
        CHECK(d.trial_worst_direct.size() == config.trials);
        CHECK(d.excluded_users == 0);
        CHECK(d.record.nmse_cascaded > 0.0);
        CHECK(d.record.stderr_cascaded > 0.0);
        const double expected = d.record.scheme == "ep" ? table.proposed : table.ls;
        CHECK(d.record.pilot_overhead == expected);
    }

    // more noise means more error: SNR 0 dB is worse than 10 dB for both schemes
    CHECK(records[0].nmse_cascaded > records[1].nmse_cascaded);
    CHECK(records[2].nmse_cascaded > records[3].nmse_cascaded);

    CHECK(records_to_csv(run_experiment(config, Execution::serial)) == records_to_csv(records));
}

TEST_CASE("standard error shrinks roughly as one over sqrt(trials)")
{
    ExperimentConfig config = tiny_config();
    config.schemes = {Scheme::ep};
    config.snr_db = {10.0};

    config.trials = 64;
    const double coarse = run_experiment(config, Execution::serial)[0].stderr_cascaded;
    config.trials = 256;
    const double fine = run_experiment(config, Execution::serial)[0].stderr_cascaded;
    CHECK(coarse / fine > 1.2);
    CHECK(coarse / fine < 3.3);
}

TEST_CASE("noise-free runs on spanned channels are exact to rounding")
{
    ExperimentConfig config = tiny_config();
    config.schemes = {Scheme::ep};
    config.snr_db = {0.0};
    config.noise_override = 0.0;
    config.trials = 16;

    const ExperimentDetail detail = run_experiment_detailed(config, Execution::serial);
    REQUIRE(detail.details.size() == 1);
    double worst = 0.0;
    for (const double v : detail.details[0].trial_worst_direct)
        worst = std::max(worst, v);
    CHECK(worst <= 1e-18);
    CHECK(detail.details[0].record.nmse_cascaded <= 1e-18);
}
