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

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace
{

std::string format_overhead(double value)
{
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.15g", value);
    return buffer;
}

std::string format_exact(double value)
{
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

// Seed precedence: --seed flag, then RISCE_SEED environment variable, then
// the value stored in the configuration file.
std::uint64_t resolve_seed(bool flag_given, std::uint64_t flag_value, std::uint64_t config_value)
{
    if (flag_given)
        return flag_value;
    if (const char *env = std::getenv("RISCE_SEED"); env && *env)
    {
        char *end = nullptr;
        const unsigned long long parsed = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0')
            throw std::runtime_error(std::string("RISCE_SEED is not a valid integer: '") + env + "'");
        return parsed;
    }
    return config_value;
}

void add_overhead_options(CLI::App *cmd, risce::OverheadParams &params)
{
    cmd->add_option("--m", params.m_antennas, "BS antenna count");
    cmd->add_option("--n", params.n_elements, "RIS element count");
    cmd->add_option("--k", params.k_users, "user count");
    cmd->add_option("--c", params.c_clusters, "cluster count");
    cmd->add_option("--e", params.e_dimension, "total kept eigenspace dimension");
    cmd->add_option("--alpha", params.alpha, "large-to-small timescale ratio");
    cmd->add_option("--beta", params.beta, "covariance observation frames per large-timescale block");
}

void apply_sweep_value(risce::OverheadParams &params, const std::string &name, double value)
{
    const auto as_count = [&](const char *what) {
        if (value < 1.0 || value != std::floor(value))
            throw std::runtime_error(std::string("sweep: ") + what + " values must be positive integers");
        return static_cast<arma::uword>(value);
    };
    if (name == "m")
        params.m_antennas = as_count("m");
    else if (name == "n")
        params.n_elements = as_count("n");
    else if (name == "k")
        params.k_users = as_count("k");
    else if (name == "c")
        params.c_clusters = as_count("c");
    else if (name == "e")
        params.e_dimension = as_count("e");
    else if (name == "alpha")
        params.alpha = value;
    else if (name == "beta")
        params.beta = as_count("beta");
    else
        throw std::runtime_error("sweep: unknown parameter '" + name + "'");
}

int run(int argc, char **argv)
{
    risce::init_runtime();

    CLI::App app{"risce - RIS-aided uplink channel estimation simulator"};
    app.require_subcommand(0, 1);

    bool print_default = false;
    app.add_flag("--print-default-config", print_default, "print the default configuration as JSON and exit");

    // simulate
    CLI::App *simulate = app.add_subcommand("simulate", "run a Monte-Carlo experiment and export records");
    std::string config_path;
    std::string out_path;
    std::string format_name = "csv";
    std::uint64_t seed_value = 0;
    int threads = 0;
    bool serial = false;
    simulate->add_option("--config", config_path, "experiment configuration (JSON)");
    simulate->add_option("--out", out_path, "output path (overrides the configuration's output field)");
    CLI::Option *seed_option = simulate->add_option("--seed", seed_value, "master seed override");
    simulate->add_option("--format", format_name, "export format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    simulate->add_option("--threads", threads, "worker thread count (0 = library default)");
    simulate->add_flag("--serial", serial, "run trials on a single thread");

    // overhead
    CLI::App *overhead = app.add_subcommand("overhead", "print pilot-overhead figures for all schemes");
    risce::OverheadParams overhead_params;
    add_overhead_options(overhead, overhead_params);

    // sweep
    CLI::App *sweep = app.add_subcommand("sweep", "tabulate pilot overhead over a grid of one parameter");
    std::string sweep_param;
    std::vector<double> sweep_values;
    std::string sweep_out;
    risce::OverheadParams sweep_base;
    sweep->add_option("--param", sweep_param, "parameter to sweep: m, n, k, c, e, alpha, or beta")->required();
    sweep->add_option("--values", sweep_values, "grid values")->required()->delimiter(',');
    sweep->add_option("--out", sweep_out, "write the table to this path instead of stdout");
    add_overhead_options(sweep, sweep_base);

    CLI11_PARSE(app, argc, argv);

    if (print_default)
    {
        std::cout << risce::config_to_json(risce::default_config());
        return 0;
    }

    if (simulate->parsed())
    {
        risce::ExperimentConfig config =
            config_path.empty() ? risce::default_config() : risce::load_config(config_path);
        config.seed = resolve_seed(seed_option->count() > 0, seed_value, config.seed);
        if (!out_path.empty())
            config.output = out_path;

        const risce::Execution execution = serial ? risce::Execution::serial : risce::Execution::openmp;
        const std::vector<risce::MetricRecord> records = risce::run_experiment(config, execution, threads);
        const risce::ExportFormat format =
            format_name == "json" ? risce::ExportFormat::json : risce::ExportFormat::csv;
        risce::export_records(records, config.output, format);
        std::cout << "wrote " << records.size() << " records to " << config.output << "\n";
        return 0;
    }

    if (overhead->parsed())
    {
        const risce::OverheadTable table = risce::overhead_table(overhead_params);
        std::cout << "ls " << format_overhead(table.ls) << "\n"
                  << "three_phase " << format_overhead(table.three_phase) << "\n"
                  << "two_timescale " << format_overhead(table.two_timescale) << "\n"
                  << "proposed " << format_overhead(table.proposed) << "\n";
        return 0;
    }

    if (sweep->parsed())
    {
        std::string out = "value,ls,three_phase,two_timescale,proposed\n";
        for (const double value : sweep_values)
        {
            risce::OverheadParams params = sweep_base;
            apply_sweep_value(params, sweep_param, value);
            const risce::OverheadTable table = risce::overhead_table(params);
            out += format_exact(value);
            out += ',' + format_exact(table.ls);
            out += ',' + format_exact(table.three_phase);
            out += ',' + format_exact(table.two_timescale);
            out += ',' + format_exact(table.proposed);
            out += '\n';
        }
        if (sweep_out.empty())
            std::cout << out;
        else
        {
            std::ofstream file(sweep_out, std::ios::binary);
            if (!file)
                throw std::runtime_error("sweep: cannot open '" + sweep_out + "' for writing");
            file << out;
        }
        return 0;
    }

    std::cout << app.help();
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    try
    {
        return run(argc, argv);
    }
    catch (const std::exception &err)
    {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
}
