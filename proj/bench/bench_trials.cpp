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
//
// Wall-clock comparison of the serial and OpenMP trial loops, plus a check
// that both produce byte-identical records.

#include "risce/harness.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>

namespace
{

risce::ExperimentConfig bench_config()
{
    risce::ExperimentConfig config = risce::default_config();
    config.geometry = risce::PlanarArrayGeometry{8, 8};
    config.bs_antennas = 8;
    config.snr_db = {0.0, 10.0, 20.0};
    config.trials = 200;
    return config;
}

double timed_run(const risce::ExperimentConfig &config, risce::Execution execution,
                 std::vector<risce::MetricRecord> &records)
{
    const auto start = std::chrono::steady_clock::now();
    records = risce::run_experiment(config, execution);
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(stop - start).count();
}

} // namespace

int main()
{
    risce::init_runtime();
    const risce::ExperimentConfig config = bench_config();

    std::vector<risce::MetricRecord> serial_records;
    std::vector<risce::MetricRecord> parallel_records;

    const double serial_s = timed_run(config, risce::Execution::serial, serial_records);
    const double parallel_s = timed_run(config, risce::Execution::openmp, parallel_records);

    std::printf("serial   %8.3f s\n", serial_s);
    std::printf("openmp   %8.3f s\n", parallel_s);
    std::printf("speedup  %8.2fx\n", parallel_s > 0.0 ? serial_s / parallel_s : 0.0);

    if (risce::records_to_csv(serial_records) != risce::records_to_csv(parallel_records))
    {
        std::cerr << "mismatch: serial and OpenMP records differ\n";
        return 1;
    }
    std::printf("records  identical\n");
    return 0;
}
