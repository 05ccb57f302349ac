/*
 * Copyright (C) 2026 The ntkfed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ntkfed/commands.hpp"
#include "ntkfed/config.hpp"
#include "ntkfed/error.hpp"
#include "ntkfed/parallel.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Federated NTK training simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
    std::string out_dir;
    std::string only;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the master seed");
        sub->add_option("--threads", threads, "worker threads (default: NTKFED_THREADS or 1)");
        sub->add_option("--out", out_dir, "output directory (default: output_dir from the config)");
    };
    auto* partition = app.add_subcommand("partition", "write the client partition");
    auto* train = app.add_subcommand("train", "run one scheme and write metrics.csv and weights.bin");
    auto* compare = app.add_subcommand("compare", "rounds to target accuracy per scheme");
    auto* verify = app.add_subcommand("verify", "run the verification checks");
    auto* comm = app.add_subcommand("comm-report", "per-round uplink bytes of each scheme");
    for (auto* sub : {partition, train, compare, verify, comm}) {
        add_common(sub);
    }
    verify->add_option("--only", only, "run a single check group");

    CLI11_PARSE(app, argc, argv);

    try {
        if (threads > 0) {
            ntkfed::set_thread_count(threads);
        }
        ntkfed::ExperimentConfig cfg = ntkfed::parse_config(config_path);
        if (seed) {
            cfg.seed = *seed;
        }
        const std::string out = out_dir.empty() ? cfg.output_dir : out_dir;
        if (partition->parsed()) {
            return ntkfed::cmd_partition(cfg, out, std::cout);
        }
        if (train->parsed()) {
            return ntkfed::cmd_train(cfg, out, std::cout);
        }
        if (compare->parsed()) {
            return ntkfed::cmd_compare(cfg, out, std::cout);
        }
        if (verify->parsed()) {
            return ntkfed::cmd_verify(cfg, only, out, std::cout);
        }
        return ntkfed::cmd_comm_report(cfg, out, std::cout);
    } catch (const ntkfed::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return ntkfed::exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ntkfed::exit_failure;
    }
}
