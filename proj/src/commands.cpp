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

#include "ntkfed/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "ntkfed/checks.hpp"
#include "ntkfed/cp.hpp"
#include "ntkfed/error.hpp"
#include "ntkfed/experiment.hpp"
#include "ntkfed/io.hpp"

namespace ntkfed {

namespace {

std::ofstream open_output(const std::filesystem::path& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write " + (dir / name).string());
    }
    return out;
}

std::string csv_safe(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

} // namespace

int cmd_partition(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
    const PreparedData data = prepare_data(cfg);
    auto detail = open_output(out_dir, "partition.csv");
    auto summary = open_output(out_dir, "partition_summary.csv");
    CsvWriter rows(detail, {"client", "sample", "label"});
    CsvWriter sums(summary, {"client", "samples", "dominant_class", "dominant_share"});
    double share_total = 0.0;
    for (std::size_t m = 0; m < data.partition.clients(); ++m) {
        std::vector<std::size_t> hist(data.train.classes, 0);
        for (std::size_t idx : data.partition.assignment[m]) {
            const int label = data.train.labels[idx];
            hist[static_cast<std::size_t>(label)]++;
            rows.row({std::to_string(m), std::to_string(idx), std::to_string(label)});
        }
        const auto top = std::max_element(hist.begin(), hist.end());
        const std::size_t n = data.partition.assignment[m].size();
        const double share = n ? static_cast<double>(*top) / static_cast<double>(n) : 0.0;
        share_total += share;
        sums.row({std::to_string(m), std::to_string(n), std::to_string(top - hist.begin()), format_double(share)});
    }
    log << "partitioned " << data.partition.total() << " samples over " << data.partition.clients()
        << " clients (alpha=" << cfg.partition.alpha << "), mean dominant-class share "
        << share_total / static_cast<double>(data.partition.clients()) << "\n";
    return exit_ok;
}

int cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
    const PreparedData data = prepare_data(cfg);
    auto csv = open_output(out_dir, "metrics.csv");
    CsvWriter writer(csv, metrics_header());
    const Scheme scheme = cfg.round.scheme;
    RunResult run = run_experiment(cfg, data, scheme, std::nullopt, [&](const RoundMetrics& m) {
        writer.row(metrics_row(m, cfg.analysis.record_wall_time));
        log << scheme_name(scheme) << " round " << m.round << ": t/tau=" << m.chosen << " train_loss=" << m.train_loss
            << " test_acc=" << m.test_accuracy << "\n";
    });
    save_weights(out_dir / "weights.bin", run.weights.w);
    if (!run.error.empty()) {
        log << "error: " << run.error << "\n";
        return exit_failure;
    }
    return exit_ok;
}

int cmd_compare(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
    const PreparedData data = prepare_data(cfg);
    const auto rows = compare_schemes(cfg, data);
    auto csv = open_output(out_dir, "compare.csv");
    CsvWriter writer(csv, {"scheme", "tau", "rounds_to_target", "uplink_mb", "final_acc"});
    log << "target accuracy " << cfg.compare.target_accuracy << "\n";
    log << std::left << std::setw(14) << "scheme" << std::setw(6) << "tau" << std::setw(16) << "rounds" << std::setw(14)
        << "uplink MB"
        << "final acc\n";
    for (const auto& r : rows) {
        const std::string reached = r.reached ? std::to_string(*r.reached) : "not reached";
        writer.row({std::string(scheme_name(r.scheme)), r.scheme == Scheme::fedavg ? std::to_string(r.tau) : "",
                    reached, format_double(r.uplink_mb), format_double(r.final_accuracy)});
        log << std::left << std::setw(14) << scheme_name(r.scheme) << std::setw(6)
            << (r.scheme == Scheme::fedavg ? std::to_string(r.tau) : "-") << std::setw(16) << reached << std::setw(14)
            << r.uplink_mb << r.final_accuracy << "\n";
        auto per = open_output(out_dir, "compare_" + std::string(scheme_name(r.scheme)) + ".csv");
        CsvWriter w(per, metrics_header());
        for (const auto& m : r.metrics) {
            w.row(metrics_row(m, cfg.analysis.record_wall_time));
        }
    }
    return exit_ok;
}

int cmd_verify(const ExperimentConfig& cfg, const std::string& only, const std::filesystem::path& out_dir,
               std::ostream& log) {
    CheckOptions opts;
    opts.seed = cfg.seed;
    opts.inject_kernel_asymmetry = cfg.analysis.inject_kernel_asymmetry;
    const auto results = run_checks(opts, only);
    auto csv = open_output(out_dir, "verify.csv");
    CsvWriter writer(csv, {"group", "check", "passed", "seconds", "detail"});
    bool all = true;
    for (const auto& r : results) {
        all = all && r.passed;
        writer.row({r.group, r.name, r.passed ? "1" : "0", format_double(r.seconds), csv_safe(r.detail)});
        log << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    }
    log << (all ? "all checks passed" : "some checks failed") << " (" << results.size() << " checks)\n";
    return all ? exit_ok : exit_failure;
}

int cmd_comm_report(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
    const PreparedData data = prepare_data(cfg);
    const RoundConfig rc = round_config(cfg, Scheme::ntkfl);
    const std::size_t d1 = data.train.dim();
    const std::size_t d2 = data.train.classes;
    const std::size_t d = ModelConfig::experiment(d1, cfg.hidden, d2).param_count();
    const std::size_t d_cp = ModelConfig::experiment(cfg.cp.projected_dim, cfg.hidden, d2).param_count();

    auto csv = open_output(out_dir, "comm_report.csv");
    CsvWriter writer(csv, {"round", "clients", "samples", "fedavg_bytes", "ntkfl_bytes", "cp_ntkfl_bytes"});
    std::uint64_t tot_f = 0;
    std::uint64_t tot_n = 0;
    std::uint64_t tot_c = 0;
    for (std::size_t r = 1; r <= rc.rounds; ++r) {
        const auto ids = sample_clients(rc.clients_total, rc.clients_per_round, rc.seed, r);
        std::vector<std::size_t> sizes;
        std::vector<std::size_t> sub;
        for (std::size_t id : ids) {
            const std::size_t n = data.partition.assignment[id].size();
            sizes.push_back(n);
            sub.push_back(std::max<std::size_t>(
                1, static_cast<std::size_t>(std::floor(cfg.cp.beta * static_cast<double>(n) + 1e-9))));
        }
        const auto f = comm_cost_fedavg(ids.size(), d);
        const auto n = comm_cost_ntkfl(sizes, d2, d);
        const auto c = comm_cost_cp(sub, d2, d_cp, cfg.cp.sparsity);
        tot_f += f;
        tot_n += n;
        tot_c += c;
        std::size_t samples = 0;
        for (std::size_t s : sizes) {
            samples += s;
        }
        writer.row({std::to_string(r), std::to_string(ids.size()), std::to_string(samples), std::to_string(f),
                    std::to_string(n), std::to_string(c)});
    }
    log << "uplink over " << rc.rounds << " rounds: fedavg " << static_cast<double>(tot_f) / 1e6 << " MB, ntkfl "
        << static_cast<double>(tot_n) / 1e6 << " MB, cp-ntkfl " << static_cast<double>(tot_c) / 1e6 << " MB\n";
    return exit_ok;
}

} // namespace ntkfed
