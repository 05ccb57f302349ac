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

#include "ntkfed/experiment.hpp"

#include <algorithm>

#include "ntkfed/cp.hpp"
#include "ntkfed/error.hpp"
#include "ntkfed/rng.hpp"

namespace ntkfed {

namespace {

Dataset maybe_normalize(const Dataset& ds, bool normalize) { return normalize ? unit_normalize(ds) : ds; }

Dataset project_dataset(const Dataset& ds, const ProjectionSpec& spec, bool normalize) {
    Dataset out;
    out.X = cp_features(ds.X, spec, normalize);
    out.labels = ds.labels;
    out.classes = ds.classes;
    return out;
}

} // namespace

PreparedData prepare_data(const ExperimentConfig& cfg) {
    const auto& dc = cfg.dataset;
    const std::size_t pool = cfg.partition.clients * cfg.partition.samples_per_client;
    PreparedData out;

    if (dc.source == "synthetic") {
        SyntheticSpec spec;
        spec.n = pool + dc.test_size;
        spec.dim = dc.synthetic_dim;
        spec.classes = dc.classes;
        spec.seed = derive_seed(cfg.seed, "synthetic");
        spec.class_sep = dc.class_sep;
        auto [train, test] = split_tail(make_synthetic(spec), dc.test_size);
        out.train = std::move(train);
        out.test = std::move(test);
    } else {
        Dataset full = load_idx(dc.train_images, dc.train_labels);
        if (!dc.test_images.empty()) {
            if (full.size() < pool) {
                throw ConfigError("partition: training file holds " + std::to_string(full.size()) +
                                  " samples, fewer than clients · samples_per_client");
            }
            out.train = random_subset(full, pool, derive_seed(cfg.seed, "pool-subset"));
            Dataset test = load_idx(dc.test_images, dc.test_labels);
            out.test = random_subset(test, std::min(dc.test_size, test.size()), derive_seed(cfg.seed, "test-subset"));
        } else {
            if (full.size() < pool + dc.test_size) {
                throw ConfigError("dataset: training file too small for the pool plus dataset.test_size");
            }
            auto [train, test] =
                split_tail(random_subset(full, pool + dc.test_size, derive_seed(cfg.seed, "pool-subset")), dc.test_size);
            out.train = std::move(train);
            out.test = std::move(test);
        }
        out.test.classes = out.train.classes = std::max(out.train.classes, out.test.classes);
    }
    if (out.train.classes != dc.classes) {
        throw ConfigError("dataset.classes is " + std::to_string(dc.classes) + " but the data has " +
                          std::to_string(out.train.classes) + " classes");
    }
    out.train = maybe_normalize(out.train, dc.normalize);
    if (out.test.size() > 0) {
        out.test = maybe_normalize(out.test, dc.normalize);
    }
    out.partition =
        dirichlet_partition(out.train, cfg.partition.clients, cfg.partition.alpha, derive_seed(cfg.seed, "partition"));
    return out;
}

RoundConfig round_config(const ExperimentConfig& cfg, Scheme scheme) {
    RoundConfig rc = cfg.round;
    rc.scheme = scheme;
    rc.seed = derive_seed(cfg.seed, "rounds");
    rc.clients_total = cfg.partition.clients - cfg.partition.validation_clients;
    if (scheme != Scheme::ntkfl && scheme != Scheme::cp_ntkfl) {
        rc.track_spectrum = false;
    }
    return rc;
}

RunResult run_experiment(const ExperimentConfig& cfg, const PreparedData& data, Scheme scheme,
                         std::optional<std::size_t> tau, const RoundCallback& on_round) {
    RoundConfig rc = round_config(cfg, scheme);
    if (tau) {
        rc.tau = *tau;
    }
    rc.validate();

    const std::size_t d1 = data.train.dim();
    const std::size_t active = rc.clients_total;

    FederatedTask task;
    task.train = data.train;
    task.partition.assignment.assign(data.partition.assignment.begin(),
                                     data.partition.assignment.begin() + static_cast<std::ptrdiff_t>(active));
    task.test = data.test;
    if (cfg.partition.validation_clients > 0) {
        std::vector<std::size_t> rows;
        for (std::size_t m = active; m < data.partition.clients(); ++m) {
            const auto& a = data.partition.assignment[m];
            rows.insert(rows.end(), a.begin(), a.end());
        }
        std::sort(rows.begin(), rows.end());
        task.validation = select_rows(data.train, rows);
    }

    KeyServer keys(derive_seed(cfg.seed, "projection"));
    if (scheme == Scheme::cp_ntkfl) {
        cfg.cp.validate(d1);
        task.model = ModelConfig::experiment(cfg.cp.projected_dim, cfg.hidden, data.train.classes);
        // the evaluation party holds the seed as well; the aggregation server never does
        const ProjectionSpec proj = cfg.cp.identity_projection
                                        ? identity_projection(d1, cfg.cp.projected_dim)
                                        : gen_projection(keys.seed_for("evaluator"), d1, cfg.cp.projected_dim);
        if (task.test.size() > 0) {
            task.test = project_dataset(task.test, proj, cfg.cp.normalize_projected);
        }
        if (task.validation) {
            task.validation = project_dataset(*task.validation, proj, cfg.cp.normalize_projected);
        }
    } else {
        task.model = ModelConfig::experiment(d1, cfg.hidden, data.train.classes);
    }

    RunResult result;
    result.weights = init_weights(task.model, derive_seed(cfg.seed, "init"));
    for (std::size_t r = 1; r <= rc.rounds; ++r) {
        RoundOutcome out;
        try {
            switch (scheme) {
            case Scheme::ntkfl:
                out = run_round_ntkfl(task, result.weights, rc, r);
                break;
            case Scheme::fedavg:
                out = run_round_fedavg(task, result.weights, rc, r);
                break;
            case Scheme::centralized:
                out = run_centralized(task, result.weights, rc, r);
                break;
            case Scheme::cp_ntkfl:
                out = run_round_cp_ntkfl(task, result.weights, rc, cfg.cp, keys, r);
                break;
            }
        } catch (const DivergenceError& e) {
            result.error = "round " + std::to_string(r) + ": " + e.what();
            break;
        }
        result.weights = std::move(out.weights);
        result.metrics.push_back(out.metrics);
        if (on_round) {
            on_round(out.metrics);
        }
    }
    return result;
}

std::optional<std::size_t> rounds_to_target(const std::vector<RoundMetrics>& metrics, double target) {
    for (const auto& m : metrics) {
        if (m.test_accuracy >= target) {
            return m.round;
        }
    }
    return std::nullopt;
}

std::vector<CompareRow> compare_schemes(const ExperimentConfig& cfg, const PreparedData& data) {
    std::vector<CompareRow> rows;
    for (Scheme s : cfg.compare.schemes) {
        std::vector<std::optional<std::size_t>> taus;
        if (s == Scheme::fedavg) {
            taus.assign(cfg.compare.fedavg_tau_grid.begin(), cfg.compare.fedavg_tau_grid.end());
        }
        if (taus.empty()) {
            taus.push_back(std::nullopt);
        }
        std::optional<CompareRow> best;
        for (const auto& tau : taus) {
            CompareRow row;
            row.scheme = s;
            row.tau = s == Scheme::fedavg ? tau.value_or(cfg.round.tau) : 0;
            RunResult run = run_experiment(cfg, data, s, tau);
            row.metrics = std::move(run.metrics);
            row.reached = rounds_to_target(row.metrics, cfg.compare.target_accuracy);
            std::uint64_t bytes = 0;
            for (const auto& m : row.metrics) {
                if (row.reached && m.round > *row.reached) {
                    break;
                }
                bytes += m.uplink_bytes;
            }
            row.uplink_mb = static_cast<double>(bytes) / 1e6;
            row.final_accuracy = row.metrics.empty() ? 0.0 : row.metrics.back().test_accuracy;
            const auto key = [](const CompareRow& r) {
                return std::make_pair(r.reached.value_or(static_cast<std::size_t>(-1)), -r.final_accuracy);
            };
            if (!best || key(row) < key(*best)) {
                best = std::move(row);
            }
        }
        rows.push_back(std::move(*best));
    }
    return rows;
}

} // namespace ntkfed
