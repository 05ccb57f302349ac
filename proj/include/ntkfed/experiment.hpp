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

#ifndef NTKFED_EXPERIMENT_HPP
#define NTKFED_EXPERIMENT_HPP

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ntkfed/config.hpp"
#include "ntkfed/data.hpp"
#include "ntkfed/federation.hpp"

namespace ntkfed {

/// Training pool, client partition (validation clients last) and test set.
struct PreparedData {
    Dataset train;
    PartitionSpec partition;
    Dataset test;
};

/// Loads or synthesizes the data and partitions it. Every random choice is
/// keyed by a labelled seed derived from cfg.seed.
PreparedData prepare_data(const ExperimentConfig& cfg);

/// Round settings with the seed and client count filled in from the config.
RoundConfig round_config(const ExperimentConfig& cfg, Scheme scheme);

struct RunResult {
    std::vector<RoundMetrics> metrics;
    ModelWeights weights;
    std::string error; ///< set when the run stopped on divergence
};

using RoundCallback = std::function<void(const RoundMetrics&)>;

/// Runs cfg.round.rounds rounds of `scheme`, numbering rounds from 1.
/// `tau` overrides cfg.round.tau when set.
RunResult run_experiment(const ExperimentConfig& cfg, const PreparedData& data, Scheme scheme,
                         std::optional<std::size_t> tau = std::nullopt, const RoundCallback& on_round = {});

struct CompareRow {
    Scheme scheme = Scheme::ntkfl;
    std::size_t tau = 0;                  ///< FedAvg only
    std::optional<std::size_t> reached;   ///< first round with test_acc >= target
    double uplink_mb = 0.0;               ///< cumulative up to `reached` (or the whole run)
    double final_accuracy = 0.0;
    std::vector<RoundMetrics> metrics;
};

/// One row per scheme; FedAvg keeps its best τ from the configured grid
/// (fewest rounds to target, then highest final accuracy).
std::vector<CompareRow> compare_schemes(const ExperimentConfig& cfg, const PreparedData& data);

std::optional<std::size_t> rounds_to_target(const std::vector<RoundMetrics>& metrics, double target);

} // namespace ntkfed

#endif // NTKFED_EXPERIMENT_HPP
