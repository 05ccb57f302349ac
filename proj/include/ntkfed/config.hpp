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

#ifndef NTKFED_CONFIG_HPP
#define NTKFED_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ntkfed/cp.hpp"
#include "ntkfed/federation.hpp"
#include "ntkfed/model.hpp"

namespace ntkfed {

struct DatasetConfig {
    std::string source = "synthetic"; ///< "synthetic" or "idx"
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
    std::size_t synthetic_dim = 128;
    std::size_t classes = 10;
    double class_sep = 2.0;
    std::size_t test_size = 2000;
    bool normalize = true; ///< scale every input row to unit norm

    bool operator==(const DatasetConfig&) const = default;
};

struct PartitionConfig {
    std::size_t clients = 50;
    std::size_t samples_per_client = 120; ///< training pool = clients · samples_per_client
    double alpha = 0.5;
    std::size_t validation_clients = 0;   ///< held out for Selection::validation

    bool operator==(const PartitionConfig&) const = default;
};

struct CompareConfig {
    std::vector<Scheme> schemes{Scheme::ntkfl, Scheme::fedavg};
    double target_accuracy = 0.75;
    std::vector<std::size_t> fedavg_tau_grid{5, 10, 20};

    bool operator==(const CompareConfig&) const = default;
};

struct AnalysisConfig {
    bool record_wall_time = false; ///< wall_ms column is 0 unless enabled
    bool inject_kernel_asymmetry = false; ///< fault hook for the verify command

    bool operator==(const AnalysisConfig&) const = default;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    DatasetConfig dataset;
    PartitionConfig partition;
    std::size_t hidden = 100; ///< experiment MLP width
    RoundConfig round;
    CpConfig cp;
    CompareConfig compare;
    AnalysisConfig analysis;

    /// Cross-field checks; throws ConfigError naming the key.
    void validate() const;
};

bool operator==(const RoundConfig& a, const RoundConfig& b);
bool operator==(const CpConfig& a, const CpConfig& b);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

/// Parses and validates a JSON document. Unknown keys are rejected.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// JSON with every field written out.
std::string serialize_config(const ExperimentConfig& cfg);

} // namespace ntkfed

#endif // NTKFED_CONFIG_HPP
