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

#ifndef NTKFED_COMMANDS_HPP
#define NTKFED_COMMANDS_HPP

#include <filesystem>
#include <ostream>
#include <string>

#include "ntkfed/config.hpp"

namespace ntkfed {

/// Exit codes shared by the subcommands.
enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_usage = 2 };

/// partition.csv (client, sample, label) and partition_summary.csv.
int cmd_partition(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

/// metrics.csv, one row per round, and weights.bin with the final weights.
int cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

/// compare.csv: rounds to the target accuracy and uplink volume per scheme.
int cmd_compare(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

/// verify.csv; non-zero exit if any check fails. `only` selects one group.
int cmd_verify(const ExperimentConfig& cfg, const std::string& only, const std::filesystem::path& out_dir,
               std::ostream& log);

/// comm_report.csv: per-round uplink bytes of each scheme on the sampled cohorts.
int cmd_comm_report(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

} // namespace ntkfed

#endif // NTKFED_COMMANDS_HPP
