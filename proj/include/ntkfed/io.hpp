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

#ifndef NTKFED_IO_HPP
#define NTKFED_IO_HPP

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "ntkfed/federation.hpp"

namespace ntkfed {

/// 17 significant digits; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);

/// Comma-separated rows with a fixed column count. LF line endings.
class CsvWriter {
public:
    CsvWriter(std::ostream& out, std::vector<std::string> header);
    void row(const std::vector<std::string>& cells);

private:
    std::ostream& out_;
    std::size_t columns_;
};

/// round, scheme, chosen_t_or_tau, train_loss, test_acc, uplink_bytes, lambda_min, wall_ms
std::vector<std::string> metrics_header();
std::vector<std::string> metrics_row(const RoundMetrics& m, bool record_wall_time);

/// "NTKW", u32 version, u64 length, then little-endian doubles.
void save_weights(const std::filesystem::path& path, const std::vector<double>& w);
std::vector<double> load_weights(const std::filesystem::path& path);

} // namespace ntkfed

#endif // NTKFED_IO_HPP
