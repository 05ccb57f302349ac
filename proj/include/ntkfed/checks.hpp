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

#ifndef NTKFED_CHECKS_HPP
#define NTKFED_CHECKS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace ntkfed {

/// Outcome of one verification check.
struct CheckResult {
    std::string group;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct CheckOptions {
    std::uint64_t seed = 20240;
    /// Fault hook: perturbs one kernel entry before the symmetry check.
    bool inject_kernel_asymmetry = false;
};

/// jacobian, kernel, evolution, decay, linearization, gap, shuffle, cp, comm
std::vector<std::string> check_groups();

/// Runs one group. Throws DomainError for an unknown group name.
std::vector<CheckResult> run_check_group(const std::string& group, const CheckOptions& opts);

/// Runs every group, or only `only` when it is non-empty.
std::vector<CheckResult> run_checks(const CheckOptions& opts, const std::string& only = "");

} // namespace ntkfed

#endif // NTKFED_CHECKS_HPP
