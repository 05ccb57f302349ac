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

#ifndef NTKFED_PARALLEL_HPP
#define NTKFED_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace ntkfed {

/// Worker count used by parallel loops. Defaults to NTKFED_THREADS or 1.
std::size_t thread_count() noexcept;
void set_thread_count(std::size_t n) noexcept;

/// Runs body(i) for i in [begin, end) with a static contiguous schedule.
/// Callers must write only to locations owned by index i; the result is then
/// independent of the thread count.
void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& body);

} // namespace ntkfed

#endif // NTKFED_PARALLEL_HPP
