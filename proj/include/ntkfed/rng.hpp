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

#ifndef NTKFED_RNG_HPP
#define NTKFED_RNG_HPP

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace ntkfed {

/// Philox4x32-10 counter-based generator. A (key, stream) pair names an
/// independent sequence; the block counter advances as numbers are drawn.
/// Satisfies UniformRandomBitGenerator with 64-bit output.
class Philox {
public:
    using result_type = std::uint64_t;

    explicit Philox(std::uint64_t key, std::uint64_t stream = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    /// Raw block function: 10 rounds on (counter, key).
    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                              std::array<std::uint32_t, 2> key) noexcept;

private:
    void refill() noexcept;

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 4;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// seed = hash(master, label): adding a new label never perturbs existing streams.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept;

/// Stream keyed by (label, a, b), e.g. ("fedavg-batches", round, client).
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t a,
                          std::uint64_t b = 0) noexcept;

} // namespace ntkfed

#endif // NTKFED_RNG_HPP
