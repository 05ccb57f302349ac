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

#include "ntkfed/rng.hpp"

namespace ntkfed {

namespace {

constexpr std::uint32_t kPhiloxW32A = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW32B = 0xBB67AE85;
constexpr std::uint32_t kPhiloxM4x32A = 0xD2511F53;
constexpr std::uint32_t kPhiloxM4x32B = 0xCD9E8D57;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) noexcept {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(product);
    hi = static_cast<std::uint32_t>(product >> 32);
}

} // namespace

Philox::Philox(std::uint64_t key, std::uint64_t stream) noexcept
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
      counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

std::array<std::uint32_t, 4> Philox::block(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) noexcept {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t lo0, hi0, lo1, hi1;
        mulhilo(kPhiloxM4x32A, ctr[0], lo0, hi0);
        mulhilo(kPhiloxM4x32B, ctr[2], lo1, hi1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kPhiloxW32A;
        key[1] += kPhiloxW32B;
    }
    return ctr;
}

void Philox::refill() noexcept {
    buffer_ = block(counter_, key_);
    // 64-bit block counter in the low words; stream id lives in the high words
    if (++counter_[0] == 0) {
        ++counter_[1];
    }
    used_ = 0;
}

Philox::result_type Philox::operator()() noexcept {
    if (used_ >= 4) {
        refill();
    }
    const std::uint64_t lo = buffer_[used_];
    const std::uint64_t hi = buffer_[used_ + 1];
    used_ += 2;
    return lo | (hi << 32);
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept {
    // FNV-1a over the label, then mixed with the master seed
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : label) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    return splitmix64(splitmix64(master) ^ h);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t a,
                          std::uint64_t b) noexcept {
    std::uint64_t h = derive_seed(master, label);
    h = splitmix64(h ^ splitmix64(a + 0x632BE59BD9B4E019ULL));
    h = splitmix64(h ^ splitmix64(b + 0x8CB92BA72F3D8DD7ULL));
    return h;
}

} // namespace ntkfed
