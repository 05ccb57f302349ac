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

#include <doctest.h>

#include <array>
#include <cstdlib>
#include <set>

#include "ntkfed/rng.hpp"

using namespace ntkfed;

TEST_SUITE("rng") {

TEST_CASE("philox4x32-10 known-answer vectors") {
    using A4 = std::array<std::uint32_t, 4>;
    using A2 = std::array<std::uint32_t, 2>;
    CHECK(Philox::block(A4{0, 0, 0, 0}, A2{0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox::block(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox::block(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("same key reproduces the stream") {
    Philox a(42);
    Philox b(42);
    Philox c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a();
        CHECK(x == b());
        differs = differs || x != c();
    }
    CHECK(differs);
}

TEST_CASE("derived seeds separate labels and indices") {
    std::set<std::uint64_t> seen;
    for (const char* label : {"init", "partition", "rounds", "synthetic", "projection"}) {
        CHECK(seen.insert(derive_seed(7, label)).second);
    }
    for (std::uint64_t r = 0; r < 50; ++r) {
        for (std::uint64_t c = 0; c < 50; ++c) {
            CHECK(seen.insert(derive_seed(7, "fedavg-batches", r, c)).second);
        }
    }
    CHECK(derive_seed(7, "init") == derive_seed(7, "init"));
    CHECK(derive_seed(7, "init") != derive_seed(8, "init"));
    CHECK(derive_seed(7, "x", 1, 2) != derive_seed(7, "x", 2, 1));
}

TEST_CASE("output bits are balanced") {
    Philox g(2024);
    std::array<int, 64> ones{};
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        const auto x = g();
        for (int b = 0; b < 64; ++b) {
            ones[b] += static_cast<int>((x >> b) & 1U);
        }
    }
    // 5 sigma of a fair coin over 20000 draws is about 354
    for (int b = 0; b < 64; ++b) {
        CHECK(std::abs(ones[b] - draws / 2) < 354);
    }
}

} // TEST_SUITE
