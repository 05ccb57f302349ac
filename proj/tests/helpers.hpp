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

#ifndef NTKFED_TESTS_HELPERS_HPP
#define NTKFED_TESTS_HELPERS_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include "ntkfed/data.hpp"
#include "ntkfed/linalg.hpp"
#include "ntkfed/rng.hpp"

namespace ntkfed::test {

inline Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
    Philox gen(seed);
    std::normal_distribution<double> normal(0.0, scale);
    Matrix m(r, c);
    for (double& v : m.data()) {
        v = normal(gen);
    }
    return m;
}

inline Tensor3 random_tensor(std::size_t n, std::size_t d2, std::size_t d, std::uint64_t seed) {
    Philox gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor3 t(n, d2, d);
    for (double& v : t.data()) {
        v = normal(gen);
    }
    return t;
}

/// A·Aᵀ, positive semidefinite.
inline Matrix random_psd(std::size_t n, std::uint64_t seed) {
    const Matrix a = random_matrix(n, n, seed);
    return matmul(a, transpose(a));
}

inline Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
    Matrix a = random_matrix(n, n, seed);
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            s(i, j) = 0.5 * (a(i, j) + a(j, i));
        }
    }
    return s;
}

inline double trace(const Matrix& m) {
    double t = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        t += m(i, i);
    }
    return t;
}

/// Random unit-norm inputs.
inline Matrix unit_inputs(std::size_t n, std::size_t d1, std::uint64_t seed) {
    return unit_rows(random_matrix(n, d1, seed));
}

} // namespace ntkfed::test

#endif // NTKFED_TESTS_HELPERS_HPP
