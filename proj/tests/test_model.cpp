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

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "ntkfed/error.hpp"
#include "ntkfed/model.hpp"

using namespace ntkfed;
using ntkfed::test::random_matrix;

namespace {

ModelWeights single_neuron(double v0, double v1) {
    const ModelConfig cfg = ModelConfig::theory(2, 1);
    ModelWeights w = init_weights(cfg, 0);
    w.w = {v0, v1};
    w.output_signs = {1.0};
    return w;
}

// Straight-line evaluator written independently of the library.
Matrix reference_forward(const ModelWeights& w, const ModelConfig& cfg, const Matrix& X) {
    const std::size_t n = cfg.hidden;
    const std::size_t d1 = cfg.input_dim;
    const std::size_t d2 = cfg.output_dim;
    Matrix out(X.rows(), d2);
    for (std::size_t i = 0; i < X.rows(); ++i) {
        for (std::size_t r = 0; r < n; ++r) {
            double pre = 0.0;
            for (std::size_t k = 0; k < d1; ++k) {
                pre += w.w[r * d1 + k] * X(i, k);
            }
            if (cfg.variant == Variant::theory) {
                out(i, 0) += w.output_signs[r] * std::max(pre, 0.0) / std::sqrt(static_cast<double>(n));
                continue;
            }
            const double h = std::max(pre + w.w[n * d1 + r], 0.0);
            for (std::size_t j = 0; j < d2; ++j) {
                out(i, j) += w.w[n * d1 + n + j * n + r] * h;
            }
        }
        if (cfg.variant == Variant::experiment) {
            for (std::size_t j = 0; j < d2; ++j) {
                out(i, j) += w.w[n * d1 + n + d2 * n + j];
            }
        }
    }
    return out;
}

ModelWeights with_random_biases(const ModelConfig& cfg, std::uint64_t seed) {
    ModelWeights w = init_weights(cfg, seed);
    if (cfg.variant == Variant::experiment) {
        Philox g(seed + 1);
        std::normal_distribution<double> normal(0.0, 0.3);
        for (const char* name : {"b1", "b2"}) {
            const Segment& s = w.segment(name);
            for (std::size_t k = 0; k < s.rows * s.cols; ++k) {
                w.w[s.offset + k] = normal(g);
            }
        }
    }
    return w;
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("parameter counts and layout") {
    const ModelConfig e = ModelConfig::experiment(7, 5, 3);
    CHECK(e.param_count() == 5 * 7 + 5 + 3 * 5 + 3);
    const ModelConfig t = ModelConfig::theory(7, 5);
    CHECK(t.param_count() == 35);
    const ModelWeights w = init_weights(t, 1);
    CHECK(w.size() == 35);
    CHECK(w.output_signs.size() == 5);
    CHECK(w.layout.size() == 1);
    CHECK_THROWS_AS((ModelConfig{3, 2, 2, Variant::theory}).validate(), DomainError);
    CHECK_THROWS_AS((ModelConfig{0, 2, 2, Variant::experiment}).validate(), DomainError);
}

TEST_CASE("init_weights is deterministic per seed") {
    const ModelConfig cfg = ModelConfig::experiment(6, 4, 3);
    CHECK(init_weights(cfg, 9) == init_weights(cfg, 9));
    CHECK_FALSE(init_weights(cfg, 9) == init_weights(cfg, 10));
}

TEST_CASE("theory output signs are balanced") {
    const ModelWeights w = init_weights(ModelConfig::theory(2, 10000), 5);
    const double mean = std::accumulate(w.output_signs.begin(), w.output_signs.end(), 0.0) / 10000.0;
    CHECK(std::abs(mean) <= 0.05);
    for (double c : w.output_signs) {
        CHECK((c == 1.0 || c == -1.0));
    }
}

TEST_CASE("experiment init has zero biases and fan-in variance") {
    const ModelConfig cfg = ModelConfig::experiment(400, 300, 2);
    const ModelWeights w = init_weights(cfg, 3);
    const Segment& b1 = w.segment("b1");
    for (std::size_t k = 0; k < b1.rows; ++k) {
        CHECK(w.w[b1.offset + k] == 0.0);
    }
    const Segment& w1 = w.segment("W1");
    double sq = 0.0;
    for (std::size_t k = 0; k < w1.rows * w1.cols; ++k) {
        sq += w.w[w1.offset + k] * w.w[w1.offset + k];
    }
    const double var = sq / static_cast<double>(w1.rows * w1.cols);
    CHECK(var == doctest::Approx(1.0 / 400.0).epsilon(0.02));
    CHECK_THROWS_AS(w.segment("nope"), DomainError);
}

TEST_CASE("single-neuron theory net") {
    const ModelConfig cfg = ModelConfig::theory(2, 1);
    const ModelWeights w = single_neuron(1.0, 0.0);
    CHECK(forward(w, cfg, Matrix{{0, 0}})(0, 0) == 0.0);
    CHECK(forward(w, cfg, Matrix{{2, 0}})(0, 0) == 2.0);
    CHECK(forward(w, cfg, Matrix{{-2, 0}})(0, 0) == 0.0);

    const std::vector<double> active{2, 0};
    const Matrix j = per_sample_jacobian(w, cfg, active);
    CHECK(j(0, 0) == 2.0);
    CHECK(j(0, 1) == 0.0);
    const std::vector<double> dead{-2, 1};
    const Matrix z = per_sample_jacobian(w, cfg, dead);
    CHECK(z(0, 0) == 0.0);
    CHECK(z(0, 1) == 0.0);
}

TEST_CASE("forward matches an independent evaluator") {
    for (std::uint64_t s = 0; s < 6; ++s) {
        const ModelConfig cfg = s % 2 ? ModelConfig::theory(5, 9) : ModelConfig::experiment(5, 9, 4);
        const ModelWeights w = with_random_biases(cfg, 20 + s);
        const Matrix X = random_matrix(7, 5, 30 + s);
        const Matrix f = forward(w, cfg, X);
        const Matrix ref = reference_forward(w, cfg, X);
        CHECK(max_abs_diff(f.data(), ref.data()) <= 1e-12);
        CHECK(forward(w, cfg, X) == f);
    }
    const ModelConfig cfg = ModelConfig::experiment(5, 9, 4);
    CHECK_THROWS_AS(forward(init_weights(cfg, 1), cfg, Matrix(2, 4)), ShapeError);
}

TEST_CASE("theory net is positively homogeneous") {
    const ModelConfig cfg = ModelConfig::theory(6, 50);
    const ModelWeights w = init_weights(cfg, 8);
    const Matrix X = random_matrix(5, 6, 9);
    const Matrix f = forward(w, cfg, X);
    for (double c : {0.5, 2.0, 7.25}) {
        const Matrix fc = forward(w, cfg, c * X);
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(fc(i, 0) == doctest::Approx(c * f(i, 0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("loss examples") {
    const Matrix y = random_matrix(3, 2, 1);
    CHECK(loss(y, y) == 0.0);
    CHECK(loss(Matrix{{3}}, Matrix{{1}}) == 2.0);
    CHECK(loss(Matrix{{1, 1}, {1, 1}}, Matrix(2, 2)) == 0.5);
    CHECK_THROWS_AS(loss(Matrix(2, 2), Matrix(2, 3)), ShapeError);
}

TEST_CASE("batch_jacobian stacks per-sample Jacobians") {
    const ModelConfig cfg = ModelConfig::experiment(4, 6, 3);
    const ModelWeights w = with_random_biases(cfg, 2);
    Matrix X = random_matrix(5, 4, 3);
    const Tensor3 J = batch_jacobian(w, cfg, X);
    for (std::size_t i = 0; i < 5; ++i) {
        const Matrix ji = per_sample_jacobian(w, cfg, X.row(i));
        CHECK(J.horizontal(i) == ji);
    }
    const Tensor3 one = batch_jacobian(w, cfg, Matrix(1, 4, std::vector<double>(X.row(0).begin(), X.row(0).end())));
    CHECK(one.horizontal(0) == J.horizontal(0));

    std::copy(X.row(0).begin(), X.row(0).end(), X.row(3).begin());
    const Tensor3 dup = batch_jacobian(w, cfg, X);
    CHECK(dup.horizontal(0) == dup.horizontal(3));
}

TEST_CASE("jacobian matches central finite differences") {
    const double h = 1e-5;
    for (std::uint64_t s = 0; s < 6; ++s) {
        const ModelConfig cfg = s % 2 ? ModelConfig::theory(4, 8) : ModelConfig::experiment(4, 8, 3);
        const ModelWeights w = with_random_biases(cfg, 60 + s);
        const Matrix x = random_matrix(1, 4, 70 + s);
        const Matrix J = per_sample_jacobian(w, cfg, x.row(0));
        for (std::size_t k = 0; k < w.size(); ++k) {
            ModelWeights up = w;
            ModelWeights dn = w;
            up.w[k] += h;
            dn.w[k] -= h;
            const Matrix fu = forward(up, cfg, x);
            const Matrix fd = forward(dn, cfg, x);
            for (std::size_t j = 0; j < cfg.output_dim; ++j) {
                const double num = (fu(0, j) - fd(0, j)) / (2 * h);
                CHECK(std::abs(num - J(j, k)) <= 1e-5 * std::abs(J(j, k)) + 1e-8);
            }
        }
    }
}

TEST_CASE("batch_gradient is the Jacobian contraction of the residual") {
    const ModelConfig cfg = ModelConfig::experiment(5, 7, 3);
    const ModelWeights w = with_random_biases(cfg, 4);
    Batch b{random_matrix(6, 5, 5), random_matrix(6, 3, 6)};
    const auto g = batch_gradient(w, cfg, b);
    const Tensor3 J = batch_jacobian(w, cfg, b.X);
    const Matrix r = forward(w, cfg, b.X) - b.Y;
    std::vector<double> ref(w.size(), 0.0);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            for (std::size_t k = 0; k < w.size(); ++k) {
                ref[k] += J(i, j, k) * r(i, j) / 18.0;
            }
        }
    }
    CHECK(max_abs_diff(g, ref) <= 1e-12);

    // finite differences of the loss
    const double h = 1e-5;
    for (std::size_t k = 0; k < w.size(); k += 3) {
        ModelWeights up = w;
        ModelWeights dn = w;
        up.w[k] += h;
        dn.w[k] -= h;
        const double num = (loss(forward(up, cfg, b.X), b.Y) - loss(forward(dn, cfg, b.X), b.Y)) / (2 * h);
        CHECK(std::abs(num - g[k]) <= 1e-5 * std::abs(g[k]) + 1e-9);
    }

    const Batch exact{b.X, forward(w, cfg, b.X)};
    const auto zero = batch_gradient(w, cfg, exact);
    CHECK(max_abs(zero) == 0.0);
}

} // TEST_SUITE
