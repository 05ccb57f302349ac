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

#ifndef NTKFED_MODEL_HPP
#define NTKFED_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntkfed/linalg.hpp"

namespace ntkfed {

/// experiment: ReLU MLP with biases, both layers trained.
/// theory: f(x) = n^{-1/2} Σ_r c_r relu(v_rᵀx), c_r fixed at ±1, single output.
enum class Variant { experiment, theory };

struct ModelConfig {
    std::size_t input_dim = 1;  ///< d1
    std::size_t hidden = 1;     ///< n
    std::size_t output_dim = 1; ///< d2
    Variant variant = Variant::experiment;

    static ModelConfig experiment(std::size_t d1, std::size_t n, std::size_t d2);
    static ModelConfig theory(std::size_t d1, std::size_t n);

    /// Number of trainable weights d.
    std::size_t param_count() const noexcept;
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

struct Segment {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool operator==(const Segment&) const = default;
};

struct ModelWeights {
    std::vector<double> w;              ///< flattened trainable weights
    std::vector<Segment> layout;        ///< segment map back to layer shapes
    std::vector<double> output_signs;   ///< c_r of the theory variant (not trained)

    std::size_t size() const noexcept { return w.size(); }
    const Segment& segment(std::string_view name) const;
    bool operator==(const ModelWeights&) const = default;
};

/// Inputs and targets. Targets are one-hot rows for classification data.
struct Batch {
    Matrix X;
    Matrix Y;

    std::size_t size() const noexcept { return X.rows(); }
};

std::vector<Segment> make_layout(const ModelConfig& cfg);

ModelWeights init_weights(const ModelConfig& cfg, std::uint64_t seed);

/// Same layout/signs as `like`, different trainable vector.
ModelWeights with_values(const ModelWeights& like, std::vector<double> w);

Matrix forward(const ModelWeights& weights, const ModelConfig& cfg, const Matrix& X);

/// Halved MSE averaged over samples and outputs.
double loss(const Matrix& pred, const Matrix& Y);

/// d2 x d matrix; row j is the gradient of output j w.r.t. the weights.
Matrix per_sample_jacobian(const ModelWeights& weights, const ModelConfig& cfg, std::span<const double> x);

/// N x d2 x d tensor; slice i is the Jacobian of sample i.
Tensor3 batch_jacobian(const ModelWeights& weights, const ModelConfig& cfg, const Matrix& X);

/// Gradient of loss(forward(X), Y) w.r.t. the trainable weights.
std::vector<double> batch_gradient(const ModelWeights& weights, const ModelConfig& cfg, const Batch& batch);

} // namespace ntkfed

#endif // NTKFED_MODEL_HPP
