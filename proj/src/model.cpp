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

#include "ntkfed/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "ntkfed/error.hpp"
#include "ntkfed/parallel.hpp"
#include "ntkfed/rng.hpp"

namespace ntkfed {

namespace {

double dot(const double* a, const double* b, std::size_t n) noexcept {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        acc += a[k] * b[k];
    }
    return acc;
}

void check_input(const ModelConfig& cfg, std::size_t cols, const char* op) {
    if (cols != cfg.input_dim) {
        throw ShapeError(std::string(op) + ": input has " + std::to_string(cols) + " features, model expects " +
                         std::to_string(cfg.input_dim));
    }
}

void check_weights(const ModelWeights& weights, const ModelConfig& cfg, const char* op) {
    if (weights.w.size() != cfg.param_count()) {
        throw ShapeError(std::string(op) + ": weight vector has " + std::to_string(weights.w.size()) +
                         " entries, model expects " + std::to_string(cfg.param_count()));
    }
    if (cfg.variant == Variant::theory && weights.output_signs.size() != cfg.hidden) {
        throw ShapeError(std::string(op) + ": theory model needs one output sign per hidden unit");
    }
}

// Pre-activations z_r for one sample.
void hidden_preactivation(const ModelWeights& weights, const ModelConfig& cfg, const double* x, double* z) {
    const double* w1 = weights.w.data();
    const std::size_t d1 = cfg.input_dim;
    for (std::size_t r = 0; r < cfg.hidden; ++r) {
        z[r] = dot(w1 + r * d1, x, d1);
    }
    if (cfg.variant == Variant::experiment) {
        const double* b1 = weights.w.data() + cfg.hidden * d1;
        for (std::size_t r = 0; r < cfg.hidden; ++r) {
            z[r] += b1[r];
        }
    }
}

// Output of one sample given its pre-activations.
void output_from_hidden(const ModelWeights& weights, const ModelConfig& cfg, const double* z, double* out) {
    const std::size_t n = cfg.hidden;
    if (cfg.variant == Variant::theory) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            if (z[r] > 0.0) {
                acc += weights.output_signs[r] * z[r];
            }
        }
        out[0] = acc / std::sqrt(static_cast<double>(n));
        return;
    }
    const std::size_t d1 = cfg.input_dim;
    const double* w2 = weights.w.data() + n * d1 + n;
    const double* b2 = w2 + cfg.output_dim * n;
    for (std::size_t j = 0; j < cfg.output_dim; ++j) {
        double acc = 0.0;
        const double* row = w2 + j * n;
        for (std::size_t r = 0; r < n; ++r) {
            if (z[r] > 0.0) {
                acc += row[r] * z[r];
            }
        }
        out[j] = acc + b2[j];
    }
}

} // namespace

ModelConfig ModelConfig::experiment(std::size_t d1, std::size_t n, std::size_t d2) {
    return ModelConfig{d1, n, d2, Variant::experiment};
}

ModelConfig ModelConfig::theory(std::size_t d1, std::size_t n) { return ModelConfig{d1, n, 1, Variant::theory}; }

std::size_t ModelConfig::param_count() const noexcept {
    if (variant == Variant::theory) {
        return hidden * input_dim;
    }
    return hidden * input_dim + hidden + output_dim * hidden + output_dim;
}

void ModelConfig::validate() const {
    if (input_dim < 1 || hidden < 1 || output_dim < 1) {
        throw DomainError("model: input_dim, hidden and output_dim must all be >= 1");
    }
    if (variant == Variant::theory && output_dim != 1) {
        throw DomainError("model: theory variant requires output_dim = 1");
    }
}

const Segment& ModelWeights::segment(std::string_view name) const {
    for (const auto& s : layout) {
        if (s.name == name) {
            return s;
        }
    }
    throw DomainError("model: no weight segment named " + std::string(name));
}

std::vector<Segment> make_layout(const ModelConfig& cfg) {
    const std::size_t n = cfg.hidden;
    const std::size_t d1 = cfg.input_dim;
    if (cfg.variant == Variant::theory) {
        return {{"V", 0, n, d1}};
    }
    const std::size_t d2 = cfg.output_dim;
    return {
        {"W1", 0, n, d1},
        {"b1", n * d1, n, 1},
        {"W2", n * d1 + n, d2, n},
        {"b2", n * d1 + n + d2 * n, d2, 1},
    };
}

ModelWeights init_weights(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ModelWeights weights;
    weights.layout = make_layout(cfg);
    weights.w.assign(cfg.param_count(), 0.0);

    Philox gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t n = cfg.hidden;
    const std::size_t d1 = cfg.input_dim;

    if (cfg.variant == Variant::theory) {
        for (double& v : weights.w) {
            v = normal(gen);
        }
        weights.output_signs.resize(n);
        std::bernoulli_distribution coin(0.5);
        for (double& c : weights.output_signs) {
            c = coin(gen) ? 1.0 : -1.0;
        }
        return weights;
    }

    const double s1 = 1.0 / std::sqrt(static_cast<double>(d1));
    for (std::size_t i = 0; i < n * d1; ++i) {
        weights.w[i] = s1 * normal(gen);
    }
    const double s2 = 1.0 / std::sqrt(static_cast<double>(n));
    const std::size_t w2 = n * d1 + n;
    for (std::size_t i = 0; i < cfg.output_dim * n; ++i) {
        weights.w[w2 + i] = s2 * normal(gen);
    }
    return weights;
}

ModelWeights with_values(const ModelWeights& like, std::vector<double> w) {
    if (w.size() != like.w.size()) {
        throw ShapeError("with_values: weight length mismatch");
    }
    ModelWeights out;
    out.w = std::move(w);
    out.layout = like.layout;
    out.output_signs = like.output_signs;
    return out;
}

Matrix forward(const ModelWeights& weights, const ModelConfig& cfg, const Matrix& X) {
    check_input(cfg, X.cols(), "forward");
    check_weights(weights, cfg, "forward");
    Matrix out(X.rows(), cfg.output_dim);
    parallel_for(0, X.rows(), [&](std::size_t i) {
        std::vector<double> z(cfg.hidden);
        hidden_preactivation(weights, cfg, X.row(i).data(), z.data());
        output_from_hidden(weights, cfg, z.data(), out.row(i).data());
    });
    return out;
}

double loss(const Matrix& pred, const Matrix& Y) {
    if (pred.rows() != Y.rows() || pred.cols() != Y.cols()) {
        throw ShapeError("loss: prediction and target shapes differ");
    }
    if (pred.rows() == 0 || pred.cols() == 0) {
        return 0.0;
    }
    double acc = 0.0;
    auto p = pred.data();
    auto y = Y.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double r = p[i] - y[i];
        acc += 0.5 * r * r;
    }
    return acc / static_cast<double>(pred.rows() * pred.cols());
}

Matrix per_sample_jacobian(const ModelWeights& weights, const ModelConfig& cfg, std::span<const double> x) {
    check_input(cfg, x.size(), "per_sample_jacobian");
    check_weights(weights, cfg, "per_sample_jacobian");
    Matrix jac(cfg.output_dim, cfg.param_count());

    const std::size_t n = cfg.hidden;
    const std::size_t d1 = cfg.input_dim;
    std::vector<double> z(n);
    hidden_preactivation(weights, cfg, x.data(), z.data());

    if (cfg.variant == Variant::theory) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(n));
        auto row = jac.row(0);
        for (std::size_t r = 0; r < n; ++r) {
            if (z[r] > 0.0) {
                const double g = scale * weights.output_signs[r];
                for (std::size_t k = 0; k < d1; ++k) {
                    row[r * d1 + k] = g * x[k];
                }
            }
        }
        return jac;
    }

    const double* w2 = weights.w.data() + n * d1 + n;
    const std::size_t off_b1 = n * d1;
    const std::size_t off_w2 = off_b1 + n;
    const std::size_t off_b2 = off_w2 + cfg.output_dim * n;
    // one backward pass per output component j
    for (std::size_t j = 0; j < cfg.output_dim; ++j) {
        auto row = jac.row(j);
        for (std::size_t r = 0; r < n; ++r) {
            if (z[r] > 0.0) {
                const double delta = w2[j * n + r];
                for (std::size_t k = 0; k < d1; ++k) {
                    row[r * d1 + k] = delta * x[k];
                }
                row[off_b1 + r] = delta;
                row[off_w2 + j * n + r] = z[r];
            }
        }
        row[off_b2 + j] = 1.0;
    }
    return jac;
}

Tensor3 batch_jacobian(const ModelWeights& weights, const ModelConfig& cfg, const Matrix& X) {
    check_input(cfg, X.cols(), "batch_jacobian");
    check_weights(weights, cfg, "batch_jacobian");
    Tensor3 jac(X.rows(), cfg.output_dim, cfg.param_count());
    parallel_for(0, X.rows(), [&](std::size_t i) {
        const Matrix slice = per_sample_jacobian(weights, cfg, X.row(i));
        std::copy(slice.data().begin(), slice.data().end(), jac.slice(i).begin());
    });
    return jac;
}

std::vector<double> batch_gradient(const ModelWeights& weights, const ModelConfig& cfg, const Batch& batch) {
    check_input(cfg, batch.X.cols(), "batch_gradient");
    check_weights(weights, cfg, "batch_gradient");
    if (batch.Y.rows() != batch.X.rows() || batch.Y.cols() != cfg.output_dim) {
        throw ShapeError("batch_gradient: targets must be N x d2");
    }
    const std::size_t n = cfg.hidden;
    const std::size_t d1 = cfg.input_dim;
    const std::size_t d2 = cfg.output_dim;
    const std::size_t N = batch.size();
    std::vector<double> grad(cfg.param_count(), 0.0);
    if (N == 0) {
        return grad;
    }
    const double scale = 1.0 / static_cast<double>(N * d2);

    std::vector<double> z(n);
    std::vector<double> out(d2);
    std::vector<double> delta_out(d2);
    std::vector<double> delta_hidden(n);
    for (std::size_t i = 0; i < N; ++i) {
        const double* x = batch.X.row(i).data();
        hidden_preactivation(weights, cfg, x, z.data());
        output_from_hidden(weights, cfg, z.data(), out.data());
        for (std::size_t j = 0; j < d2; ++j) {
            delta_out[j] = scale * (out[j] - batch.Y(i, j));
        }

        if (cfg.variant == Variant::theory) {
            const double s = delta_out[0] / std::sqrt(static_cast<double>(n));
            for (std::size_t r = 0; r < n; ++r) {
                if (z[r] > 0.0) {
                    const double g = s * weights.output_signs[r];
                    double* gv = grad.data() + r * d1;
                    for (std::size_t k = 0; k < d1; ++k) {
                        gv[k] += g * x[k];
                    }
                }
            }
            continue;
        }

        const double* w2 = weights.w.data() + n * d1 + n;
        double* g_b1 = grad.data() + n * d1;
        double* g_w2 = g_b1 + n;
        double* g_b2 = g_w2 + d2 * n;
        for (std::size_t r = 0; r < n; ++r) {
            delta_hidden[r] = 0.0;
        }
        for (std::size_t j = 0; j < d2; ++j) {
            const double dj = delta_out[j];
            g_b2[j] += dj;
            for (std::size_t r = 0; r < n; ++r) {
                if (z[r] > 0.0) {
                    g_w2[j * n + r] += dj * z[r];
                    delta_hidden[r] += w2[j * n + r] * dj;
                }
            }
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (z[r] > 0.0) {
                const double dh = delta_hidden[r];
                g_b1[r] += dh;
                double* gw = grad.data() + r * d1;
                for (std::size_t k = 0; k < d1; ++k) {
                    gw[k] += dh * x[k];
                }
            }
        }
    }
    return grad;
}

} // namespace ntkfed
