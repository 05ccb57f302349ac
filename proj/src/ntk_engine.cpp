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

#include "ntkfed/ntk_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "ntkfed/error.hpp"
#include "ntkfed/parallel.hpp"

namespace ntkfed {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Matrix& m) {
    return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}
MutMap view(Matrix& m) {
    return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

// -- Gram kernel ---------------------------------------------------------------

typedef double lane8 __attribute__((vector_size(64)));

constexpr std::size_t kTile = 4;
constexpr std::size_t kChunk = 512;     // weights per k-chunk
constexpr std::size_t kBlockTiles = 32; // j-tiles per block

inline lane8 load8(const double* p) noexcept {
    lane8 v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

// 4x4 block of partial dot products over [0, len). Every output entry sees
// the identical operation sequence, so results do not depend on tile position.
void tile_dot(const double* const a[kTile], const double* const b[kTile], std::size_t len,
              double out[kTile][kTile]) noexcept {
    lane8 acc[kTile][kTile];
    for (auto& row : acc) {
        for (auto& v : row) {
            v = lane8{0, 0, 0, 0, 0, 0, 0, 0};
        }
    }
    std::size_t k = 0;
    for (; k + 8 <= len; k += 8) {
        const lane8 a0 = load8(a[0] + k);
        const lane8 a1 = load8(a[1] + k);
        const lane8 a2 = load8(a[2] + k);
        const lane8 a3 = load8(a[3] + k);
        for (std::size_t c = 0; c < kTile; ++c) {
            const lane8 bv = load8(b[c] + k);
            acc[0][c] += a0 * bv;
            acc[1][c] += a1 * bv;
            acc[2][c] += a2 * bv;
            acc[3][c] += a3 * bv;
        }
    }
    for (std::size_t r = 0; r < kTile; ++r) {
        for (std::size_t c = 0; c < kTile; ++c) {
            const lane8 v = acc[r][c];
            double s = ((v[0] + v[1]) + (v[2] + v[3])) + ((v[4] + v[5]) + (v[6] + v[7]));
            for (std::size_t kk = k; kk < len; ++kk) {
                s += a[r][kk] * b[c][kk];
            }
            out[r][c] = s;
        }
    }
}

void check_state(const GlobalState& state, const char* op) {
    const std::size_t n = state.samples();
    if (state.outputs.rows() != n || state.outputs.cols() != state.labels.cols()) {
        throw ShapeError(std::string(op) + ": outputs and labels disagree in shape");
    }
    if (!state.has_kernel() || state.kernel.rows() != n || state.kernel.cols() != n) {
        throw ShapeError(std::string(op) + ": kernel missing or not N_k x N_k");
    }
    if (!(state.eta > 0.0)) {
        throw DomainError(std::string(op) + ": eta must be > 0");
    }
}

} // namespace

std::size_t ClientUpdate::weight_dim() const {
    return std::visit([](const auto& t) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Tensor3>) {
            return t.d();
        } else {
            return t.d;
        }
    }, jacobian);
}

std::size_t ClientUpdate::output_dim() const { return labels.cols(); }

void ClientUpdate::validate() const {
    const auto [n, d2] = std::visit([](const auto& t) -> std::pair<std::size_t, std::size_t> {
        if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Tensor3>) {
            return {t.n(), t.d2()};
        } else {
            return {t.n, t.d2};
        }
    }, jacobian);
    if (n != n_samples || labels.rows() != n_samples || outputs.rows() != n_samples) {
        throw ShapeError("client " + std::to_string(client_id) + ": row counts disagree with n_samples");
    }
    if (d2 != labels.cols() || outputs.cols() != labels.cols()) {
        throw ShapeError("client " + std::to_string(client_id) + ": output dimension mismatch");
    }
}

std::size_t FunctionEvolution::index_of(std::size_t t) const {
    auto it = std::lower_bound(recorded_steps.begin(), recorded_steps.end(), t);
    if (it == recorded_steps.end() || *it != t) {
        throw DomainError("evolution: step " + std::to_string(t) + " was not recorded");
    }
    return static_cast<std::size_t>(it - recorded_steps.begin());
}

GlobalState assemble_global(std::vector<ClientUpdate> updates) {
    if (updates.empty()) {
        throw DomainError("assemble_global: no client updates");
    }
    for (const auto& u : updates) {
        u.validate();
    }
    const std::size_t d2 = updates.front().output_dim();
    const std::size_t d = updates.front().weight_dim();
    std::size_t total = 0;
    for (const auto& u : updates) {
        if (u.output_dim() != d2 || u.weight_dim() != d) {
            throw ShapeError("assemble_global: client " + std::to_string(u.client_id) +
                             " disagrees with the cohort's d2/d");
        }
        total += u.n_samples;
    }

    GlobalState state;
    state.jacobian = Tensor3(total, d2, d);
    state.labels = Matrix(total, d2);
    state.outputs = Matrix(total, d2);
    state.provenance.reserve(total);

    std::size_t row = 0;
    for (auto& u : updates) {
        auto dst = state.jacobian.data().subspan(row * d2 * d, u.n_samples * d2 * d);
        if (const auto* dense = std::get_if<Tensor3>(&u.jacobian)) {
            std::copy(dense->data().begin(), dense->data().end(), dst.begin());
        } else {
            const auto& sparse = std::get<SparseTensor3>(u.jacobian);
            for (const auto& e : sparse.entries) {
                dst[e.index] = e.value;
            }
        }
        u.jacobian = Tensor3{}; // release the client copy early
        for (std::size_t i = 0; i < u.n_samples; ++i) {
            std::copy(u.labels.row(i).begin(), u.labels.row(i).end(), state.labels.row(row + i).begin());
            std::copy(u.outputs.row(i).begin(), u.outputs.row(i).end(), state.outputs.row(row + i).begin());
            state.provenance.push_back({u.client_id, i});
        }
        row += u.n_samples;
    }
    return state;
}

Matrix build_kernel(const Tensor3& jacobian) {
    const std::size_t n = jacobian.n();
    const std::size_t len = jacobian.slice_size();
    Matrix gram(n, n);
    if (n == 0 || len == 0) {
        return gram;
    }
    const std::size_t tiles = (n + kTile - 1) / kTile;
    const double* base = jacobian.data().data();
    auto slice_ptr = [&](std::size_t i) { return base + std::min(i, n - 1) * len; };

    for (std::size_t k0 = 0; k0 < len; k0 += kChunk) {
        const std::size_t kn = std::min(kChunk, len - k0);
        for (std::size_t jb = 0; jb < tiles; jb += kBlockTiles) {
            const std::size_t jb_end = std::min(tiles, jb + kBlockTiles);
            // each row tile owns rows [4ti, 4ti+4) of the upper triangle
            parallel_for(0, std::min(tiles, jb_end), [&](std::size_t ti) {
                const double* a[kTile];
                for (std::size_t r = 0; r < kTile; ++r) {
                    a[r] = slice_ptr(ti * kTile + r) + k0;
                }
                for (std::size_t tj = std::max(ti, jb); tj < jb_end; ++tj) {
                    const double* b[kTile];
                    for (std::size_t c = 0; c < kTile; ++c) {
                        b[c] = slice_ptr(tj * kTile + c) + k0;
                    }
                    double block[kTile][kTile];
                    tile_dot(a, b, kn, block);
                    for (std::size_t r = 0; r < kTile; ++r) {
                        const std::size_t i = ti * kTile + r;
                        for (std::size_t c = 0; c < kTile; ++c) {
                            const std::size_t j = tj * kTile + c;
                            if (i < n && j < n && i <= j) {
                                gram(i, j) += block[r][c];
                            }
                        }
                    }
                }
            });
        }
    }

    const double d2 = static_cast<double>(jacobian.d2());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = gram(i, j) / d2;
            gram(i, j) = v;
            gram(j, i) = v;
        }
    }
    return gram;
}

FunctionEvolution evolve_function(const GlobalState& state, std::size_t t_max, std::span<const std::size_t> record) {
    check_state(state, "evolve_function");
    const std::size_t n = state.samples();
    const std::size_t d2 = state.labels.cols();

    FunctionEvolution ev;
    ev.recorded_steps.assign(record.begin(), record.end());
    ev.recorded_steps.push_back(t_max);
    std::sort(ev.recorded_steps.begin(), ev.recorded_steps.end());
    ev.recorded_steps.erase(std::unique(ev.recorded_steps.begin(), ev.recorded_steps.end()), ev.recorded_steps.end());
    if (ev.recorded_steps.back() > t_max) {
        throw DomainError("evolve_function: recorded step beyond t_max");
    }
    ev.residual_sq.reserve(t_max + 1);
    ev.residual_max.reserve(t_max + 1);

    const double step = state.eta / static_cast<double>(n);
    const double r_scale = state.eta / static_cast<double>(n * d2);

    Matrix f = state.outputs;
    Matrix err(n, d2);     // f - Y
    Matrix acc(n, d2);     // Σ (Y - f^(u))
    Matrix update(n, d2);
    std::size_t next_record = 0;

    auto snapshot = [&](std::size_t t) {
        while (next_record < ev.recorded_steps.size() && ev.recorded_steps[next_record] == t) {
            ev.outputs.push_back(f);
            ev.residual_sums.push_back(r_scale * acc);
            ++next_record;
        }
    };

    for (std::size_t u = 0;; ++u) {
        double sq = 0.0;
        double mx = 0.0;
        auto fd = f.data();
        auto yd = state.labels.data();
        auto ed = err.data();
        for (std::size_t i = 0; i < fd.size(); ++i) {
            ed[i] = fd[i] - yd[i];
            sq += ed[i] * ed[i];
            mx = std::max(mx, std::abs(ed[i]));
        }
        if (!std::isfinite(sq)) {
            throw DivergenceError("evolve_function: non-finite residual at step " + std::to_string(u) +
                                  " (eta too large?)");
        }
        ev.residual_sq.push_back(sq);
        ev.residual_max.push_back(mx);
        snapshot(u);
        if (u == t_max) {
            break;
        }
        auto ad = acc.data();
        for (std::size_t i = 0; i < ad.size(); ++i) {
            ad[i] -= ed[i];
        }
        view(update).noalias() = view(state.kernel) * view(err);
        auto ud = update.data();
        for (std::size_t i = 0; i < fd.size(); ++i) {
            fd[i] -= step * ud[i];
        }
    }
    return ev;
}

std::vector<ModelWeights> evolve_weights(const GlobalState& state, std::span<const Matrix> residual_sums,
                                         const ModelWeights& w_k) {
    const std::size_t rows = state.jacobian.n() * state.jacobian.d2();
    const std::size_t d = state.jacobian.d();
    if (w_k.size() != d) {
        throw ShapeError("evolve_weights: weight vector has " + std::to_string(w_k.size()) +
                         " entries, Jacobian has " + std::to_string(d));
    }
    const std::size_t count = residual_sums.size();
    RowMat stacked(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(count));
    for (std::size_t c = 0; c < count; ++c) {
        const Matrix& r = residual_sums[c];
        if (r.rows() != state.jacobian.n() || r.cols() != state.jacobian.d2()) {
            throw ShapeError("evolve_weights: residual matrix must be N_k x d2");
        }
        auto rd = r.data(); // row-major (i, j) matches the slice-major Jacobian rows
        for (std::size_t k = 0; k < rows; ++k) {
            stacked(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = rd[k];
        }
    }

    RowMat delta(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(count));
    if (rows > 0) {
        ConstMap jac(state.jacobian.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
        delta.noalias() = jac.transpose() * stacked;
    } else {
        delta.setZero();
    }

    std::vector<ModelWeights> out;
    out.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        std::vector<double> w = w_k.w;
        for (std::size_t k = 0; k < d; ++k) {
            w[k] += delta(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c));
        }
        out.push_back(with_values(w_k, std::move(w)));
    }
    return out;
}

ModelWeights evolve_weights(const GlobalState& state, const Matrix& residual_sum, const ModelWeights& w_k) {
    return std::move(evolve_weights(state, std::span<const Matrix>(&residual_sum, 1), w_k).front());
}

EvolutionResult select_t(const GlobalState& state, std::span<const std::size_t> t_grid, const ModelWeights& w_k,
                         const CandidateLoss& loss) {
    if (t_grid.empty()) {
        throw DomainError("select_t: empty step grid");
    }
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (t_grid[i] == 0 || (i > 0 && t_grid[i] <= t_grid[i - 1])) {
            throw DomainError("select_t: grid must be strictly increasing positive integers");
        }
    }
    const FunctionEvolution ev = evolve_function(state, t_grid.back(), t_grid);

    std::vector<Matrix> residuals;
    residuals.reserve(t_grid.size());
    for (std::size_t t : t_grid) {
        residuals.push_back(ev.residual_at(t));
    }
    std::vector<ModelWeights> candidates = evolve_weights(state, residuals, w_k);

    EvolutionResult result;
    result.t_grid.assign(t_grid.begin(), t_grid.end());
    result.losses.resize(t_grid.size());
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t g = 0; g < t_grid.size(); ++g) {
        double value = std::numeric_limits<double>::infinity();
        if (all_finite(candidates[g].w)) {
            value = loss(candidates[g]);
            if (!std::isfinite(value)) {
                value = std::numeric_limits<double>::infinity();
            }
        }
        result.losses[g] = value;
        if (value < best) {
            best = value;
            result.chosen_index = g;
            found = true;
        }
    }
    if (!found) {
        throw DivergenceError("select_t: every grid candidate produced a non-finite loss");
    }
    result.chosen_t = t_grid[result.chosen_index];
    result.next_weights = std::move(candidates[result.chosen_index]);
    result.residual_history = ev.residual_sq;
    result.linearized_outputs = ev.output_at(result.chosen_t);
    return result;
}

CandidateLoss network_loss(const ModelConfig& cfg, Batch batch) {
    return [cfg, batch = std::move(batch)](const ModelWeights& w) { return loss(forward(w, cfg, batch.X), batch.Y); };
}

} // namespace ntkfed
