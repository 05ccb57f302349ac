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

#ifndef NTKFED_NTK_ENGINE_HPP
#define NTKFED_NTK_ENGINE_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "ntkfed/linalg.hpp"
#include "ntkfed/model.hpp"

namespace ntkfed {

/// One client's upload for a round: per-sample Jacobians (dense or top-k
/// compressed), labels, and outputs at the broadcast weights.
struct ClientUpdate {
    std::variant<Tensor3, SparseTensor3> jacobian;
    Matrix labels;  ///< N_m x d2
    Matrix outputs; ///< f(w^(k); X_m), N_m x d2
    std::size_t n_samples = 0;
    std::size_t client_id = 0;

    std::size_t weight_dim() const;
    std::size_t output_dim() const;
    void validate() const;
};

/// Origin of a row of the global state.
struct Provenance {
    std::size_t client_id = 0;
    std::size_t local_index = 0;
    bool operator==(const Provenance&) const = default;
};

/// Server-side view of a round after assembling the cohort's uploads.
struct GlobalState {
    Tensor3 jacobian; ///< N_k x d2 x d
    Matrix labels;    ///< N_k x d2
    Matrix outputs;   ///< f^(k)(X^(k)), N_k x d2
    Matrix kernel;    ///< N_k x N_k, empty until build_kernel
    double eta = 0.1;
    std::vector<Provenance> provenance;

    std::size_t samples() const noexcept { return labels.rows(); }
    bool has_kernel() const noexcept { return !kernel.empty(); }
};

/// Discrete function evolution f^(u+1) = f^(u) - (eta/N)·Θ·(f^(u) - Y).
struct FunctionEvolution {
    std::vector<std::size_t> recorded_steps; ///< ascending
    std::vector<Matrix> outputs;             ///< f^(t) at each recorded step
    std::vector<Matrix> residual_sums;       ///< R(t) = eta/(N d2) Σ_{u<t} (Y - f^(u))
    std::vector<double> residual_sq;         ///< ||f^(u) - Y||_F^2 for u = 0..t_max
    std::vector<double> residual_max;        ///< max_i |Y - f^(u)| for u = 0..t_max

    std::size_t index_of(std::size_t t) const;
    const Matrix& output_at(std::size_t t) const { return outputs[index_of(t)]; }
    const Matrix& residual_at(std::size_t t) const { return residual_sums[index_of(t)]; }
};

/// Loss of candidate weights, evaluated by whoever holds the evaluation data.
using CandidateLoss = std::function<double(const ModelWeights&)>;

struct EvolutionResult {
    std::vector<std::size_t> t_grid;
    std::vector<double> losses;          ///< one per grid point
    std::size_t chosen_t = 0;
    std::size_t chosen_index = 0;
    ModelWeights next_weights;           ///< w^(k, chosen_t)
    std::vector<double> residual_history; ///< ||f^(u) - Y||^2 for u = 0..max(grid)
    Matrix linearized_outputs;           ///< f^(k, chosen_t) from the function evolution
};

/// Stacks client uploads in client order, then local order. Compressed
/// tensors are densified. The kernel is left unset.
GlobalState assemble_global(std::vector<ClientUpdate> updates);

/// Θ_ij = <J_i, J_j>_F / d2, computed in fixed 4x4 sample tiles so every entry
/// follows the same summation order regardless of its position.
Matrix build_kernel(const Tensor3& jacobian);

/// Runs the discrete recursion to t_max, snapshotting f and R at `record`
/// (t_max is always recorded). Throws DivergenceError on non-finite values.
FunctionEvolution evolve_function(const GlobalState& state, std::size_t t_max, std::span<const std::size_t> record = {});

/// w = w_k + Σ_j (J_{:j:})ᵀ R_{:j}.
ModelWeights evolve_weights(const GlobalState& state, const Matrix& residual_sum, const ModelWeights& w_k);

/// evolve_weights for several residual matrices in one pass over J.
std::vector<ModelWeights> evolve_weights(const GlobalState& state, std::span<const Matrix> residual_sums,
                                         const ModelWeights& w_k);

/// Materializes w^(k,t) for every grid point from one evolution sweep and
/// keeps the one with the smallest loss (smallest t on ties).
EvolutionResult select_t(const GlobalState& state, std::span<const std::size_t> t_grid, const ModelWeights& w_k,
                         const CandidateLoss& loss);

/// Loss of the actual network on a fixed batch.
CandidateLoss network_loss(const ModelConfig& cfg, Batch batch);

} // namespace ntkfed

#endif // NTKFED_NTK_ENGINE_HPP
