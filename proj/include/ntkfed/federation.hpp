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

#ifndef NTKFED_FEDERATION_HPP
#define NTKFED_FEDERATION_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ntkfed/data.hpp"
#include "ntkfed/model.hpp"
#include "ntkfed/ntk_engine.hpp"

namespace ntkfed {

enum class Scheme { ntkfl, fedavg, centralized, cp_ntkfl };

std::string_view scheme_name(Scheme s) noexcept;
/// Accepts "ntkfl", "fedavg", "centralized", "cp-ntkfl".
Scheme parse_scheme(std::string_view name);

/// Which data scores the t-grid candidates.
enum class Selection { train_loss, validation };

struct RoundConfig {
    std::size_t clients_total = 50;     ///< M
    std::size_t clients_per_round = 10; ///< M_k
    std::size_t rounds = 40;
    double eta = 0.1;
    std::vector<std::size_t> t_grid{100, 200, 300, 400, 500, 600, 700, 800, 900, 1000,
                                    1100, 1200, 1300, 1400, 1500, 1600, 1700, 1800, 1900, 2000};
    std::size_t tau = 10;          ///< FedAvg local steps
    std::size_t batch_size = 200;  ///< FedAvg mini-batch size
    std::uint64_t seed = 0;
    Scheme scheme = Scheme::ntkfl;
    bool weighted_average = false; ///< FedAvg: weight clients by sample count
    std::size_t central_steps = 100;
    Selection selection = Selection::train_loss;
    bool track_spectrum = true;    ///< record λ_min of the round kernel

    void validate() const;
};

struct RoundMetrics {
    std::size_t round = 0;
    Scheme scheme = Scheme::ntkfl;
    std::size_t chosen = 0;         ///< t for kernel schemes, τ for FedAvg, steps for centralized
    double train_loss = 0.0;        ///< cohort loss at the new weights
    double test_accuracy = 0.0;
    double test_loss = 0.0;
    std::uint64_t uplink_bytes = 0;
    double residual_before = 0.0;   ///< cohort ||f - Y||^2 at the broadcast weights
    double residual_after = 0.0;    ///< cohort ||f - Y||^2 at the new weights
    double lambda_min;              ///< NaN when not tracked
    double wall_ms = 0.0;
    std::size_t cohort_samples = 0;
    std::size_t cohort_clients = 0;

    RoundMetrics();
};

/// Clients' local data. Client m holds rows partition.assignment[m] of `train`.
struct FederatedTask {
    ModelConfig model;
    Dataset train;
    PartitionSpec partition;
    Dataset test;
    /// Evaluation set for Selection::validation (held-out clients' data).
    std::optional<Dataset> validation;
};

struct RoundOutcome {
    ModelWeights weights;
    RoundMetrics metrics;
};

/// M_k of M_total clients, uniform without replacement, ascending ids.
std::vector<std::size_t> sample_clients(std::size_t total, std::size_t per_round, std::uint64_t seed,
                                        std::size_t round);

/// Inputs and one-hot targets for a set of rows.
Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& rows);

/// Rows of every listed client concatenated in client order.
Batch pooled_batch(const FederatedTask& task, const std::vector<std::size_t>& clients);

/// What a client uploads in a plain NTK-FL round.
ClientUpdate client_update(const ModelWeights& w, const ModelConfig& cfg, const Batch& local, std::size_t client_id);

/// Bytes of a dense upload: 8·(N_m·d2·d + 2·N_m·d2).
std::uint64_t dense_upload_bytes(std::size_t n_m, std::size_t d2, std::size_t d) noexcept;

/// Server half of a kernel round: kernel, t selection, metrics that depend
/// only on the state. `loss` scores candidates.
EvolutionResult server_evolve(GlobalState& state, const RoundConfig& rc, const ModelWeights& w,
                              const CandidateLoss& loss, double* lambda_min);

RoundOutcome run_round_ntkfl(const FederatedTask& task, const ModelWeights& w, const RoundConfig& rc,
                             std::size_t round);

RoundOutcome run_round_fedavg(const FederatedTask& task, const ModelWeights& w, const RoundConfig& rc,
                              std::size_t round);

/// τ local mini-batch steps of one client from `w`. Batches follow a seeded
/// permutation per epoch; when batch_size >= N_m every step is full-batch in
/// original order.
ModelWeights local_sgd(const ModelWeights& w, const ModelConfig& cfg, const Batch& local, double eta,
                       std::size_t steps, std::size_t batch_size, std::uint64_t seed);

/// Full-batch gradient descent on the pooled cohort.
RoundOutcome run_centralized(const FederatedTask& task, const ModelWeights& w, const RoundConfig& rc,
                             std::size_t round);

struct Evaluation {
    double accuracy = 0.0;
    double loss = 0.0;
};

/// Accuracy uses argmax with ties to the lowest class index.
Evaluation evaluate(const ModelWeights& w, const ModelConfig& cfg, const Dataset& test);

/// Throws DivergenceError if any weight is non-finite or larger than 1e6.
void check_divergence(const ModelWeights& w, std::string_view where);

} // namespace ntkfed

#endif // NTKFED_FEDERATION_HPP
