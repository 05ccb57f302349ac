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

#include "ntkfed/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "ntkfed/analysis.hpp"
#include "ntkfed/error.hpp"
#include "ntkfed/rng.hpp"

namespace ntkfed {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double residual_sq(const Matrix& f, const Matrix& y) { return frobenius_norm_sq(f - y); }

void fill_test_metrics(RoundMetrics& m, const FederatedTask& task, const ModelWeights& w) {
    if (task.test.size() == 0) {
        m.test_accuracy = std::numeric_limits<double>::quiet_NaN();
        m.test_loss = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    const Evaluation ev = evaluate(w, task.model, task.test);
    m.test_accuracy = ev.accuracy;
    m.test_loss = ev.loss;
}

} // namespace

RoundMetrics::RoundMetrics() : lambda_min(std::numeric_limits<double>::quiet_NaN()) {}

std::string_view scheme_name(Scheme s) noexcept {
    switch (s) {
    case Scheme::ntkfl:
        return "ntkfl";
    case Scheme::fedavg:
        return "fedavg";
    case Scheme::centralized:
        return "centralized";
    case Scheme::cp_ntkfl:
        return "cp-ntkfl";
    }
    return "unknown";
}

Scheme parse_scheme(std::string_view name) {
    for (Scheme s : {Scheme::ntkfl, Scheme::fedavg, Scheme::centralized, Scheme::cp_ntkfl}) {
        if (scheme_name(s) == name) {
            return s;
        }
    }
    throw ConfigError("unknown scheme \"" + std::string(name) + "\" (expected ntkfl, fedavg, centralized, cp-ntkfl)");
}

void RoundConfig::validate() const {
    if (clients_per_round < 1 || clients_per_round > clients_total) {
        throw ConfigError("round.clients_per_round must lie in [1, clients_total]");
    }
    if (!(eta > 0.0) || !std::isfinite(eta)) {
        throw ConfigError("round.eta must be a positive finite number");
    }
    if (t_grid.empty()) {
        throw ConfigError("round.t_grid must not be empty");
    }
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (t_grid[i] == 0 || (i > 0 && t_grid[i] <= t_grid[i - 1])) {
            throw ConfigError("round.t_grid must be strictly increasing positive integers");
        }
    }
    if (scheme == Scheme::fedavg && tau < 1) {
        throw ConfigError("round.tau must be >= 1 for fedavg");
    }
    if (batch_size < 1) {
        throw ConfigError("round.batch_size must be >= 1");
    }
}

std::vector<std::size_t> sample_clients(std::size_t total, std::size_t per_round, std::uint64_t seed,
                                        std::size_t round) {
    if (per_round > total) {
        throw DomainError("sample_clients: cannot select " + std::to_string(per_round) + " of " +
                          std::to_string(total) + " clients");
    }
    std::vector<std::size_t> ids(total);
    std::iota(ids.begin(), ids.end(), 0);
    Philox gen(derive_seed(seed, "client-sampling", round));
    for (std::size_t i = 0; i < per_round; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, total - 1);
        std::swap(ids[i], ids[pick(gen)]);
    }
    ids.resize(per_round);
    std::sort(ids.begin(), ids.end());
    return ids;
}

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& rows) {
    Batch b;
    b.X = Matrix(rows.size(), ds.dim());
    b.Y = Matrix(rows.size(), ds.classes);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= ds.size()) {
            throw ShapeError("make_batch: row index out of range");
        }
        const auto src = ds.X.row(rows[i]);
        std::copy(src.begin(), src.end(), b.X.row(i).begin());
        b.Y(i, static_cast<std::size_t>(ds.labels[rows[i]])) = 1.0;
    }
    return b;
}

Batch pooled_batch(const FederatedTask& task, const std::vector<std::size_t>& clients) {
    std::vector<std::size_t> rows;
    for (std::size_t m : clients) {
        const auto& a = task.partition.assignment.at(m);
        rows.insert(rows.end(), a.begin(), a.end());
    }
    return make_batch(task.train, rows);
}

ClientUpdate client_update(const ModelWeights& w, const ModelConfig& cfg, const Batch& local, std::size_t client_id) {
    ClientUpdate u;
    u.jacobian = batch_jacobian(w, cfg, local.X);
    u.labels = local.Y;
    u.outputs = forward(w, cfg, local.X);
    u.n_samples = local.size();
    u.client_id = client_id;
    return u;
}

std::uint64_t dense_upload_bytes(std::size_t n_m, std::size_t d2, std::size_t d) noexcept {
    return 8ULL * (static_cast<std::uint64_t>(n_m) * d2 * d + 2ULL * n_m * d2);
}

EvolutionResult server_evolve(GlobalState& state, const RoundConfig& rc, const ModelWeights& w,
                              const CandidateLoss& loss, double* lambda_min) {
    state.eta = rc.eta;
    state.kernel = build_kernel(state.jacobian);
    if (lambda_min != nullptr && rc.track_spectrum) {
        *lambda_min = kernel_spectrum(state.kernel).lambda_min;
    }
    return select_t(state, rc.t_grid, w, loss);
}

void check_divergence(const ModelWeights& w, std::string_view where) {
    for (std::size_t k = 0; k < w.w.size(); ++k) {
        const double v = w.w[k];
        if (!std::isfinite(v) || std::abs(v) > 1e6) {
            throw DivergenceError(std::string(where) + ": weight " + std::to_string(k) + " diverged (" +
                                  std::to_string(v) + ")");
        }
    }
}

RoundOutcome run_round_ntkfl(const FederatedTask& task, const ModelWeights& w, const RoundConfig& rc,
                             std::size_t round) {
    const auto start = Clock::now();
    const auto clients = sample_clients(rc.clients_total, rc.clients_per_round, rc.seed, round);

    RoundMetrics m;
    m.round = round;
    m.scheme = Scheme::ntkfl;
    m.cohort_clients = clients.size();

    std::vector<ClientUpdate> updates;
    updates.reserve(clients.size());
    const std::size_t d = w.size();
    for (std::size_t id : clients) {
        const Batch local = make_batch(task.train, task.partition.assignment.at(id));
        m.uplink_bytes += dense_upload_bytes(local.size(), task.model.output_dim, d);
        m.cohort_samples += local.size();
        updates.push_back(client_update(w, task.model, local, id));
    }

    const Batch cohort = pooled_batch(task, clients);
    GlobalState state = assemble_global(std::move(updates));
    m.residual_before = residual_sq(state.outputs, state.labels);

    CandidateLoss scorer;
    if (rc.selection == Selection::validation) {
        if (!task.validation || task.validation->size() == 0) {
            throw ConfigError("round.selection = validation requires held-out validation clients");
        }
        scorer = network_loss(task.model, make_batch(*task.validation, [&] {
                                  std::vector<std::size_t> all(task.validation->size());
                                  std::iota(all.begin(), all.end(), 0);
                                  return all;
                              }()));
    } else {
        scorer = network_loss(task.model, cohort);
    }

    EvolutionResult res = server_evolve(state, rc, w, scorer, &m.lambda_min);
    check_divergence(res.next_weights, "ntkfl round");

    const Matrix f_new = forward(res.next_weights, task.model, cohort.X);
    m.chosen = res.chosen_t;
    m.train_loss = loss(f_new, cohort.Y);
    m.residual_after = residual_sq(f_new, cohort.Y);
    fill_test_metrics(m, task, res.next_weights);
    m.wall_ms = elapsed_ms(start);
    return {std::move(res.next_weights), m};
}

ModelWeights local_sgd(const ModelWeights& w, const ModelConfig& cfg, const Batch& local, double eta,
                       std::size_t steps, std::size_t batch_size, std::uint64_t seed) {
    ModelWeights cur = w;
    const std::size_t n = local.size();
    if (n == 0 || steps == 0) {
        return cur;
    }
    if (batch_size >= n) {
        for (std::size_t s = 0; s < steps; ++s) {
            const auto g = batch_gradient(cur, cfg, local);
            for (std::size_t k = 0; k < g.size(); ++k) {
                cur.w[k] -= eta * g[k];
            }
        }
        return cur;
    }

    Philox gen(seed);
    std::vector<std::size_t> order(n);
    std::size_t pos = n; // forces a fresh permutation on the first step
    Batch mb;
    mb.X = Matrix(batch_size, local.X.cols());
    mb.Y = Matrix(batch_size, local.Y.cols());
    for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t b = 0; b < batch_size; ++b) {
            if (pos == n) {
                std::iota(order.begin(), order.end(), 0);
                std::shuffle(order.begin(), order.end(), gen);
                pos = 0;
            }
            const std::size_t row = order[pos++];
            std::copy(local.X.row(row).begin(), local.X.row(row).end(), mb.X.row(b).begin());
            std::copy(local.Y.row(row).begin(), local.Y.row(row).end(), mb.Y.row(b).begin());
        }
        const auto g = batch_gradient(cur, cfg, mb);
        for (std::size_t k = 0; k < g.size(); ++k) {
            cur.w[k] -= eta * g[k];
        }
    }
    return cur;
}

RoundOutcome run_round_fedavg(const FederatedTask& task, const ModelWeights& w, const RoundConfig& rc,
                              std::size_t round) {
    if (rc.tau < 1) {
        throw DomainError("run_round_fedavg: tau must be >= 1");
    }
    const auto start = Clock::now();
    const auto clients = sample_clients(rc.clients_total, rc.clients_per_round, rc.seed, round);

    RoundMetrics m;
    m.round = round;
    m.scheme = Scheme::fedavg;
    m.chosen = rc.tau;
    m.cohort_clients = clients.size();

    std::vector<double> acc(w.size(), 0.0);
    double total_weight = 0.0;
    std::vector<ModelWeights> locals;
    std::vector<double> shares;
    for (std::size_t id : clients) {
        const Batch local = make_batch(task.train, task.partition.assignment.at(id));
        m.cohort_samples += local.size();
        const std::uint64_t seed = derive_seed(rc.seed, "fedavg-batches", round, id);
        locals.push_back(local_sgd(w, task.model, local, rc.eta, rc.tau, rc.batch_size, seed));
        const double share = rc.weighted_average ? static_cast<double>(local.size()) : 1.0;
        shares.push_back(share);
        total_weight += share;
    }
    if (!(total_weight > 0.0)) {
        throw DomainError("run_round_fedavg: cohort holds no samples");
    }
    for (std::size_t c = 0; c < locals.size(); ++c) {
        const double a = shares[c] / total_weight;
        for (std::size_t k = 0; k < acc.size(); ++k) {
            acc[k] += a * locals[c].w[k];
        }
    }
    ModelWeights next = with_values(w, std::move(acc));
    check_divergence(next, "fedavg round");

    const Batch cohort = pooled_batch(task, clients);
    m.residual_before = residual_sq(forward(w, task.model, cohort.X), cohort.Y);
    const Matrix f_new = forward(next, task.model, cohort.X);
    m.train_loss = loss(f_new, cohort.Y);
    m.residual_after = residual_sq(f_new, cohort.Y);
    m.uplink_bytes = 8ULL * clients.size() * w.size();
    fill_test_metrics(m, task, next);
    m.wall_ms = elapsed_ms(start);
    return {std::move(next), m};
}

RoundOutcome run_centralized(const FederatedTask& task, const ModelWeights& w, const RoundConfig& rc,
                             std::size_t round) {
    const auto start = Clock::now();
    const auto clients = sample_clients(rc.clients_total, rc.clients_per_round, rc.seed, round);
    const Batch cohort = pooled_batch(task, clients);

    RoundMetrics m;
    m.round = round;
    m.scheme = Scheme::centralized;
    m.chosen = rc.central_steps;
    m.cohort_clients = clients.size();
    m.cohort_samples = cohort.size();
    m.residual_before = residual_sq(forward(w, task.model, cohort.X), cohort.Y);

    ModelWeights next = w;
    for (std::size_t s = 0; s < rc.central_steps; ++s) {
        const auto g = batch_gradient(next, task.model, cohort);
        for (std::size_t k = 0; k < g.size(); ++k) {
            next.w[k] -= rc.eta * g[k];
        }
    }
    check_divergence(next, "centralized round");
    const Matrix f_new = forward(next, task.model, cohort.X);
    m.train_loss = loss(f_new, cohort.Y);
    m.residual_after = residual_sq(f_new, cohort.Y);
    fill_test_metrics(m, task, next);
    m.wall_ms = elapsed_ms(start);
    return {std::move(next), m};
}

Evaluation evaluate(const ModelWeights& w, const ModelConfig& cfg, const Dataset& test) {
    if (test.size() == 0) {
        throw DomainError("evaluate: empty test set");
    }
    const Matrix pred = forward(w, cfg, test.X);
    if (pred.cols() != test.classes) {
        throw ShapeError("evaluate: model has " + std::to_string(pred.cols()) + " outputs, test set has " +
                         std::to_string(test.classes) + " classes");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.rows(); ++i) {
        const auto row = pred.row(i);
        const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        if (best == static_cast<std::size_t>(test.labels[i])) {
            ++correct;
        }
    }
    Evaluation ev;
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(pred.rows());
    ev.loss = loss(pred, one_hot(test.labels, test.classes));
    return ev;
}

} // namespace ntkfed
