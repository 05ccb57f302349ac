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

#include "ntkfed/cp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "ntkfed/analysis.hpp"
#include "ntkfed/data.hpp"
#include "ntkfed/error.hpp"
#include "ntkfed/rng.hpp"

namespace ntkfed {

namespace {

void check_permutation(const std::vector<std::size_t>& p, std::size_t n) {
    if (p.size() != n) {
        throw ShapeError("apply_shuffle: permutation has " + std::to_string(p.size()) + " entries, state has " +
                         std::to_string(n) + " rows");
    }
    std::vector<char> seen(n, 0);
    for (std::size_t v : p) {
        if (v >= n || seen[v]) {
            throw DomainError("apply_shuffle: plan is not a permutation");
        }
        seen[v] = 1;
    }
}

Matrix permute_rows(const Matrix& m, const std::vector<std::size_t>& p) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < p.size(); ++i) {
        std::copy(m.row(p[i]).begin(), m.row(p[i]).end(), out.row(i).begin());
    }
    return out;
}

} // namespace

Matrix ProjectionSpec::matrix() const {
    Matrix p(input_dim, projected_dim);
    if (identity) {
        for (std::size_t k = 0; k < projected_dim; ++k) {
            p(k, k) = 1.0;
        }
        return p;
    }
    Philox gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : p.data()) {
        v = normal(gen);
    }
    return p;
}

ProjectionSpec gen_projection(std::uint64_t seed, std::size_t d1, std::size_t d1_proj) {
    if (d1_proj < 1 || d1_proj > d1) {
        throw DomainError("gen_projection: need 1 <= d1_proj <= d1, got d1=" + std::to_string(d1) +
                          " d1_proj=" + std::to_string(d1_proj));
    }
    return {seed, d1, d1_proj, false};
}

ProjectionSpec identity_projection(std::size_t d1, std::size_t d1_proj) {
    ProjectionSpec s = gen_projection(0, d1, d1_proj);
    s.identity = true;
    return s;
}

Matrix project_inputs(const Matrix& X, const ProjectionSpec& spec) {
    if (X.cols() != spec.input_dim) {
        throw ShapeError("project_inputs: input has " + std::to_string(X.cols()) + " columns, projection expects " +
                         std::to_string(spec.input_dim));
    }
    if (spec.identity) {
        Matrix z(X.rows(), spec.projected_dim);
        for (std::size_t i = 0; i < X.rows(); ++i) {
            std::copy_n(X.row(i).begin(), spec.projected_dim, z.row(i).begin());
        }
        return z;
    }
    return matmul(X, spec.matrix());
}

Matrix cp_features(const Matrix& X, const ProjectionSpec& spec, bool normalize) {
    Matrix z = project_inputs(X, spec);
    return normalize ? unit_rows(std::move(z)) : z;
}

ShufflePlan sample_shuffle(std::size_t n, std::uint64_t seed) {
    ShufflePlan plan;
    plan.seed = seed;
    plan.permutation.resize(n);
    std::iota(plan.permutation.begin(), plan.permutation.end(), 0);
    Philox gen(seed);
    std::shuffle(plan.permutation.begin(), plan.permutation.end(), gen);
    return plan;
}

ShufflePlan client_shuffle(const std::vector<Provenance>& provenance, std::uint64_t seed) {
    // contiguous blocks per client, in first-appearance order
    std::vector<std::pair<std::size_t, std::size_t>> blocks; // (start, length)
    for (std::size_t i = 0; i < provenance.size(); ++i) {
        if (i == 0 || provenance[i].client_id != provenance[i - 1].client_id) {
            blocks.emplace_back(i, 0);
        }
        ++blocks.back().second;
    }
    Philox gen(seed);
    std::shuffle(blocks.begin(), blocks.end(), gen);
    ShufflePlan plan;
    plan.seed = seed;
    for (const auto& [start, len] : blocks) {
        for (std::size_t k = 0; k < len; ++k) {
            plan.permutation.push_back(start + k);
        }
    }
    return plan;
}

ShufflePlan identity_shuffle(std::size_t n) {
    ShufflePlan plan;
    plan.permutation.resize(n);
    std::iota(plan.permutation.begin(), plan.permutation.end(), 0);
    return plan;
}

GlobalState apply_shuffle(GlobalState state, const ShufflePlan& plan) {
    const std::size_t n = state.samples();
    check_permutation(plan.permutation, n);
    const auto& p = plan.permutation;

    Tensor3 j(state.jacobian.n(), state.jacobian.d2(), state.jacobian.d());
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = state.jacobian.slice(p[i]);
        std::copy(src.begin(), src.end(), j.slice(i).begin());
    }
    state.jacobian = std::move(j);
    state.labels = permute_rows(state.labels, p);
    state.outputs = permute_rows(state.outputs, p);

    std::vector<Provenance> prov(n);
    for (std::size_t i = 0; i < n; ++i) {
        prov[i] = state.provenance[p[i]];
    }
    state.provenance = std::move(prov);

    if (state.has_kernel()) {
        Matrix k(n, n);
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = 0; b < n; ++b) {
                k(a, b) = state.kernel(p[a], p[b]);
            }
        }
        state.kernel = std::move(k);
    }
    return state;
}

std::uint64_t compressed_upload_bytes(std::size_t kept, std::size_t n_m, std::size_t d2) noexcept {
    return 12ULL * kept + 24ULL + 16ULL * n_m * d2;
}

CompressedUpload compress_update(ClientUpdate u, double sparsity) {
    const auto* dense = std::get_if<Tensor3>(&u.jacobian);
    if (dense == nullptr) {
        throw DomainError("compress_update: update is already compressed");
    }
    SparseTensor3 sparse = topk_sparsify(*dense, sparsity);
    CompressedUpload out;
    out.bytes = compressed_upload_bytes(sparse.kept(), u.n_samples, u.labels.cols());
    u.jacobian = std::move(sparse);
    out.update = std::move(u);
    return out;
}

std::uint64_t KeyServer::seed_for(const std::string& party) {
    readers_.insert(party);
    return seed_;
}

void CpConfig::validate(std::size_t input_dim) const {
    if (!(beta > 0.0 && beta <= 1.0)) {
        throw ConfigError("cp.beta must lie in (0,1]");
    }
    if (!(sparsity >= 0.0 && sparsity < 1.0)) {
        throw ConfigError("cp.sparsity must lie in [0,1)");
    }
    if (projected_dim < 1 || projected_dim > input_dim) {
        throw ConfigError("cp.d1_proj must lie in [1, d1] (d1 = " + std::to_string(input_dim) + ")");
    }
}

RoundOutcome run_round_cp_ntkfl(const FederatedTask& task, const ModelWeights& w, const RoundConfig& rc,
                                const CpConfig& cp, KeyServer& keys, std::size_t round) {
    const auto start = std::chrono::steady_clock::now();
    cp.validate(task.train.dim());
    if (task.model.input_dim != cp.projected_dim) {
        throw ShapeError("run_round_cp_ntkfl: model input dimension must equal cp.d1_proj");
    }
    const auto clients = sample_clients(rc.clients_total, rc.clients_per_round, rc.seed, round);

    RoundMetrics m;
    m.round = round;
    m.scheme = Scheme::cp_ntkfl;
    m.cohort_clients = clients.size();

    std::vector<ClientUpdate> uploads;
    std::vector<Batch> local_batches;
    for (std::size_t id : clients) {
        // client side: subsample, project with the shared seed, differentiate, compress
        const auto& owned = task.partition.assignment.at(id);
        const auto kept_rows = subsample_indices(owned, cp.beta, derive_seed(rc.seed, "cp-subsample", round, id));
        Batch local = make_batch(task.train, kept_rows);
        const std::uint64_t rho = keys.seed_for("client-" + std::to_string(id));
        const ProjectionSpec proj = cp.identity_projection ? identity_projection(task.train.dim(), cp.projected_dim)
                                                           : gen_projection(rho, task.train.dim(), cp.projected_dim);
        local.X = cp_features(local.X, proj, cp.normalize_projected);

        CompressedUpload up = compress_update(client_update(w, task.model, local, id), cp.sparsity);
        m.uplink_bytes += up.bytes;
        m.cohort_samples += local.size();
        uploads.push_back(std::move(up.update));
        local_batches.push_back(std::move(local));
    }

    // aggregation server: densify, shuffle, kernel, evolution
    GlobalState state = assemble_global(std::move(uploads));
    switch (cp.shuffle) {
    case ShuffleMode::sample:
        state = apply_shuffle(std::move(state), sample_shuffle(state.samples(), derive_seed(rc.seed, "shuffle", round)));
        break;
    case ShuffleMode::client:
        state = apply_shuffle(std::move(state), client_shuffle(state.provenance, derive_seed(rc.seed, "shuffle", round)));
        break;
    case ShuffleMode::none:
        break;
    }
    m.residual_before = frobenius_norm_sq(state.outputs - state.labels);

    // candidates are scored by the cohort on its own projected samples
    Batch cohort;
    {
        std::size_t rows = 0;
        for (const auto& b : local_batches) {
            rows += b.size();
        }
        cohort.X = Matrix(rows, cp.projected_dim);
        cohort.Y = Matrix(rows, task.model.output_dim);
        std::size_t r = 0;
        for (const auto& b : local_batches) {
            for (std::size_t i = 0; i < b.size(); ++i, ++r) {
                std::copy(b.X.row(i).begin(), b.X.row(i).end(), cohort.X.row(r).begin());
                std::copy(b.Y.row(i).begin(), b.Y.row(i).end(), cohort.Y.row(r).begin());
            }
        }
    }
    CandidateLoss scorer;
    if (rc.selection == Selection::validation) {
        if (!task.validation || task.validation->size() == 0) {
            throw ConfigError("round.selection = validation requires held-out validation clients");
        }
        std::vector<std::size_t> all(task.validation->size());
        std::iota(all.begin(), all.end(), 0);
        scorer = network_loss(task.model, make_batch(*task.validation, all));
    } else {
        scorer = network_loss(task.model, cohort);
    }

    EvolutionResult res = server_evolve(state, rc, w, scorer, &m.lambda_min);
    check_divergence(res.next_weights, "cp-ntkfl round");

    const Matrix f_new = forward(res.next_weights, task.model, cohort.X);
    m.chosen = res.chosen_t;
    m.train_loss = loss(f_new, cohort.Y);
    m.residual_after = frobenius_norm_sq(f_new - cohort.Y);
    if (task.test.size() > 0) {
        const Evaluation ev = evaluate(res.next_weights, task.model, task.test);
        m.test_accuracy = ev.accuracy;
        m.test_loss = ev.loss;
    }
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return {std::move(res.next_weights), m};
}

std::uint64_t comm_cost_fedavg(std::size_t clients, std::size_t d) noexcept { return 8ULL * clients * d; }

std::uint64_t comm_cost_ntkfl(const std::vector<std::size_t>& cohort_sizes, std::size_t d2, std::size_t d) noexcept {
    std::uint64_t total = 0;
    for (std::size_t n : cohort_sizes) {
        total += dense_upload_bytes(n, d2, d);
    }
    return total;
}

std::uint64_t comm_cost_cp(const std::vector<std::size_t>& cohort_sizes, std::size_t d2, std::size_t d,
                           double sparsity) {
    std::uint64_t total = 0;
    for (std::size_t n : cohort_sizes) {
        total += compressed_upload_bytes(topk_keep_count(n * d2 * d, sparsity), n, d2);
    }
    return total;
}

} // namespace ntkfed
