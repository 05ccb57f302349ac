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
#include "ntkfed/cp.hpp"
#include "ntkfed/error.hpp"

using namespace ntkfed;
using ntkfed::test::random_matrix;

namespace {

FederatedTask cp_task(std::size_t d1, std::size_t d1_proj, std::uint64_t seed) {
    FederatedTask task;
    SyntheticSpec spec;
    spec.n = 4 * 30 + 100;
    spec.dim = d1;
    spec.classes = 3;
    spec.seed = seed;
    auto [train, test] = split_tail(unit_normalize(make_synthetic(spec)), 100);
    task.train = std::move(train);
    task.test = std::move(test);
    task.partition = dirichlet_partition(task.train, 4, 1.0, seed);
    task.model = ModelConfig::experiment(d1_proj, 10, 3);
    return task;
}

RoundConfig cp_round() {
    RoundConfig rc;
    rc.clients_total = 4;
    rc.clients_per_round = 3;
    rc.eta = 0.5;
    rc.t_grid = {10, 20, 40};
    rc.seed = 4;
    return rc;
}

// The evaluator's copy of the test set, projected with the shared seed.
void project_test(FederatedTask& task, std::uint64_t key_seed, const CpConfig& cp) {
    KeyServer evaluator_keys(key_seed);
    const ProjectionSpec p = gen_projection(evaluator_keys.seed_for("evaluator"), task.test.dim(), cp.projected_dim);
    task.test.X = cp_features(task.test.X, p, cp.normalize_projected);
}

GlobalState state_for(const FederatedTask& task, const ModelWeights& w) {
    std::vector<ClientUpdate> ups;
    for (std::size_t m = 0; m < task.partition.clients(); ++m) {
        ups.push_back(client_update(w, task.model, make_batch(task.train, task.partition.assignment[m]), m));
    }
    GlobalState s = assemble_global(std::move(ups));
    s.kernel = build_kernel(s.jacobian);
    s.eta = 0.5;
    return s;
}

} // namespace

TEST_SUITE("cp") {

TEST_CASE("projection is seeded and shaped") {
    const ProjectionSpec p = gen_projection(17, 784, 100);
    const Matrix m = p.matrix();
    CHECK(m.rows() == 784);
    CHECK(m.cols() == 100);
    CHECK(m == gen_projection(17, 784, 100).matrix());
    CHECK_FALSE(m == gen_projection(18, 784, 100).matrix());
    CHECK_THROWS_AS(gen_projection(1, 10, 11), DomainError);
    CHECK_THROWS_AS(gen_projection(1, 10, 0), DomainError);
}

TEST_CASE("projection entries are standard normal") {
    const Matrix m = gen_projection(5, 1000, 100).matrix();
    const double n = static_cast<double>(m.size());
    const double mean = std::accumulate(m.data().begin(), m.data().end(), 0.0) / n;
    double var = 0.0;
    for (double v : m.data()) {
        var += (v - mean) * (v - mean);
    }
    var /= n - 1;
    CHECK(std::abs(mean) <= 0.016);
    CHECK(var >= 0.97);
    CHECK(var <= 1.03);
}

TEST_CASE("project_inputs") {
    const Matrix x = random_matrix(5, 8, 1);
    const Matrix z = project_inputs(x, identity_projection(8, 3));
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(z(i, k) == x(i, k));
        }
    }
    const ProjectionSpec p = gen_projection(2, 8, 3);
    CHECK(max_abs(project_inputs(Matrix(4, 8), p).data()) == 0.0);

    const Matrix pm = p.matrix();
    const Matrix zr = project_inputs(x, p);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t k = 0; k < 3; ++k) {
            double ref = 0.0;
            for (std::size_t j = 0; j < 8; ++j) {
                ref += x(i, j) * pm(j, k);
            }
            CHECK(std::abs(zr(i, k) - ref) <= 1e-12 * (std::abs(ref) + 1.0));
        }
    }
    CHECK_THROWS_AS(project_inputs(Matrix(2, 7), p), ShapeError);

    const Matrix unit = cp_features(x, p, true);
    for (std::size_t i = 0; i < 5; ++i) {
        double s = 0.0;
        for (double v : unit.row(i)) {
            s += v * v;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(cp_features(x, p, false) == zr);
}

TEST_CASE("apply_shuffle identity and swap") {
    const FederatedTask task = cp_task(5, 5, 1);
    const ModelWeights w = init_weights(task.model, 2);
    const GlobalState s = state_for(task, w);
    const GlobalState same = apply_shuffle(s, identity_shuffle(s.samples()));
    CHECK(same.jacobian == s.jacobian);
    CHECK(same.kernel == s.kernel);
    CHECK(same.labels == s.labels);
    CHECK(same.provenance == s.provenance);

    GlobalState two;
    two.jacobian = test::random_tensor(2, 1, 3, 4);
    two.labels = Matrix{{1}, {2}};
    two.outputs = Matrix{{3}, {4}};
    two.provenance = {{0, 0}, {1, 0}};
    two.kernel = build_kernel(two.jacobian);
    ShufflePlan swap;
    swap.permutation = {1, 0};
    const GlobalState t = apply_shuffle(two, swap);
    CHECK(t.labels == Matrix{{2}, {1}});
    CHECK(t.outputs == Matrix{{4}, {3}});
    CHECK(t.jacobian.horizontal(0) == two.jacobian.horizontal(1));
    CHECK(t.provenance[0] == Provenance{1, 0});
    CHECK(t.kernel(0, 0) == two.kernel(1, 1));
    CHECK(t.kernel(0, 1) == two.kernel(1, 0));

    ShufflePlan bad;
    bad.permutation = {0};
    CHECK_THROWS_AS(apply_shuffle(two, bad), ShapeError);
    bad.permutation = {0, 0};
    CHECK_THROWS_AS(apply_shuffle(two, bad), DomainError);
}

TEST_CASE("shuffling leaves the weight update unchanged") {
    const FederatedTask task = cp_task(6, 6, 3);
    const ModelWeights w = init_weights(task.model, 4);
    const GlobalState s = state_for(task, w);
    const std::vector<std::size_t> grid{10, 30};
    const EvolutionResult ref = select_t(s, grid, w, network_loss(task.model, pooled_batch(task, {0, 1, 2, 3})));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const GlobalState p = apply_shuffle(s, sample_shuffle(s.samples(), seed));
        const EvolutionResult r = select_t(p, grid, w, network_loss(task.model, pooled_batch(task, {0, 1, 2, 3})));
        CHECK(r.chosen_t == ref.chosen_t);
        CHECK(max_abs_diff(r.next_weights.w, ref.next_weights.w) <= 1e-12);
    }
}

TEST_CASE("client shuffle keeps client blocks contiguous") {
    std::vector<Provenance> prov;
    for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t i = 0; i < c + 2; ++i) {
            prov.push_back({c, i});
        }
    }
    const ShufflePlan plan = client_shuffle(prov, 9);
    REQUIRE(plan.permutation.size() == prov.size());
    std::size_t switches = 0;
    for (std::size_t i = 1; i < plan.permutation.size(); ++i) {
        const auto a = prov[plan.permutation[i - 1]];
        const auto b = prov[plan.permutation[i]];
        if (a.client_id != b.client_id) {
            ++switches;
        } else {
            CHECK(b.local_index == a.local_index + 1);
        }
    }
    CHECK(switches == 3);
}

TEST_CASE("compress_update byte counts") {
    ClientUpdate u;
    u.jacobian = test::random_tensor(10, 10, 10, 5);
    u.labels = Matrix(10, 10);
    u.outputs = Matrix(10, 10);
    u.n_samples = 10;
    const Tensor3 dense = std::get<Tensor3>(u.jacobian);

    const CompressedUpload keep = compress_update(u, 0.0);
    CHECK(std::get<SparseTensor3>(keep.update.jacobian).densify() == dense);

    const CompressedUpload c = compress_update(u, 0.9);
    CHECK(std::get<SparseTensor3>(c.update.jacobian).kept() == 100);
    CHECK(c.bytes == 1200 + 24 + 8 * 2 * 10 * 10);
    CHECK_THROWS_AS(compress_update(c.update, 0.5), DomainError);
}

TEST_CASE("key server records who read the seed") {
    FederatedTask task = cp_task(8, 4, 6);
    KeyServer keys(123);
    CpConfig cp;
    cp.projected_dim = 4;
    project_test(task, 123, cp);
    const RoundConfig rc = cp_round();
    const ModelWeights w = init_weights(task.model, 1);
    const RoundOutcome out = run_round_cp_ntkfl(task, w, rc, cp, keys, 1);
    const auto cohort = sample_clients(rc.clients_total, rc.clients_per_round, rc.seed, 1);
    CHECK(keys.readers().size() == cohort.size());
    for (std::size_t id : cohort) {
        CHECK(keys.was_read_by("client-" + std::to_string(id)));
    }
    CHECK_FALSE(keys.was_read_by("aggregator"));
    CHECK(out.metrics.uplink_bytes > 0);
}

TEST_CASE("cp round rejects a model of the wrong input size") {
    FederatedTask task = cp_task(8, 5, 6);
    KeyServer keys(1);
    CpConfig cp;
    cp.projected_dim = 4;
    CHECK_THROWS_AS(run_round_cp_ntkfl(task, init_weights(task.model, 1), cp_round(), cp, keys, 1), ShapeError);
    cp.beta = 1.5;
    CHECK_THROWS_AS(cp.validate(8), ConfigError);
}

TEST_CASE("degenerate cp round equals ntkfl") {
    const FederatedTask task = cp_task(6, 6, 7);
    CpConfig cp;
    cp.beta = 1.0;
    cp.projected_dim = 6;
    cp.sparsity = 0.0;
    cp.identity_projection = true;
    for (ShuffleMode mode : {ShuffleMode::sample, ShuffleMode::client, ShuffleMode::none}) {
        cp.shuffle = mode;
        KeyServer keys(1);
        const ModelWeights w = init_weights(task.model, 3);
        const RoundOutcome a = run_round_ntkfl(task, w, cp_round(), 2);
        const RoundOutcome b = run_round_cp_ntkfl(task, w, cp_round(), cp, keys, 2);
        CHECK(max_abs_diff(a.weights.w, b.weights.w) <= 1e-12);
        CHECK(a.metrics.chosen == b.metrics.chosen);
    }
}

TEST_CASE("compressed training stays close to uncompressed training") {
    FederatedTask task = cp_task(12, 6, 8);
    CpConfig dense;
    dense.projected_dim = 6;
    dense.beta = 0.5;
    dense.sparsity = 0.0;
    project_test(task, 77, dense);
    CpConfig sparse = dense;
    sparse.sparsity = 0.5;
    ModelWeights wd = init_weights(task.model, 5);
    ModelWeights ws = wd;
    RoundMetrics md;
    RoundMetrics ms;
    for (std::size_t r = 1; r <= 5; ++r) {
        KeyServer k1(77);
        KeyServer k2(77);
        RoundOutcome a = run_round_cp_ntkfl(task, wd, cp_round(), dense, k1, r);
        RoundOutcome b = run_round_cp_ntkfl(task, ws, cp_round(), sparse, k2, r);
        wd = std::move(a.weights);
        ws = std::move(b.weights);
        md = a.metrics;
        ms = b.metrics;
    }
    CHECK(ms.train_loss <= 2.0 * md.train_loss);
    CHECK(ms.uplink_bytes < md.uplink_bytes);
}

TEST_CASE("communication cost formulas") {
    CHECK(comm_cost_fedavg(2, 1000) == 16000);
    CHECK(comm_cost_ntkfl({1}, 1, 10) == 96);
    CHECK(comm_cost_ntkfl({3, 4}, 2, 5) == 8 * (3 * 2 * 5 + 2 * 3 * 2) + 8 * (4 * 2 * 5 + 2 * 4 * 2));
    // kept = ceil(0.5 * 2*3*7) = 21
    CHECK(comm_cost_cp({2}, 3, 7, 0.5) == 12 * 21 + 24 + 16 * 2 * 3);
    CHECK(compressed_upload_bytes(100, 10, 10) == 1200 + 24 + 1600);
}

TEST_CASE("cp uplink is smaller than ntkfl at the default compression settings") {
    Philox g(31);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t clients = 1 + g() % 6;
        const std::size_t d2 = 1 + g() % 10;
        const std::size_t d = 10 + g() % 500;
        const std::size_t d_proj = 1 + g() % d;
        const double sparsity = 0.5 + 0.49 * static_cast<double>(g() % 1000) / 1000.0;
        const double beta = 0.05 + 0.95 * static_cast<double>(g() % 1000) / 1000.0;
        std::vector<std::size_t> n(clients);
        std::vector<std::size_t> n_sub(clients);
        for (std::size_t c = 0; c < clients; ++c) {
            n[c] = 2 + g() % 50;
            n_sub[c] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(beta * static_cast<double>(n[c]))));
        }
        CHECK(comm_cost_cp(n_sub, d2, d_proj, sparsity) < comm_cost_ntkfl(n, d2, d));
    }
}

TEST_CASE("cp uplink can exceed ntkfl when little is dropped") {
    // a kept entry costs 12 bytes against 8 for a dense one
    CHECK(comm_cost_cp({10}, 10, 100, 0.1) > comm_cost_ntkfl({10}, 10, 100));
    CHECK(comm_cost_cp({9}, 10, 100, 0.0) > comm_cost_ntkfl({10}, 10, 100));
    // the fixed header dominates a tiny tensor
    CHECK(comm_cost_cp({1}, 1, 10, 0.5) > comm_cost_ntkfl({1}, 1, 10));
}

} // TEST_SUITE
