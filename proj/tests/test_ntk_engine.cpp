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
#include "ntkfed/analysis.hpp"
#include "ntkfed/error.hpp"
#include "ntkfed/federation.hpp"
#include "ntkfed/ntk_engine.hpp"

using namespace ntkfed;
using ntkfed::test::random_matrix;
using ntkfed::test::random_tensor;

namespace {

ClientUpdate raw_update(std::size_t n, std::size_t d2, std::size_t d, std::size_t id, std::uint64_t seed) {
    ClientUpdate u;
    u.jacobian = random_tensor(n, d2, d, seed);
    u.labels = random_matrix(n, d2, seed + 1);
    u.outputs = random_matrix(n, d2, seed + 2);
    u.n_samples = n;
    u.client_id = id;
    return u;
}

struct TheorySetup {
    ModelConfig cfg;
    ModelWeights w;
    Batch batch;
    GlobalState state;
};

TheorySetup theory_setup(std::size_t d1, std::size_t n, std::size_t N, std::uint64_t seed) {
    TheorySetup s;
    s.cfg = ModelConfig::theory(d1, n);
    s.w = init_weights(s.cfg, seed);
    s.batch.X = test::unit_inputs(N, d1, seed + 1);
    s.batch.Y = random_matrix(N, 1, seed + 2);
    std::vector<ClientUpdate> ups;
    ups.push_back(client_update(s.w, s.cfg, s.batch, 0));
    s.state = assemble_global(std::move(ups));
    s.state.kernel = build_kernel(s.state.jacobian);
    return s;
}

GlobalState kernel_only_state(const Matrix& kernel, const Matrix& f0, const Matrix& y, double eta) {
    GlobalState s;
    s.kernel = kernel;
    s.outputs = f0;
    s.labels = y;
    s.eta = eta;
    return s;
}

} // namespace

TEST_SUITE("ntk_engine") {

TEST_CASE("assemble_global single client") {
    const ClientUpdate u = raw_update(3, 2, 5, 7, 1);
    const Tensor3 j = std::get<Tensor3>(u.jacobian);
    std::vector<ClientUpdate> ups{u};
    const GlobalState g = assemble_global(std::move(ups));
    CHECK(g.jacobian == j);
    CHECK(g.labels == u.labels);
    CHECK(g.outputs == u.outputs);
    CHECK_FALSE(g.has_kernel());
    REQUIRE(g.provenance.size() == 3);
    CHECK(g.provenance[2] == Provenance{7, 2});
}

TEST_CASE("assemble_global stacks clients in order") {
    const ClientUpdate a = raw_update(2, 3, 4, 0, 10);
    const ClientUpdate b = raw_update(3, 3, 4, 1, 20);
    const Tensor3 ja = std::get<Tensor3>(a.jacobian);
    const Tensor3 jb = std::get<Tensor3>(b.jacobian);
    const GlobalState g = assemble_global({a, b});
    REQUIRE(g.samples() == 5);
    CHECK(g.jacobian.horizontal(2) == jb.horizontal(0));

    // index-by-index copy oracle
    for (std::size_t i = 0; i < 5; ++i) {
        const Tensor3& src = i < 2 ? ja : jb;
        const Matrix& ys = i < 2 ? a.labels : b.labels;
        const Matrix& fs = i < 2 ? a.outputs : b.outputs;
        const std::size_t li = i < 2 ? i : i - 2;
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(g.labels(i, j) == ys(li, j));
            CHECK(g.outputs(i, j) == fs(li, j));
            for (std::size_t k = 0; k < 4; ++k) {
                CHECK(g.jacobian(i, j, k) == src(li, j, k));
            }
        }
        CHECK(g.provenance[i] == Provenance{i < 2 ? 0U : 1U, li});
    }
}

TEST_CASE("assemble_global densifies compressed uploads and rejects mismatches") {
    ClientUpdate a = raw_update(2, 2, 6, 0, 30);
    const Tensor3 dense = std::get<Tensor3>(a.jacobian);
    const SparseTensor3 sp = topk_sparsify(dense, 0.5);
    a.jacobian = sp;
    const GlobalState g = assemble_global({a});
    CHECK(g.jacobian == sp.densify());

    CHECK_THROWS_AS(assemble_global({}), DomainError);
    CHECK_THROWS_AS(assemble_global({raw_update(2, 2, 6, 0, 1), raw_update(2, 2, 7, 1, 2)}), ShapeError);
    CHECK_THROWS_AS(assemble_global({raw_update(2, 2, 6, 0, 1), raw_update(2, 3, 6, 1, 2)}), ShapeError);
}

TEST_CASE("build_kernel examples") {
    const Matrix k1 = build_kernel(Tensor3(1, 1, 2, std::vector<double>{1, 2}));
    CHECK(k1 == Matrix{{5}});

    Tensor3 twin(2, 2, 3);
    const Tensor3 base = random_tensor(1, 2, 3, 4);
    std::copy(base.data().begin(), base.data().end(), twin.slice(0).begin());
    std::copy(base.data().begin(), base.data().end(), twin.slice(1).begin());
    const Matrix k2 = build_kernel(twin);
    CHECK(k2(0, 0) == k2(0, 1));
    CHECK(k2(1, 0) == k2(1, 1));
    CHECK(k2(0, 0) == k2(1, 1));
}

TEST_CASE("build_kernel matches a double loop and is PSD") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Tensor3 j = random_tensor(6, 3, 11 + s, 50 + s);
        const Matrix k = build_kernel(j);
        for (std::size_t a = 0; a < 6; ++a) {
            for (std::size_t b = 0; b < 6; ++b) {
                const double ref = frobenius_inner(j.slice(a), j.slice(b)) / 3.0;
                CHECK(std::abs(k(a, b) - ref) <= 1e-12 * std::abs(ref) + 1e-14);
                CHECK(k(a, b) == k(b, a));
            }
            CHECK(k(a, a) >= 0.0);
        }
        CHECK(sym_eigenvalues(k).front() >= -1e-10 * test::trace(k));
    }
}

TEST_CASE("build_kernel is exactly permutation equivariant") {
    // sizes that straddle the 4x4 tiles and the k-chunk boundary
    for (std::size_t n : {5U, 9U, 23U}) {
        const Tensor3 j = random_tensor(n, 2, 700, 90 + n);
        const Matrix k = build_kernel(j);
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), 0);
        Philox g(n);
        std::shuffle(p.begin(), p.end(), g);
        Tensor3 jp(n, 2, 700);
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(j.slice(p[i]).begin(), j.slice(p[i]).end(), jp.slice(i).begin());
        }
        const Matrix kp = build_kernel(jp);
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = 0; b < n; ++b) {
                CHECK(kp(a, b) == k(p[a], p[b]));
            }
        }
    }
}

TEST_CASE("evolve_function scalar recursion and empty sum") {
    const GlobalState s = kernel_only_state(Matrix{{1}}, Matrix{{1}}, Matrix{{0}}, 0.5);
    const FunctionEvolution ev = evolve_function(s, 1);
    CHECK(ev.output_at(1)(0, 0) == 0.5);
    CHECK(ev.residual_at(1)(0, 0) == -0.5);

    const FunctionEvolution zero = evolve_function(s, 0);
    CHECK(zero.output_at(0) == s.outputs);
    CHECK(zero.residual_at(0)(0, 0) == 0.0);
    CHECK_THROWS_AS(zero.output_at(3), DomainError);
}

TEST_CASE("evolve_function matches the eigendecomposition closed forms") {
    const std::size_t n = 8;
    Matrix k = test::random_psd(n, 5);
    k = (1.0 / test::trace(k)) * k;
    const Matrix f0 = random_matrix(n, 2, 6);
    const Matrix y = random_matrix(n, 2, 7);
    const double lmax = sym_eigenvalues(k).back();
    const double eta = 0.9 * static_cast<double>(n) / lmax;
    const GlobalState s = kernel_only_state(k, f0, y, eta);
    const std::vector<std::size_t> rec{1, 10, 50, 200};
    const FunctionEvolution ev = evolve_function(s, 200, rec);

    const SymEig e = sym_eig(k);
    const Matrix e0 = f0 - y;
    for (std::size_t t : rec) {
        // V diag((1 - ηλ/N)^t) Vᵀ (f0 - Y) + Y
        Matrix coeff = matmul_tn(e.vectors, e0);
        for (std::size_t i = 0; i < n; ++i) {
            const double factor = std::pow(1.0 - eta * e.values[i] / static_cast<double>(n), static_cast<double>(t));
            for (std::size_t j = 0; j < 2; ++j) {
                coeff(i, j) *= factor;
            }
        }
        const Matrix closed = matmul(e.vectors, coeff) + y;
        CHECK(max_abs_diff(ev.output_at(t).data(), closed.data()) <= 1e-9);

        const Matrix cont = sym_expm_apply(k, eta * static_cast<double>(t) / static_cast<double>(n), e0) + y;
        const double a = eta * lmax / static_cast<double>(n);
        const double bound = 0.5 * static_cast<double>(t) * a * a * std::sqrt(frobenius_norm_sq(e0));
        CHECK(std::sqrt(frobenius_norm_sq(ev.output_at(t) - cont)) <= bound + 1e-12);
    }
}

TEST_CASE("residual is nonincreasing when eta <= N / lambda_max") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const std::size_t n = 12;
        const Matrix k = test::random_psd(n, 300 + s);
        const double lmax = sym_eigenvalues(k).back();
        const GlobalState st =
            kernel_only_state(k, random_matrix(n, 3, 310 + s), random_matrix(n, 3, 320 + s), n / lmax);
        const FunctionEvolution ev = evolve_function(st, 300);
        for (std::size_t t = 1; t < ev.residual_sq.size(); ++t) {
            CHECK(ev.residual_sq[t] <= ev.residual_sq[t - 1] * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("evolve_function reports divergence") {
    const GlobalState s = kernel_only_state(Matrix{{1}}, Matrix{{1}}, Matrix{{0}}, 1e200);
    CHECK_THROWS_AS(evolve_function(s, 2000), DivergenceError);
    GlobalState bad = s;
    bad.eta = 0.0;
    CHECK_THROWS_AS(evolve_function(bad, 1), DomainError);
}

TEST_CASE("evolve_weights with zero residual or zero Jacobian") {
    TheorySetup s = theory_setup(3, 16, 4, 1);
    const Matrix zero(4, 1);
    CHECK(evolve_weights(s.state, zero, s.w) == s.w);
    GlobalState z = s.state;
    z.jacobian = Tensor3(4, 1, s.w.size());
    CHECK(evolve_weights(z, random_matrix(4, 1, 3), s.w) == s.w);
    CHECK_THROWS_AS(evolve_weights(s.state, Matrix(3, 1), s.w), ShapeError);
}

TEST_CASE("weight evolution equals gradient descent on the linearized model") {
    for (std::size_t t : {1U, 3U, 10U}) {
        TheorySetup s = theory_setup(5, 64, 4, 10 + t);
        s.state.eta = 0.2;
        const FunctionEvolution ev = evolve_function(s.state, t);
        const ModelWeights w_ntk = evolve_weights(s.state, ev.residual_at(t), s.w);

        // explicit GD on f_lin(w) = f0 + J (w - w_k)
        const Tensor3& J = s.state.jacobian;
        std::vector<double> w = s.w.w;
        for (std::size_t step = 0; step < t; ++step) {
            std::vector<double> r(4);
            for (std::size_t i = 0; i < 4; ++i) {
                double f = s.state.outputs(i, 0);
                for (std::size_t k = 0; k < w.size(); ++k) {
                    f += J(i, 0, k) * (w[k] - s.w.w[k]);
                }
                r[i] = f - s.state.labels(i, 0);
            }
            for (std::size_t k = 0; k < w.size(); ++k) {
                double g = 0.0;
                for (std::size_t i = 0; i < 4; ++i) {
                    g += J(i, 0, k) * r[i];
                }
                w[k] -= s.state.eta * g / 4.0;
            }
        }
        CHECK(max_abs_diff(w_ntk.w, w) <= 1e-10);
    }
}

TEST_CASE("batched evolve_weights matches single calls") {
    TheorySetup s = theory_setup(4, 32, 6, 3);
    const std::vector<std::size_t> rec{2, 5, 9};
    const FunctionEvolution ev = evolve_function(s.state, 9, rec);
    const auto many = evolve_weights(s.state, ev.residual_sums, s.w);
    REQUIRE(many.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(max_abs_diff(many[i].w, evolve_weights(s.state, ev.residual_sums[i], s.w).w) <= 1e-14);
    }
}

TEST_CASE("select_t singleton, ties and bad grids") {
    TheorySetup s = theory_setup(3, 16, 4, 5);
    const std::vector<std::size_t> one{7};
    CHECK(select_t(s.state, one, s.w, network_loss(s.cfg, s.batch)).chosen_t == 7);

    const std::vector<std::size_t> grid{3, 6, 9};
    const auto flat = select_t(s.state, grid, s.w, [](const ModelWeights&) { return 1.0; });
    CHECK(flat.chosen_t == 3);
    CHECK(flat.losses.size() == 3);

    const std::vector<std::size_t> empty;
    const std::vector<std::size_t> unsorted{5, 2};
    const std::vector<std::size_t> with_zero{0, 2};
    CHECK_THROWS_AS(select_t(s.state, empty, s.w, network_loss(s.cfg, s.batch)), DomainError);
    CHECK_THROWS_AS(select_t(s.state, unsorted, s.w, network_loss(s.cfg, s.batch)), DomainError);
    CHECK_THROWS_AS(select_t(s.state, with_zero, s.w, network_loss(s.cfg, s.batch)), DomainError);
}

TEST_CASE("select_t picks the best grid point by exhaustive re-evaluation") {
    TheorySetup s = theory_setup(10, 2048, 16, 8);
    s.state.eta = 0.5 * 16.0 / kernel_spectrum(s.state.kernel).lambda_max;
    const std::vector<std::size_t> grid{100, 200, 300, 400, 500};
    const CandidateLoss scorer = network_loss(s.cfg, s.batch);
    const EvolutionResult res = select_t(s.state, grid, s.w, scorer);

    const FunctionEvolution ev = evolve_function(s.state, 500, grid);
    double best = INFINITY;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double l = scorer(evolve_weights(s.state, ev.residual_at(grid[i]), s.w));
        CHECK(l == doctest::Approx(res.losses[i]).epsilon(1e-12));
        best = std::min(best, l);
    }
    CHECK(res.losses[res.chosen_index] <= best * (1.0 + 1e-12));
    CHECK(res.chosen_t == grid[res.chosen_index]);
    CHECK(res.residual_history.size() == 501);
}

} // TEST_SUITE
