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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "ntkfed/error.hpp"
#include "ntkfed/linalg.hpp"

using namespace ntkfed;
using ntkfed::test::random_matrix;

TEST_SUITE("linalg") {

TEST_CASE("frobenius_inner small cases") {
    const Matrix a{{1, 2}};
    CHECK(frobenius_inner(a, a) == 5.0);
    const Matrix z(1, 2);
    CHECK(frobenius_inner(random_matrix(1, 2, 3), z) == 0.0);
    CHECK_THROWS_AS(frobenius_inner(Matrix(2, 2), Matrix(2, 3)), ShapeError);
}

TEST_CASE("frobenius_inner matches a double loop") {
    const Matrix a = random_matrix(3, 4, 11);
    const Matrix b = random_matrix(3, 4, 12);
    double ref = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            ref += a(i, j) * b(i, j);
        }
    }
    CHECK(std::abs(frobenius_inner(a, b) - ref) <= 1e-12 * std::abs(ref));
}

TEST_CASE("frobenius_inner is symmetric and bilinear") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Matrix a = random_matrix(4, 5, 100 + s);
        const Matrix b = random_matrix(4, 5, 200 + s);
        const Matrix c = random_matrix(4, 5, 300 + s);
        const double alpha = 0.3 + static_cast<double>(s);
        CHECK(frobenius_inner(a, b) == doctest::Approx(frobenius_inner(b, a)).epsilon(1e-14));
        const double lhs = frobenius_inner(alpha * a + b, c);
        const double rhs = alpha * frobenius_inner(a, c) + frobenius_inner(b, c);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * (std::abs(lhs) + 1.0));
    }
}

TEST_CASE("matmul against naive loops") {
    const Matrix a = random_matrix(5, 7, 1);
    const Matrix b = random_matrix(7, 3, 2);
    const Matrix c = matmul(a, b);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double ref = 0.0;
            for (std::size_t k = 0; k < 7; ++k) {
                ref += a(i, k) * b(k, j);
            }
            CHECK(c(i, j) == doctest::Approx(ref).epsilon(1e-12));
        }
    }
    const Matrix tn = matmul_tn(a, random_matrix(5, 2, 4));
    CHECK(max_abs_diff(tn.data(), matmul(transpose(a), random_matrix(5, 2, 4)).data()) < 1e-12);
    CHECK_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("tensor slices") {
    Tensor3 t(2, 3, 4);
    std::iota(t.data().begin(), t.data().end(), 0.0);
    const Matrix h = t.horizontal(1);
    CHECK(h.rows() == 3);
    CHECK(h(2, 3) == t(1, 2, 3));
    const Matrix l = t.lateral(2);
    CHECK(l.rows() == 2);
    CHECK(l.cols() == 4);
    CHECK(l(1, 0) == t(1, 2, 0));
}

TEST_CASE("sym_eig examples") {
    const auto id = sym_eig(Matrix::identity(3));
    CHECK(id.values == std::vector<double>{1, 1, 1});

    const auto d = sym_eig(Matrix{{2, 0}, {0, -1}});
    CHECK(d.values[0] == doctest::Approx(-1.0));
    CHECK(d.values[1] == doctest::Approx(2.0));
}

TEST_CASE("sym_eig reconstruction, orthonormality and trace") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Matrix m = test::random_symmetric(8, 40 + s);
        const SymEig e = sym_eig(m);
        REQUIRE(std::is_sorted(e.values.begin(), e.values.end()));
        Matrix lam(8, 8);
        for (std::size_t i = 0; i < 8; ++i) {
            lam(i, i) = e.values[i];
        }
        const Matrix rec = matmul(matmul(e.vectors, lam), transpose(e.vectors));
        CHECK(max_abs_diff(rec.data(), m.data()) < 1e-9);

        const Matrix gram = matmul_tn(e.vectors, e.vectors);
        CHECK(max_abs_diff(gram.data(), Matrix::identity(8).data()) < 1e-10);

        const double sum = std::accumulate(e.values.begin(), e.values.end(), 0.0);
        const double tr = test::trace(m);
        CHECK(std::abs(sum - tr) <= 1e-9 * std::max(1.0, std::abs(tr)));

        const Matrix mv = matmul(m, e.vectors);
        const double scale = std::sqrt(frobenius_norm_sq(m));
        for (std::size_t i = 0; i < 8; ++i) {
            for (std::size_t r = 0; r < 8; ++r) {
                CHECK(std::abs(mv(r, i) - e.values[i] * e.vectors(r, i)) <= 1e-8 * scale);
            }
        }
        const auto vals = sym_eigenvalues(m);
        CHECK(max_abs_diff(vals, e.values) < 1e-10 * scale);
    }
}

TEST_CASE("sym_eig rejects bad input") {
    CHECK_THROWS_AS(sym_eig(Matrix{{1, 2}, {0, 1}}), DomainError);
    CHECK_THROWS_AS(sym_eig(Matrix{{1, NAN}, {NAN, 1}}), DomainError);
    CHECK_THROWS_AS(sym_eig(Matrix(2, 3)), DomainError);
}

TEST_CASE("sym_expm_apply examples") {
    const Matrix v = random_matrix(4, 2, 5);
    CHECK(max_abs_diff(sym_expm_apply(test::random_psd(4, 6), 0.0, v).data(), v.data()) < 1e-12);

    const Matrix half = sym_expm_apply(Matrix::identity(2), std::log(2.0), Matrix{{1}, {1}});
    CHECK(half(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(half(1, 0) == doctest::Approx(0.5).epsilon(1e-14));

    CHECK_THROWS_AS(sym_expm_apply(Matrix::identity(3), 1.0, v), ShapeError);
}

TEST_CASE("sym_expm_apply matches a truncated Taylor series") {
    Matrix h = test::random_psd(6, 77);
    h = (1.0 / test::trace(h)) * h; // keep the series well conditioned
    const double c = 0.7;
    const Matrix v = random_matrix(6, 3, 78);

    // Σ_{k<20} (-c h)^k v / k!
    Matrix term = v;
    Matrix sum = v;
    for (int k = 1; k < 20; ++k) {
        term = (-c / k) * matmul(h, term);
        sum = sum + term;
    }
    CHECK(max_abs_diff(sym_expm_apply(h, c, v).data(), sum.data()) < 1e-9);
}

TEST_CASE("topk_sparsify examples") {
    const Tensor3 t = test::random_tensor(2, 3, 5, 9);
    const SparseTensor3 all = topk_sparsify(t, 0.0);
    CHECK(all.kept() == t.size());
    CHECK(all.densify() == t);

    const Tensor3 small(1, 1, 4, std::vector<double>{1, -5, 2, 0});
    const SparseTensor3 one = topk_sparsify(small, 0.75);
    REQUIRE(one.kept() == 1);
    CHECK(one.entries[0].index == 1);
    CHECK(one.entries[0].value == -5.0);

    CHECK(topk_sparsify(test::random_tensor(10, 10, 10, 1), 0.9).kept() == 100);
    CHECK(topk_keep_count(1000, 0.9) == 100);

    CHECK_THROWS_AS(topk_sparsify(t, 1.0), DomainError);
    CHECK_THROWS_AS(topk_sparsify(t, -0.1), DomainError);
}

TEST_CASE("topk_sparsify indices strictly increasing, ties to lower index") {
    const Tensor3 tied(1, 1, 4, std::vector<double>{3, -3, 3, 1});
    const SparseTensor3 s = topk_sparsify(tied, 0.5);
    REQUIRE(s.kept() == 2);
    CHECK(s.entries[0].index == 0);
    CHECK(s.entries[1].index == 1);

    const SparseTensor3 r = topk_sparsify(test::random_tensor(3, 4, 17, 23), 0.6);
    for (std::size_t i = 1; i < r.kept(); ++i) {
        CHECK(r.entries[i - 1].index < r.entries[i].index);
    }
}

TEST_CASE("topk_sparsify error is minimal over every support of the same size") {
    for (std::uint64_t s = 0; s < 6; ++s) {
        const std::size_t total = 6 + 2 * (s % 4); // 6..12 entries
        const Tensor3 t = test::random_tensor(1, 1, total, 500 + s);
        const double sparsity = 0.1 * static_cast<double>(s + 2);
        const SparseTensor3 sp = topk_sparsify(t, sparsity);
        const Tensor3 dense = sp.densify();
        double err = 0.0;
        for (std::size_t i = 0; i < total; ++i) {
            err += (dense.data()[i] - t.data()[i]) * (dense.data()[i] - t.data()[i]);
        }
        const std::size_t k = sp.kept();
        double best = INFINITY;
        for (std::uint32_t mask = 0; mask < (1U << total); ++mask) {
            if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) {
                continue;
            }
            double e = 0.0;
            for (std::size_t i = 0; i < total; ++i) {
                if ((mask & (1U << i)) == 0) {
                    e += t.data()[i] * t.data()[i];
                }
            }
            best = std::min(best, e);
        }
        CHECK(err <= best + 1e-15);
    }
}

} // TEST_SUITE
