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

#include "ntkfed/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "ntkfed/error.hpp"

namespace ntkfed {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_eigen(const Matrix& m) {
    return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

MutMap as_eigen(Matrix& m) {
    return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
}

void check_symmetric(const Matrix& m, const char* op) {
    if (m.rows() != m.cols()) {
        throw DomainError(std::string(op) + ": matrix is not square (" + shape_str(m) + ")");
    }
    if (!all_finite(m.data())) {
        throw DomainError(std::string(op) + ": non-finite entry");
    }
    const double scale = max_abs(m.data());
    const std::size_t n = m.rows();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(m(i, j) - m(j, i)) > 1e-10 * scale) {
                throw DomainError(std::string(op) + ": matrix is not symmetric at (" + std::to_string(i) + "," +
                                  std::to_string(j) + ")");
            }
        }
    }
}

// Cyclic-by-row Jacobi. `vectors` may be null when only eigenvalues are wanted.
std::vector<double> jacobi(Matrix a, Matrix* vectors) {
    const std::size_t n = a.rows();
    if (n > 4096) {
        throw DomainError("sym_eig: dimension " + std::to_string(n) + " exceeds 4096");
    }
    // symmetrize exactly so rotations preserve symmetry
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = s;
            a(j, i) = s;
        }
    }
    if (vectors != nullptr) {
        *vectors = Matrix::identity(n);
    }
    const double norm = std::sqrt(frobenius_norm_sq(a));
    if (norm == 0.0) {
        return std::vector<double>(n, 0.0);
    }

    double prev_off = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                off += a(p, q) * a(p, q);
            }
        }
        off = std::sqrt(2.0 * off);
        if (off <= 1e-15 * norm || (off < 1e-12 * norm && off > 0.5 * prev_off)) {
            break;
        }
        prev_off = off;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-18 * norm) {
                    continue;
                }
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                // rows p, q  (Jᵀ·A)
                double* rp = a.row(p).data();
                double* rq = a.row(q).data();
                for (std::size_t k = 0; k < n; ++k) {
                    const double xp = rp[k];
                    const double xq = rq[k];
                    rp[k] = c * xp - s * xq;
                    rq[k] = s * xp + c * xq;
                }
                // columns p, q  (A·J)
                for (std::size_t k = 0; k < n; ++k) {
                    const double xp = a(k, p);
                    const double xq = a(k, q);
                    a(k, p) = c * xp - s * xq;
                    a(k, q) = s * xp + c * xq;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;

                if (vectors != nullptr) {
                    Matrix& v = *vectors;
                    for (std::size_t k = 0; k < n; ++k) {
                        const double xp = v(k, p);
                        const double xq = v(k, q);
                        v(k, p) = c * xp - s * xq;
                        v(k, q) = s * xp + c * xq;
                    }
                }
            }
        }
    }

    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        values[i] = a(i, i);
    }
    return values;
}

} // namespace

// -- Matrix / Tensor3 ---------------------------------------------------------

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw ShapeError("Matrix: data length " + std::to_string(data_.size()) + " != " + std::to_string(rows) +
                         "x" + std::to_string(cols));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw ShapeError("Matrix: ragged initializer");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Tensor3::Tensor3(std::size_t n, std::size_t d2, std::size_t d, double fill)
    : n_(n), d2_(d2), d_(d), data_(n * d2 * d, fill) {}

Tensor3::Tensor3(std::size_t n, std::size_t d2, std::size_t d, std::vector<double> data)
    : n_(n), d2_(d2), d_(d), data_(std::move(data)) {
    if (data_.size() != n * d2 * d) {
        throw ShapeError("Tensor3: data length does not match dimensions");
    }
}

Matrix Tensor3::horizontal(std::size_t i) const {
    auto s = slice(i);
    return Matrix(d2_, d_, std::vector<double>(s.begin(), s.end()));
}

Matrix Tensor3::lateral(std::size_t j) const {
    Matrix m(n_, d_);
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t k = 0; k < d_; ++k) {
            m(i, k) = (*this)(i, j, k);
        }
    }
    return m;
}

Tensor3 SparseTensor3::densify() const {
    Tensor3 t(n, d2, d);
    auto out = t.data();
    for (const auto& e : entries) {
        out[e.index] = e.value;
    }
    return t;
}

// -- products ----------------------------------------------------------------

double frobenius_inner(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("frobenius_inner: size mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "frobenius_inner");
    return frobenius_inner(a.data(), b.data());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimension mismatch " + shape_str(a) + " * " + shape_str(b));
    }
    Matrix c(a.rows(), b.cols());
    if (a.cols() == 0) {
        return c;
    }
    as_eigen(c).noalias() = as_eigen(a) * as_eigen(b);
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: row mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
    Matrix c(a.cols(), b.cols());
    if (a.rows() == 0) {
        return c;
    }
    as_eigen(c).noalias() = as_eigen(a).transpose() * as_eigen(b);
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator+");
    Matrix c = a;
    auto cd = c.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < cd.size(); ++i) {
        cd[i] += bd[i];
    }
    return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator-");
    Matrix c = a;
    auto cd = c.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < cd.size(); ++i) {
        cd[i] -= bd[i];
    }
    return c;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix c = a;
    for (double& x : c.data()) {
        x *= s;
    }
    return c;
}

double frobenius_norm_sq(const Matrix& a) {
    double acc = 0.0;
    for (double x : a.data()) {
        acc += x * x;
    }
    return acc;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("max_abs_diff: size mismatch");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// -- eigen -------------------------------------------------------------------

SymEig sym_eig(const Matrix& m) {
    check_symmetric(m, "sym_eig");
    Matrix vectors;
    std::vector<double> values = jacobi(m, &vectors);

    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });

    SymEig out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        out.values[c] = values[order[c]];
        for (std::size_t r = 0; r < n; ++r) {
            out.vectors(r, c) = vectors(r, order[c]);
        }
    }
    return out;
}

std::vector<double> sym_eigenvalues(const Matrix& m) {
    check_symmetric(m, "sym_eigenvalues");
    std::vector<double> values = jacobi(m, nullptr);
    std::sort(values.begin(), values.end());
    return values;
}

Matrix sym_expm_apply(const Matrix& h, double c, const Matrix& v) {
    if (h.rows() != v.rows()) {
        throw ShapeError("sym_expm_apply: h is " + shape_str(h) + " but v is " + shape_str(v));
    }
    if (c == 0.0) {
        return v;
    }
    const SymEig eig = sym_eig(h);
    Matrix coeff = matmul_tn(eig.vectors, v); // Vᵀ v
    for (std::size_t i = 0; i < coeff.rows(); ++i) {
        const double scale = std::exp(-c * eig.values[i]);
        for (double& x : coeff.row(i)) {
            x *= scale;
        }
    }
    return matmul(eig.vectors, coeff);
}

// -- top-k -------------------------------------------------------------------

std::size_t topk_keep_count(std::size_t total, double sparsity) {
    if (!(sparsity >= 0.0 && sparsity < 1.0)) {
        throw DomainError("topk_sparsify: sparsity must lie in [0,1), got " + std::to_string(sparsity));
    }
    if (total == 0) {
        return 0;
    }
    // the 1e-9 slack absorbs representation error in (1 - s)·total
    const double exact = (1.0 - sparsity) * static_cast<double>(total);
    const auto kept = static_cast<std::size_t>(std::ceil(exact - 1e-9));
    return std::clamp<std::size_t>(kept, 1, total);
}

SparseTensor3 topk_sparsify(const Tensor3& t, double sparsity) {
    const std::size_t total = t.size();
    const std::size_t kept = topk_keep_count(total, sparsity);

    SparseTensor3 out;
    out.n = t.n();
    out.d2 = t.d2();
    out.d = t.d();
    out.entries.reserve(kept);
    auto values = t.data();

    if (kept == total) {
        for (std::size_t i = 0; i < total; ++i) {
            out.entries.push_back({i, values[i]});
        }
        return out;
    }

    // magnitude of the kept-th largest entry
    std::vector<double> mags(total);
    for (std::size_t i = 0; i < total; ++i) {
        mags[i] = std::abs(values[i]);
    }
    auto nth = mags.begin() + static_cast<std::ptrdiff_t>(kept - 1);
    std::nth_element(mags.begin(), nth, mags.end(), std::greater<>());
    const double threshold = *nth;
    const auto above = static_cast<std::size_t>(
        std::count_if(mags.begin(), mags.end(), [threshold](double m) { return m > threshold; }));
    std::size_t ties_left = kept - above;
    mags.clear();
    mags.shrink_to_fit();

    for (std::size_t i = 0; i < total; ++i) {
        const double m = std::abs(values[i]);
        if (m > threshold) {
            out.entries.push_back({i, values[i]});
        } else if (m == threshold && ties_left > 0) {
            out.entries.push_back({i, values[i]});
            --ties_left;
        }
    }
    return out;
}

} // namespace ntkfed
