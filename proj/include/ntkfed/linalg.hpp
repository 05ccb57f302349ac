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

#ifndef NTKFED_LINALG_HPP
#define NTKFED_LINALG_HPP

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace ntkfed {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Third-order tensor stored slice-major: [sample][output][weight].
/// Horizontal slice i is the d2 x d matrix of sample i.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t n, std::size_t d2, std::size_t d, double fill = 0.0);
    Tensor3(std::size_t n, std::size_t d2, std::size_t d, std::vector<double> data);

    std::size_t n() const noexcept { return n_; }
    std::size_t d2() const noexcept { return d2_; }
    std::size_t d() const noexcept { return d_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t slice_size() const noexcept { return d2_ * d_; }

    double& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
        return data_[(i * d2_ + j) * d_ + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return data_[(i * d2_ + j) * d_ + k];
    }

    std::span<double> slice(std::size_t i) noexcept { return {data_.data() + i * slice_size(), slice_size()}; }
    std::span<const double> slice(std::size_t i) const noexcept {
        return {data_.data() + i * slice_size(), slice_size()};
    }

    /// Copy of horizontal slice i as a d2 x d matrix.
    Matrix horizontal(std::size_t i) const;
    /// Copy of lateral slice j as an n x d matrix.
    Matrix lateral(std::size_t j) const;

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool operator==(const Tensor3&) const = default;

private:
    std::size_t n_ = 0;
    std::size_t d2_ = 0;
    std::size_t d_ = 0;
    std::vector<double> data_;
};

struct SparseEntry {
    std::uint64_t index = 0;
    double value = 0.0;
    bool operator==(const SparseEntry&) const = default;
};

/// Coordinate-list tensor produced by top-k compression. Indices are flat
/// offsets into the dense slice-major layout, strictly increasing.
struct SparseTensor3 {
    std::size_t n = 0;
    std::size_t d2 = 0;
    std::size_t d = 0;
    std::vector<SparseEntry> entries;

    std::size_t kept() const noexcept { return entries.size(); }
    std::size_t dense_size() const noexcept { return n * d2 * d; }
    Tensor3 densify() const;
};

// -- elementwise / products ------------------------------------------------

double frobenius_inner(std::span<const double> a, std::span<const double> b);
double frobenius_inner(const Matrix& a, const Matrix& b);

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

double frobenius_norm_sq(const Matrix& a);
double max_abs(std::span<const double> v);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> v);

// -- symmetric eigensolver ---------------------------------------------------

struct SymEig {
    std::vector<double> values; ///< ascending
    Matrix vectors;             ///< column i is the eigenvector of values[i]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Throws DomainError on asymmetric (beyond 1e-10 relative) or non-finite input.
SymEig sym_eig(const Matrix& m);

/// Eigenvalues only; same algorithm without accumulating rotations.
std::vector<double> sym_eigenvalues(const Matrix& m);

/// Computes exp(-c·h)·v for symmetric h via its eigendecomposition.
Matrix sym_expm_apply(const Matrix& h, double c, const Matrix& v);

// -- compression -------------------------------------------------------------

/// Keeps the ceil((1 - sparsity)·size) entries of largest magnitude over the
/// whole tensor. Ties go to the lower flat index.
SparseTensor3 topk_sparsify(const Tensor3& t, double sparsity);

/// Number of entries topk_sparsify keeps for a tensor of `total` entries.
std::size_t topk_keep_count(std::size_t total, double sparsity);

} // namespace ntkfed

#endif // NTKFED_LINALG_HPP
