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

#ifndef NTKFED_DATA_HPP
#define NTKFED_DATA_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ntkfed/linalg.hpp"

namespace ntkfed {

struct Dataset {
    Matrix X;                ///< N x d1
    std::vector<int> labels; ///< N entries in [0, classes)
    std::size_t classes = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return X.cols(); }
    void validate() const;
};

/// Client m owns the sample indices assignment[m].
struct PartitionSpec {
    std::vector<std::vector<std::size_t>> assignment;

    std::size_t clients() const noexcept { return assignment.size(); }
    std::size_t total() const noexcept;
};

struct SyntheticSpec {
    std::size_t n = 0;
    std::size_t dim = 2;
    std::size_t classes = 2;
    std::uint64_t seed = 0;
    /// Class means are drawn N(0, class_sep² / dim) per coordinate; the
    /// within-class noise is N(0, 1 / dim). Larger values separate classes.
    double class_sep = 2.0;
};

// -- IDX container -------------------------------------------------------------

/// Reads an IDX image/label pair. Pixels are scaled by 1/255. Paths ending in
/// ".gz" are gunzipped on the fly. The class count is max(10, largest label + 1).
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Writes raw IDX files (gzip when the path ends in ".gz").
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const std::vector<std::uint8_t>& pixels, std::uint32_t count, std::uint32_t rows,
               std::uint32_t cols, const std::vector<std::uint8_t>& label_bytes);

// -- synthetic data and preprocessing ------------------------------------------

Dataset make_synthetic(const SyntheticSpec& spec);
Dataset make_synthetic(std::size_t n, std::size_t dim, std::size_t classes, std::uint64_t seed);

/// Rows scaled to unit l2 norm. Throws DomainError on an all-zero row.
Dataset unit_normalize(const Dataset& ds);
Matrix unit_rows(Matrix X);

Matrix one_hot(const std::vector<int>& labels, std::size_t classes);

Dataset select_rows(const Dataset& ds, const std::vector<std::size_t>& indices);

/// Splits off the last `n_test` rows of a dataset as a held-out set.
std::pair<Dataset, Dataset> split_tail(const Dataset& ds, std::size_t n_test);

/// Uniform random subset of `n` rows (kept in original order).
Dataset random_subset(const Dataset& ds, std::size_t n, std::uint64_t seed);

// -- partitioning ----------------------------------------------------------------

/// Label-skewed partition: client m draws q_m ~ Dir(alpha) and fills an equal
/// quota with class counts proportional to q_m. Exhausted classes spill to the
/// most abundant remaining class.
PartitionSpec dirichlet_partition(const Dataset& ds, std::size_t clients, double alpha, std::uint64_t seed);

/// Each client keeps max(1, floor(beta·N_m)) of its indices, uniformly without
/// replacement, in their original order.
PartitionSpec subsample(const PartitionSpec& part, double beta, std::uint64_t seed);

/// Subsample of a single index list; `seed` keys the draw.
std::vector<std::size_t> subsample_indices(const std::vector<std::size_t>& indices, double beta, std::uint64_t seed);

} // namespace ntkfed

#endif // NTKFED_DATA_HPP
