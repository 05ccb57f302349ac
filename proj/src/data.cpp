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

#include "ntkfed/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include <zlib.h>

#include "ntkfed/error.hpp"
#include "ntkfed/rng.hpp"

namespace ntkfed {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

bool is_gzip_path(const std::filesystem::path& p) { return p.extension() == ".gz"; }

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes;
    if (is_gzip_path(path)) {
        gzFile f = gzopen(path.c_str(), "rb");
        if (f == nullptr) {
            throw FormatError("cannot open " + path.string());
        }
        std::uint8_t buf[1 << 16];
        int got = 0;
        while ((got = gzread(f, buf, sizeof(buf))) > 0) {
            bytes.insert(bytes.end(), buf, buf + got);
        }
        const bool failed = got < 0;
        gzclose(f);
        if (failed) {
            throw FormatError("gzip stream error in " + path.string());
        }
        return bytes;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open " + path.string());
    }
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return bytes;
}

void write_all(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    if (is_gzip_path(path)) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (f == nullptr) {
            throw FormatError("cannot create " + path.string());
        }
        const int wrote = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
        gzclose(f);
        if (wrote != static_cast<int>(bytes.size())) {
            throw FormatError("gzip write failed for " + path.string());
        }
        return;
    }
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw FormatError("write failed for " + path.string());
    }
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off, const std::filesystem::path& path) {
    if (off + 4 > b.size()) {
        throw FormatError("truncated IDX header in " + path.string());
    }
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 24));
    b.push_back(static_cast<std::uint8_t>(v >> 16));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::size_t> draw_positions(std::size_t population, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> pos(population);
    std::iota(pos.begin(), pos.end(), 0);
    Philox gen(seed);
    // partial Fisher-Yates
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, population - 1);
        std::swap(pos[i], pos[pick(gen)]);
    }
    pos.resize(k);
    std::sort(pos.begin(), pos.end());
    return pos;
}

} // namespace

void Dataset::validate() const {
    if (labels.empty()) {
        throw DomainError("dataset: no samples");
    }
    if (X.rows() != labels.size()) {
        throw ShapeError("dataset: feature rows and label count differ");
    }
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= classes) {
            throw DomainError("dataset: label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
        }
    }
}

std::size_t PartitionSpec::total() const noexcept {
    std::size_t t = 0;
    for (const auto& a : assignment) {
        t += a.size();
    }
    return t;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto img = read_all(images);
    const auto lab = read_all(labels);

    if (read_be32(img, 0, images) != kImageMagic) {
        throw FormatError("bad IDX image magic in " + images.string());
    }
    if (read_be32(lab, 0, labels) != kLabelMagic) {
        throw FormatError("bad IDX label magic in " + labels.string());
    }
    const std::size_t count = read_be32(img, 4, images);
    const std::size_t rows = read_be32(img, 8, images);
    const std::size_t cols = read_be32(img, 12, images);
    const std::size_t label_count = read_be32(lab, 4, labels);
    if (count != label_count) {
        throw FormatError("IDX count mismatch: " + std::to_string(count) + " images vs " +
                          std::to_string(label_count) + " labels");
    }
    const std::size_t dim = rows * cols;
    if (img.size() < 16 + count * dim) {
        throw FormatError("truncated IDX image payload in " + images.string());
    }
    if (lab.size() < 8 + count) {
        throw FormatError("truncated IDX label payload in " + labels.string());
    }

    Dataset ds;
    ds.X = Matrix(count, dim);
    ds.labels.resize(count);
    int max_label = 0;
    for (std::size_t i = 0; i < count; ++i) {
        auto row = ds.X.row(i);
        const std::uint8_t* px = img.data() + 16 + i * dim;
        for (std::size_t k = 0; k < dim; ++k) {
            row[k] = static_cast<double>(px[k]) / 255.0;
        }
        ds.labels[i] = lab[8 + i];
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.classes = std::max<std::size_t>(10, static_cast<std::size_t>(max_label) + 1);
    return ds;
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const std::vector<std::uint8_t>& pixels, std::uint32_t count, std::uint32_t rows,
               std::uint32_t cols, const std::vector<std::uint8_t>& label_bytes) {
    if (pixels.size() != std::size_t{count} * rows * cols || label_bytes.size() != count) {
        throw ShapeError("write_idx: payload sizes do not match the header");
    }
    std::vector<std::uint8_t> img;
    img.reserve(16 + pixels.size());
    put_be32(img, kImageMagic);
    put_be32(img, count);
    put_be32(img, rows);
    put_be32(img, cols);
    img.insert(img.end(), pixels.begin(), pixels.end());
    write_all(images, img);

    std::vector<std::uint8_t> lab;
    put_be32(lab, kLabelMagic);
    put_be32(lab, count);
    lab.insert(lab.end(), label_bytes.begin(), label_bytes.end());
    write_all(labels, lab);
}

Dataset make_synthetic(const SyntheticSpec& spec) {
    if (spec.classes < 1 || spec.dim < 1) {
        throw DomainError("make_synthetic: classes and dim must be >= 1");
    }
    if (spec.n < spec.classes) {
        throw DomainError("make_synthetic: N = " + std::to_string(spec.n) + " is smaller than C = " +
                          std::to_string(spec.classes));
    }
    const std::size_t C = spec.classes;
    const std::size_t D = spec.dim;
    std::normal_distribution<double> normal(0.0, 1.0);

    Philox mean_gen(derive_seed(spec.seed, "synthetic-means"));
    Matrix means(C, D);
    const double mean_scale = spec.class_sep / std::sqrt(static_cast<double>(D));
    for (double& v : means.data()) {
        v = mean_scale * normal(mean_gen);
    }

    // one sample per class first, the rest uniform, then shuffled
    Philox label_gen(derive_seed(spec.seed, "synthetic-labels"));
    Dataset ds;
    ds.classes = C;
    ds.labels.resize(spec.n);
    std::uniform_int_distribution<int> cls(0, static_cast<int>(C) - 1);
    for (std::size_t i = 0; i < spec.n; ++i) {
        ds.labels[i] = i < C ? static_cast<int>(i) : cls(label_gen);
    }
    std::shuffle(ds.labels.begin(), ds.labels.end(), label_gen);

    Philox noise_gen(derive_seed(spec.seed, "synthetic-noise"));
    const double noise_scale = 1.0 / std::sqrt(static_cast<double>(D));
    ds.X = Matrix(spec.n, D);
    for (std::size_t i = 0; i < spec.n; ++i) {
        auto row = ds.X.row(i);
        auto mu = means.row(static_cast<std::size_t>(ds.labels[i]));
        for (std::size_t k = 0; k < D; ++k) {
            row[k] = mu[k] + noise_scale * normal(noise_gen);
        }
    }
    return ds;
}

Dataset make_synthetic(std::size_t n, std::size_t dim, std::size_t classes, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.n = n;
    spec.dim = dim;
    spec.classes = classes;
    spec.seed = seed;
    return make_synthetic(spec);
}

Matrix unit_rows(Matrix X) {
    for (std::size_t i = 0; i < X.rows(); ++i) {
        auto row = X.row(i);
        double sq = 0.0;
        for (double v : row) {
            sq += v * v;
        }
        if (sq == 0.0) {
            throw DomainError("unit_normalize: row " + std::to_string(i) + " is all zero");
        }
        const double inv = 1.0 / std::sqrt(sq);
        for (double& v : row) {
            v *= inv;
        }
    }
    return X;
}

Dataset unit_normalize(const Dataset& ds) {
    Dataset out = ds;
    out.X = unit_rows(std::move(out.X));
    return out;
}

Matrix one_hot(const std::vector<int>& labels, std::size_t classes) {
    Matrix Y(labels.size(), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
            throw DomainError("one_hot: label out of range");
        }
        Y(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    return Y;
}

Dataset select_rows(const Dataset& ds, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.classes = ds.classes;
    out.X = Matrix(indices.size(), ds.dim());
    out.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= ds.size()) {
            throw DomainError("select_rows: index out of range");
        }
        auto src = ds.X.row(indices[i]);
        std::copy(src.begin(), src.end(), out.X.row(i).begin());
        out.labels[i] = ds.labels[indices[i]];
    }
    return out;
}

std::pair<Dataset, Dataset> split_tail(const Dataset& ds, std::size_t n_test) {
    if (n_test >= ds.size()) {
        throw DomainError("split_tail: held-out size must be smaller than the dataset");
    }
    std::vector<std::size_t> head(ds.size() - n_test);
    std::vector<std::size_t> tail(n_test);
    std::iota(head.begin(), head.end(), 0);
    std::iota(tail.begin(), tail.end(), head.size());
    return {select_rows(ds, head), select_rows(ds, tail)};
}

Dataset random_subset(const Dataset& ds, std::size_t n, std::uint64_t seed) {
    if (n >= ds.size()) {
        return ds;
    }
    return select_rows(ds, draw_positions(ds.size(), n, seed));
}

PartitionSpec dirichlet_partition(const Dataset& ds, std::size_t clients, double alpha, std::uint64_t seed) {
    if (clients < 1) {
        throw DomainError("dirichlet_partition: need at least one client");
    }
    if (!(alpha > 0.0)) {
        throw DomainError("dirichlet_partition: alpha must be > 0");
    }
    const std::size_t C = ds.classes;
    const std::size_t N = ds.size();

    std::vector<std::vector<std::size_t>> pools(C);
    for (std::size_t i = 0; i < N; ++i) {
        pools[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    }
    Philox pool_gen(derive_seed(seed, "dirichlet-pools"));
    for (auto& pool : pools) {
        std::shuffle(pool.begin(), pool.end(), pool_gen);
    }

    Philox dir_gen(derive_seed(seed, "dirichlet-proportions"));
    std::gamma_distribution<double> gamma(alpha, 1.0);

    PartitionSpec part;
    part.assignment.resize(clients);
    for (std::size_t m = 0; m < clients; ++m) {
        const std::size_t quota = N / clients + (m < N % clients ? 1 : 0);

        std::vector<double> q(C);
        double sum = 0.0;
        for (double& v : q) {
            v = gamma(dir_gen);
            sum += v;
        }
        if (!(sum > 0.0)) {
            // every gamma draw underflowed: put all mass on one class
            std::uniform_int_distribution<std::size_t> pick(0, C - 1);
            std::fill(q.begin(), q.end(), 0.0);
            q[pick(dir_gen)] = 1.0;
            sum = 1.0;
        }

        // largest-remainder rounding of quota·q
        std::vector<std::size_t> target(C);
        std::vector<std::pair<double, std::size_t>> remainders;
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < C; ++c) {
            const double exact = static_cast<double>(quota) * q[c] / sum;
            target[c] = static_cast<std::size_t>(std::floor(exact));
            assigned += target[c];
            remainders.emplace_back(exact - std::floor(exact), c);
        }
        std::stable_sort(remainders.begin(), remainders.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t r = 0; assigned < quota && r < remainders.size(); ++r, ++assigned) {
            ++target[remainders[r].second];
        }

        auto& mine = part.assignment[m];
        std::size_t deficit = 0;
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t take = std::min(target[c], pools[c].size());
            for (std::size_t k = 0; k < take; ++k) {
                mine.push_back(pools[c].back());
                pools[c].pop_back();
            }
            deficit += target[c] - take;
        }
        while (deficit > 0) {
            std::size_t richest = 0;
            for (std::size_t c = 1; c < C; ++c) {
                if (pools[c].size() > pools[richest].size()) {
                    richest = c;
                }
            }
            if (pools[richest].empty()) {
                break; // dataset exhausted
            }
            const std::size_t take = std::min(deficit, pools[richest].size());
            for (std::size_t k = 0; k < take; ++k) {
                mine.push_back(pools[richest].back());
                pools[richest].pop_back();
            }
            deficit -= take;
        }
        std::sort(mine.begin(), mine.end());
    }
    return part;
}

std::vector<std::size_t> subsample_indices(const std::vector<std::size_t>& indices, double beta, std::uint64_t seed) {
    if (!(beta > 0.0 && beta <= 1.0)) {
        throw DomainError("subsample: beta must lie in (0,1], got " + std::to_string(beta));
    }
    if (indices.empty()) {
        return {};
    }
    const double exact = beta * static_cast<double>(indices.size());
    const std::size_t keep =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(exact + 1e-9)), 1, indices.size());
    if (keep == indices.size()) {
        return indices;
    }
    std::vector<std::size_t> out;
    out.reserve(keep);
    for (std::size_t p : draw_positions(indices.size(), keep, seed)) {
        out.push_back(indices[p]);
    }
    return out;
}

PartitionSpec subsample(const PartitionSpec& part, double beta, std::uint64_t seed) {
    if (!(beta > 0.0 && beta <= 1.0)) {
        throw DomainError("subsample: beta must lie in (0,1], got " + std::to_string(beta));
    }
    PartitionSpec out;
    out.assignment.reserve(part.clients());
    for (std::size_t m = 0; m < part.clients(); ++m) {
        out.assignment.push_back(subsample_indices(part.assignment[m], beta, derive_seed(seed, "subsample", m)));
    }
    return out;
}

} // namespace ntkfed
