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

#include "ntkfed/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "ntkfed/error.hpp"

namespace ntkfed {

namespace {

constexpr char kMagic[4] = {'N', 'T', 'K', 'W'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::ostream& out, T v) {
    unsigned char b[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(b), sizeof b);
}

template <class T>
T get_le(const unsigned char* b) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<T>(b[i]) << (8 * i);
    }
    return v;
}

} // namespace

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(std::ostream& out, std::vector<std::string> header) : out_(out), columns_(header.size()) {
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) {
        throw ShapeError("CsvWriter: row has " + std::to_string(cells.size()) + " cells, header has " +
                         std::to_string(columns_));
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) {
            out_ << ',';
        }
        out_ << cells[i];
    }
    out_ << '\n';
    out_.flush();
}

std::vector<std::string> metrics_header() {
    return {"round", "scheme", "chosen_t_or_tau", "train_loss", "test_acc", "uplink_bytes", "lambda_min", "wall_ms"};
}

std::vector<std::string> metrics_row(const RoundMetrics& m, bool record_wall_time) {
    return {std::to_string(m.round),
            std::string(scheme_name(m.scheme)),
            std::to_string(m.chosen),
            format_double(m.train_loss),
            format_double(m.test_accuracy),
            std::to_string(m.uplink_bytes),
            format_double(m.lambda_min),
            record_wall_time ? format_double(m.wall_ms) : "0"};
}

void save_weights(const std::filesystem::path& path, const std::vector<double>& w) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write weights file " + path.string());
    }
    out.write(kMagic, 4);
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint64_t>(out, w.size());
    for (double v : w) {
        put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out) {
        throw FormatError("failed writing weights file " + path.string());
    }
}

std::vector<double> load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot read weights file " + path.string());
    }
    unsigned char header[16];
    if (!in.read(reinterpret_cast<char*>(header), sizeof header)) {
        throw FormatError(path.string() + ": truncated weights header");
    }
    if (std::memcmp(header, kMagic, 4) != 0) {
        throw FormatError(path.string() + ": bad weights magic");
    }
    if (get_le<std::uint32_t>(header + 4) != kVersion) {
        throw FormatError(path.string() + ": unsupported weights version");
    }
    const auto count = get_le<std::uint64_t>(header + 8);
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(count));
    unsigned char b[8];
    for (std::uint64_t i = 0; i < count; ++i) {
        if (!in.read(reinterpret_cast<char*>(b), 8)) {
            throw FormatError(path.string() + ": weights payload shorter than its header says");
        }
        w.push_back(std::bit_cast<double>(get_le<std::uint64_t>(b)));
    }
    return w;
}

} // namespace ntkfed
