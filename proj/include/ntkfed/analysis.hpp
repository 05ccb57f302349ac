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

#ifndef NTKFED_ANALYSIS_HPP
#define NTKFED_ANALYSIS_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "ntkfed/linalg.hpp"
#include "ntkfed/model.hpp"
#include "ntkfed/ntk_engine.hpp"

namespace ntkfed {

struct Spectrum {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
};

/// Extreme eigenvalues of a symmetric kernel. Full Jacobi for N <= 512,
/// an eigenvalues-only tridiagonal solver above that.
Spectrum kernel_spectrum(const Matrix& theta);

/// Squared residual of the discrete function evolution against two envelopes:
/// the linear-recursion bound (1 - ηλ_min/N)^{2t} that is asserted, and the
/// looser (1 - ηλ_min/(2N))^t that is only reported.
struct DecayReport {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double eta = 0.0;
    std::size_t samples = 0;
    bool applicable = true; ///< eta <= N / lambda_max
    std::vector<double> residual_sq;        ///< t = 0..t_max
    std::vector<double> envelope;           ///< linear-recursion bound
    std::vector<double> loose_envelope;     ///< (1 - ηλ/(2N))^t bound
    std::vector<std::size_t> violations;    ///< steps where residual exceeds `envelope`
    std::size_t loose_violations = 0;
};

DecayReport check_decay(const GlobalState& state, std::size_t t_max);

/// One FedAvg round as seen by the decay monitor.
struct FedAvgRoundTrace {
    double residual_before = 0.0; ///< cohort ||f - Y||^2 at the broadcast weights
    double residual_after = 0.0;  ///< cohort ||f - Y||^2 after aggregation
    double lambda = 0.0;          ///< kernel eigenvalue surrogate for the round
    std::size_t cohort_samples = 0;
    std::size_t clients = 0;
    std::size_t tau = 1;
    double eta = 0.0;
};

struct DecayMonitorRow {
    double ratio = 0.0;    ///< residual_after / residual_before, NaN when undefined
    double envelope = 0.0; ///< 1 - ητλ/(2 N M)
    bool defined = false;
};

std::vector<DecayMonitorRow> fedavg_decay_monitor(std::span<const FedAvgRoundTrace> trace);

/// Residual ratio ||f_after - Y||^2 / ||f_before - Y||^2 after one round of
/// each scheme started from the same weights and cohort.
struct RoundComparison {
    double ntk_ratio = 0.0;
    double fedavg_ratio = 0.0;
    std::size_t ntk_t = 0;
};

/// Single-cohort comparison: NTK evolution with t chosen from `t_grid` on the
/// cohort loss versus FedAvg with `clients` equal shards, τ full-batch local
/// steps and uniform averaging.
RoundComparison compare_one_round(const ModelConfig& cfg, const ModelWeights& w, const Batch& cohort,
                                  std::size_t clients, double eta, std::size_t tau,
                                  std::span<const std::size_t> t_grid);

struct GapReport {
    std::vector<std::size_t> t;
    std::vector<double> gap;   ///< ||w_ntk(t) - w_gd(t)||_1
    std::vector<double> bound; ///< 2·sqrt(2 n d1)·η/(sqrt(π)·δ·α)·Σ_{u=1}^{t-1} γ_u
};

/// Compares closed-form NTK weights with full-batch gradient descent on the
/// real theory network, both started from `w0`. `grid` may include 0.
GapReport ntk_gd_gap(const ModelConfig& cfg, const ModelWeights& w0, const Batch& batch, double eta,
                     std::span<const std::size_t> grid, double delta = 0.05, double alpha = 1.0);

struct FlipReport {
    std::vector<std::size_t> counts; ///< per sample
    std::size_t max_count = 0;
    double bound = 0.0;              ///< sqrt(2/π)·n·R/(δ·α)
};

/// Counts hidden units whose indicator 1[<v_r, x_i> >= 0] differs between two
/// theory-net weight vectors. Throws DomainError if a row moved farther than R.
FlipReport activation_flips(const ModelWeights& w_ref, const ModelWeights& w_new, const ModelConfig& cfg,
                            const Matrix& X, double radius, double delta = 0.05, double alpha = 1.0);

} // namespace ntkfed

#endif // NTKFED_ANALYSIS_HPP
