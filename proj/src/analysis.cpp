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

#include "ntkfed/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "ntkfed/error.hpp"

namespace ntkfed {

namespace {

constexpr std::size_t kDenseSpectrumLimit = 512;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_symmetric(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw ShapeError("kernel_spectrum: matrix is not square");
    }
    double scale = 0.0;
    for (double v : m.data()) {
        if (!std::isfinite(v)) {
            throw DomainError("kernel_spectrum: non-finite entry");
        }
        scale = std::max(scale, std::abs(v));
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = i + 1; j < m.cols(); ++j) {
            if (std::abs(m(i, j) - m(j, i)) > 1e-10 * scale) {
                throw DomainError("kernel_spectrum: matrix is not symmetric at (" + std::to_string(i) + "," +
                                  std::to_string(j) + ")");
            }
        }
    }
}

Matrix cohort_residual(const Matrix& f, const Matrix& y) { return f - y; }

} // namespace

Spectrum kernel_spectrum(const Matrix& theta) {
    require_symmetric(theta);
    const std::size_t n = theta.rows();
    if (n == 0) {
        throw ShapeError("kernel_spectrum: empty matrix");
    }
    if (n <= kDenseSpectrumLimit) {
        const auto values = sym_eigenvalues(theta);
        return {values.front(), values.back()};
    }

    // Tridiagonal reduction without eigenvectors for the large kernels.
    const Eigen::Map<const RowMat> a(theta.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd(a), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw DomainError("kernel_spectrum: eigenvalue iteration did not converge");
    }
    return {solver.eigenvalues()(0), solver.eigenvalues()(static_cast<Eigen::Index>(n) - 1)};
}

DecayReport check_decay(const GlobalState& state, std::size_t t_max) {
    const Spectrum spec = kernel_spectrum(state.kernel);
    DecayReport rep;
    rep.lambda_min = spec.lambda_min;
    rep.lambda_max = spec.lambda_max;
    rep.eta = state.eta;
    rep.samples = state.samples();
    const double n = static_cast<double>(rep.samples);
    rep.applicable = state.eta <= n / spec.lambda_max * (1.0 + 1e-12);

    const FunctionEvolution ev = evolve_function(state, t_max);
    rep.residual_sq = ev.residual_sq;

    const double r0 = rep.residual_sq.front();
    const double lam = std::max(spec.lambda_min, 0.0);
    const double q_lin = 1.0 - state.eta * lam / n;
    const double q_loose = 1.0 - state.eta * lam / (2.0 * n);
    // Round-off floor of the iterated outputs: residuals cannot be resolved
    // below a few ulps of the output scale.
    const double scale = std::sqrt(frobenius_norm_sq(state.labels)) + std::sqrt(frobenius_norm_sq(state.outputs));
    const double floor = std::pow(1e-12 * scale, 2);

    rep.envelope.resize(t_max + 1);
    rep.loose_envelope.resize(t_max + 1);
    for (std::size_t t = 0; t <= t_max; ++t) {
        rep.envelope[t] = std::pow(q_lin * q_lin, static_cast<double>(t)) * r0;
        rep.loose_envelope[t] = std::pow(q_loose, static_cast<double>(t)) * r0;
        const double r = rep.residual_sq[t];
        if (r > rep.envelope[t] * (1.0 + 1e-9) + floor) {
            rep.violations.push_back(t);
        }
        if (r > rep.loose_envelope[t] * (1.0 + 1e-9) + floor) {
            ++rep.loose_violations;
        }
    }
    return rep;
}

std::vector<DecayMonitorRow> fedavg_decay_monitor(std::span<const FedAvgRoundTrace> trace) {
    std::vector<DecayMonitorRow> rows;
    rows.reserve(trace.size());
    for (const auto& r : trace) {
        DecayMonitorRow row;
        const double denom = 2.0 * static_cast<double>(r.cohort_samples) * static_cast<double>(r.clients);
        row.envelope = 1.0 - r.eta * static_cast<double>(r.tau) * r.lambda / denom;
        row.defined = r.residual_before > 0.0;
        row.ratio = row.defined ? r.residual_after / r.residual_before : std::numeric_limits<double>::quiet_NaN();
        rows.push_back(row);
    }
    return rows;
}

RoundComparison compare_one_round(const ModelConfig& cfg, const ModelWeights& w, const Batch& cohort,
                                  std::size_t clients, double eta, std::size_t tau,
                                  std::span<const std::size_t> t_grid) {
    if (clients == 0 || clients > cohort.size()) {
        throw DomainError("compare_one_round: need 1 <= clients <= cohort size");
    }
    const Matrix f0 = forward(w, cfg, cohort.X);
    const double r0 = frobenius_norm_sq(cohort_residual(f0, cohort.Y));

    RoundComparison out;
    {
        ClientUpdate u;
        u.jacobian = batch_jacobian(w, cfg, cohort.X);
        u.labels = cohort.Y;
        u.outputs = f0;
        u.n_samples = cohort.size();
        std::vector<ClientUpdate> ups;
        ups.push_back(std::move(u));
        GlobalState state = assemble_global(std::move(ups));
        state.kernel = build_kernel(state.jacobian);
        state.eta = eta;
        const EvolutionResult res = select_t(state, t_grid, w, network_loss(cfg, cohort));
        out.ntk_t = res.chosen_t;
        out.ntk_ratio = frobenius_norm_sq(cohort_residual(forward(res.next_weights, cfg, cohort.X), cohort.Y)) / r0;
    }

    std::vector<double> avg(w.size(), 0.0);
    const std::size_t n = cohort.size();
    for (std::size_t m = 0; m < clients; ++m) {
        const std::size_t lo = m * n / clients;
        const std::size_t hi = (m + 1) * n / clients;
        std::vector<std::size_t> rows(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) {
            rows[i - lo] = i;
        }
        Batch shard;
        shard.X = Matrix(rows.size(), cohort.X.cols());
        shard.Y = Matrix(rows.size(), cohort.Y.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::copy(cohort.X.row(rows[i]).begin(), cohort.X.row(rows[i]).end(), shard.X.row(i).begin());
            std::copy(cohort.Y.row(rows[i]).begin(), cohort.Y.row(rows[i]).end(), shard.Y.row(i).begin());
        }
        ModelWeights local = w;
        for (std::size_t s = 0; s < tau; ++s) {
            const auto g = batch_gradient(local, cfg, shard);
            for (std::size_t k = 0; k < g.size(); ++k) {
                local.w[k] -= eta * g[k];
            }
        }
        for (std::size_t k = 0; k < avg.size(); ++k) {
            avg[k] += local.w[k] / static_cast<double>(clients);
        }
    }
    const ModelWeights averaged = with_values(w, std::move(avg));
    out.fedavg_ratio = frobenius_norm_sq(cohort_residual(forward(averaged, cfg, cohort.X), cohort.Y)) / r0;
    return out;
}

GapReport ntk_gd_gap(const ModelConfig& cfg, const ModelWeights& w0, const Batch& batch, double eta,
                     std::span<const std::size_t> grid, double delta, double alpha) {
    if (cfg.variant != Variant::theory) {
        throw DomainError("ntk_gd_gap: requires the theory network");
    }
    if (grid.empty()) {
        throw DomainError("ntk_gd_gap: empty grid");
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (grid[i] <= grid[i - 1]) {
            throw DomainError("ntk_gd_gap: grid must be strictly increasing");
        }
    }
    const std::size_t t_max = grid.back();

    ClientUpdate u;
    u.jacobian = batch_jacobian(w0, cfg, batch.X);
    u.labels = batch.Y;
    u.outputs = forward(w0, cfg, batch.X);
    u.n_samples = batch.size();
    std::vector<ClientUpdate> ups;
    ups.push_back(std::move(u));
    GlobalState state = assemble_global(std::move(ups));
    state.kernel = build_kernel(state.jacobian);
    state.eta = eta;

    const FunctionEvolution ev = evolve_function(state, t_max, grid);
    std::vector<Matrix> residuals;
    for (std::size_t t : grid) {
        residuals.push_back(ev.residual_at(t));
    }
    const std::vector<ModelWeights> ntk = evolve_weights(state, residuals, w0);

    const double coeff = 2.0 * std::sqrt(2.0 * static_cast<double>(cfg.hidden) * static_cast<double>(cfg.input_dim)) *
                         eta / (std::sqrt(std::numbers::pi) * delta * alpha);

    GapReport rep;
    rep.t.assign(grid.begin(), grid.end());
    rep.gap.resize(grid.size());
    rep.bound.resize(grid.size());

    // prefix[t] = Σ_{u=1}^{t-1} γ_u with γ_u = max_i |f^(u)_i - y_i|
    std::vector<double> prefix(t_max + 1, 0.0);
    for (std::size_t t = 2; t <= t_max; ++t) {
        prefix[t] = prefix[t - 1] + ev.residual_max[t - 1];
    }

    ModelWeights gd = w0;
    std::size_t step = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        while (step < grid[g]) {
            const auto grad = batch_gradient(gd, cfg, batch);
            for (std::size_t k = 0; k < grad.size(); ++k) {
                gd.w[k] -= eta * grad[k];
            }
            ++step;
            if (!all_finite(gd.w)) {
                throw DivergenceError("ntk_gd_gap: gradient descent diverged at step " + std::to_string(step));
            }
        }
        double l1 = 0.0;
        for (std::size_t k = 0; k < gd.w.size(); ++k) {
            l1 += std::abs(ntk[g].w[k] - gd.w[k]);
        }
        rep.gap[g] = l1;
        rep.bound[g] = coeff * prefix[grid[g]];
    }
    return rep;
}

FlipReport activation_flips(const ModelWeights& w_ref, const ModelWeights& w_new, const ModelConfig& cfg,
                            const Matrix& X, double radius, double delta, double alpha) {
    if (cfg.variant != Variant::theory) {
        throw DomainError("activation_flips: requires the theory network");
    }
    const std::size_t n = cfg.hidden;
    const std::size_t d1 = cfg.input_dim;
    if (w_ref.size() != n * d1 || w_new.size() != n * d1 || X.cols() != d1) {
        throw ShapeError("activation_flips: weight or input dimensions disagree with the model");
    }
    for (std::size_t r = 0; r < n; ++r) {
        double sq = 0.0;
        for (std::size_t k = 0; k < d1; ++k) {
            const double dv = w_new.w[r * d1 + k] - w_ref.w[r * d1 + k];
            sq += dv * dv;
        }
        if (std::sqrt(sq) > radius * (1.0 + 1e-12)) {
            throw DomainError("activation_flips: hidden unit " + std::to_string(r) + " moved beyond radius " +
                              std::to_string(radius));
        }
    }
    FlipReport rep;
    rep.counts.assign(X.rows(), 0);
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const auto x = X.row(i);
        std::size_t count = 0;
        for (std::size_t r = 0; r < n; ++r) {
            double a = 0.0;
            double b = 0.0;
            for (std::size_t k = 0; k < d1; ++k) {
                a += w_ref.w[r * d1 + k] * x[k];
                b += w_new.w[r * d1 + k] * x[k];
            }
            if ((a >= 0.0) != (b >= 0.0)) {
                ++count;
            }
        }
        rep.counts[i] = count;
        rep.max_count = std::max(rep.max_count, count);
    }
    rep.bound = std::sqrt(2.0 / std::numbers::pi) * static_cast<double>(n) * radius / (delta * alpha);
    return rep;
}

} // namespace ntkfed
