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

#include "ntkfed/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "ntkfed/analysis.hpp"
#include "ntkfed/cp.hpp"
#include "ntkfed/data.hpp"
#include "ntkfed/error.hpp"
#include "ntkfed/federation.hpp"
#include "ntkfed/model.hpp"
#include "ntkfed/ntk_engine.hpp"
#include "ntkfed/rng.hpp"

namespace ntkfed {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(3);
    ss << std::scientific << v;
    return ss.str();
}

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    Philox gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : m.data()) {
        v = normal(gen);
    }
    return m;
}

Tensor3 gaussian_tensor(std::size_t n, std::size_t d2, std::size_t d, std::uint64_t seed) {
    Matrix flat = gaussian(1, n * d2 * d, seed);
    return Tensor3(n, d2, d, std::vector<double>(flat.data().begin(), flat.data().end()));
}

// Sign targets for the single-output theory net.
Matrix sign_targets(std::size_t n, std::uint64_t seed) {
    Matrix y(n, 1);
    Philox gen(seed);
    for (std::size_t i = 0; i < n; ++i) {
        y(i, 0) = (gen() & 1U) ? 1.0 : -1.0;
    }
    return y;
}

GlobalState single_state(const ModelWeights& w, const ModelConfig& cfg, const Batch& b, double eta) {
    std::vector<ClientUpdate> ups;
    ups.push_back(client_update(w, cfg, b, 0));
    GlobalState s = assemble_global(std::move(ups));
    s.kernel = build_kernel(s.jacobian);
    s.eta = eta;
    return s;
}

double safe_eta(const Matrix& kernel, double fraction) {
    const Spectrum sp = kernel_spectrum(kernel);
    return fraction * static_cast<double>(kernel.rows()) / sp.lambda_max;
}

struct Recorder {
    std::string group;
    std::vector<CheckResult>& out;

    void run(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
        CheckResult r;
        r.group = group;
        r.name = group + "." + name;
        const auto start = Clock::now();
        try {
            auto [ok, detail] = body();
            r.passed = ok;
            r.detail = std::move(detail);
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = std::string("exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
        out.push_back(std::move(r));
    }
};

// -- jacobian ------------------------------------------------------------------

ModelConfig random_config(std::size_t p) {
    if (p % 2 == 1) {
        return ModelConfig::theory(2 + p % 5, 3 + (p * 7) % 10);
    }
    return ModelConfig::experiment(2 + p % 5, 3 + (p * 7) % 10, 1 + p % 4);
}

ModelWeights random_weights(const ModelConfig& cfg, std::uint64_t seed) {
    ModelWeights w = init_weights(cfg, seed);
    if (cfg.variant == Variant::experiment) {
        // non-zero biases so their derivatives are exercised
        Matrix noise = gaussian(1, w.size(), seed ^ 0xb1a5ULL);
        for (const char* name : {"b1", "b2"}) {
            const Segment& s = w.segment(name);
            for (std::size_t k = 0; k < s.rows * s.cols; ++k) {
                w.w[s.offset + k] = 0.1 * noise(0, s.offset + k);
            }
        }
    }
    return w;
}

bool close_fd(double fd, double exact) { return std::abs(fd - exact) <= 1e-5 * std::abs(exact) + 1e-8; }

void jacobian_group(const CheckOptions& opts, Recorder& rec) {
    constexpr double h = 1e-5;
    rec.run("per_sample_finite_difference", [&] {
        double worst = 0.0;
        std::size_t bad = 0;
        for (std::size_t p = 0; p < 20; ++p) {
            const ModelConfig cfg = random_config(p);
            ModelWeights w = random_weights(cfg, derive_seed(opts.seed, "jac-weights", p));
            const Matrix x = gaussian(1, cfg.input_dim, derive_seed(opts.seed, "jac-input", p));
            const Matrix J = per_sample_jacobian(w, cfg, x.row(0));
            for (std::size_t k = 0; k < w.size(); ++k) {
                const double keep = w.w[k];
                w.w[k] = keep + h;
                const Matrix fp = forward(w, cfg, x);
                w.w[k] = keep - h;
                const Matrix fm = forward(w, cfg, x);
                w.w[k] = keep;
                for (std::size_t j = 0; j < cfg.output_dim; ++j) {
                    const double fd = (fp(0, j) - fm(0, j)) / (2 * h);
                    worst = std::max(worst, std::abs(fd - J(j, k)) / std::max(std::abs(J(j, k)), 1e-3));
                    bad += close_fd(fd, J(j, k)) ? 0 : 1;
                }
            }
        }
        return std::make_pair(bad == 0, "20 configs, mismatches=" + std::to_string(bad) + ", worst rel=" + fmt(worst));
    });
    rec.run("batch_gradient_finite_difference", [&] {
        double worst = 0.0;
        std::size_t bad = 0;
        for (std::size_t p = 0; p < 20; ++p) {
            const ModelConfig cfg = random_config(p);
            ModelWeights w = random_weights(cfg, derive_seed(opts.seed, "grad-weights", p));
            Batch b;
            b.X = gaussian(4, cfg.input_dim, derive_seed(opts.seed, "grad-input", p));
            b.Y = gaussian(4, cfg.output_dim, derive_seed(opts.seed, "grad-target", p));
            const auto g = batch_gradient(w, cfg, b);
            for (std::size_t k = 0; k < w.size(); ++k) {
                const double keep = w.w[k];
                w.w[k] = keep + h;
                const double lp = loss(forward(w, cfg, b.X), b.Y);
                w.w[k] = keep - h;
                const double lm = loss(forward(w, cfg, b.X), b.Y);
                w.w[k] = keep;
                const double fd = (lp - lm) / (2 * h);
                worst = std::max(worst, std::abs(fd - g[k]) / std::max(std::abs(g[k]), 1e-3));
                bad += close_fd(fd, g[k]) ? 0 : 1;
            }
        }
        return std::make_pair(bad == 0, "20 configs, mismatches=" + std::to_string(bad) + ", worst rel=" + fmt(worst));
    });
}

// -- kernel ----------------------------------------------------------------------

void kernel_group(const CheckOptions& opts, Recorder& rec) {
    struct Case {
        Tensor3 J;
        Matrix theta;
    };
    std::vector<Case> cases;
    for (std::size_t c = 0; c < 50; ++c) {
        const std::size_t n = 1 + (c * 13) % 64;
        const std::size_t d2 = 1 + c % 4;
        const std::size_t d = (c % 10 == 9) ? 300 + c : 1 + (c * 7) % 40;
        Tensor3 J = gaussian_tensor(n, d2, d, derive_seed(opts.seed, "kernel-case", c));
        Matrix theta = build_kernel(J);
        cases.push_back({std::move(J), std::move(theta)});
    }
    if (opts.inject_kernel_asymmetry) {
        for (auto& c : cases) {
            if (c.theta.rows() >= 2) {
                c.theta(0, 1) += 1e-6 * (1.0 + std::abs(c.theta(0, 1)));
                break;
            }
        }
    }

    rec.run("symmetry", [&] {
        double worst = 0.0;
        for (const auto& c : cases) {
            const auto& t = c.theta;
            double scale = 0.0;
            for (double v : t.data()) {
                scale = std::max(scale, std::abs(v));
            }
            for (std::size_t i = 0; i < t.rows(); ++i) {
                for (std::size_t j = i + 1; j < t.cols(); ++j) {
                    worst = std::max(worst, std::abs(t(i, j) - t(j, i)) / std::max(scale, 1e-300));
                }
            }
        }
        return std::make_pair(worst <= 1e-12, "50 tensors, max relative asymmetry=" + fmt(worst));
    });
    rec.run("psd", [&] {
        double worst = 0.0; // most negative λ_min·N/trace
        for (const auto& c : cases) {
            Matrix sym = c.theta;
            for (std::size_t i = 0; i < sym.rows(); ++i) {
                for (std::size_t j = i + 1; j < sym.cols(); ++j) {
                    sym(i, j) = sym(j, i) = 0.5 * (c.theta(i, j) + c.theta(j, i));
                }
            }
            double trace = 0.0;
            for (std::size_t i = 0; i < sym.rows(); ++i) {
                trace += sym(i, i);
            }
            const double lmin = sym_eigenvalues(sym).front();
            worst = std::min(worst, lmin * static_cast<double>(sym.rows()) / trace);
        }
        return std::make_pair(worst >= -1e-8, "min lambda_min*N/trace=" + fmt(worst));
    });
    rec.run("oracle", [&] {
        double worst = 0.0;
        for (const auto& c : cases) {
            const std::size_t n = c.J.n();
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < c.J.slice_size(); ++k) {
                        acc += c.J.slice(i)[k] * c.J.slice(j)[k];
                    }
                    acc /= static_cast<double>(c.J.d2());
                    worst = std::max(worst, std::abs(acc - c.theta(i, j)) / std::max(std::abs(acc), 1.0));
                }
            }
        }
        return std::make_pair(worst <= 1e-12, "max deviation from double loop=" + fmt(worst));
    });
    rec.run("permutation", [&] {
        std::size_t mismatched = 0;
        for (std::size_t ci = 0; ci < cases.size(); ++ci) {
            const auto& c = cases[ci];
            const std::size_t n = c.J.n();
            std::vector<std::size_t> p(n);
            std::iota(p.begin(), p.end(), 0);
            Philox gen(derive_seed(opts.seed, "kernel-perm", ci));
            std::shuffle(p.begin(), p.end(), gen);
            Tensor3 pj(n, c.J.d2(), c.J.d());
            for (std::size_t i = 0; i < n; ++i) {
                std::copy(c.J.slice(p[i]).begin(), c.J.slice(p[i]).end(), pj.slice(i).begin());
            }
            const Matrix pt = build_kernel(pj);
            for (std::size_t a = 0; a < n; ++a) {
                for (std::size_t b = 0; b < n; ++b) {
                    if (pt(a, b) != c.theta(p[a], p[b])) {
                        ++mismatched;
                    }
                }
            }
        }
        return std::make_pair(mismatched == 0, "entries differing from P*Theta*P^T: " + std::to_string(mismatched));
    });
}

// -- evolution -------------------------------------------------------------------

struct TheorySetup {
    ModelConfig cfg;
    ModelWeights w;
    Batch batch;
    GlobalState state;
};

TheorySetup theory_setup(std::size_t d1, std::size_t n, std::size_t samples, std::uint64_t seed, double eta_fraction) {
    TheorySetup s;
    s.cfg = ModelConfig::theory(d1, n);
    s.w = init_weights(s.cfg, derive_seed(seed, "theory-init"));
    s.batch.X = unit_rows(gaussian(samples, d1, derive_seed(seed, "theory-x")));
    s.batch.Y = sign_targets(samples, derive_seed(seed, "theory-y"));
    s.state = single_state(s.w, s.cfg, s.batch, 1.0);
    s.state.eta = safe_eta(s.state.kernel, eta_fraction);
    return s;
}

void evolution_group(const CheckOptions& opts, Recorder& rec) {
    const std::size_t steps[] = {1, 10, 100};
    rec.run("linearized_gd", [&] {
        double worst = 0.0;
        for (std::size_t trial = 0; trial < 3; ++trial) {
            TheorySetup s = theory_setup(5, 64, 16, derive_seed(opts.seed, "evo", trial), 0.5);
            const auto& J = s.state.jacobian;
            const std::size_t N = J.n();
            const std::size_t d2 = J.d2();
            const std::size_t d = J.d();
            const FunctionEvolution ev = evolve_function(s.state, 100, steps);

            std::vector<double> w = s.w.w;
            std::size_t done = 0;
            for (std::size_t t : steps) {
                for (; done < t; ++done) {
                    std::vector<double> grad(d, 0.0);
                    for (std::size_t i = 0; i < N; ++i) {
                        for (std::size_t j = 0; j < d2; ++j) {
                            double f = s.state.outputs(i, j);
                            for (std::size_t k = 0; k < d; ++k) {
                                f += J(i, j, k) * (w[k] - s.w.w[k]);
                            }
                            const double r = f - s.state.labels(i, j);
                            for (std::size_t k = 0; k < d; ++k) {
                                grad[k] += r * J(i, j, k);
                            }
                        }
                    }
                    for (std::size_t k = 0; k < d; ++k) {
                        w[k] -= s.state.eta * grad[k] / static_cast<double>(N * d2);
                    }
                }
                const ModelWeights closed = evolve_weights(s.state, ev.residual_at(t), s.w);
                worst = std::max(worst, max_abs_diff(closed.w, w));
            }
        }
        return std::make_pair(worst <= 1e-10, "max |w_ntk - w_linGD|=" + fmt(worst) + " over t in {1,10,100}");
    });
    rec.run("closed_form", [&] {
        double worst = 0.0;
        for (std::size_t trial = 0; trial < 3; ++trial) {
            TheorySetup s = theory_setup(5, 64, 16, derive_seed(opts.seed, "evo-closed", trial), 0.5);
            const SymEig eig = sym_eig(s.state.kernel);
            const std::size_t N = s.state.samples();
            const FunctionEvolution ev = evolve_function(s.state, 100, steps);
            const Matrix e0 = s.state.outputs - s.state.labels;
            for (std::size_t t : steps) {
                Matrix proj = matmul_tn(eig.vectors, e0);
                for (std::size_t i = 0; i < N; ++i) {
                    const double q = std::pow(1.0 - s.state.eta * eig.values[i] / static_cast<double>(N),
                                              static_cast<double>(t));
                    for (double& v : proj.row(i)) {
                        v *= q;
                    }
                }
                const Matrix f = matmul(eig.vectors, proj) + s.state.labels;
                worst = std::max(worst, max_abs_diff(f.data(), ev.output_at(t).data()));
            }
        }
        return std::make_pair(worst <= 1e-9, "max |f_discrete - f_eig|=" + fmt(worst));
    });
}

// -- decay, linearization, gap -----------------------------------------------------

void decay_group(const CheckOptions& opts, Recorder& rec) {
    rec.run("linear_envelope", [&] {
        TheorySetup s = theory_setup(10, 2048, 16, derive_seed(opts.seed, "decay"), 0.5);
        const DecayReport rep = check_decay(s.state, 2000);
        std::ostringstream d;
        d << "lambda_min=" << fmt(rep.lambda_min) << " lambda_max=" << fmt(rep.lambda_max) << " eta=" << fmt(rep.eta)
          << " violations=" << rep.violations.size() << " loose-envelope violations=" << rep.loose_violations;
        return std::make_pair(rep.applicable && rep.violations.empty(), d.str());
    });
}

void linearization_group(const CheckOptions& opts, Recorder& rec) {
    rec.run("fidelity", [&] {
        TheorySetup s = theory_setup(10, 2048, 16, derive_seed(opts.seed, "decay"), 0.5);
        const std::vector<std::size_t> grid{100, 200, 300, 400, 500};
        const EvolutionResult res = select_t(s.state, grid, s.w, network_loss(s.cfg, s.batch));
        const double denom = std::sqrt(frobenius_norm_sq(s.state.outputs - s.state.labels));
        const FunctionEvolution ev = evolve_function(s.state, grid.back(), grid);
        double worst = 0.0;
        double chosen_gap = 0.0;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const ModelWeights wt = evolve_weights(s.state, ev.residual_at(grid[g]), s.w);
            const double gap =
                std::sqrt(frobenius_norm_sq(forward(wt, s.cfg, s.batch.X) - ev.output_at(grid[g]))) / denom;
            worst = std::max(worst, gap);
            if (grid[g] == res.chosen_t) {
                chosen_gap = gap;
            }
        }
        return std::make_pair(chosen_gap <= 5e-2, "chosen t=" + std::to_string(res.chosen_t) +
                                                      " relative gap=" + fmt(chosen_gap) +
                                                      " (max over t<=500: " + fmt(worst) + ")");
    });
}

void gap_group(const CheckOptions& opts, Recorder& rec) {
    rec.run("ntk_vs_gd", [&] {
        const std::size_t N = 32;
        const ModelConfig cfg = ModelConfig::theory(10, 1024);
        const ModelWeights w = init_weights(cfg, derive_seed(opts.seed, "gap-init"));
        Batch b;
        b.X = unit_rows(gaussian(N, 10, derive_seed(opts.seed, "gap-x")));
        b.Y = sign_targets(N, derive_seed(opts.seed, "gap-y"));
        const GlobalState probe = single_state(w, cfg, b, 1.0);
        const double eta = safe_eta(probe.kernel, 0.5);
        std::vector<std::size_t> grid;
        for (std::size_t t = 0; t <= 1000; t += 100) {
            grid.push_back(t);
        }
        const GapReport rep = ntk_gd_gap(cfg, w, b, eta, grid);
        std::size_t nondecreasing = 0;
        for (std::size_t g = 1; g < grid.size(); ++g) {
            nondecreasing += rep.gap[g] >= rep.gap[g - 1] ? 1 : 0;
        }
        bool bounded = true;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            bounded = bounded && rep.gap[g] <= rep.bound[g];
        }
        std::ostringstream d;
        d << "gap(0)=" << rep.gap[0] << " nondecreasing pairs=" << nondecreasing << "/10 gap(1000)="
          << fmt(rep.gap.back()) << " bound(1000)=" << fmt(rep.bound.back()) << " bounded=" << (bounded ? "yes" : "no");
        return std::make_pair(rep.gap[0] == 0.0 && nondecreasing >= 9 && bounded, d.str());
    });
}

// -- shuffle, cp, comm ---------------------------------------------------------------

void shuffle_group(const CheckOptions& opts, Recorder& rec) {
    rec.run("weight_update_invariance", [&] {
        const ModelConfig cfg = ModelConfig::experiment(6, 12, 3);
        const ModelWeights w = random_weights(cfg, derive_seed(opts.seed, "shuffle-init"));
        std::vector<ClientUpdate> ups;
        const std::size_t sizes[] = {4, 5, 3};
        for (std::size_t m = 0; m < 3; ++m) {
            Batch b;
            b.X = gaussian(sizes[m], 6, derive_seed(opts.seed, "shuffle-x", m));
            b.Y = gaussian(sizes[m], 3, derive_seed(opts.seed, "shuffle-y", m));
            ups.push_back(client_update(w, cfg, b, m));
        }
        GlobalState base = assemble_global(std::move(ups));
        base.kernel = build_kernel(base.jacobian);
        base.eta = safe_eta(base.kernel, 0.5);
        const std::vector<std::size_t> grid{5, 20, 60};

        auto deltas = [&](const GlobalState& s) {
            const FunctionEvolution ev = evolve_function(s, grid.back(), grid);
            std::vector<Matrix> rs;
            for (std::size_t t : grid) {
                rs.push_back(ev.residual_at(t));
            }
            return evolve_weights(s, rs, w);
        };
        const auto ref = deltas(base);
        double worst = 0.0;
        for (std::size_t trial = 0; trial < 10; ++trial) {
            GlobalState shuffled = base;
            shuffled.kernel = Matrix();
            shuffled = apply_shuffle(std::move(shuffled),
                                     sample_shuffle(base.samples(), derive_seed(opts.seed, "shuffle-perm", trial)));
            shuffled.kernel = build_kernel(shuffled.jacobian);
            const auto got = deltas(shuffled);
            for (std::size_t g = 0; g < grid.size(); ++g) {
                worst = std::max(worst, max_abs_diff(got[g].w, ref[g].w));
            }
            // permuting an already built kernel must agree as well
            GlobalState permuted_kernel =
                apply_shuffle(base, sample_shuffle(base.samples(), derive_seed(opts.seed, "shuffle-perm", trial)));
            const auto got2 = deltas(permuted_kernel);
            for (std::size_t g = 0; g < grid.size(); ++g) {
                worst = std::max(worst, max_abs_diff(got2[g].w, ref[g].w));
            }
        }
        return std::make_pair(worst <= 1e-12, "10 permutations, max |dw difference|=" + fmt(worst));
    });
}

FederatedTask small_task(std::uint64_t seed, std::size_t dim, std::size_t clients) {
    FederatedTask task;
    SyntheticSpec spec;
    spec.n = clients * 8 + 30;
    spec.dim = dim;
    spec.classes = 3;
    spec.seed = derive_seed(seed, "cp-data");
    auto [train, test] = split_tail(make_synthetic(spec), 30);
    task.train = unit_normalize(train);
    task.test = unit_normalize(test);
    task.partition = dirichlet_partition(task.train, clients, 1.0, derive_seed(seed, "cp-partition"));
    task.model = ModelConfig::experiment(dim, 8, 3);
    return task;
}

void cp_group(const CheckOptions& opts, Recorder& rec) {
    rec.run("degenerate_matches_ntkfl", [&] {
        const FederatedTask task = small_task(opts.seed, 6, 5);
        RoundConfig rc;
        rc.clients_total = 5;
        rc.clients_per_round = 3;
        rc.eta = 0.5;
        rc.t_grid = {10, 20, 40, 80};
        rc.seed = derive_seed(opts.seed, "cp-rounds");
        CpConfig cp;
        cp.beta = 1.0;
        cp.projected_dim = 6;
        cp.sparsity = 0.0;
        cp.identity_projection = true;
        cp.shuffle = ShuffleMode::sample;
        ModelWeights w_plain = init_weights(task.model, derive_seed(opts.seed, "cp-init"));
        ModelWeights w_cp = w_plain;
        KeyServer keys(derive_seed(opts.seed, "cp-key"));
        double worst = 0.0;
        bool same_t = true;
        for (std::size_t r = 1; r <= 3; ++r) {
            const RoundOutcome a = run_round_ntkfl(task, w_plain, rc, r);
            const RoundOutcome b = run_round_cp_ntkfl(task, w_cp, rc, cp, keys, r);
            worst = std::max(worst, max_abs_diff(a.weights.w, b.weights.w));
            same_t = same_t && a.metrics.chosen == b.metrics.chosen;
            w_plain = a.weights;
            w_cp = b.weights;
        }
        return std::make_pair(worst <= 1e-12 && same_t,
                              "3 rounds, max |w_cp - w_ntkfl|=" + fmt(worst) + (same_t ? ", same t" : ", t differs"));
    });
    rec.run("key_server_readers", [&] {
        const FederatedTask task = small_task(opts.seed, 6, 5);
        RoundConfig rc;
        rc.clients_total = 5;
        rc.clients_per_round = 2;
        rc.eta = 0.5;
        rc.t_grid = {10, 20};
        rc.seed = derive_seed(opts.seed, "cp-rounds");
        CpConfig cp;
        cp.projected_dim = 4;
        FederatedTask projected = task;
        projected.model = ModelConfig::experiment(4, 8, 3);
        KeyServer keys(derive_seed(opts.seed, "cp-key"));
        projected.test = Dataset{cp_features(task.test.X, gen_projection(keys.seed_for("evaluator"), 6, 4), true),
                                 task.test.labels, task.test.classes};
        const RoundOutcome out =
            run_round_cp_ntkfl(projected, init_weights(projected.model, 3), rc, cp, keys, 1);
        const auto ids = sample_clients(rc.clients_total, rc.clients_per_round, rc.seed, 1);
        std::set<std::string> expected{"evaluator"};
        for (std::size_t id : ids) {
            expected.insert("client-" + std::to_string(id));
        }
        const bool ok = keys.readers() == expected && !keys.was_read_by("aggregator") && out.metrics.uplink_bytes > 0;
        return std::make_pair(ok, std::to_string(keys.readers().size()) + " seed readers, none on the server side");
    });
    rec.run("projected_784_input", [&] {
        const FederatedTask task = small_task(opts.seed, 784, 4);
        RoundConfig rc;
        rc.clients_total = 4;
        rc.clients_per_round = 2;
        rc.eta = 0.5;
        rc.t_grid = {10, 20};
        rc.seed = derive_seed(opts.seed, "cp-rounds");
        CpConfig cp; // beta 0.4, d1' 100, sparsity 0.5
        FederatedTask projected = task;
        projected.model = ModelConfig::experiment(100, 8, 3);
        projected.test = Dataset{};
        KeyServer keys(derive_seed(opts.seed, "cp-key"));
        const RoundOutcome out = run_round_cp_ntkfl(projected, init_weights(projected.model, 5), rc, cp, keys, 1);
        const bool ok = out.weights.size() == projected.model.param_count() && all_finite(out.weights.w);
        return std::make_pair(ok, "d1=784 -> d1'=100, beta=0.4, cohort samples=" +
                                      std::to_string(out.metrics.cohort_samples) +
                                      ", uplink bytes=" + std::to_string(out.metrics.uplink_bytes));
    });
}

void comm_group(const CheckOptions& opts, Recorder& rec) {
    rec.run("formulas", [&] {
        std::size_t bad = 0;
        Philox gen(derive_seed(opts.seed, "comm"));
        auto pick = [&](std::size_t lo, std::size_t hi) {
            return std::uniform_int_distribution<std::size_t>(lo, hi)(gen);
        };
        for (std::size_t c = 0; c < 20; ++c) {
            const std::size_t clients = pick(1, 5);
            const std::size_t d2 = pick(1, 4);
            const std::size_t d = pick(1, 60);
            std::vector<std::size_t> sizes(clients);
            for (auto& s : sizes) {
                s = pick(1, 6);
            }
            const double sparsity = std::uniform_real_distribution<double>(0.0, 0.95)(gen);

            // hand arithmetic: count the 64-bit values each party would send
            std::uint64_t ntk = 0;
            std::uint64_t cp = 0;
            for (std::size_t m = 0; m < clients; ++m) {
                const std::uint64_t jac = sizes[m] * d2 * d;
                const std::uint64_t side = 2 * sizes[m] * d2;
                ntk += 8 * jac + 8 * side;
                // materialize an upload and measure what it carries
                ClientUpdate u;
                u.jacobian = gaussian_tensor(sizes[m], d2, d, derive_seed(opts.seed, "comm-j", c, m));
                u.labels = Matrix(sizes[m], d2);
                u.outputs = Matrix(sizes[m], d2);
                u.n_samples = sizes[m];
                const CompressedUpload up = compress_update(u, sparsity);
                const auto& sp = std::get<SparseTensor3>(up.update.jacobian);
                const std::uint64_t measured = sp.kept() * (sizeof(double) + sizeof(std::uint32_t)) + 24 +
                                               sizeof(double) * (up.update.labels.size() + up.update.outputs.size());
                bad += measured == up.bytes ? 0 : 1;
                cp += measured;
            }
            bad += comm_cost_fedavg(clients, d) == 8ULL * clients * d ? 0 : 1;
            bad += comm_cost_ntkfl(sizes, d2, d) == ntk ? 0 : 1;
            bad += comm_cost_cp(sizes, d2, d, sparsity) == cp ? 0 : 1;
        }
        return std::make_pair(bad == 0, "20 random configs, mismatches=" + std::to_string(bad));
    });
}

using GroupFn = void (*)(const CheckOptions&, Recorder&);

const std::vector<std::pair<std::string, GroupFn>>& registry() {
    static const std::vector<std::pair<std::string, GroupFn>> groups{
        {"jacobian", jacobian_group},       {"kernel", kernel_group}, {"evolution", evolution_group},
        {"decay", decay_group},             {"linearization", linearization_group},
        {"gap", gap_group},                 {"shuffle", shuffle_group}, {"cp", cp_group},
        {"comm", comm_group},
    };
    return groups;
}

} // namespace

std::vector<std::string> check_groups() {
    std::vector<std::string> names;
    for (const auto& [name, fn] : registry()) {
        names.push_back(name);
    }
    return names;
}

std::vector<CheckResult> run_check_group(const std::string& group, const CheckOptions& opts) {
    for (const auto& [name, fn] : registry()) {
        if (name == group) {
            std::vector<CheckResult> out;
            Recorder rec{name, out};
            fn(opts, rec);
            return out;
        }
    }
    std::string known;
    for (const auto& n : check_groups()) {
        known += (known.empty() ? "" : ", ") + n;
    }
    throw DomainError("unknown check group \"" + group + "\" (known: " + known + ")");
}

std::vector<CheckResult> run_checks(const CheckOptions& opts, const std::string& only) {
    if (!only.empty()) {
        return run_check_group(only, opts);
    }
    std::vector<CheckResult> all;
    for (const auto& name : check_groups()) {
        auto part = run_check_group(name, opts);
        all.insert(all.end(), part.begin(), part.end());
    }
    return all;
}

} // namespace ntkfed
