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

#ifndef NTKFED_CP_HPP
#define NTKFED_CP_HPP

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ntkfed/federation.hpp"
#include "ntkfed/linalg.hpp"
#include "ntkfed/ntk_engine.hpp"

namespace ntkfed {

/// Seeded Gaussian projection of the inputs, P in R^{d1 x d1'}.
struct ProjectionSpec {
    std::uint64_t seed = 0;
    std::size_t input_dim = 0;     ///< d1
    std::size_t projected_dim = 0; ///< d1'
    /// Seedless test path: P is the first d1' columns of the identity.
    bool identity = false;

    /// Regenerates P from the seed. Bit-exact across calls.
    Matrix matrix() const;
};

ProjectionSpec gen_projection(std::uint64_t seed, std::size_t d1, std::size_t d1_proj);
ProjectionSpec identity_projection(std::size_t d1, std::size_t d1_proj);

/// Z = X·P. The identity path copies columns instead of multiplying.
Matrix project_inputs(const Matrix& X, const ProjectionSpec& spec);

/// What a CP client or evaluator feeds the model: project, then optionally
/// rescale rows to unit norm.
Matrix cp_features(const Matrix& X, const ProjectionSpec& spec, bool normalize);

/// Row i of the shuffled state is row permutation[i] of the input.
struct ShufflePlan {
    std::vector<std::size_t> permutation;
    std::uint64_t seed = 0;
};

enum class ShuffleMode { sample, client, none };

ShufflePlan sample_shuffle(std::size_t n, std::uint64_t seed);
/// Permutes whole client blocks, keeping each client's rows contiguous.
ShufflePlan client_shuffle(const std::vector<Provenance>& provenance, std::uint64_t seed);
ShufflePlan identity_shuffle(std::size_t n);

/// Permutes J slices, Y and f0 rows, provenance and (if built) the kernel.
GlobalState apply_shuffle(GlobalState state, const ShufflePlan& plan);

/// Payload size of a compressed upload: 12 bytes per kept entry (value and
/// 32-bit index), a 24-byte header, and 8 bytes per entry of Y and f0.
std::uint64_t compressed_upload_bytes(std::size_t kept, std::size_t n_m, std::size_t d2) noexcept;

struct CompressedUpload {
    ClientUpdate update; ///< jacobian holds a SparseTensor3
    std::uint64_t bytes = 0;
};

CompressedUpload compress_update(ClientUpdate u, double sparsity);

/// Simulated key server: hands the projection seed to authorized parties and
/// records every read.
class KeyServer {
public:
    explicit KeyServer(std::uint64_t seed) : seed_(seed) {}
    std::uint64_t seed_for(const std::string& party);
    bool was_read_by(const std::string& party) const { return readers_.count(party) != 0; }
    const std::set<std::string>& readers() const noexcept { return readers_; }

private:
    std::uint64_t seed_;
    std::set<std::string> readers_;
};

struct CpConfig {
    double beta = 0.4;
    std::size_t projected_dim = 100;
    double sparsity = 0.5;
    bool identity_projection = false;
    ShuffleMode shuffle = ShuffleMode::sample;
    /// Rescale each projected input to unit norm (clients and evaluator alike).
    bool normalize_projected = true;

    void validate(std::size_t input_dim) const;
};

/// Runs one CP round. `task.train` and `task.partition` hold the clients' raw
/// inputs (d1 columns); `task.model` has input dimension d1'. `task.test` must
/// already be projected. Clients obtain the projection seed from `keys`.
RoundOutcome run_round_cp_ntkfl(const FederatedTask& task, const ModelWeights& w, const RoundConfig& rc,
                                const CpConfig& cp, KeyServer& keys, std::size_t round);

/// Per-round uplink of each scheme for given cohort sizes.
std::uint64_t comm_cost_fedavg(std::size_t clients, std::size_t d) noexcept;
std::uint64_t comm_cost_ntkfl(const std::vector<std::size_t>& cohort_sizes, std::size_t d2, std::size_t d) noexcept;
/// Sizes are the subsampled N'_m, d is the projected model's weight count.
std::uint64_t comm_cost_cp(const std::vector<std::size_t>& cohort_sizes, std::size_t d2, std::size_t d,
                           double sparsity);

} // namespace ntkfed

#endif // NTKFED_CP_HPP
