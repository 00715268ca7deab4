#pragma once

#include "flowvid/rng.hpp"
#include "flowvid/types.hpp"

#include <utility>
#include <vector>

namespace flowvid {

// Enumeration-space guard for exact conditionals.
class EnumerationBudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Markovian token-video process with enumerable exact conditionals. Columns
// (token indices) evolve independently: frame 1 is uniform over data ids,
// frame f+1 applies the dynamics elementwise and then resamples each token
// uniformly over data ids with probability noise.
struct SyntheticProcess {
    enum class Dynamics { CyclicShift, PermutationWalk };

    Vocabulary vocab;      // data ids are 0..K-2, mask_id = K-1
    std::size_t n = 1;     // tokens per frame
    Dynamics dynamics = Dynamics::CyclicShift;
    double noise = 0.0;    // epsilon in [0,1)
    std::uint64_t perm_seed = 0; // PermutationWalk only

    static SyntheticProcess cyclic_shift(std::uint32_t num_data_ids, std::size_t n,
                                         double noise);
    static SyntheticProcess permutation_walk(std::uint32_t num_data_ids,
                                             std::size_t n, double noise,
                                             std::uint64_t perm_seed);

    void validate() const;
    std::uint32_t num_data_ids() const { return vocab.num_data_ids(); }

    TokenId step_id(TokenId id) const; // dynamics applied to one token
    // P(next = b | cur = a), data ids only
    double transition_prob(TokenId a, TokenId b) const;
    double initial_prob() const { return 1.0 / num_data_ids(); }

    std::vector<TokenId> permutation; // PermutationWalk table, built by factory
};

TokenVideo gen_video(const SyntheticProcess& process, std::size_t length, Rng& rng);

// Joint probability of a fully clean chunk whose first frame is treated as an
// initial draw from the stationary (uniform) distribution.
double chunk_joint_prob(const SyntheticProcess& process, const Chunk& chunk);

// Exact conditional over completions of the masked positions of a chunk.
struct ChunkConditional {
    std::vector<std::pair<std::size_t, std::size_t>> positions; // (frame, token)
    // assignments (data ids, aligned with positions) with normalized mass;
    // always listed in canonical odometer order regardless of how they were
    // enumerated.
    std::vector<std::pair<std::vector<TokenId>, double>> support;

    double probability_of(const std::vector<TokenId>& assignment) const;
};

enum class EnumerationOrder { Forward, Reversed };

ChunkConditional exact_chunk_conditional(const SyntheticProcess& process,
                                         const Chunk& observed,
                                         EnumerationOrder order = EnumerationOrder::Forward,
                                         std::size_t budget = 10'000'000);

// Total-variation distance between empirical completion counts and an exact
// conditional.
double tv_distance(const std::vector<std::pair<std::vector<TokenId>, std::size_t>>& counts,
                   std::size_t total, const ChunkConditional& exact);

struct EvalReport {
    double token_accuracy = 0.0;
    double tv = -1.0; // set by the caller when measured; -1 = not measured
    std::vector<double> per_chunk_accuracy;
};

// Accuracy of generated vs ground truth beyond the initial context, plus a
// per-segment accuracy curve (segments are (start, frame count) pairs, e.g.
// the h-frame blocks of a rollout plan).
EvalReport evaluate_rollout(const TokenVideo& generated, const TokenVideo& truth,
                            std::size_t initial_context,
                            const std::vector<std::pair<std::size_t, std::size_t>>&
                                segments = {});

std::string eval_report_to_json(const EvalReport& report);
std::string eval_report_to_csv(const EvalReport& report);

} // namespace flowvid
