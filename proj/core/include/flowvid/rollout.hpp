#pragma once

#include "flowvid/samplers.hpp"
#include "flowvid/types.hpp"

namespace flowvid {

// Chunkwise autoregression: overlapping windows advance by stride s, feeding
// generated frames forward as context; the final window enlarges its context
// to k - R when fewer than s frames remain.
struct ChunkStep {
    std::size_t context_start = 0; // first context frame index in the video
    std::size_t context_count = 0; // m for this chunk
    std::size_t new_frames = 0;    // h
};

struct ChunkPlan {
    std::vector<ChunkStep> steps;
    std::size_t total_length = 0; // L
    std::size_t k = 0;
    std::size_t stride = 0; // s
    std::size_t initial_context = 0;

    // (start, h) frame segments, one per chunk, e.g. for accuracy curves
    std::vector<std::pair<std::size_t, std::size_t>> segments() const;
};

ChunkPlan plan_chunks(std::size_t total_length, std::size_t k,
                      std::size_t initial_context, std::size_t stride);

// (m = k-1, s = 1)
std::pair<std::size_t, std::size_t> autoregressive_mode(std::size_t k);
// (m, s = k-m)
std::pair<std::size_t, std::size_t> full_sequence_mode(std::size_t k, std::size_t m);

// Exact forward-pass count for executing a plan with the chunkwise samplers.
// Unlike the closed forms in nfe.hpp (which assume full-length chunks whose
// masked count is >= T), this accounts for short final chunks: MGM commits at
// least one token per pass and therefore finishes a chunk with h new frames in
// min(T, h*N) passes, and DF walks len + T pyramid rows for a len-frame chunk.
// MGM guidance multiplies the count by 3.
std::size_t planned_nfe(const ChunkPlan& plan, const SamplerConfig& cfg,
                        std::size_t tokens_per_frame);

TokenVideo rollout_video(Predictor& model, const SamplerConfig& cfg,
                         const std::vector<TokenFrame>& initial_context,
                         std::size_t total_length, std::size_t k, std::size_t stride,
                         const Vocabulary& vocab, Rng& rng);

} // namespace flowvid
