#pragma once

#include "flowvid/corruption.hpp"
#include "flowvid/logits.hpp"
#include "flowvid/predictor.hpp"
#include "flowvid/rng.hpp"
#include "flowvid/types.hpp"

namespace flowvid {

enum class SamplerMode { FMStyle, MGMStyle, DFPyramid, Rolling };

struct SamplerConfig {
    SamplerMode mode = SamplerMode::MGMStyle;
    std::size_t steps = 20;            // T; 20 MGM, 250 FM/DF/Rolling
    bool timestep_independent = false; // MGM only: pass t = 0
    bool argmax = false;               // deterministic value choice, for tests
    double guidance_scale = 0.0;       // omega
    double partial_ratio = 0.5;        // rho
    MaskSchedule partial_schedule = MaskSchedule::linear();

    static SamplerConfig fm(std::size_t steps = 250);
    static SamplerConfig mgm(std::size_t steps = 20);
    static SamplerConfig df_pyramid(std::size_t steps = 250);
    static SamplerConfig rolling(std::size_t steps = 250);

    void validate() const;
};

// q highest-confidence entries; ties broken by smallest (frame, token) index.
struct ScoredPosition {
    std::size_t frame = 0;
    std::size_t token = 0;
    double confidence = 0.0;
};
std::vector<ScoredPosition> confidence_select(std::vector<ScoredPosition> scored,
                                              std::size_t count);

// z_cond + omega * (z_partial - z_uncond), elementwise.
Logits guided_logits(const Logits& z_cond, const Logits& z_partial,
                     const Logits& z_uncond, double omega);

// Probability path traversal: T steps of size 1/T, each still-masked token
// unmasks with probability min(1, dt * t/(1-t)); residual masks after the
// last step are filled from the final prediction. Exactly T forward passes.
Chunk fm_sample_chunk(Predictor& model, const std::vector<TokenFrame>& context,
                      std::size_t k, const SamplerConfig& cfg,
                      const Vocabulary& vocab, Rng& rng);

// Confidence-based parallel decoding: per step commit the ceil(|M|/(T-i+1))
// highest-confidence sampled candidates, so all tokens commit by step T.
// guidance_scale > 0 fuses unconditional / partial-context / conditional
// passes (3 forward passes per step).
Chunk mgm_sample_chunk(Predictor& model, const std::vector<TokenFrame>& context,
                       std::size_t k, const SamplerConfig& cfg,
                       const Vocabulary& vocab, Rng& rng);

// Per-frame denoise step indices: H = k + T rows, entry[i][j] =
// clip(T + j - i, 0, T-1).
struct ScheduleMatrix {
    std::size_t k = 0;
    std::size_t steps = 0; // T
    std::vector<std::vector<std::size_t>> rows;
};
ScheduleMatrix pyramid_schedule_matrix(std::size_t k, std::size_t steps);

// Walks every row of the pyramid matrix, one forward pass per row; each
// frame's masked fraction tracks its scheduled level. Exactly k + T passes.
Chunk df_pyramid_sample_chunk(Predictor& model, const std::vector<TokenFrame>& context,
                              std::size_t k, const SamplerConfig& cfg,
                              const Vocabulary& vocab, Rng& rng);

// Sliding-window sampling over a whole video: T passes ramp the first window
// into the rolling state, ceil(T/(k-m)) passes per one-frame shift, T final
// passes. Total T + (L-k)*ceil(T/(k-m)) + T passes.
TokenVideo rolling_sample_video(Predictor& model,
                                const std::vector<TokenFrame>& context,
                                std::size_t total_length, std::size_t k,
                                const SamplerConfig& cfg, const Vocabulary& vocab,
                                Rng& rng);

// Dispatch on cfg.mode for the chunkwise samplers (FM / MGM / DF).
Chunk sample_chunk(Predictor& model, const std::vector<TokenFrame>& context,
                   std::size_t k, const SamplerConfig& cfg, const Vocabulary& vocab,
                   Rng& rng);

} // namespace flowvid
