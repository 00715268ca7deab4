#pragma once

#include "flowvid/logits.hpp"
#include "flowvid/rng.hpp"
#include "flowvid/types.hpp"

namespace flowvid {

// kappa(t): probability that a token is UNMASKED at level t. kappa(0)=0,
// kappa(1)=1, strictly increasing.
struct MaskSchedule {
    enum class Kind { Linear, Sigmoid };
    Kind kind = Kind::Linear;
    double sharpness = 6.0; // Sigmoid only

    static MaskSchedule linear() { return {Kind::Linear, 0.0}; }
    static MaskSchedule sigmoid(double a = 6.0) { return {Kind::Sigmoid, a}; }
};

struct LossWeights {
    std::vector<double> per_frame;
    double decay = 0.0; // gamma used to build them
};

double kappa(double t, const MaskSchedule& schedule);

// First m entries 1.0 (context), remaining k-m entries iid uniform [0,1).
// Training uses m=0.
TimestepVector sample_timestep_vector(std::size_t k, std::size_t context_count,
                                      Rng& rng);

// Each token of frame f independently keeps its clean value with probability
// kappa(t^f), otherwise becomes mask_id. t^f=1 leaves the frame untouched,
// t^f=0 masks it fully.
Chunk corrupt(const Chunk& clean, const TimestepVector& t,
              const MaskSchedule& schedule, const Vocabulary& vocab, Rng& rng);

// corrupt with t broadcast to every frame (constant-masking baseline).
Chunk constant_corrupt(const Chunk& clean, double t, const MaskSchedule& schedule,
                       const Vocabulary& vocab, Rng& rng);

// SNR(t) = kappa(t)^2 / (1 - kappa(t)^2). Diverges at t=1.
double snr(double t, const MaskSchedule& schedule);

// fused^f = gamma * fused^{f-1} + snr(min(t^f, 1-eps)), fused^0 = 0;
// weight^f = min(fused^f, clamp_max) / clamp_max.
LossWeights fused_snr_weights(const TimestepVector& t, const MaskSchedule& schedule,
                              double decay, double clamp_max);

struct MaskedCeResult {
    double loss = 0.0;
    std::vector<std::uint8_t> grad_mask; // k*N flags, 1 at masked positions
    std::size_t masked_count = 0;
};

// Cross-entropy restricted to masked positions, weighted per frame and
// normalized by the masked-token count (min 1).
MaskedCeResult masked_ce_loss(const Logits& logits, const Chunk& target,
                              const Chunk& corrupted, const LossWeights& weights,
                              const Vocabulary& vocab);

// dLoss/dLogits for masked_ce_loss; zero at unmasked positions.
Logits masked_ce_loss_grad(const Logits& logits, const Chunk& target,
                           const Chunk& corrupted, const LossWeights& weights,
                           const Vocabulary& vocab);

} // namespace flowvid
