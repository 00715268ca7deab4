#include "flowvid/rollout.hpp"

#include <stdexcept>
#include <string>

namespace flowvid {

std::vector<std::pair<std::size_t, std::size_t>> ChunkPlan::segments() const {
    std::vector<std::pair<std::size_t, std::size_t>> segs;
    std::size_t cursor = initial_context;
    for (const auto& step : steps) {
        segs.emplace_back(cursor, step.new_frames);
        cursor += step.new_frames;
    }
    return segs;
}

ChunkPlan plan_chunks(std::size_t total_length, std::size_t k,
                      std::size_t initial_context, std::size_t stride) {
    const std::size_t m0 = initial_context;
    if (m0 < 1 || m0 >= k)
        throw std::invalid_argument("plan_chunks: need 1 <= m < k");
    if (stride < 1 || stride > k - m0)
        throw std::invalid_argument("plan_chunks: need 1 <= s <= k - m");
    if (total_length <= m0)
        throw std::invalid_argument("plan_chunks: need L > m");
    if (total_length < k)
        throw std::invalid_argument("plan_chunks: need L >= k");

    ChunkPlan plan;
    plan.total_length = total_length;
    plan.k = k;
    plan.stride = stride;
    plan.initial_context = m0;

    std::size_t c = m0;
    std::size_t m = m0;
    while (c < total_length) {
        const std::size_t remaining = total_length - c;
        const std::size_t h = std::min(remaining, stride);
        if (remaining <= stride)
            m = k - remaining; // enlarge the final context so no frame is discarded
        if (c < m)
            throw std::invalid_argument("plan_chunks: geometry leaves the final "
                                        "chunk without enough context");
        plan.steps.push_back({c - m, m, h});
        c += h;
    }

    std::size_t produced = m0;
    for (const auto& step : plan.steps) {
        if (step.new_frames < 1 || step.context_count + step.new_frames > k)
            throw std::logic_error("plan_chunks: invalid step geometry");
        produced += step.new_frames;
    }
    if (produced != total_length)
        throw std::logic_error("plan_chunks: plan does not cover L frames");
    return plan;
}

std::pair<std::size_t, std::size_t> autoregressive_mode(std::size_t k) {
    if (k < 2)
        throw std::invalid_argument("autoregressive_mode: need k >= 2");
    return {k - 1, 1};
}

std::pair<std::size_t, std::size_t> full_sequence_mode(std::size_t k, std::size_t m) {
    if (m < 1 || m >= k)
        throw std::invalid_argument("full_sequence_mode: need 1 <= m < k");
    return {m, k - m};
}

std::size_t planned_nfe(const ChunkPlan& plan, const SamplerConfig& cfg,
                        std::size_t tokens_per_frame) {
    if (tokens_per_frame < 1)
        throw std::invalid_argument("planned_nfe: need N >= 1");
    const std::size_t T = cfg.steps;
    std::size_t total = 0;
    for (const auto& step : plan.steps) {
        switch (cfg.mode) {
        case SamplerMode::FMStyle:
            total += T;
            break;
        case SamplerMode::MGMStyle: {
            const std::size_t passes =
                std::min(T, step.new_frames * tokens_per_frame);
            total += cfg.guidance_scale > 0.0 ? 3 * passes : passes;
            break;
        }
        case SamplerMode::DFPyramid:
            total += step.context_count + step.new_frames + T;
            break;
        case SamplerMode::Rolling:
            throw std::invalid_argument("planned_nfe: rolling has no chunk plan");
        }
    }
    return total;
}

TokenVideo rollout_video(Predictor& model, const SamplerConfig& cfg,
                         const std::vector<TokenFrame>& initial_context,
                         std::size_t total_length, std::size_t k, std::size_t stride,
                         const Vocabulary& vocab, Rng& rng) {
    const ChunkPlan plan =
        plan_chunks(total_length, k, initial_context.size(), stride);

    TokenVideo video;
    video.frames = initial_context;
    for (std::size_t idx = 0; idx < plan.steps.size(); ++idx) {
        const auto& step = plan.steps[idx];
        std::vector<TokenFrame> context(
            video.frames.begin() + static_cast<std::ptrdiff_t>(step.context_start),
            video.frames.begin() +
                static_cast<std::ptrdiff_t>(step.context_start + step.context_count));
        Chunk chunk;
        try {
            chunk = sample_chunk(model, context, step.context_count + step.new_frames,
                                 cfg, vocab, rng);
        } catch (const std::exception& e) {
            throw std::runtime_error("rollout_video: chunk " + std::to_string(idx) +
                                     " failed: " + e.what());
        }
        for (std::size_t f = step.context_count; f < chunk.length(); ++f)
            video.frames.push_back(chunk.frames[f]);
    }
    if (video.length() != total_length)
        throw std::logic_error("rollout_video: produced wrong length");
    return video;
}

} // namespace flowvid
