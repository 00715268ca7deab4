#include "flowvid/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowvid {

SamplerConfig SamplerConfig::fm(std::size_t steps) {
    SamplerConfig c;
    c.mode = SamplerMode::FMStyle;
    c.steps = steps;
    return c;
}
SamplerConfig SamplerConfig::mgm(std::size_t steps) {
    SamplerConfig c;
    c.mode = SamplerMode::MGMStyle;
    c.steps = steps;
    return c;
}
SamplerConfig SamplerConfig::df_pyramid(std::size_t steps) {
    SamplerConfig c;
    c.mode = SamplerMode::DFPyramid;
    c.steps = steps;
    return c;
}
SamplerConfig SamplerConfig::rolling(std::size_t steps) {
    SamplerConfig c;
    c.mode = SamplerMode::Rolling;
    c.steps = steps;
    return c;
}

void SamplerConfig::validate() const {
    if (steps < 1)
        throw std::invalid_argument("SamplerConfig: steps must be >= 1");
    if (mode == SamplerMode::FMStyle && timestep_independent)
        throw std::invalid_argument(
            "SamplerConfig: FM-style sampling requires timestep conditioning");
    if (guidance_scale < 0.0)
        throw std::invalid_argument("SamplerConfig: guidance_scale must be >= 0");
    if (partial_ratio <= 0.0 || partial_ratio >= 1.0)
        throw std::invalid_argument("SamplerConfig: partial_ratio must lie in (0,1)");
}

namespace {

Chunk init_chunk(const std::vector<TokenFrame>& context, std::size_t k,
                 const Vocabulary& vocab) {
    if (context.size() >= k)
        throw std::invalid_argument("sampler: need m < k context frames");
    if (context.empty())
        throw std::invalid_argument("sampler: need at least one context frame");
    const std::size_t n = context.front().size();
    Chunk x;
    x.context_count = context.size();
    for (const auto& f : context) {
        if (f.size() != n)
            throw std::invalid_argument("sampler: context frames disagree on N");
        for (TokenId id : f.tokens)
            if (vocab.is_mask(id))
                throw std::invalid_argument("sampler: context frame contains mask tokens");
        x.frames.push_back(f);
    }
    for (std::size_t f = context.size(); f < k; ++f)
        x.frames.push_back(masked_frame(n, vocab));
    return x;
}

// value + renormalized-softmax confidence from the non-mask part of one row
std::pair<TokenId, double> draw_nonmask(const double* row, const Vocabulary& vocab,
                                        Rng& rng, bool argmax) {
    auto p = softmax_row(row, vocab.size);
    p[vocab.mask_id] = 0.0;
    double sum = 0.0;
    for (double v : p)
        sum += v;
    if (sum <= 0.0)
        throw std::runtime_error("sampler: predictor put all mass on the mask token");
    for (auto& v : p)
        v /= sum;
    if (argmax) {
        std::size_t best = vocab.is_mask(0) ? 1 : 0;
        for (std::size_t c = 0; c < p.size(); ++c)
            if (!vocab.is_mask(static_cast<TokenId>(c)) && p[c] > p[best])
                best = c;
        return {static_cast<TokenId>(best), p[best]};
    }
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
        acc += p[c];
        if (u < acc)
            return {static_cast<TokenId>(c), p[c]};
    }
    // numeric residue: fall back to the last non-mask id
    for (std::size_t c = p.size(); c > 0; --c)
        if (!vocab.is_mask(static_cast<TokenId>(c - 1)))
            return {static_cast<TokenId>(c - 1), p[c - 1]};
    throw std::logic_error("draw_nonmask: unreachable");
}

TimestepVector model_timesteps(const Chunk& x, const Vocabulary& vocab,
                               const SamplerConfig& cfg) {
    if (cfg.timestep_independent)
        return TimestepVector::zeros(x.length());
    return clean_fraction(x, vocab);
}

// Unmask up to `need` masked tokens of frame f, picked by confidence.
void unmask_top_of_frame(Chunk& x, std::size_t f, std::size_t need,
                         const Logits& logits, const Vocabulary& vocab, Rng& rng,
                         bool argmax) {
    if (need == 0)
        return;
    std::vector<ScoredPosition> scored;
    std::vector<TokenId> values(x.tokens_per_frame());
    for (std::size_t i = 0; i < x.tokens_per_frame(); ++i) {
        if (!vocab.is_mask(x.frames[f].tokens[i]))
            continue;
        auto [value, conf] = draw_nonmask(logits.row(f, i), vocab, rng, argmax);
        values[i] = value;
        scored.push_back({f, i, conf});
    }
    for (const auto& s : confidence_select(std::move(scored), std::min(need, values.size())))
        x.frames[f].tokens[s.token] = values[s.token];
}

} // namespace

std::vector<ScoredPosition> confidence_select(std::vector<ScoredPosition> scored,
                                              std::size_t count) {
    if (count > scored.size())
        throw std::invalid_argument("confidence_select: count exceeds candidates");
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.confidence != b.confidence)
            return a.confidence > b.confidence;
        if (a.frame != b.frame)
            return a.frame < b.frame;
        return a.token < b.token;
    });
    scored.resize(count);
    return scored;
}

Logits guided_logits(const Logits& z_cond, const Logits& z_partial,
                     const Logits& z_uncond, double omega) {
    if (!z_cond.same_shape(z_partial) || !z_cond.same_shape(z_uncond))
        throw std::invalid_argument("guided_logits: shape mismatch");
    Logits out = z_cond;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] += omega * (z_partial.values[i] - z_uncond.values[i]);
    return out;
}

Chunk fm_sample_chunk(Predictor& model, const std::vector<TokenFrame>& context,
                      std::size_t k, const SamplerConfig& cfg,
                      const Vocabulary& vocab, Rng& rng) {
    cfg.validate();
    Chunk x = init_chunk(context, k, vocab);
    const std::size_t m = context.size();
    const std::size_t T = cfg.steps;
    const double dt = 1.0 / static_cast<double>(T);

    TimestepVector tv;
    tv.values.assign(k, 0.0);
    std::fill(tv.values.begin(), tv.values.begin() + static_cast<std::ptrdiff_t>(m), 1.0);

    double t = 0.0;
    Logits last;
    for (std::size_t step = 0; step < T; ++step) {
        last = model.predict(x, tv);
        const double rate = t >= 1.0 ? 1.0 : std::min(1.0, dt * t / (1.0 - t));
        for (std::size_t f = m; f < k; ++f)
            for (std::size_t i = 0; i < x.tokens_per_frame(); ++i) {
                if (!vocab.is_mask(x.frames[f].tokens[i]))
                    continue;
                if (rng.bernoulli(rate))
                    x.frames[f].tokens[i] =
                        draw_nonmask(last.row(f, i), vocab, rng, cfg.argmax).first;
            }
        t += dt;
        for (std::size_t f = m; f < k; ++f)
            tv.values[f] = std::min(1.0, tv.values[f] + dt);
    }
    // force-fill whatever the stochastic chain left masked
    for (std::size_t f = m; f < k; ++f)
        for (std::size_t i = 0; i < x.tokens_per_frame(); ++i)
            if (vocab.is_mask(x.frames[f].tokens[i]))
                x.frames[f].tokens[i] =
                    draw_nonmask(last.row(f, i), vocab, rng, cfg.argmax).first;
    return x;
}

Chunk mgm_sample_chunk(Predictor& model, const std::vector<TokenFrame>& context,
                       std::size_t k, const SamplerConfig& cfg,
                       const Vocabulary& vocab, Rng& rng) {
    cfg.validate();
    Chunk x = init_chunk(context, k, vocab);
    const std::size_t m = context.size();
    const std::size_t n = x.tokens_per_frame();
    const std::size_t T = cfg.steps;
    const bool guided = cfg.guidance_scale > 0.0;

    auto forward = [&](const Chunk& state) {
        if (!guided)
            return model.predict(state, model_timesteps(state, vocab, cfg));
        // (i) unconditional, (ii) partially masked context, (iii) conditional
        Chunk uncond = state;
        for (std::size_t f = 0; f < m; ++f)
            uncond.frames[f] = masked_frame(n, vocab);
        Chunk partial = state;
        for (std::size_t f = 0; f < m; ++f) {
            Chunk one;
            one.frames.push_back(state.frames[f]);
            one = constant_corrupt(one, cfg.partial_ratio, cfg.partial_schedule,
                                   vocab, rng);
            partial.frames[f] = one.frames[0];
        }
        const Logits z_uncond =
            model.predict(uncond, model_timesteps(uncond, vocab, cfg));
        const Logits z_partial =
            model.predict(partial, model_timesteps(partial, vocab, cfg));
        const Logits z_cond =
            model.predict(state, model_timesteps(state, vocab, cfg));
        return guided_logits(z_cond, z_partial, z_uncond, cfg.guidance_scale);
    };

    for (std::size_t step = 1; step <= T; ++step) {
        std::size_t remaining = count_masked(x, vocab);
        if (remaining == 0)
            break;
        const Logits logits = forward(x);

        std::vector<ScoredPosition> scored;
        std::vector<TokenId> values(k * n, 0);
        for (std::size_t f = m; f < k; ++f)
            for (std::size_t i = 0; i < n; ++i) {
                if (!vocab.is_mask(x.frames[f].tokens[i]))
                    continue;
                auto [value, conf] = draw_nonmask(logits.row(f, i), vocab, rng,
                                                  cfg.argmax);
                values[f * n + i] = value;
                scored.push_back({f, i, conf});
            }
        const double alpha = 1.0 / static_cast<double>(T - step + 1);
        const auto commit = static_cast<std::size_t>(
            std::ceil(alpha * static_cast<double>(remaining)));
        for (const auto& s : confidence_select(std::move(scored),
                                               std::min(commit, remaining)))
            x.frames[s.frame].tokens[s.token] = values[s.frame * n + s.token];
    }
    return x;
}

ScheduleMatrix pyramid_schedule_matrix(std::size_t k, std::size_t steps) {
    if (k < 1 || steps < 1)
        throw std::invalid_argument("pyramid_schedule_matrix: k and T must be >= 1");
    ScheduleMatrix mat;
    mat.k = k;
    mat.steps = steps;
    const auto T = static_cast<std::ptrdiff_t>(steps);
    const std::size_t rows = k + steps;
    mat.rows.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        mat.rows[i].resize(k);
        for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t raw = T + static_cast<std::ptrdiff_t>(j) -
                                       static_cast<std::ptrdiff_t>(i);
            mat.rows[i][j] = static_cast<std::size_t>(
                std::clamp<std::ptrdiff_t>(raw, 0, T - 1));
        }
    }
    return mat;
}

Chunk df_pyramid_sample_chunk(Predictor& model, const std::vector<TokenFrame>& context,
                              std::size_t k, const SamplerConfig& cfg,
                              const Vocabulary& vocab, Rng& rng) {
    cfg.validate();
    Chunk x = init_chunk(context, k, vocab);
    const std::size_t n = x.tokens_per_frame();
    const std::size_t T = cfg.steps;
    const ScheduleMatrix mat = pyramid_schedule_matrix(k, T);

    std::vector<std::size_t> masked(k);
    for (std::size_t f = 0; f < k; ++f)
        masked[f] = f < context.size() ? 0 : n;

    for (const auto& row : mat.rows) {
        const Logits logits = model.predict(x, model_timesteps(x, vocab, cfg));
        for (std::size_t f = 0; f < k; ++f) {
            const double level =
                T > 1 ? static_cast<double>(row[f]) / static_cast<double>(T - 1)
                      : 0.0;
            const auto target = static_cast<std::size_t>(
                std::lround(level * static_cast<double>(n)));
            if (masked[f] > target) {
                unmask_top_of_frame(x, f, masked[f] - target, logits, vocab, rng,
                                    cfg.argmax);
                masked[f] = target;
            }
        }
    }
    return x;
}

TokenVideo rolling_sample_video(Predictor& model,
                                const std::vector<TokenFrame>& context,
                                std::size_t total_length, std::size_t k,
                                const SamplerConfig& cfg, const Vocabulary& vocab,
                                Rng& rng) {
    cfg.validate();
    const std::size_t m = context.size();
    if (total_length < k)
        throw std::invalid_argument("rolling_sample_video: need L >= k");
    if (m < 1 || m >= k)
        throw std::invalid_argument("rolling_sample_video: need 1 <= m < k");
    const std::size_t n = context.front().size();
    const std::size_t T = cfg.steps;
    const std::size_t inner =
        (T + (k - m) - 1) / (k - m); // ceil(T / (k - m)) passes per shift
    const double dt = 1.0 / static_cast<double>(T);

    TokenVideo video;
    video.frames = context;
    for (std::size_t f = m; f < total_length; ++f)
        video.frames.push_back(masked_frame(n, vocab));

    // level[f]: current target masked fraction of frame f
    std::vector<double> level(total_length, 1.0);
    for (std::size_t f = 0; f < m; ++f)
        level[f] = 0.0;

    auto window_chunk = [&](std::size_t w) {
        Chunk c;
        c.frames.assign(video.frames.begin() + static_cast<std::ptrdiff_t>(w),
                        video.frames.begin() + static_cast<std::ptrdiff_t>(w + k));
        return c;
    };
    auto apply_targets = [&](std::size_t w) {
        Chunk x = window_chunk(w);
        const Logits logits = model.predict(x, model_timesteps(x, vocab, cfg));
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t f = w + j;
            const auto target = static_cast<std::size_t>(
                std::lround(level[f] * static_cast<double>(n)));
            std::size_t cur = 0;
            for (TokenId id : x.frames[j].tokens)
                cur += vocab.is_mask(id);
            if (cur > target)
                unmask_top_of_frame(x, j, cur - target, logits, vocab, rng,
                                    cfg.argmax);
        }
        for (std::size_t j = 0; j < k; ++j)
            video.frames[w + j] = x.frames[j];
    };

    // frame at window position j settles at level (j-m+1)/(k-m); the window
    // tail is fully masked, matching freshly appended frames
    auto ramp = [&](std::size_t j) {
        return j < m ? 0.0
                     : static_cast<double>(j - m + 1) / static_cast<double>(k - m);
    };

    // stage 1: ramp the first window into the rolling state
    for (std::size_t tau = 1; tau <= T; ++tau) {
        const double frac = static_cast<double>(tau) / static_cast<double>(T);
        for (std::size_t j = 0; j < k; ++j)
            level[j] = std::min(level[j], 1.0 - frac * (1.0 - ramp(j)));
        apply_targets(0);
    }

    // stage 2: one-frame shifts; the head frame of the rolling ramp reaches
    // zero within the inner passes of its shift
    for (std::size_t w = 0; w + k < total_length; ++w) {
        for (std::size_t pass = 0; pass < inner; ++pass) {
            for (std::size_t j = 0; j < k; ++j)
                level[w + 1 + j] = std::max(0.0, level[w + 1 + j] - dt);
            apply_targets(w + 1);
        }
    }

    // stage 3: settle the final window
    const std::size_t last = total_length - k;
    for (std::size_t tau = 0; tau < T; ++tau) {
        for (std::size_t j = 0; j < k; ++j)
            level[last + j] = std::max(0.0, level[last + j] - dt);
        apply_targets(last);
    }

    for (const auto& f : video.frames)
        for (TokenId id : f.tokens)
            if (vocab.is_mask(id))
                throw std::logic_error("rolling_sample_video: residual mask token");
    return video;
}

Chunk sample_chunk(Predictor& model, const std::vector<TokenFrame>& context,
                   std::size_t k, const SamplerConfig& cfg, const Vocabulary& vocab,
                   Rng& rng) {
    switch (cfg.mode) {
    case SamplerMode::FMStyle:
        return fm_sample_chunk(model, context, k, cfg, vocab, rng);
    case SamplerMode::MGMStyle:
        return mgm_sample_chunk(model, context, k, cfg, vocab, rng);
    case SamplerMode::DFPyramid:
        return df_pyramid_sample_chunk(model, context, k, cfg, vocab, rng);
    case SamplerMode::Rolling:
        throw std::invalid_argument(
            "sample_chunk: rolling mode samples whole videos, not chunks");
    }
    throw std::logic_error("sample_chunk: unknown mode");
}

} // namespace flowvid
