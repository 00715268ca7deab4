#include "flowvid/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowvid {

namespace {
constexpr double kSnrEps = 1e-3; // keeps snr finite at the t=1 pole

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
} // namespace

double kappa(double t, const MaskSchedule& schedule) {
    if (t < 0.0 || t > 1.0)
        throw std::domain_error("kappa: t must lie in [0,1]");
    switch (schedule.kind) {
    case MaskSchedule::Kind::Linear:
        return t;
    case MaskSchedule::Kind::Sigmoid: {
        const double a = schedule.sharpness;
        if (a <= 0.0)
            throw std::domain_error("kappa: sigmoid sharpness must be > 0");
        // normalized so kappa(0)=0 and kappa(1)=1 exactly
        const double lo = logistic(-a / 2.0);
        const double hi = logistic(a / 2.0);
        return (logistic(a * (t - 0.5)) - lo) / (hi - lo);
    }
    }
    throw std::logic_error("kappa: unknown schedule kind");
}

TimestepVector sample_timestep_vector(std::size_t k, std::size_t context_count,
                                      Rng& rng) {
    if (context_count >= k)
        throw std::invalid_argument("sample_timestep_vector: need m < k");
    TimestepVector t;
    t.values.reserve(k);
    for (std::size_t f = 0; f < context_count; ++f)
        t.values.push_back(1.0);
    for (std::size_t f = context_count; f < k; ++f)
        t.values.push_back(rng.uniform());
    return t;
}

Chunk corrupt(const Chunk& clean, const TimestepVector& t,
              const MaskSchedule& schedule, const Vocabulary& vocab, Rng& rng) {
    if (t.size() != clean.length())
        throw std::invalid_argument("corrupt: timestep vector length mismatch");
    Chunk out = clean;
    for (std::size_t f = 0; f < out.length(); ++f) {
        const double keep = kappa(t[f], schedule);
        for (auto& id : out.frames[f].tokens) {
            // u < keep keeps the token; at t=1 keep==1 and u in [0,1) always
            // keeps, at t=0 never, so the endpoints are exact per seed.
            if (!(rng.uniform() < keep))
                id = vocab.mask_id;
        }
    }
    return out;
}

Chunk constant_corrupt(const Chunk& clean, double t, const MaskSchedule& schedule,
                       const Vocabulary& vocab, Rng& rng) {
    return corrupt(clean, TimestepVector::constant(clean.length(), t), schedule,
                   vocab, rng);
}

double snr(double t, const MaskSchedule& schedule) {
    if (t < 0.0 || t >= 1.0)
        throw std::domain_error("snr: diverges at t=1; t must lie in [0,1)");
    const double kp = kappa(t, schedule);
    return kp * kp / (1.0 - kp * kp);
}

LossWeights fused_snr_weights(const TimestepVector& t, const MaskSchedule& schedule,
                              double decay, double clamp_max) {
    if (decay < 0.0 || decay > 1.0)
        throw std::invalid_argument("fused_snr_weights: decay must lie in [0,1]");
    if (clamp_max <= 0.0)
        throw std::invalid_argument("fused_snr_weights: clamp_max must be > 0");
    LossWeights w;
    w.decay = decay;
    w.per_frame.reserve(t.size());
    double fused = 0.0;
    for (std::size_t f = 0; f < t.size(); ++f) {
        fused = decay * fused + snr(std::min(t[f], 1.0 - kSnrEps), schedule);
        w.per_frame.push_back(std::min(fused, clamp_max) / clamp_max);
    }
    return w;
}

std::vector<double> softmax_row(const double* logits, std::size_t count) {
    double mx = logits[0];
    for (std::size_t i = 1; i < count; ++i)
        mx = std::max(mx, logits[i]);
    std::vector<double> p(count);
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& v : p)
        v /= sum;
    return p;
}

namespace {

void check_ce_shapes(const Logits& logits, const Chunk& target,
                     const Chunk& corrupted, const LossWeights& weights) {
    if (logits.k != target.length() || logits.k != corrupted.length() ||
        logits.n != target.tokens_per_frame() ||
        logits.n != corrupted.tokens_per_frame() ||
        weights.per_frame.size() != logits.k)
        throw std::invalid_argument("masked_ce_loss: shape mismatch");
}

double log_softmax_at(const double* row, std::size_t count, std::size_t idx) {
    double mx = row[0];
    for (std::size_t i = 1; i < count; ++i)
        mx = std::max(mx, row[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i)
        sum += std::exp(row[i] - mx);
    return row[idx] - mx - std::log(sum);
}

} // namespace

MaskedCeResult masked_ce_loss(const Logits& logits, const Chunk& target,
                              const Chunk& corrupted, const LossWeights& weights,
                              const Vocabulary& vocab) {
    check_ce_shapes(logits, target, corrupted, weights);
    MaskedCeResult r;
    r.grad_mask.assign(logits.k * logits.n, 0);
    double acc = 0.0;
    for (std::size_t f = 0; f < logits.k; ++f) {
        for (std::size_t i = 0; i < logits.n; ++i) {
            if (!vocab.is_mask(corrupted.frames[f].tokens[i]))
                continue;
            r.grad_mask[f * logits.n + i] = 1;
            ++r.masked_count;
            acc -= weights.per_frame[f] *
                   log_softmax_at(logits.row(f, i), logits.vocab,
                                  target.frames[f].tokens[i]);
        }
    }
    r.loss = acc / static_cast<double>(std::max<std::size_t>(r.masked_count, 1));
    return r;
}

Logits masked_ce_loss_grad(const Logits& logits, const Chunk& target,
                           const Chunk& corrupted, const LossWeights& weights,
                           const Vocabulary& vocab) {
    check_ce_shapes(logits, target, corrupted, weights);
    Logits grad(logits.k, logits.n, logits.vocab);
    std::size_t masked = 0;
    for (std::size_t f = 0; f < logits.k; ++f)
        for (std::size_t i = 0; i < logits.n; ++i)
            if (vocab.is_mask(corrupted.frames[f].tokens[i]))
                ++masked;
    const double norm = static_cast<double>(std::max<std::size_t>(masked, 1));
    for (std::size_t f = 0; f < logits.k; ++f) {
        for (std::size_t i = 0; i < logits.n; ++i) {
            if (!vocab.is_mask(corrupted.frames[f].tokens[i]))
                continue;
            const auto p = softmax_row(logits.row(f, i), logits.vocab);
            double* g = grad.row(f, i);
            const double w = weights.per_frame[f] / norm;
            for (std::size_t c = 0; c < logits.vocab; ++c)
                g[c] = w * p[c];
            g[target.frames[f].tokens[i]] -= w;
        }
    }
    return grad;
}

} // namespace flowvid
