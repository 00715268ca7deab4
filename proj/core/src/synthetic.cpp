#include "flowvid/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace flowvid {

SyntheticProcess SyntheticProcess::cyclic_shift(std::uint32_t num_data_ids,
                                                std::size_t n, double noise) {
    SyntheticProcess p;
    p.vocab = Vocabulary::with_data_ids(num_data_ids);
    p.n = n;
    p.dynamics = Dynamics::CyclicShift;
    p.noise = noise;
    p.validate();
    return p;
}

SyntheticProcess SyntheticProcess::permutation_walk(std::uint32_t num_data_ids,
                                                    std::size_t n, double noise,
                                                    std::uint64_t perm_seed) {
    SyntheticProcess p;
    p.vocab = Vocabulary::with_data_ids(num_data_ids);
    p.n = n;
    p.dynamics = Dynamics::PermutationWalk;
    p.noise = noise;
    p.perm_seed = perm_seed;
    p.permutation.resize(num_data_ids);
    std::iota(p.permutation.begin(), p.permutation.end(), TokenId{0});
    Rng rng(perm_seed);
    for (std::size_t i = num_data_ids; i > 1; --i)
        std::swap(p.permutation[i - 1], p.permutation[rng.below(i)]);
    p.validate();
    return p;
}

void SyntheticProcess::validate() const {
    vocab.validate();
    if (vocab.mask_id != vocab.size - 1)
        throw std::invalid_argument("SyntheticProcess: requires mask_id == K-1");
    if (n < 1)
        throw std::invalid_argument("SyntheticProcess: N must be >= 1");
    if (noise < 0.0 || noise >= 1.0)
        throw std::invalid_argument("SyntheticProcess: noise must lie in [0,1)");
    if (dynamics == Dynamics::PermutationWalk &&
        permutation.size() != num_data_ids())
        throw std::invalid_argument("SyntheticProcess: bad permutation table");
}

TokenId SyntheticProcess::step_id(TokenId id) const {
    switch (dynamics) {
    case Dynamics::CyclicShift:
        return (id + 1) % num_data_ids();
    case Dynamics::PermutationWalk:
        return permutation[id];
    }
    throw std::logic_error("SyntheticProcess: unknown dynamics");
}

double SyntheticProcess::transition_prob(TokenId a, TokenId b) const {
    const double d = static_cast<double>(num_data_ids());
    return noise / d + (b == step_id(a) ? 1.0 - noise : 0.0);
}

TokenVideo gen_video(const SyntheticProcess& process, std::size_t length, Rng& rng) {
    if (length < 1)
        throw std::invalid_argument("gen_video: length must be >= 1");
    const std::uint32_t d = process.num_data_ids();
    TokenVideo video;
    video.frames.resize(length);
    video.frames[0].tokens.resize(process.n);
    for (auto& id : video.frames[0].tokens)
        id = static_cast<TokenId>(rng.below(d));
    for (std::size_t f = 1; f < length; ++f) {
        video.frames[f].tokens.resize(process.n);
        for (std::size_t i = 0; i < process.n; ++i) {
            TokenId next = process.step_id(video.frames[f - 1].tokens[i]);
            if (rng.bernoulli(process.noise))
                next = static_cast<TokenId>(rng.below(d));
            video.frames[f].tokens[i] = next;
        }
    }
    return video;
}

double chunk_joint_prob(const SyntheticProcess& process, const Chunk& chunk) {
    for (const auto& frame : chunk.frames)
        for (TokenId id : frame.tokens)
            if (id >= process.num_data_ids())
                throw std::invalid_argument(
                    "chunk_joint_prob: chunk must contain only data ids");
    double p = 1.0;
    for (std::size_t i = 0; i < chunk.tokens_per_frame(); ++i) {
        p *= process.initial_prob();
        for (std::size_t f = 1; f < chunk.length(); ++f)
            p *= process.transition_prob(chunk.frames[f - 1].tokens[i],
                                         chunk.frames[f].tokens[i]);
    }
    return p;
}

double ChunkConditional::probability_of(const std::vector<TokenId>& assignment) const {
    for (const auto& [a, p] : support)
        if (a == assignment)
            return p;
    return 0.0;
}

ChunkConditional exact_chunk_conditional(const SyntheticProcess& process,
                                         const Chunk& observed,
                                         EnumerationOrder order,
                                         std::size_t budget) {
    ChunkConditional cond;
    for (std::size_t f = 0; f < observed.length(); ++f)
        for (std::size_t i = 0; i < observed.tokens_per_frame(); ++i)
            if (process.vocab.is_mask(observed.frames[f].tokens[i]))
                cond.positions.emplace_back(f, i);

    const std::size_t d = process.num_data_ids();
    const std::size_t holes = cond.positions.size();
    double states = 1.0;
    for (std::size_t i = 0; i < holes; ++i) {
        states *= static_cast<double>(d);
        if (states > static_cast<double>(budget))
            throw EnumerationBudgetError(
                "exact_chunk_conditional: completion space exceeds budget");
    }

    if (holes == 0) {
        cond.support.emplace_back(std::vector<TokenId>{},
                                  1.0); // point mass on the observed chunk
        return cond;
    }

    Chunk work = observed;
    std::vector<TokenId> digits(holes, 0);
    std::vector<std::pair<std::vector<TokenId>, double>> raw;
    raw.reserve(static_cast<std::size_t>(states));
    double total = 0.0;
    // Odometer over the hole values; Reversed spins the first hole fastest
    // instead of the last one, exercising an independent traversal order.
    while (true) {
        for (std::size_t i = 0; i < holes; ++i) {
            auto [f, tok] = cond.positions[i];
            work.frames[f].tokens[tok] = digits[i];
        }
        const double p = chunk_joint_prob(process, work);
        raw.emplace_back(digits, p);
        total += p;

        std::size_t pos = 0;
        bool done = true;
        for (std::size_t step = 0; step < holes; ++step) {
            pos = order == EnumerationOrder::Forward ? holes - 1 - step : step;
            if (++digits[pos] < d) {
                done = false;
                break;
            }
            digits[pos] = 0;
        }
        if (done)
            break;
    }

    if (total <= 0.0)
        throw std::runtime_error("exact_chunk_conditional: observed chunk has zero mass");
    for (auto& [a, p] : raw)
        p /= total;
    // canonical order for the output, independent of enumeration order
    std::sort(raw.begin(), raw.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    cond.support = std::move(raw);
    return cond;
}

double tv_distance(const std::vector<std::pair<std::vector<TokenId>, std::size_t>>& counts,
                   std::size_t total, const ChunkConditional& exact) {
    if (total == 0)
        throw std::invalid_argument("tv_distance: empty sample");
    std::map<std::vector<TokenId>, double> emp;
    for (const auto& [a, c] : counts)
        emp[a] += static_cast<double>(c) / static_cast<double>(total);
    double tv = 0.0;
    for (const auto& [a, p] : exact.support) {
        auto it = emp.find(a);
        const double q = it == emp.end() ? 0.0 : it->second;
        tv += std::abs(p - q);
        if (it != emp.end())
            emp.erase(it);
    }
    for (const auto& [a, q] : emp)
        tv += q; // empirical mass outside the exact support
    return tv / 2.0;
}

EvalReport evaluate_rollout(const TokenVideo& generated, const TokenVideo& truth,
                            std::size_t initial_context,
                            const std::vector<std::pair<std::size_t, std::size_t>>&
                                segments) {
    if (generated.length() != truth.length() ||
        generated.tokens_per_frame() != truth.tokens_per_frame())
        throw std::invalid_argument("evaluate_rollout: shape mismatch");
    EvalReport report;
    const std::size_t n = generated.tokens_per_frame();
    std::size_t hits = 0, total = 0;
    for (std::size_t f = initial_context; f < generated.length(); ++f) {
        for (std::size_t i = 0; i < n; ++i) {
            hits += generated.frames[f].tokens[i] == truth.frames[f].tokens[i];
            ++total;
        }
    }
    report.token_accuracy =
        total == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(total);
    for (const auto& [start, count] : segments) {
        std::size_t h = 0, t = 0;
        for (std::size_t f = start; f < start + count; ++f)
            for (std::size_t i = 0; i < n; ++i) {
                h += generated.frames[f].tokens[i] == truth.frames[f].tokens[i];
                ++t;
            }
        report.per_chunk_accuracy.push_back(
            t == 0 ? 1.0 : static_cast<double>(h) / static_cast<double>(t));
    }
    return report;
}

std::string eval_report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["token_accuracy"] = report.token_accuracy;
    if (report.tv >= 0.0)
        j["tv_distance"] = report.tv;
    j["per_chunk_accuracy"] = report.per_chunk_accuracy;
    return j.dump();
}

std::string eval_report_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "metric,value\n";
    out << "token_accuracy," << report.token_accuracy << "\n";
    if (report.tv >= 0.0)
        out << "tv_distance," << report.tv << "\n";
    for (std::size_t i = 0; i < report.per_chunk_accuracy.size(); ++i)
        out << "chunk_" << i << "_accuracy," << report.per_chunk_accuracy[i] << "\n";
    return out.str();
}

} // namespace flowvid
