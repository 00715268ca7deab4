// Acceptance gate: one pass/fail line per criterion, first failure aborts.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "flowvid/corruption.hpp"
#include "flowvid/nfe.hpp"
#include "flowvid/predictor.hpp"
#include "flowvid/rollout.hpp"
#include "flowvid/samplers.hpp"
#include "flowvid/synthetic.hpp"

using namespace flowvid;

namespace {

#define REQUIRE(cond, msg)                                                      \
    do {                                                                        \
        if (!(cond)) {                                                          \
            std::cerr << "[FAIL] " << __FILE__ << ":" << __LINE__ << " " << msg \
                      << "\n";                                                  \
            std::exit(1);                                                       \
        }                                                                       \
    } while (0)

void pass(int idx, const std::string& what) {
    std::cout << "[PASS] criterion " << idx << ": " << what << "\n";
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
}

// ---------------------------------------------------------------------------
// 1. forward-pass closed forms reproduce the reference tables exactly

void criterion_1() {
    // short-video geometry k=16: full-sequence m=2/s=14, frame-by-frame m=15/s=1
    struct Cell {
        std::size_t got, want;
    };
    const std::vector<Cell> cells = {
        // mask-style, T=20
        {nfe_mgm(32, 16, 14), 60},
        {nfe_mgm(80, 16, 14), 120},
        {nfe_mgm(160, 16, 14), 240},
        {nfe_mgm(32, 16, 1), 340},
        {nfe_mgm(80, 16, 1), 1300},
        {nfe_mgm(160, 16, 1), 2900},
        // flow-style, T=250
        {nfe_fm(80, 16, 14), 1500},
        {nfe_fm(160, 16, 14), 3000},
        {nfe_fm(32, 16, 1), 4250},
        // per-frame pyramid, T=250
        {nfe_df(16, 16, 14), 266},
        {nfe_df(32, 16, 14), 798},
        {nfe_df(80, 16, 14), 1596},
        {nfe_df(160, 16, 14), 3192},
        // sliding window, T=250
        {nfe_rolling(80, 16, 2), 1652},
        {nfe_rolling(160, 16, 2), 3092},
        // long-video geometry k=36, m=12, s=24 / m=35, s=1
        {nfe_mgm(72, 36, 24), 60},
        {nfe_mgm(180, 36, 24), 140},
        {nfe_mgm(72, 36, 1), 740},
        {nfe_mgm(180, 36, 1), 2900},
        {nfe_df(36, 36, 24), 286},
        {nfe_df(72, 36, 24), 858},
        {nfe_df(180, 36, 24), 2002},
        {nfe_rolling(180, 36, 12), 2084},
    };
    for (const auto& c : cells)
        REQUIRE(c.got == c.want,
                "table cell mismatch: got " << c.got << " want " << c.want);

    // The published table transposes the two 2x short-video cells for the
    // flow-style and sliding-window methods (printing 788 and 750); the
    // formulas give 750 and 788 and the engine follows the formulas.
    REQUIRE(nfe_fm(32, 16, 14) == 750, "flow-style 2x cell must be 750");
    REQUIRE(nfe_rolling(32, 16, 2) == 788, "sliding-window 2x cell must be 788");
    pass(1, "closed-form pass counts reproduce all reference-table cells "
            "(including the two transposed 2x entries as 750/788)");
}

// ---------------------------------------------------------------------------
// 2. measured forward passes == predicted on a randomized geometry grid

void criterion_2() {
    const auto start = std::chrono::steady_clock::now();
    Rng grid(20240817);
    const auto proc_n = [](std::size_t n) {
        return SyntheticProcess::cyclic_shift(3, n, 0.1);
    };
    std::map<std::size_t, SyntheticProcess> procs;
    std::map<std::size_t, std::unique_ptr<OraclePredictor>> oracles;
    for (std::size_t n = 1; n <= 3; ++n) {
        procs.emplace(n, proc_n(n));
        oracles.emplace(n, std::make_unique<OraclePredictor>(procs.at(n)));
    }

    std::size_t tested = 0;
    for (std::size_t trial = 0; tested < 208; ++trial) {
        const std::size_t k = 3 + grid.below(4);      // 3..6
        const std::size_t m = 1 + grid.below(k - 1);  // 1..k-1
        const std::size_t s = 1 + grid.below(k - m);  // 1..k-m
        const std::size_t n = 1 + grid.below(3);      // 1..3
        const std::size_t T = 2 + grid.below(6);      // 2..7
        const std::size_t L = k + s * grid.below(5) + grid.below(s);
        if (L < k)
            continue;

        const auto& proc = procs.at(n);
        OraclePredictor& oracle = *oracles.at(n);
        Rng ctx_rng(trial);
        const TokenVideo ctx = gen_video(proc, m, ctx_rng);

        const ChunkPlan plan = plan_chunks(L, k, m, s);
        for (SamplerConfig cfg : {SamplerConfig::fm(T), SamplerConfig::mgm(T),
                                  SamplerConfig::df_pyramid(T)}) {
            CountingPredictor counting(oracle);
            Rng rng(1000 + trial);
            rollout_video(counting, cfg, ctx.frames, L, k, s, proc.vocab, rng);
            REQUIRE(counting.calls() == planned_nfe(plan, cfg, n),
                    "pass-count mismatch: sampler mode "
                        << static_cast<int>(cfg.mode) << " L=" << L << " k=" << k
                        << " m=" << m << " s=" << s << " n=" << n << " T=" << T
                        << " measured " << counting.calls() << " predicted "
                        << planned_nfe(plan, cfg, n));
        }
        // guided mask-style runs measure exactly 3x the unguided prediction
        {
            SamplerConfig guided = SamplerConfig::mgm(T);
            guided.guidance_scale = 1.0;
            SamplerConfig plain = SamplerConfig::mgm(T);
            CountingPredictor counting(oracle);
            Rng rng(2000 + trial);
            rollout_video(counting, guided, ctx.frames, L, k, s, proc.vocab, rng);
            REQUIRE(counting.calls() == 3 * planned_nfe(plan, plain, n),
                    "guided runs must measure exactly 3x");
        }
        // sliding-window sampler
        {
            CountingPredictor counting(oracle);
            Rng rng(3000 + trial);
            rolling_sample_video(counting, ctx.frames, L, k,
                                 SamplerConfig::rolling(T), proc.vocab, rng);
            REQUIRE(counting.calls() == nfe_rolling(L, k, m, T),
                    "sliding-window pass count mismatch: L=" << L << " k=" << k
                        << " m=" << m << " T=" << T << " measured "
                        << counting.calls() << " predicted "
                        << nfe_rolling(L, k, m, T));
        }
        // closed forms coincide with the plan-aware count on idealized
        // geometry (full chunks, enough masked tokens per chunk)
        if (s == k - m && (L - k) % s == 0 && T <= s * n) {
            REQUIRE(planned_nfe(plan, SamplerConfig::mgm(T), n) ==
                        nfe_mgm(L, k, s, T),
                    "mask-style closed form disagrees with the plan");
            REQUIRE(planned_nfe(plan, SamplerConfig::df_pyramid(T), n) ==
                        nfe_df(L, k, s, T),
                    "pyramid closed form disagrees with the plan");
            REQUIRE(planned_nfe(plan, SamplerConfig::fm(T), n) ==
                        nfe_fm(L, k, s, T),
                    "flow-style closed form disagrees with the plan");
        }
        ++tested;
    }
    const double elapsed = seconds_since(start);
    REQUIRE(elapsed < 120.0, "criterion 2 exceeded 2 minutes: " << elapsed);
    std::ostringstream what;
    what << "measured == predicted passes over " << tested
         << " randomized geometries x 4 samplers, guided exactly 3x ("
         << elapsed << " s)";
    pass(2, what.str());
}

// ---------------------------------------------------------------------------
// 3. pyramid schedule golden file

void criterion_3() {
    const ScheduleMatrix mat = pyramid_schedule_matrix(16, 250);
    REQUIRE(mat.rows.size() == 266, "expected 266 rows");
    for (std::size_t i = 0; i < mat.rows.size(); ++i)
        for (std::size_t j = 0; j < 16; ++j) {
            const long raw = 250 + static_cast<long>(j) - static_cast<long>(i);
            const auto want = static_cast<std::size_t>(
                raw < 0 ? 0 : (raw > 249 ? 249 : raw));
            REQUIRE(mat.rows[i][j] == want, "entry (" << i << "," << j
                                                      << ") mismatch");
        }
    std::ostringstream dump;
    for (const auto& row : mat.rows) {
        for (std::size_t j = 0; j < row.size(); ++j)
            dump << (j ? "," : "") << row[j];
        dump << '\n';
    }
    std::ifstream golden(std::string(GOLDEN_DIR) + "/pyramid_k16_T250.csv",
                         std::ios::binary);
    REQUIRE(golden.good(), "golden file missing");
    const std::string want((std::istreambuf_iterator<char>(golden)), {});
    REQUIRE(dump.str() == want, "schedule dump differs from the golden file");
    pass(3, "pyramid schedule (k=16, T=250) is bit-identical to the golden file");
}

// ---------------------------------------------------------------------------
// 4. corruption marginals

void criterion_4() {
    const Vocabulary vocab = Vocabulary::with_data_ids(3);
    const std::size_t n = 100'000;
    Chunk clean;
    clean.frames.push_back(TokenFrame{std::vector<TokenId>(n, 0)});

    std::size_t pair_index = 0;
    for (const auto& sched : {MaskSchedule::linear(), MaskSchedule::sigmoid(6.0)}) {
        for (const double t : {0.0, 0.1, 0.25, 0.37, 0.5, 0.63, 0.75, 0.9, 0.98,
                               1.0}) {
            Rng rng(7000 + pair_index++);
            const Chunk out =
                corrupt(clean, TimestepVector{{t}}, sched, vocab, rng);
            std::size_t masked = 0;
            for (TokenId id : out.frames[0].tokens)
                masked += vocab.is_mask(id);
            const double p = 1.0 - kappa(t, sched);
            if (t == 0.0 || t == 1.0) {
                REQUIRE(masked == static_cast<std::size_t>(p * n),
                        "endpoint t=" << t << " must be exact");
                continue;
            }
            const double se = std::sqrt(p * (1.0 - p) / n);
            const double rate = static_cast<double>(masked) / n;
            REQUIRE(std::abs(rate - p) <= 3.0 * se,
                    "mask rate " << rate << " vs " << p << " at t=" << t
                                 << " beyond 3 standard errors");
        }
    }
    pass(4, "empirical mask rate within 3 SE of 1-kappa(t) for 20 "
            "(schedule, t) pairs over 1e5 tokens; endpoints exact");
}

// ---------------------------------------------------------------------------
// 5. sampled continuations match the exact conditional in TV distance

void criterion_5() {
    const auto start = std::chrono::steady_clock::now();
    const auto proc = SyntheticProcess::cyclic_shift(3, 1, 0.1);
    OraclePredictor oracle(proc);
    const std::vector<TokenFrame> ctx = {TokenFrame{{0}}};

    Chunk observed;
    observed.frames = {TokenFrame{{0}}, TokenFrame{{proc.vocab.mask_id}}};
    const ChunkConditional exact = exact_chunk_conditional(proc, observed);

    const std::size_t runs = 100'000;
    const auto measure = [&](const SamplerConfig& cfg, std::uint64_t seed) {
        std::map<TokenId, std::size_t> hist;
        Rng rng(seed);
        for (std::size_t r = 0; r < runs; ++r) {
            const Chunk out = sample_chunk(oracle, ctx, 2, cfg, proc.vocab, rng);
            ++hist[out.frames[1].tokens[0]];
        }
        std::vector<std::pair<std::vector<TokenId>, std::size_t>> counts;
        for (const auto& [id, c] : hist)
            counts.push_back({{id}, c});
        return tv_distance(counts, runs, exact);
    };

    const double tv_mgm = measure(SamplerConfig::mgm(20), 501);
    REQUIRE(tv_mgm <= 0.02, "mask-style TV " << tv_mgm << " > 0.02");
    const double tv_fm = measure(SamplerConfig::fm(250), 502);
    REQUIRE(tv_fm <= 0.03, "flow-style TV " << tv_fm << " > 0.03");

    const double elapsed = seconds_since(start);
    REQUIRE(elapsed < 300.0, "criterion 5 exceeded 5 minutes: " << elapsed);
    std::ostringstream what;
    what << "1e5-sample TV vs exact conditional: mask-style " << tv_mgm
         << " <= 0.02, flow-style (T=250) " << tv_fm << " <= 0.03 (" << elapsed
         << " s)";
    pass(5, what.str());
}

// ---------------------------------------------------------------------------
// 6. noiseless long rollouts are exact in both context modes

void criterion_6() {
    const auto proc = SyntheticProcess::cyclic_shift(3, 2, 0.0);
    OraclePredictor oracle(proc);
    const std::size_t k = 4, L = 40; // 10x extrapolation

    struct Mode {
        const char* name;
        std::size_t m, s;
    };
    for (const Mode mode : {Mode{"full-sequence", 1, 3}, Mode{"frame-by-frame", 3, 1}}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            Rng truth_rng(900 + seed);
            const TokenVideo truth = gen_video(proc, L, truth_rng);
            const std::vector<TokenFrame> ctx(truth.frames.begin(),
                                              truth.frames.begin() +
                                                  static_cast<std::ptrdiff_t>(mode.m));
            Rng rng(950 + seed);
            const TokenVideo video =
                rollout_video(oracle, SamplerConfig::mgm(5), ctx, L, k, mode.s,
                              proc.vocab, rng);
            for (std::size_t f = 0; f < mode.m; ++f)
                REQUIRE(video.frames[f] == truth.frames[f],
                        "context frame " << f << " not bit-preserved");
            const ChunkPlan plan = plan_chunks(L, k, mode.m, mode.s);
            const EvalReport r =
                evaluate_rollout(video, truth, mode.m, plan.segments());
            REQUIRE(r.token_accuracy == 1.0,
                    mode.name << " rollout accuracy " << r.token_accuracy);
            for (std::size_t c = 0; c < r.per_chunk_accuracy.size(); ++c)
                REQUIRE(r.per_chunk_accuracy[c] == 1.0,
                        mode.name << " chunk " << c << " accuracy "
                                  << r.per_chunk_accuracy[c]);
        }
    }
    pass(6, "noiseless 10x rollouts hit accuracy 1.0 at every chunk in "
            "full-sequence and frame-by-frame modes; context bit-preserved");
}

// ---------------------------------------------------------------------------
// 7. end-to-end training

void criterion_7() {
    const auto start = std::chrono::steady_clock::now();
    const auto proc = SyntheticProcess::cyclic_shift(3, 2, 0.0);
    std::vector<TokenVideo> corpus;
    for (std::uint64_t i = 0; i < 8; ++i) {
        Rng rng(600 + i);
        corpus.push_back(gen_video(proc, 32, rng));
    }

    // window length 6: a shorter window leaves too many all-masked columns,
    // which cap the reachable masked-token accuracy below the bar
    TabularPredictor frame_model(proc.vocab, 6);
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.steps = 2000;
    cfg.seed = 1;
    const TrainLog frame_log = train(frame_model, corpus, cfg);
    const double frame_acc = frame_log.trailing_mean_accuracy(200);
    REQUIRE(frame_acc >= 0.95,
            "frame-level trailing accuracy " << frame_acc << " < 0.95");

    TabularPredictor const_model(proc.vocab, 6);
    cfg.mode = TrainMode::ConstantLevel;
    const TrainLog const_log = train(const_model, corpus, cfg);
    REQUIRE(const_log.loss.size() == 2000, "baseline must run all steps");
    REQUIRE(const_log.trailing_mean_loss(200) < const_log.loss.front(),
            "constant-masking baseline did not improve");

    const double elapsed = seconds_since(start);
    REQUIRE(elapsed < 180.0, "criterion 7 exceeded 3 minutes: " << elapsed);
    std::ostringstream what;
    what << "tabular model reaches trailing masked accuracy " << frame_acc
         << " >= 0.95 in 2000 steps; constant-masking baseline trains ("
         << elapsed << " s)";
    pass(7, what.str());
}

// ---------------------------------------------------------------------------
// 8. gradient correctness

void criterion_8() {
    const auto proc = SyntheticProcess::cyclic_shift(3, 1, 0.1);
    const auto batch_for = [&](std::size_t k, std::uint64_t seed) {
        std::vector<Chunk> batch;
        for (std::uint64_t s = 0; s < 3; ++s) {
            Rng rng(seed + s);
            Chunk c = slice_chunk(gen_video(proc, k, rng), 0, k);
            c.context_count = 1;
            batch.push_back(c);
        }
        return batch;
    };

    TabularPredictor tab(proc.vocab, 4);
    Rng noise(5);
    for (auto& v : tab.parameters())
        v = 0.3 * (noise.uniform() - 0.5);
    const double tab_err = gradient_check(tab, batch_for(4, 700), 1e-4, 120, 9);
    REQUIRE(tab_err <= 1e-4, "tabular gradient error " << tab_err);

    MlpPredictor mlp(proc.vocab, 4, 12, 3);
    const double mlp_err = gradient_check(mlp, batch_for(4, 800), 1e-4, 120, 10);
    REQUIRE(mlp_err <= 1e-3, "mlp gradient error " << mlp_err);

    std::ostringstream what;
    what << "max relative gradient error: tabular " << tab_err
         << " <= 1e-4, mlp " << mlp_err << " <= 1e-3";
    pass(8, what.str());
}

// ---------------------------------------------------------------------------
// 9. timestep-independent sampling

void criterion_9() {
    // a t-blind model must give bit-identical rollouts with real t and t=0
    const auto proc = SyntheticProcess::cyclic_shift(3, 2, 0.1);
    OraclePredictor oracle(proc);
    Rng ctx_rng(1200);
    const TokenVideo ctx = gen_video(proc, 1, ctx_rng);
    SamplerConfig dep = SamplerConfig::mgm(6);
    SamplerConfig ind = dep;
    ind.timestep_independent = true;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng ra(1300 + seed), rb(1300 + seed);
        const TokenVideo va =
            rollout_video(oracle, dep, ctx.frames, 20, 4, 3, proc.vocab, ra);
        const TokenVideo vb =
            rollout_video(oracle, ind, ctx.frames, 20, 4, 3, proc.vocab, rb);
        REQUIRE(va == vb, "oracle rollouts must be bit-identical at seed "
                              << seed);
    }

    // a trained t-conditioned model must still agree on nearly all tokens
    const auto clean = SyntheticProcess::cyclic_shift(3, 1, 0.0);
    std::vector<TokenVideo> corpus;
    for (std::uint64_t i = 0; i < 8; ++i) {
        Rng rng(1400 + i);
        corpus.push_back(gen_video(clean, 32, rng));
    }
    MlpPredictor mlp(clean.vocab, 4, 24, 2);
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.steps = 3000;
    cfg.seed = 3;
    train(mlp, corpus, cfg);

    std::size_t agree = 0, total = 0;
    SamplerConfig dep_am = SamplerConfig::mgm(6);
    dep_am.argmax = true;
    SamplerConfig ind_am = dep_am;
    ind_am.timestep_independent = true;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng truth_rng(1500 + seed);
        const TokenVideo truth = gen_video(clean, 1, truth_rng);
        Rng ra(1600 + seed), rb(1600 + seed);
        const TokenVideo va =
            rollout_video(mlp, dep_am, truth.frames, 16, 4, 3, clean.vocab, ra);
        const TokenVideo vb =
            rollout_video(mlp, ind_am, truth.frames, 16, 4, 3, clean.vocab, rb);
        for (std::size_t f = 1; f < va.length(); ++f)
            for (std::size_t i = 0; i < va.tokens_per_frame(); ++i) {
                agree += va.frames[f].tokens[i] == vb.frames[f].tokens[i];
                ++total;
            }
    }
    const double rate = static_cast<double>(agree) / static_cast<double>(total);
    REQUIRE(rate >= 0.9, "trained-model t vs t=0 agreement " << rate << " < 0.9");
    std::ostringstream what;
    what << "t vs t=0 sampling: oracle rollouts bit-identical; trained mlp "
            "agrees on "
         << rate * 100.0 << "% of tokens (>= 90%)";
    pass(9, what.str());
}

// ---------------------------------------------------------------------------
// 10. guidance identities

void criterion_10() {
    Rng rng(42);
    Logits cond(2, 3, 4), partial(2, 3, 4), uncond(2, 3, 4);
    for (auto* z : {&cond, &partial, &uncond})
        for (auto& v : z->values)
            v = rng.uniform() * 4.0 - 2.0;

    const Logits id0 = guided_logits(cond, partial, uncond, 0.0);
    REQUIRE(id0.values == cond.values, "omega=0 must be the exact identity");

    const Logits cancel = guided_logits(cond, uncond, uncond, 5.5);
    REQUIRE(cancel.values == cond.values,
            "z_partial == z_uncond must cancel exactly for any omega");

    const Logits g = guided_logits(cond, partial, uncond, 1.75);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        const double want =
            cond.values[i] + 1.75 * (partial.values[i] - uncond.values[i]);
        REQUIRE(g.values[i] == want, "guidance combination must be exact");
    }
    pass(10, "guided-logits identities hold exactly (omega=0 identity, "
             "partial==uncond cancellation, linear combination)");
}

} // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    std::cout << "all acceptance criteria passed\n";
    return 0;
}
