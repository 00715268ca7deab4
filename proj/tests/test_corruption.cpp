#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowvid/corruption.hpp"

using namespace flowvid;

namespace {

Chunk all_zeros(std::size_t k, std::size_t n) {
    Chunk c;
    for (std::size_t f = 0; f < k; ++f)
        c.frames.push_back(TokenFrame{std::vector<TokenId>(n, 0)});
    return c;
}

} // namespace

TEST_CASE("kappa endpoints and monotonicity") {
    for (const auto& sched : {MaskSchedule::linear(), MaskSchedule::sigmoid()}) {
        CHECK(kappa(0.0, sched) == doctest::Approx(0.0));
        CHECK(kappa(1.0, sched) == doctest::Approx(1.0));
        double prev = -1.0;
        for (int i = 0; i <= 20; ++i) {
            const double v = kappa(i / 20.0, sched);
            CHECK(v > prev);
            prev = v;
        }
    }
    CHECK(kappa(0.37, MaskSchedule::linear()) == doctest::Approx(0.37));
    CHECK_THROWS_AS(kappa(-0.01, MaskSchedule::linear()), std::domain_error);
    CHECK_THROWS_AS(kappa(1.01, MaskSchedule::linear()), std::domain_error);
}

TEST_CASE("sigmoid kappa frozen values (a = 6)") {
    const auto s = MaskSchedule::sigmoid(6.0);
    CHECK(kappa(0.25, s) == doctest::Approx(0.14914645207033284).epsilon(1e-12));
    CHECK(kappa(0.5, s) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(kappa(0.75, s) == doctest::Approx(0.850853547929667).epsilon(1e-12));
    // symmetry about the midpoint
    CHECK(kappa(0.3, s) + kappa(0.7, s) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("timestep vectors carry context as exactly one") {
    Rng rng(11);
    const TimestepVector t = sample_timestep_vector(6, 2, rng);
    REQUIRE(t.size() == 6);
    CHECK(t[0] == 1.0);
    CHECK(t[1] == 1.0);
    for (std::size_t f = 2; f < 6; ++f) {
        CHECK(t[f] >= 0.0);
        CHECK(t[f] < 1.0);
    }
    CHECK_THROWS_AS(sample_timestep_vector(4, 4, rng), std::invalid_argument);
}

TEST_CASE("corruption endpoints are exact for every seed") {
    const Vocabulary vocab = Vocabulary::with_data_ids(3);
    const Chunk clean = all_zeros(3, 5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        TimestepVector t{{1.0, 0.0, 1.0}};
        const Chunk out = corrupt(clean, t, MaskSchedule::linear(), vocab, rng);
        CHECK(out.frames[0] == clean.frames[0]);
        CHECK(out.frames[2] == clean.frames[2]);
        for (TokenId id : out.frames[1].tokens)
            CHECK(vocab.is_mask(id));
    }
}

TEST_CASE("corruption marginal matches kappa(t)") {
    const Vocabulary vocab = Vocabulary::with_data_ids(3);
    const std::size_t n = 2000;
    const Chunk clean = all_zeros(1, n);
    for (const double t : {0.25, 0.5, 0.8}) {
        for (const auto& sched : {MaskSchedule::linear(), MaskSchedule::sigmoid()}) {
            Rng rng(31);
            const Chunk out =
                corrupt(clean, TimestepVector{{t}}, sched, vocab, rng);
            std::size_t kept = 0;
            for (TokenId id : out.frames[0].tokens)
                kept += !vocab.is_mask(id);
            const double p = kappa(t, sched);
            const double se = std::sqrt(p * (1 - p) / n);
            CHECK(std::abs(static_cast<double>(kept) / n - p) < 4 * se);
        }
    }
}

TEST_CASE("constant corruption is the broadcast of the frame-level path") {
    const Vocabulary vocab = Vocabulary::with_data_ids(3);
    const Chunk clean = all_zeros(4, 3);
    Rng a(7), b(7);
    const Chunk x = constant_corrupt(clean, 0.6, MaskSchedule::linear(), vocab, a);
    const Chunk y = corrupt(clean, TimestepVector::constant(4, 0.6),
                            MaskSchedule::linear(), vocab, b);
    CHECK(x == y);
}

TEST_CASE("snr frozen values and divergence guard") {
    const auto lin = MaskSchedule::linear();
    CHECK(snr(0.6, lin) == doctest::Approx(0.5625).epsilon(1e-12));
    CHECK(snr(0.0, lin) == doctest::Approx(0.0));
    CHECK(snr(0.999, lin) == doctest::Approx(499.250125062538).epsilon(1e-9));
    CHECK_THROWS_AS(snr(1.0, lin), std::domain_error);
}

TEST_CASE("fused snr weights frozen values") {
    // t = (0.1, 0.2, 0.3), linear, decay 0.9, clamp 5
    const auto w = fused_snr_weights(TimestepVector{{0.1, 0.2, 0.3}},
                                     MaskSchedule::linear(), 0.9, 5.0);
    REQUIRE(w.per_frame.size() == 3);
    CHECK(w.per_frame[0] == doctest::Approx(0.0020202020202020206).epsilon(1e-12));
    CHECK(w.per_frame[1] == doctest::Approx(0.010151515151515154).epsilon(1e-12));
    CHECK(w.per_frame[2] == doctest::Approx(0.02891658341658342).epsilon(1e-12));
}

TEST_CASE("fused snr weights saturate at the clamp") {
    // t = 1 hits the epsilon-clamped pole; fused stays above clamp_max so the
    // weight is exactly 1
    const auto w = fused_snr_weights(TimestepVector{{1.0, 0.5}},
                                     MaskSchedule::linear(), 0.9, 5.0);
    CHECK(w.per_frame[0] == doctest::Approx(1.0));
    CHECK(w.per_frame[1] == doctest::Approx(1.0));
}

TEST_CASE("masked cross-entropy covers only masked positions") {
    const Vocabulary vocab = Vocabulary::with_data_ids(3);
    Chunk target = all_zeros(2, 2);
    target.frames[1].tokens = {1, 2};
    Chunk corrupted = target;
    corrupted.frames[1].tokens = {vocab.mask_id, vocab.mask_id};

    Logits logits(2, 2, vocab.size); // uniform
    LossWeights w{{1.0, 1.0}, 0.9};
    const auto r = masked_ce_loss(logits, target, corrupted, w, vocab);
    CHECK(r.masked_count == 2);
    CHECK(r.grad_mask == std::vector<std::uint8_t>{0, 0, 1, 1});
    // uniform logits: -log(1/4) per masked token
    CHECK(r.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    // weights scale the loss linearly
    LossWeights half{{1.0, 0.5}, 0.9};
    CHECK(masked_ce_loss(logits, target, corrupted, half, vocab).loss ==
          doctest::Approx(0.5 * std::log(4.0)).epsilon(1e-12));

    // nothing masked: loss 0 under the min-1 normalizer
    CHECK(masked_ce_loss(logits, target, target, w, vocab).loss ==
          doctest::Approx(0.0));
}

TEST_CASE("cross-entropy gradient matches finite differences") {
    const Vocabulary vocab = Vocabulary::with_data_ids(3);
    Chunk target = all_zeros(2, 2);
    target.frames[0].tokens = {2, 1};
    target.frames[1].tokens = {0, 2};
    Chunk corrupted = target;
    corrupted.frames[0].tokens[1] = vocab.mask_id;
    corrupted.frames[1].tokens = {vocab.mask_id, vocab.mask_id};

    Rng rng(5);
    Logits logits(2, 2, vocab.size);
    for (auto& v : logits.values)
        v = rng.uniform() * 2.0 - 1.0;
    const LossWeights w{{0.7, 1.0}, 0.9};
    const Logits grad = masked_ce_loss_grad(logits, target, corrupted, w, vocab);

    const double delta = 1e-6;
    for (std::size_t idx = 0; idx < logits.values.size(); ++idx) {
        Logits plus = logits, minus = logits;
        plus.values[idx] += delta;
        minus.values[idx] -= delta;
        const double fd = (masked_ce_loss(plus, target, corrupted, w, vocab).loss -
                           masked_ce_loss(minus, target, corrupted, w, vocab).loss) /
                          (2 * delta);
        CHECK(grad.values[idx] == doctest::Approx(fd).epsilon(1e-5));
    }
}
