#pragma once

#include "flowvid/corruption.hpp"
#include "flowvid/logits.hpp"
#include "flowvid/synthetic.hpp"
#include "flowvid/types.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace flowvid {

// p(x1 | x_t, t; theta): maps a partially masked chunk plus its timestep
// vector to k x N x K logits over clean tokens.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual Logits predict(const Chunk& x, const TimestepVector& t) = 0;
};

// Forward-pass counter; wraps any predictor so NFE accounting can check its
// closed forms against real executions.
class CountingPredictor final : public Predictor {
public:
    explicit CountingPredictor(Predictor& inner) : inner_(inner) {}
    Logits predict(const Chunk& x, const TimestepVector& t) override {
        ++calls_;
        return inner_.predict(x, t);
    }
    std::size_t calls() const { return calls_; }
    void reset() { calls_ = 0; }

private:
    Predictor& inner_;
    std::size_t calls_ = 0;
};

// Exact Bayes posterior under a synthetic process, computed by enumerating
// completions column by column (columns are independent chains). Ignores t.
// Results are cached per column pattern, so repeated passes over the same
// state are cheap.
class OraclePredictor final : public Predictor {
public:
    explicit OraclePredictor(SyntheticProcess process, std::size_t budget = 10'000'000)
        : process_(std::move(process)), budget_(budget) {}

    Logits predict(const Chunk& x, const TimestepVector& t) override;

    const SyntheticProcess& process() const { return process_; }

    static constexpr double kOneHotMargin = 30.0;
    static constexpr double kLogFloor = -1e3;

private:
    // posterior over data ids for every row of one column; empty rows for
    // observed positions
    std::vector<std::vector<double>> column_posteriors(const std::vector<TokenId>& column);

    SyntheticProcess process_;
    std::size_t budget_;
    std::mutex cache_mutex_;
    std::map<std::vector<TokenId>, std::vector<std::vector<double>>> cache_;
};

// Trainable predictors expose a flat parameter/gradient view for SGD and
// finite-difference checking.
class TrainablePredictor : public Predictor {
public:
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }
    std::span<const double> gradients() const { return grads_; }
    void zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }
    void apply_gradients(double lr) {
        for (std::size_t i = 0; i < params_.size(); ++i)
            params_[i] -= lr * grads_[i];
    }

    // accumulates dLoss/dParams for one sample into the gradient buffer
    virtual void backward(const Chunk& x, const TimestepVector& t,
                          const Logits& dlogits) = 0;

    virtual std::string kind() const = 0;
    virtual const Vocabulary& vocab() const = 0;
    virtual std::size_t chunk_len() const = 0;

protected:
    std::vector<double> params_;
    std::vector<double> grads_;
};

// Conditional table indexed by (reference token id, frame offset): each
// position looks up the nearest observed token in its own column and reads a
// logit row for it. Learns Markov column dynamics exactly; ignores t.
class TabularPredictor final : public TrainablePredictor {
public:
    TabularPredictor(const Vocabulary& vocab, std::size_t chunk_len);

    Logits predict(const Chunk& x, const TimestepVector& t) override;
    void backward(const Chunk& x, const TimestepVector& t,
                  const Logits& dlogits) override;

    std::string kind() const override { return "tabular"; }
    const Vocabulary& vocab() const override { return vocab_; }
    std::size_t chunk_len() const override { return k_; }

private:
    // -1 = no observed token in the column (fallback row)
    std::ptrdiff_t row_index(const Chunk& x, std::size_t f, std::size_t i) const;

    Vocabulary vocab_;
    std::size_t k_;
    std::size_t rows_;
};

// One-hidden-layer MLP per position: one-hot encodings of the position's
// column across all frames, a frame-index one-hot and a sinusoidal embedding
// of t^f, concatenated at the input.
class MlpPredictor final : public TrainablePredictor {
public:
    static constexpr std::size_t kTimeFeatures = 8;

    MlpPredictor(const Vocabulary& vocab, std::size_t chunk_len,
                 std::size_t hidden, std::uint64_t init_seed);

    Logits predict(const Chunk& x, const TimestepVector& t) override;
    void backward(const Chunk& x, const TimestepVector& t,
                  const Logits& dlogits) override;

    std::string kind() const override { return "mlp"; }
    const Vocabulary& vocab() const override { return vocab_; }
    std::size_t chunk_len() const override { return k_; }
    std::size_t hidden() const { return hidden_; }

private:
    struct Features {
        std::vector<std::pair<std::size_t, double>> sparse; // (index, value)
    };
    Features features(const Chunk& x, const TimestepVector& t, std::size_t f,
                      std::size_t i) const;
    std::size_t input_dim() const {
        return k_ * vocab_.size + k_ + kTimeFeatures;
    }

    Vocabulary vocab_;
    std::size_t k_;
    std::size_t hidden_;
};

// --- training ----------------------------------------------------------------

enum class TrainMode { FrameLevel, ConstantLevel };

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t steps = 1000;
    std::size_t batch_size = 8;
    TrainMode mode = TrainMode::FrameLevel;
    MaskSchedule schedule = MaskSchedule::linear();
    double snr_decay = 0.9;
    double snr_clamp = 5.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainLog {
    std::vector<double> loss;            // per step, batch mean
    std::vector<double> masked_accuracy; // per step, argmax over data ids
    std::vector<TimestepVector> sampled_t; // one draw per step (instrumentation)

    double trailing_mean_loss(std::size_t window) const;
    double trailing_mean_accuracy(std::size_t window) const;
};

TrainLog train(TrainablePredictor& model, const std::vector<TokenVideo>& corpus,
               const TrainConfig& cfg);

// Central finite differences vs analytic gradients over sample_count randomly
// chosen parameters; returns the max relative error.
double gradient_check(TrainablePredictor& model, const std::vector<Chunk>& clean_batch,
                      double delta, std::size_t sample_count, std::uint64_t seed);

// --- checkpoints -------------------------------------------------------------
// JSON header (kind, dims, free-form meta) followed by a packed little-endian
// f32 parameter block; save/load/save is byte-identical.

void save_checkpoint(const std::string& path, const TrainablePredictor& model,
                     const std::map<std::string, std::string>& meta = {});

struct LoadedCheckpoint {
    std::unique_ptr<TrainablePredictor> model;
    std::map<std::string, std::string> meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace flowvid
