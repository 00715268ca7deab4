#include "flowvid/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <json.hpp>

namespace flowvid {

// --- oracle ------------------------------------------------------------------

std::vector<std::vector<double>>
OraclePredictor::column_posteriors(const std::vector<TokenId>& column) {
    {
        std::lock_guard lock(cache_mutex_);
        if (auto it = cache_.find(column); it != cache_.end())
            return it->second;
    }

    const std::size_t k = column.size();
    const std::size_t d = process_.num_data_ids();
    std::vector<std::size_t> holes;
    for (std::size_t f = 0; f < k; ++f)
        if (process_.vocab.is_mask(column[f]))
            holes.push_back(f);

    double states = 1.0;
    for (std::size_t i = 0; i < holes.size(); ++i) {
        states *= static_cast<double>(d);
        if (states > static_cast<double>(budget_))
            throw EnumerationBudgetError("oracle_predict: completion space exceeds budget");
    }

    std::vector<std::vector<double>> posterior(k);
    for (std::size_t f : holes)
        posterior[f].assign(d, 0.0);

    std::vector<TokenId> work(column);
    std::vector<TokenId> digits(holes.size(), 0);
    double total = 0.0;
    while (true) {
        for (std::size_t i = 0; i < holes.size(); ++i)
            work[holes[i]] = digits[i];
        double p = process_.initial_prob();
        for (std::size_t f = 1; f < k; ++f)
            p *= process_.transition_prob(work[f - 1], work[f]);
        total += p;
        for (std::size_t i = 0; i < holes.size(); ++i)
            posterior[holes[i]][digits[i]] += p;

        std::size_t i = holes.size();
        while (i > 0 && ++digits[i - 1] == d)
            digits[--i] = 0;
        if (i == 0)
            break;
    }
    if (!holes.empty()) {
        if (total <= 0.0)
            throw std::runtime_error("oracle_predict: observed column has zero mass");
        for (std::size_t f : holes)
            for (auto& v : posterior[f])
                v /= total;
    }

    std::lock_guard lock(cache_mutex_);
    return cache_.emplace(column, std::move(posterior)).first->second;
}

Logits OraclePredictor::predict(const Chunk& x, const TimestepVector& t) {
    if (t.size() != x.length())
        throw std::invalid_argument("oracle_predict: timestep vector length mismatch");
    const std::size_t k = x.length();
    const std::size_t n = x.tokens_per_frame();
    const std::size_t kk = process_.vocab.size;
    Logits out(k, n, kk);
    std::vector<TokenId> column(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < k; ++f)
            column[f] = x.frames[f].tokens[i];
        const auto posterior = column_posteriors(column);
        for (std::size_t f = 0; f < k; ++f) {
            double* row = out.row(f, i);
            if (posterior[f].empty()) {
                // observed: large-margin one-hot on the seen value
                std::fill(row, row + kk, 0.0);
                row[column[f]] = kOneHotMargin;
            } else {
                for (std::size_t c = 0; c + 1 < kk; ++c)
                    row[c] = posterior[f][c] > 0.0 ? std::log(posterior[f][c])
                                                   : kLogFloor;
                row[process_.vocab.mask_id] = kLogFloor;
            }
        }
    }
    return out;
}

// --- tabular -----------------------------------------------------------------

TabularPredictor::TabularPredictor(const Vocabulary& vocab, std::size_t chunk_len)
    : vocab_(vocab), k_(chunk_len) {
    vocab_.validate();
    if (k_ < 1)
        throw std::invalid_argument("TabularPredictor: chunk length must be >= 1");
    rows_ = static_cast<std::size_t>(vocab_.size) * (2 * k_ - 1) + 1;
    params_.assign(rows_ * vocab_.size, 0.0);
    grads_.assign(params_.size(), 0.0);
}

std::ptrdiff_t TabularPredictor::row_index(const Chunk& x, std::size_t f,
                                           std::size_t i) const {
    // nearest observed token in the same column; ties prefer earlier frames
    std::ptrdiff_t best = -1;
    std::size_t best_dist = 0;
    for (std::size_t g = 0; g < x.length(); ++g) {
        if (vocab_.is_mask(x.frames[g].tokens[i]))
            continue;
        const std::size_t dist =
            f > g ? f - g : g - f;
        if (best < 0 || dist < best_dist) {
            best = static_cast<std::ptrdiff_t>(g);
            best_dist = dist;
        }
    }
    if (best < 0)
        return static_cast<std::ptrdiff_t>(rows_ - 1); // fully masked column
    const TokenId ref = x.frames[static_cast<std::size_t>(best)].tokens[i];
    const std::ptrdiff_t offset =
        static_cast<std::ptrdiff_t>(f) - best + static_cast<std::ptrdiff_t>(k_) - 1;
    return static_cast<std::ptrdiff_t>(ref) * static_cast<std::ptrdiff_t>(2 * k_ - 1) +
           offset;
}

Logits TabularPredictor::predict(const Chunk& x, const TimestepVector& t) {
    if (t.size() != x.length() || x.length() > k_)
        throw std::invalid_argument("TabularPredictor: bad chunk shape");
    Logits out(x.length(), x.tokens_per_frame(), vocab_.size);
    for (std::size_t f = 0; f < x.length(); ++f)
        for (std::size_t i = 0; i < x.tokens_per_frame(); ++i) {
            const auto row = static_cast<std::size_t>(row_index(x, f, i));
            std::memcpy(out.row(f, i), params_.data() + row * vocab_.size,
                        vocab_.size * sizeof(double));
        }
    return out;
}

void TabularPredictor::backward(const Chunk& x, const TimestepVector& t,
                                const Logits& dlogits) {
    for (std::size_t f = 0; f < x.length(); ++f)
        for (std::size_t i = 0; i < x.tokens_per_frame(); ++i) {
            const auto row = static_cast<std::size_t>(row_index(x, f, i));
            const double* g = dlogits.row(f, i);
            double* acc = grads_.data() + row * vocab_.size;
            for (std::size_t c = 0; c < vocab_.size; ++c)
                acc[c] += g[c];
        }
}

// --- mlp ---------------------------------------------------------------------

MlpPredictor::MlpPredictor(const Vocabulary& vocab, std::size_t chunk_len,
                           std::size_t hidden, std::uint64_t init_seed)
    : vocab_(vocab), k_(chunk_len), hidden_(hidden) {
    vocab_.validate();
    if (k_ < 1 || hidden_ < 1)
        throw std::invalid_argument("MlpPredictor: bad dimensions");
    const std::size_t in = input_dim();
    params_.assign(hidden_ * in + hidden_ + vocab_.size * hidden_ + vocab_.size, 0.0);
    grads_.assign(params_.size(), 0.0);
    Rng rng(init_seed);
    const double scale = 0.5 / std::sqrt(static_cast<double>(in));
    for (std::size_t i = 0; i < hidden_ * in; ++i)
        params_[i] = scale * (2.0 * rng.uniform() - 1.0);
    const double scale2 = 0.5 / std::sqrt(static_cast<double>(hidden_));
    for (std::size_t i = 0; i < vocab_.size * hidden_; ++i)
        params_[hidden_ * in + hidden_ + i] = scale2 * (2.0 * rng.uniform() - 1.0);
}

MlpPredictor::Features MlpPredictor::features(const Chunk& x, const TimestepVector& t,
                                              std::size_t f, std::size_t i) const {
    Features feat;
    feat.sparse.reserve(x.length() + 1 + kTimeFeatures);
    for (std::size_t g = 0; g < x.length(); ++g)
        feat.sparse.emplace_back(g * vocab_.size + x.frames[g].tokens[i], 1.0);
    feat.sparse.emplace_back(k_ * vocab_.size + f, 1.0);
    const std::size_t te_base = k_ * vocab_.size + k_;
    double freq = std::numbers::pi;
    for (std::size_t j = 0; j < kTimeFeatures / 2; ++j) {
        feat.sparse.emplace_back(te_base + 2 * j, std::sin(freq * t[f]));
        feat.sparse.emplace_back(te_base + 2 * j + 1, std::cos(freq * t[f]));
        freq *= 2.0;
    }
    return feat;
}

Logits MlpPredictor::predict(const Chunk& x, const TimestepVector& t) {
    if (t.size() != x.length() || x.length() > k_)
        throw std::invalid_argument("MlpPredictor: bad chunk shape");
    const std::size_t in = input_dim();
    const double* w1 = params_.data();
    const double* b1 = w1 + hidden_ * in;
    const double* w2 = b1 + hidden_;
    const double* b2 = w2 + vocab_.size * hidden_;

    Logits out(x.length(), x.tokens_per_frame(), vocab_.size);
    std::vector<double> h(hidden_);
    for (std::size_t f = 0; f < x.length(); ++f) {
        for (std::size_t i = 0; i < x.tokens_per_frame(); ++i) {
            const auto feat = features(x, t, f, i);
            for (std::size_t j = 0; j < hidden_; ++j) {
                double a = b1[j];
                for (const auto& [idx, v] : feat.sparse)
                    a += w1[j * in + idx] * v;
                h[j] = std::tanh(a);
            }
            double* row = out.row(f, i);
            for (std::size_t c = 0; c < vocab_.size; ++c) {
                double z = b2[c];
                for (std::size_t j = 0; j < hidden_; ++j)
                    z += w2[c * hidden_ + j] * h[j];
                row[c] = z;
            }
        }
    }
    return out;
}

void MlpPredictor::backward(const Chunk& x, const TimestepVector& t,
                            const Logits& dlogits) {
    const std::size_t in = input_dim();
    const double* w1 = params_.data();
    const double* b1 = w1 + hidden_ * in;
    const double* w2 = b1 + hidden_;
    double* gw1 = grads_.data();
    double* gb1 = gw1 + hidden_ * in;
    double* gw2 = gb1 + hidden_;
    double* gb2 = gw2 + vocab_.size * hidden_;

    std::vector<double> h(hidden_), dh(hidden_);
    for (std::size_t f = 0; f < x.length(); ++f) {
        for (std::size_t i = 0; i < x.tokens_per_frame(); ++i) {
            const double* dz = dlogits.row(f, i);
            bool any = false;
            for (std::size_t c = 0; c < vocab_.size; ++c)
                any |= dz[c] != 0.0;
            if (!any)
                continue;
            const auto feat = features(x, t, f, i);
            for (std::size_t j = 0; j < hidden_; ++j) {
                double a = b1[j];
                for (const auto& [idx, v] : feat.sparse)
                    a += w1[j * in + idx] * v;
                h[j] = std::tanh(a);
            }
            std::fill(dh.begin(), dh.end(), 0.0);
            for (std::size_t c = 0; c < vocab_.size; ++c) {
                gb2[c] += dz[c];
                for (std::size_t j = 0; j < hidden_; ++j) {
                    gw2[c * hidden_ + j] += dz[c] * h[j];
                    dh[j] += w2[c * hidden_ + j] * dz[c];
                }
            }
            for (std::size_t j = 0; j < hidden_; ++j) {
                const double da = dh[j] * (1.0 - h[j] * h[j]);
                gb1[j] += da;
                for (const auto& [idx, v] : feat.sparse)
                    gw1[j * in + idx] += da * v;
            }
        }
    }
}

// --- training ----------------------------------------------------------------

void TrainConfig::validate() const {
    if (learning_rate <= 0.0)
        throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1)
        throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (snr_decay < 0.0 || snr_decay > 1.0)
        throw std::invalid_argument("TrainConfig: snr_decay must lie in [0,1]");
}

double TrainLog::trailing_mean_loss(std::size_t window) const {
    const std::size_t w = std::min(window, loss.size());
    if (w == 0)
        return 0.0;
    double s = 0.0;
    for (std::size_t i = loss.size() - w; i < loss.size(); ++i)
        s += loss[i];
    return s / static_cast<double>(w);
}

double TrainLog::trailing_mean_accuracy(std::size_t window) const {
    const std::size_t w = std::min(window, masked_accuracy.size());
    if (w == 0)
        return 0.0;
    double s = 0.0;
    for (std::size_t i = masked_accuracy.size() - w; i < masked_accuracy.size(); ++i)
        s += masked_accuracy[i];
    return s / static_cast<double>(w);
}

TrainLog train(TrainablePredictor& model, const std::vector<TokenVideo>& corpus,
               const TrainConfig& cfg) {
    cfg.validate();
    const std::size_t k = model.chunk_len();
    const Vocabulary& vocab = model.vocab();
    for (const auto& v : corpus)
        if (v.length() < k)
            throw std::invalid_argument("train: every video needs >= k frames");
    if (corpus.empty())
        throw std::invalid_argument("train: empty corpus");

    Rng rng(cfg.seed);
    TrainLog log;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        model.zero_grad();
        double loss_acc = 0.0;
        std::size_t hits = 0, masked_total = 0;
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const auto& video = corpus[rng.below(corpus.size())];
            const std::size_t start = rng.below(video.length() - k + 1);
            const Chunk clean = slice_chunk(video, start, k);

            TimestepVector t;
            if (cfg.mode == TrainMode::FrameLevel) {
                t = sample_timestep_vector(k, 0, rng);
            } else {
                t = TimestepVector::constant(k, rng.uniform());
            }
            if (b == 0)
                log.sampled_t.push_back(t);

            const Chunk corrupted = corrupt(clean, t, cfg.schedule, vocab, rng);
            const auto weights =
                fused_snr_weights(t, cfg.schedule, cfg.snr_decay, cfg.snr_clamp);
            const Logits logits = model.predict(corrupted, t);
            const auto ce = masked_ce_loss(logits, clean, corrupted, weights, vocab);
            if (!std::isfinite(ce.loss))
                throw std::runtime_error("train: non-finite loss at step " +
                                         std::to_string(step));
            loss_acc += ce.loss;
            model.backward(corrupted, t,
                           masked_ce_loss_grad(logits, clean, corrupted, weights, vocab));

            for (std::size_t f = 0; f < k; ++f)
                for (std::size_t i = 0; i < clean.tokens_per_frame(); ++i) {
                    if (!vocab.is_mask(corrupted.frames[f].tokens[i]))
                        continue;
                    ++masked_total;
                    const double* row = logits.row(f, i);
                    std::size_t best = 0;
                    for (std::size_t c = 1; c < vocab.size; ++c)
                        if (!vocab.is_mask(static_cast<TokenId>(c)) &&
                            row[c] > row[best])
                            best = c;
                    hits += best == clean.frames[f].tokens[i];
                }
        }
        model.apply_gradients(cfg.learning_rate /
                              static_cast<double>(cfg.batch_size));
        log.loss.push_back(loss_acc / static_cast<double>(cfg.batch_size));
        log.masked_accuracy.push_back(
            masked_total == 0 ? 1.0
                              : static_cast<double>(hits) /
                                    static_cast<double>(masked_total));
    }
    return log;
}

double gradient_check(TrainablePredictor& model, const std::vector<Chunk>& clean_batch,
                      double delta, std::size_t sample_count, std::uint64_t seed) {
    if (model.parameters().empty())
        return 0.0;
    if (delta < 1e-6 || delta > 1e-3)
        throw std::invalid_argument("gradient_check: delta must lie in [1e-6, 1e-3]");
    const Vocabulary& vocab = model.vocab();
    const MaskSchedule schedule = MaskSchedule::linear();
    Rng rng(seed);

    // one fixed corrupted batch, reused across all evaluations
    struct Sample {
        Chunk clean, corrupted;
        TimestepVector t;
        LossWeights weights;
    };
    std::vector<Sample> batch;
    for (const auto& clean : clean_batch) {
        Sample s;
        s.clean = clean;
        s.t = sample_timestep_vector(clean.length(), 0, rng);
        s.corrupted = corrupt(clean, s.t, schedule, vocab, rng);
        s.weights = fused_snr_weights(s.t, schedule, 0.9, 5.0);
        batch.push_back(std::move(s));
    }

    auto total_loss = [&]() {
        double acc = 0.0;
        for (const auto& s : batch)
            acc += masked_ce_loss(model.predict(s.corrupted, s.t), s.clean,
                                  s.corrupted, s.weights, vocab)
                       .loss;
        return acc;
    };

    model.zero_grad();
    for (const auto& s : batch) {
        const Logits logits = model.predict(s.corrupted, s.t);
        model.backward(s.corrupted, s.t,
                       masked_ce_loss_grad(logits, s.clean, s.corrupted, s.weights,
                                           vocab));
    }
    const auto analytic = model.gradients();
    auto params = model.parameters();

    double max_rel = 0.0;
    const std::size_t checks = std::min(sample_count, params.size());
    for (std::size_t c = 0; c < checks; ++c) {
        const std::size_t idx = sample_count >= params.size()
                                    ? c
                                    : rng.below(params.size());
        const double saved = params[idx];
        params[idx] = saved + delta;
        const double up = total_loss();
        params[idx] = saved - delta;
        const double down = total_loss();
        params[idx] = saved;
        const double numeric = (up - down) / (2.0 * delta);
        const double a = analytic[idx];
        const double rel =
            std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

// --- checkpoints -------------------------------------------------------------

namespace {

void put_u32le(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>((v >> 8) & 0xff),
                                static_cast<unsigned char>((v >> 16) & 0xff),
                                static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw std::runtime_error("load_checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32le(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32le(out, bits);
}

float get_f32le(std::istream& in) {
    const std::uint32_t bits = get_u32le(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace

void save_checkpoint(const std::string& path, const TrainablePredictor& model,
                     const std::map<std::string, std::string>& meta) {
    nlohmann::json header;
    header["kind"] = model.kind();
    header["K"] = model.vocab().size;
    header["mask_id"] = model.vocab().mask_id;
    header["k"] = model.chunk_len();
    if (const auto* mlp = dynamic_cast<const MlpPredictor*>(&model))
        header["hidden"] = mlp->hidden();
    header["params"] = model.parameters().size();
    nlohmann::json jm = nlohmann::json::object();
    for (const auto& [key, val] : meta)
        jm[key] = val;
    header["meta"] = jm;
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("save_checkpoint: cannot open " + path);
    put_u32le(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const double p : model.parameters())
        put_f32le(out, static_cast<float>(p));
    if (!out)
        throw std::runtime_error("save_checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("load_checkpoint: cannot open " + path);
    const std::uint32_t len = get_u32le(in);
    std::string text(len, '\0');
    in.read(text.data(), len);
    if (!in)
        throw std::runtime_error("load_checkpoint: truncated header");
    const nlohmann::json header = nlohmann::json::parse(text);

    Vocabulary vocab;
    vocab.size = header.at("K").get<std::uint32_t>();
    vocab.mask_id = header.at("mask_id").get<TokenId>();
    const std::size_t k = header.at("k").get<std::size_t>();
    const std::string kind = header.at("kind").get<std::string>();

    LoadedCheckpoint result;
    if (kind == "tabular") {
        result.model = std::make_unique<TabularPredictor>(vocab, k);
    } else if (kind == "mlp") {
        result.model = std::make_unique<MlpPredictor>(
            vocab, k, header.at("hidden").get<std::size_t>(), 0);
    } else {
        throw std::runtime_error("load_checkpoint: unknown model kind " + kind);
    }
    const std::size_t count = header.at("params").get<std::size_t>();
    if (count != result.model->parameters().size())
        throw std::runtime_error("load_checkpoint: parameter count mismatch");
    auto params = result.model->parameters();
    for (auto& p : params)
        p = static_cast<double>(get_f32le(in));
    if (header.contains("meta"))
        for (const auto& [key, val] : header.at("meta").items())
            result.meta[key] = val.get<std::string>();
    return result;
}

} // namespace flowvid
