#pragma once

#include <cstddef>
#include <vector>

namespace flowvid {

// k x N x K logits; softmax over the last axis is the predicted distribution
// of clean tokens at each position.
struct Logits {
    std::size_t k = 0;
    std::size_t n = 0;
    std::size_t vocab = 0;
    std::vector<double> values;

    Logits() = default;
    Logits(std::size_t k_, std::size_t n_, std::size_t vocab_)
        : k(k_), n(n_), vocab(vocab_), values(k_ * n_ * vocab_, 0.0) {}

    double& at(std::size_t f, std::size_t t, std::size_t c) {
        return values[(f * n + t) * vocab + c];
    }
    double at(std::size_t f, std::size_t t, std::size_t c) const {
        return values[(f * n + t) * vocab + c];
    }
    const double* row(std::size_t f, std::size_t t) const {
        return values.data() + (f * n + t) * vocab;
    }
    double* row(std::size_t f, std::size_t t) {
        return values.data() + (f * n + t) * vocab;
    }
    bool same_shape(const Logits& o) const {
        return k == o.k && n == o.n && vocab == o.vocab;
    }
};

// softmax of one logit row, numerically stabilized
std::vector<double> softmax_row(const double* logits, std::size_t count);

} // namespace flowvid
