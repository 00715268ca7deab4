#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace flowvid {

// Closed-form forward-pass (NFE) predictors for the four sampling methods.
// One NFE = one predictor forward pass on one chunk, regardless of chunk size.

// l = ceil((L - k) / s) + 1
std::size_t num_chunks(std::size_t total_length, std::size_t k, std::size_t stride);

std::size_t nfe_mgm(std::size_t total_length, std::size_t k, std::size_t stride,
                    std::size_t steps = 20);
std::size_t nfe_fm(std::size_t total_length, std::size_t k, std::size_t stride,
                   std::size_t steps = 250);
std::size_t nfe_df(std::size_t total_length, std::size_t k, std::size_t stride,
                   std::size_t steps = 250);
std::size_t nfe_rolling(std::size_t total_length, std::size_t k,
                        std::size_t context, std::size_t steps = 250);

struct NfeReport {
    std::string method;
    std::size_t total_length = 0; // L
    std::size_t k = 0;
    std::size_t context = 0; // m
    std::size_t stride = 0;  // s (0 for rolling)
    std::size_t steps = 0;   // T
    std::size_t predicted_nfe = 0;
    std::size_t measured_nfe = 0;
    double wall_clock_s = 0.0;

    // hard assertion: predicted must match measured for every engine run
    void check() const;
};

std::string nfe_reports_to_csv(const std::vector<NfeReport>& reports);
std::string nfe_reports_to_json(const std::vector<NfeReport>& reports);

} // namespace flowvid
