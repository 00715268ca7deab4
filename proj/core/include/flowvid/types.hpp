#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowvid {

using TokenId = std::uint32_t;

// Token id space. mask_id is the reserved absorbing state; all other ids are
// data ids. By default the mask is the highest id so data ids stay contiguous
// from 0.
struct Vocabulary {
    std::uint32_t size = 0; // K, mask included
    TokenId mask_id = 0;    // M

    static Vocabulary with_data_ids(std::uint32_t num_data_ids) {
        Vocabulary v;
        v.size = num_data_ids + 1;
        v.mask_id = num_data_ids;
        return v;
    }

    std::uint32_t num_data_ids() const { return size - 1; }
    bool is_mask(TokenId id) const { return id == mask_id; }

    void validate() const {
        if (size < 2)
            throw std::invalid_argument("Vocabulary: size must be >= 2");
        if (mask_id >= size)
            throw std::invalid_argument("Vocabulary: mask_id out of range");
    }
};

// One frame: N token ids. N is constant across a video.
struct TokenFrame {
    std::vector<TokenId> tokens;

    std::size_t size() const { return tokens.size(); }
    bool operator==(const TokenFrame&) const = default;
};

struct TokenVideo {
    std::vector<TokenFrame> frames;

    std::size_t length() const { return frames.size(); }
    std::size_t tokens_per_frame() const {
        return frames.empty() ? 0 : frames.front().size();
    }
    bool operator==(const TokenVideo&) const = default;
};

// A k-frame generation window; the first context_count frames are clean
// conditioning.
struct Chunk {
    std::vector<TokenFrame> frames;
    std::size_t context_count = 0; // m

    std::size_t length() const { return frames.size(); }
    std::size_t tokens_per_frame() const {
        return frames.empty() ? 0 : frames.front().size();
    }
    bool operator==(const Chunk&) const = default;
};

// Per-frame masking levels t^f in [0,1]. Context frames carry exactly 1.0.
struct TimestepVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t f) const { return values[f]; }

    static TimestepVector constant(std::size_t k, double t) {
        return TimestepVector{std::vector<double>(k, t)};
    }
    static TimestepVector zeros(std::size_t k) { return constant(k, 0.0); }
};

TokenFrame masked_frame(std::size_t n_tokens, const Vocabulary& vocab);

// frames [start, start+k) of the video; context_count is set by the caller.
Chunk slice_chunk(const TokenVideo& video, std::size_t start, std::size_t k);

std::size_t count_masked(const Chunk& chunk, const Vocabulary& vocab);

// Fraction of clean (non-mask) tokens per frame; this is the t-vector a
// partially unmasked chunk sits at.
TimestepVector clean_fraction(const Chunk& chunk, const Vocabulary& vocab);

// --- serialization -----------------------------------------------------------
// JSON: {"K":..., "N":..., "mask_id":..., "frames":[[ids...],...]}
// Binary: 16-byte header (magic "MFTV", u32 K, u32 N, u32 L), then L*N token
// ids as little-endian u32; the packed form assumes mask_id == K-1. Both
// round-trip bit-exactly.

std::string video_to_json(const TokenVideo& video, const Vocabulary& vocab);
std::pair<TokenVideo, Vocabulary> video_from_json(const std::string& text);

void write_video_binary(std::ostream& out, const TokenVideo& video,
                        const Vocabulary& vocab);
std::pair<TokenVideo, Vocabulary> read_video_binary(std::istream& in);

void save_video(const std::string& path, const TokenVideo& video,
                const Vocabulary& vocab);
std::pair<TokenVideo, Vocabulary> load_video(const std::string& path);

} // namespace flowvid
