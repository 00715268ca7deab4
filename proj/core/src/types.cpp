#include "flowvid/types.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace flowvid {

TokenFrame masked_frame(std::size_t n_tokens, const Vocabulary& vocab) {
    if (n_tokens < 1)
        throw std::invalid_argument("masked_frame: N must be >= 1");
    TokenFrame f;
    f.tokens.assign(n_tokens, vocab.mask_id);
    return f;
}

Chunk slice_chunk(const TokenVideo& video, std::size_t start, std::size_t k) {
    if (start + k > video.length())
        throw std::out_of_range("slice_chunk: [" + std::to_string(start) + ", " +
                                std::to_string(start + k) + ") exceeds video length " +
                                std::to_string(video.length()));
    Chunk c;
    c.frames.assign(video.frames.begin() + static_cast<std::ptrdiff_t>(start),
                    video.frames.begin() + static_cast<std::ptrdiff_t>(start + k));
    return c;
}

std::size_t count_masked(const Chunk& chunk, const Vocabulary& vocab) {
    std::size_t n = 0;
    for (const auto& f : chunk.frames)
        for (TokenId id : f.tokens)
            if (vocab.is_mask(id)) ++n;
    return n;
}

TimestepVector clean_fraction(const Chunk& chunk, const Vocabulary& vocab) {
    TimestepVector t;
    t.values.reserve(chunk.length());
    for (const auto& f : chunk.frames) {
        std::size_t clean = 0;
        for (TokenId id : f.tokens)
            if (!vocab.is_mask(id)) ++clean;
        t.values.push_back(f.size() == 0 ? 1.0
                                         : static_cast<double>(clean) /
                                               static_cast<double>(f.size()));
    }
    return t;
}

// --- JSON --------------------------------------------------------------------

std::string video_to_json(const TokenVideo& video, const Vocabulary& vocab) {
    nlohmann::json j;
    j["K"] = vocab.size;
    j["N"] = video.tokens_per_frame();
    j["mask_id"] = vocab.mask_id;
    auto& frames = j["frames"] = nlohmann::json::array();
    for (const auto& f : video.frames)
        frames.push_back(f.tokens);
    return j.dump();
}

std::pair<TokenVideo, Vocabulary> video_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Vocabulary vocab;
    vocab.size = j.at("K").get<std::uint32_t>();
    vocab.mask_id = j.at("mask_id").get<TokenId>();
    vocab.validate();
    const std::size_t n = j.at("N").get<std::size_t>();
    TokenVideo video;
    for (const auto& jf : j.at("frames")) {
        TokenFrame f;
        f.tokens = jf.get<std::vector<TokenId>>();
        if (f.tokens.size() != n)
            throw std::invalid_argument("video_from_json: inconsistent frame length");
        for (TokenId id : f.tokens)
            if (id >= vocab.size)
                throw std::invalid_argument("video_from_json: token id out of range");
        video.frames.push_back(std::move(f));
    }
    if (video.frames.empty())
        throw std::invalid_argument("video_from_json: video must have >= 1 frame");
    return {std::move(video), vocab};
}

// --- binary ------------------------------------------------------------------

namespace {

constexpr std::array<char, 4> kMagic = {'M', 'F', 'T', 'V'};

void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {
        static_cast<unsigned char>(v & 0xff),
        static_cast<unsigned char>((v >> 8) & 0xff),
        static_cast<unsigned char>((v >> 16) & 0xff),
        static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("read_video_binary: truncated input");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void write_video_binary(std::ostream& out, const TokenVideo& video,
                        const Vocabulary& vocab) {
    out.write(kMagic.data(), 4);
    put_u32(out, vocab.size);
    put_u32(out, static_cast<std::uint32_t>(video.tokens_per_frame()));
    put_u32(out, static_cast<std::uint32_t>(video.length()));
    if (vocab.mask_id != vocab.size - 1)
        throw std::invalid_argument(
            "write_video_binary: the packed form carries no mask_id field and "
            "assumes mask_id == K-1");
    for (const auto& f : video.frames)
        for (TokenId id : f.tokens)
            put_u32(out, id);
}

std::pair<TokenVideo, Vocabulary> read_video_binary(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    if (!in || magic != kMagic)
        throw std::runtime_error("read_video_binary: bad magic");
    Vocabulary vocab;
    vocab.size = get_u32(in);
    const std::uint32_t n = get_u32(in);
    const std::uint32_t l = get_u32(in);
    vocab.mask_id = vocab.size - 1; // the packed form fixes mask_id = K-1
    vocab.validate();
    if (l < 1 || n < 1)
        throw std::runtime_error("read_video_binary: empty geometry");
    TokenVideo video;
    video.frames.resize(l);
    for (auto& f : video.frames) {
        f.tokens.resize(n);
        for (auto& id : f.tokens) {
            id = get_u32(in);
            if (id >= vocab.size)
                throw std::runtime_error("read_video_binary: token id out of range");
        }
    }
    return {std::move(video), vocab};
}

void save_video(const std::string& path, const TokenVideo& video,
                const Vocabulary& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_video: cannot open " + path);
    write_video_binary(out, video, vocab);
    if (!out) throw std::runtime_error("save_video: write failed for " + path);
}

std::pair<TokenVideo, Vocabulary> load_video(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_video: cannot open " + path);
    return read_video_binary(in);
}

} // namespace flowvid
