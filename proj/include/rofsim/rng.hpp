#pragma once

#include <cstdint>
#include <random>

namespace rofsim {

/// Seed plus stream id. Each noise source owns one stream; the same pair
/// always reproduces the same sequence.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    std::mt19937_64 engine() const {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream_id),
                          static_cast<std::uint32_t>(stream_id >> 32), 0x9e3779b9u};
        return std::mt19937_64(seq);
    }

    /// Derived stream for a sub-component; distinct `k` give distinct streams.
    RngStream substream(std::uint64_t k) const {
        return RngStream{seed, stream_id * 0x100000001b3ull + k + 1};
    }

    friend bool operator==(const RngStream&, const RngStream&) = default;
};

}  // namespace rofsim
