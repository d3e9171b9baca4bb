#pragma once

#include <cstdint>

namespace ifs {

// Counter-based generator keyed by (seed, stream_id). Draws depend only on
// the key and the number of values consumed, so independent streams replay
// identically regardless of scheduling order.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next_u64();

    // uniform double in [0, 1)
    double uniform();

    // unbiased integer in [0, n), n >= 1
    std::uint64_t uniform_int(std::uint64_t n);

    // standard normal via Box-Muller (no state cached between calls)
    double normal();

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// 64-bit FNV-1a, used to derive stream ids from structured trial keys.
std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t basis = 14695981039346656037ULL);
std::uint64_t hash_combine64(std::uint64_t a, std::uint64_t b);

} // namespace ifs
