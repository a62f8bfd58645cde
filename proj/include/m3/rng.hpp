#pragma once

#include <cstdint>

namespace m3 {

// Counter-based keyed stream: each (seed, key) pair yields an independent
// deterministic sequence, so per-cell draws are reproducible regardless of
// the order cells are processed in.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t key0 = 0,
                       std::uint64_t key1 = 0) {
        state_ = mix(seed ^ 0x9e3779b97f4a7c15ULL);
        state_ = mix(state_ ^ mix(key0 ^ 0xbf58476d1ce4e5b9ULL));
        state_ = mix(state_ ^ mix(key1 ^ 0x94d049bb133111ebULL));
    }

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // Uniform in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling to avoid modulo bias
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % n;
    }

    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

}  // namespace m3
