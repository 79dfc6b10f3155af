#pragma once

#include <cstdint>
#include <string_view>

namespace vcbf {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Inverse of the standard normal CDF for p in (0, 1) (Wichura's AS 241,
// about 1e-16 relative accuracy).
double normal_quantile(double p);

// Counter-based stream: the k-th output is mix64(key + k * golden), so any
// (seed, cell, replicate) triple owns an independent, reproducible sequence
// no matter which thread draws it.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t key) noexcept : state_(key) {}

    static RandomStream for_replicate(std::uint64_t seed, std::uint64_t cell_id,
                                      std::uint64_t replicate) noexcept {
        return RandomStream(mix64(seed ^ mix64(cell_id ^ mix64(replicate))));
    }

    std::uint64_t next_u64() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    // Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() { return normal_quantile(uniform()); }

private:
    std::uint64_t state_;
};

}  // namespace vcbf
