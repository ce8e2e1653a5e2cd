#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace shotnoise {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream key for path `index` under master seed `seed`.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    std::uint64_t t = index ^ 0xd1b54a32d192ed03ULL;
    std::uint64_t b = splitmix64(t);
    std::uint64_t mix = a ^ (b + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2));
    return splitmix64(mix);
}

// xoshiro256** keyed by (seed, index). Satisfies UniformRandomBitGenerator.
class Stream {
public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t seed, std::uint64_t index = 0)
        : key_(stream_key(seed, index)) {
        std::uint64_t s = key_;
        for (auto& w : s_) w = splitmix64(s);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on the open interval (0, 1).
    double uniform() { return ((*this)() >> 11) * 0x1.0p-53 + 0x1.0p-54; }

    double exponential() { return -std::log(uniform()); }

    std::uint64_t key() const { return key_; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t key_;
    std::uint64_t s_[4];
};

} // namespace shotnoise
