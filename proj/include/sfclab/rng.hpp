#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

// Counter-based random number generation (Philox4x32-10, Salmon et al. 2011).
// Every draw is a pure function of (seed, stream, counter), so simulations are
// reproducible bit-for-bit regardless of execution order or thread count.

namespace sfclab {

struct Philox4x32 {
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWey0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWey1 = 0xBB67AE85u;

    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static inline void round(Counter& c, const Key& k) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }

    // 10-round block cipher on the counter.
    static inline Counter block(Counter c, Key k) {
        for (int i = 0;; ++i) {
            round(c, k);
            if (i == 9) break;
            k[0] += kWey0;
            k[1] += kWey1;
        }
        return c;
    }
};

// Uniform double in the open interval (0,1): (i + 1/2) / 2^52 over the top
// 52 bits, so the extremes 2^-53 and 1 - 2^-53 are exactly representable and
// neither endpoint can be hit (a 53-bit mapping rounds its top value to 1.0).
inline double u64_to_unit(std::uint64_t v) {
    return (static_cast<double>(v >> 12) + 0.5) * 0x1.0p-52;
}

// Inverse standard normal CDF, Wichura's algorithm AS 241 (PPND16).
// Absolute error below 1e-15 over the full double range.
double inverse_normal_cdf(double p);

// splitmix64 finalizer; used to derive independent sub-seeds for
// auxiliary streams (bootstrap resampling, parameter sweeps, ...).
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ mix64(tag));
}

// One logical random stream, addressed by (seed, stream id). Draws are
// indexed by a 64-bit counter; nothing is stored between calls.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(stream)),
          stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

    std::uint64_t bits(std::uint64_t counter) const {
        Philox4x32::Counter c = {static_cast<std::uint32_t>(counter),
                                 static_cast<std::uint32_t>(counter >> 32), stream_lo_, stream_hi_};
        const auto out = Philox4x32::block(c, key_);
        return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    }

    double uniform(std::uint64_t counter) const { return u64_to_unit(bits(counter)); }

    double normal(std::uint64_t counter) const { return inverse_normal_cdf(uniform(counter)); }

    // Uniform integer in [0, n) by 128-bit multiply; bias < 2^-64.
    std::uint64_t index(std::uint64_t counter, std::uint64_t n) const {
        if (n == 0) throw std::invalid_argument("RandomStream::index: n must be positive");
        const unsigned __int128 wide = static_cast<unsigned __int128>(bits(counter)) * n;
        return static_cast<std::uint64_t>(wide >> 64);
    }

private:
    Philox4x32::Key key_;
    std::uint32_t stream_lo_, stream_hi_;
};

}  // namespace sfclab
