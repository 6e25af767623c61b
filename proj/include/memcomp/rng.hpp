#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace memcomp {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a over a byte string, for seeding from canonical config text.
constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// A deterministic random stream. Streams for distinct (seed, index...) tuples
/// are seeded through mix64 so trials never share state.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : engine_(mix64(seed)) {}

    static RngStream derive(std::uint64_t master, std::uint64_t a) {
        return RngStream(mix64(master) ^ mix64(a + 0x632be59bd9b4e019ULL));
    }
    static RngStream derive(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
        return RngStream(mix64(mix64(master) ^ mix64(a + 0x632be59bd9b4e019ULL)) ^
                         mix64(b + 0x8cb92ba72f3d8dd7ULL));
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal by the Marsaglia polar method (second variate discarded,
    /// so the stream carries no hidden cache).
    double normal() {
        for (;;) {
            const double u = 2.0 * uniform() - 1.0;
            const double v = 2.0 * uniform() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }

    std::uint64_t next_u64() { return engine_(); }

  private:
    std::mt19937_64 engine_;
};

}  // namespace memcomp
