#pragma once
// Deterministic random streams.
//
// Engine: std::mt19937_64, whose integer output sequence is fully specified
// by the C++ standard. Uniform and normal variates are produced with explicit
// arithmetic on the raw 64-bit output rather than std::*_distribution, whose
// algorithms are implementation-defined and so differ between standard
// libraries.
//
// Stream splitting: child seeds are derived by chaining SplitMix64 over a
// sequence of 64-bit tags (derive_seed). Every independently simulated object
// (moth instance, experiment pools, protocol phase) owns its own stream, so
// concurrent simulations never share generator state and results do not
// depend on scheduling or worker count.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string_view>
#include <vector>

namespace mothnet {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/* FNV-1a over bytes; used to turn names and file contents into 64-bit tags. */
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; i++) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    return fnv1a64(s.data(), s.size());
}

/* Bit pattern of a double as a tag, so seed derivation can hash parameter
 * values (exact-equality semantics: the same double always maps to the same
 * child seed regardless of where it appears in a sweep list). */
inline std::uint64_t tag_of(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    return bits;
}
inline std::uint64_t tag_of(std::uint64_t v) { return v; }
inline std::uint64_t tag_of(int v) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(v)); }
inline std::uint64_t tag_of(std::string_view s) { return fnv1a64(s); }

/* Child seed = SplitMix64 chained over (root, tag1, tag2, ...). */
template <class... Tags>
std::uint64_t derive_seed(std::uint64_t root, Tags... tags) {
    std::uint64_t h = splitmix64(root);
    ((h = splitmix64(h ^ tag_of(tags))), ...);
    return h;
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /* Uniform in [0, 1), 53-bit resolution. */
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /* Uniform in (0, 1]; never zero, safe under log(). */
    double uniform_pos() {
        return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /* Standard normal via the Marsaglia polar method (no trig, rejection is
     * deterministic given the engine state). The antithetic second variate is
     * discarded. */
    double normal() {
        for (;;) {
            double u = 2.0 * uniform() - 1.0;
            double v = 2.0 * uniform() - 1.0;
            double s = u * u + v * v;
            if (s > 0.0 && s < 1.0)
                return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

    /* Uniform integer in [0, n) by rejection; unbiased. */
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t lim = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= lim);
        return x % n;
    }

    /* Fisher-Yates; std::shuffle is implementation-defined, this is not. */
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; i--)
            std::swap(v[i - 1], v[below(i)]);
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace mothnet
