#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace lmkan {

/// Named, seedable, splittable random stream.
///
/// A stream is identified by (seed, name). The name is hashed (FNV-1a) and
/// mixed with the seed through splitmix64, so "data", "init" and "eval"
/// streams derived from the same seed are independent. Uniform doubles are
/// taken from the top 53 bits of the mt19937_64 output; normals use the
/// Box-Muller transform with a one-value cache. Sequences are reproducible
/// for a given (seed, name) on a given build; cross-platform bit equality is
/// not a goal.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::string_view name)
        : key_(mix(seed, fnv1a(name))), engine_(key_) {}

    /// Derive an independent child stream, e.g. split("row3"). The child key
    /// depends on the full parent chain, not just the root seed.
    RandomStream split(std::string_view child) const {
        return RandomStream(key_, child);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1), never exactly 0 (safe under log()).
    double uniform_open() {
        double u;
        do { u = uniform(); } while (u == 0.0);
        return u;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

private:
    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        return h;
    }

    // splitmix64 finalizer over seed ^ rot(name_hash)
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t name_hash) {
        std::uint64_t z = seed ^ (name_hash + 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::mt19937_64 engine_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace lmkan
