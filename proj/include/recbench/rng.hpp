// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "recbench/common.hpp"

namespace recbench {

// Deterministic random source. All distribution code is hand-rolled on top of
// std::mt19937_64 (whose output sequence the standard pins down) so that a
// given seed produces the same stream on every platform and compiler. The
// std::*_distribution classes are deliberately avoided: their algorithms are
// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of randomness.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Lemire-style rejection keeps it exactly uniform.
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) throw ContractError("Rng::bounded: n must be positive");
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = engine_();
            if (r >= threshold) return r % n;
        }
    }

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(bounded(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Standard normal via Box-Muller with a cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Normal(0, stddev) truncated to +/- 2 stddev by rejection.
    double truncated_normal(double stddev) {
        for (;;) {
            const double z = normal();
            if (std::fabs(z) <= 2.0) return z * stddev;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Derives a child seed from a base seed and a stream label, so independent
// parts of a run (init, per-epoch shuffles, per-batch sampling) get decoupled
// streams that do not depend on execution interleaving.
inline std::uint64_t derive_seed(std::uint64_t base, const char* stream, std::uint64_t a = 0,
                                 std::uint64_t b = 0) {
    std::uint64_t h = fnv1a(stream, std::char_traits<char>::length(stream));
    h = fnv1a(&base, sizeof(base), h);
    h = fnv1a(&a, sizeof(a), h);
    h = fnv1a(&b, sizeof(b), h);
    // splitmix-style finalizer to spread low-entropy labels
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebull;
    h ^= h >> 31;
    return h;
}

}  // namespace recbench
