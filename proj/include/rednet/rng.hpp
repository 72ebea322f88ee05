#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace rednet {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic child seed for task `index` (node, replicate, fold stream, ...).
/// All per-task RNG streams are derived this way so that the worker count can
/// never change results.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                 std::uint64_t stream = 0) {
    return splitmix64(splitmix64(master ^ splitmix64(index + 1)) ^ splitmix64(stream + 2));
}

/// Random stream with hand-rolled distributions. std::*_distribution is
/// implementation-defined, which would break the byte-identical-output
/// contract across standard libraries; everything here is pinned to the
/// mt19937_64 bit stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller (consumes exactly two draws).
    double normal() {
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double sd) { return sd == 0.0 ? 0.0 : sd * normal(); }

    /// Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % n;
    }

    /// Genotype-style draw from {0, 1, 2}.
    int trinary(double p0, double p1) {
        double u = uniform01();
        if (u < p0) return 0;
        if (u < p0 + p1) return 1;
        return 2;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace rednet
