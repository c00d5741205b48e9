#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace airm {

// Small counter-based generator (splitmix64). We avoid <random> distributions
// because their output is implementation-defined; this keeps every sampled
// value reproducible from the seed alone.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; one value per call, cached pair.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, n).
    uint64_t randint(uint64_t n) { return next_u64() % n; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(randint(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Deterministic stream splitting: child generators for (seed, tag) pairs.
    static uint64_t derive(uint64_t seed, uint64_t tag) {
        Rng r(seed ^ (0x9e3779b97f4a7c15ULL * (tag + 1)));
        return r.next_u64();
    }

private:
    uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace airm
