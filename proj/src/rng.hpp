#ifndef HFID_RNG_HPP
#define HFID_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace hfid {

// Stateless 64-bit mixer. Used to derive independent stream seeds and for
// per-lattice-cell randomness in the halftone screens.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t seed, uint64_t value) {
    return splitmix64(seed ^ (value + 0x9e3779b97f4a7c15ULL));
}

// Deterministic RNG. The distributions are implemented here rather than via
// <random> adapters so that sequences do not depend on the standard library
// in use; identical seeds give identical streams on every build.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(splitmix64(seed)) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        // Rejection sampling keeps the draw unbiased.
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller (one value per call, no caching so the
    // stream position is easy to reason about).
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Child RNG with an independent stream.
    Rng fork(uint64_t stream) {
        return Rng(hash_combine(next_u64(), stream));
    }

private:
    std::mt19937_64 engine_;
};

} // namespace hfid

#endif
