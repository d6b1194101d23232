#ifndef MLM_RNG_HPP
#define MLM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace mlm {

/// Mersenne twister with platform-independent draws. The standard
/// distributions are implementation-defined, so these helpers are used
/// wherever results must be reproducible from a seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on [0, n). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return r % n;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Child seed from a root seed and a list of coordinates:
/// s = root; for c in coords: s = splitmix64(s ^ splitmix64(c)).
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> coords) {
    std::uint64_t s = splitmix64(root);
    for (std::uint64_t c : coords) s = splitmix64(s ^ splitmix64(c));
    return s;
}

}  // namespace mlm

#endif
