#pragma once

#include "vav/common.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace vav {

namespace detail {
// splitmix64, used to whiten seeds and derive independent substreams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
} // namespace detail

/// Seeded random stream. All draws are produced by explicit arithmetic on
/// mt19937_64 output instead of std:: distributions, so a given seed yields
/// the same sequence on every platform and toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed)
        : seed_(seed), gen_(detail::splitmix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    /// Uniform double in [0, 1).
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Uniform integer in [0, n).
    int below(int n) {
        require(n > 0, "Rng::below: n must be positive");
        return static_cast<int>(gen_() % static_cast<std::uint64_t>(n));
    }

    /// Standard normal via Box-Muller; consumes two uniforms per pair.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 1e-300) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    Vector gaussian(int k) {
        Vector v(k);
        for (int i = 0; i < k; ++i) v[i] = normal();
        return v;
    }

    /// Uniform draw from the unit hypersphere in R^k.
    Vector unit_vector(int k) {
        Vector v = gaussian(k);
        double n = v.norm();
        while (n < 1e-12) {
            v = gaussian(k);
            n = v.norm();
        }
        return v / n;
    }

    /// Sample an index from an unnormalized nonnegative weight vector.
    int categorical(const Vector& weights) {
        const double total = weights.sum();
        require(total > 0.0, "Rng::categorical: weights sum to zero");
        const double u = uniform01() * total;
        double acc = 0.0;
        for (int i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return static_cast<int>(weights.size()) - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            std::swap(v[static_cast<std::size_t>(i)],
                      v[static_cast<std::size_t>(below(i + 1))]);
        }
    }

    /// Derive an independent stream. Forking with the same tag from the same
    /// parent always yields the same child stream, so work can be reordered
    /// or parallelized without perturbing results.
    Rng fork(std::uint64_t tag) const {
        return Rng(detail::splitmix64(seed_ ^ detail::splitmix64(tag + 0x51ed2701ULL)));
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace vav
