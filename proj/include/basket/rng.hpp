#pragma once

#include <cstdint>
#include <random>

namespace basket {

// Deterministic seed derivation for chains, replicates and subtrial fits.
// splitmix64 finaliser over (base, stream) so that nearby indices give
// uncorrelated engine states.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Thin wrapper around mt19937_64. Each sampler/replicate owns its own
// instance; never shared across threads.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }

    // Gamma(shape, scale)
    double gamma(double shape, double scale) {
        std::gamma_distribution<double> g(shape, scale);
        return g(engine_);
    }

    // Uniform integer in [0, n)
    std::size_t index(std::size_t n) {
        std::uniform_int_distribution<std::size_t> d(0, n - 1);
        return d(engine_);
    }

    bool bernoulli(double p) { return uniform_(engine_) < p; }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace basket
