#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "basket/errors.hpp"
#include "basket/mcmc.hpp"
#include "basket/rng.hpp"

namespace basket {

// ---------------------------------------------------------------------------
// Hellinger distance
// ---------------------------------------------------------------------------

// Closed form between N(m1, s1^2) and N(m2, s2^2):
//   d^2 = 1 - sqrt(2 s1 s2 / (s1^2 + s2^2)) * exp(-(m1 - m2)^2 / (4 (s1^2 + s2^2)))
inline double hellinger_normal(double m1, double s1, double m2, double s2) {
    if (!(s1 > 0.0) || !(s2 > 0.0))
        throw std::invalid_argument("hellinger_normal: standard deviations must be positive");
    const double s2sum = s1 * s1 + s2 * s2;
    const double bc = std::sqrt(2.0 * s1 * s2 / s2sum) * std::exp(-(m1 - m2) * (m1 - m2) / (4.0 * s2sum));
    const double d2 = std::max(0.0, 1.0 - bc);
    return std::min(1.0, std::sqrt(d2));
}

// Trapezoid-rule evaluation on a shared grid. Densities must be nonnegative
// and integrate to 1 within tol. Serves as the numeric oracle for
// hellinger_normal and as the path for non-normal posteriors.
inline double hellinger_numeric(const Eigen::VectorXd& grid, const Eigen::VectorXd& density_a,
                                const Eigen::VectorXd& density_b, double norm_tol = 1e-6) {
    const auto n = grid.size();
    if (n < 2 || density_a.size() != n || density_b.size() != n)
        throw std::invalid_argument("hellinger_numeric: grids must share >= 2 support points");
    if ((density_a.array() < 0.0).any() || (density_b.array() < 0.0).any())
        throw std::invalid_argument("hellinger_numeric: densities must be nonnegative");

    auto trapz = [&](auto f) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i + 1 < n; ++i)
            acc += 0.5 * (grid[i + 1] - grid[i]) * (f(i) + f(i + 1));
        return acc;
    };
    const double mass_a = trapz([&](Eigen::Index i) { return density_a[i]; });
    const double mass_b = trapz([&](Eigen::Index i) { return density_b[i]; });
    if (std::abs(mass_a - 1.0) > norm_tol || std::abs(mass_b - 1.0) > norm_tol)
        throw std::invalid_argument("hellinger_numeric: densities must integrate to 1");

    const double half_int = 0.5 * trapz([&](Eigen::Index i) {
        const double diff = std::sqrt(density_a[i]) - std::sqrt(density_b[i]);
        return diff * diff;
    });
    return std::min(1.0, std::sqrt(std::max(0.0, half_int)));
}

// Slab probability from the Hellinger distance: the identity map. Kept as a
// named operation so alternative calibrations can be plugged in.
inline double slab_weight(double d) {
    if (!(d >= 0.0) || !(d <= 1.0))
        throw std::invalid_argument("slab_weight: distance must lie in [0,1]");
    return d;
}

// Symmetric K x K matrix of pairwise distances between the moment-matched
// normal approximations of the stand-alone posteriors.
inline Eigen::MatrixXd hellinger_matrix(const std::vector<PosteriorSummary>& posteriors) {
    const auto K = static_cast<Eigen::Index>(posteriors.size());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(K, K);
    for (Eigen::Index a = 0; a < K; ++a)
        for (Eigen::Index b = a + 1; b < K; ++b) {
            const auto& pa = posteriors[static_cast<std::size_t>(a)];
            const auto& pb = posteriors[static_cast<std::size_t>(b)];
            d(a, b) = d(b, a) = hellinger_normal(pa.mean, pa.sd, pb.mean, pb.sd);
        }
    return d;
}

// ---------------------------------------------------------------------------
// Spike-and-slab prior on the commensurability precision nu
// ---------------------------------------------------------------------------

// Mixture of Unif(B1, B2) with probability w (the slab, discounting) and a
// point mass at S (the spike, strong borrowing).
struct SpikeSlabPrior {
    double B1 = 0.01;
    double B2 = 1.0;
    double S = 100.0;
    double w = 0.0;

    void validate() const {
        if (!(0.0 <= B1 && B1 < B2 && B2 < S))
            throw std::invalid_argument("SpikeSlabPrior: requires 0 <= B1 < B2 < S");
        if (!(w >= 0.0 && w <= 1.0))
            throw std::invalid_argument("SpikeSlabPrior: slab probability w must lie in [0,1]");
    }

    SpikeSlabPrior with_weight(double weight) const {
        SpikeSlabPrior p = *this;
        p.w = weight;
        p.validate();
        return p;
    }
};

// P(nu <= u).
inline double spike_slab_cdf(const SpikeSlabPrior& prior, double u) {
    prior.validate();
    if (u < prior.B1) return 0.0;
    if (u <= prior.B2) return prior.w * (u - prior.B1) / (prior.B2 - prior.B1);
    if (u < prior.S) return prior.w;
    return 1.0;
}

inline double sample_spike_slab(const SpikeSlabPrior& prior, Rng& rng) {
    return rng.bernoulli(prior.w) ? rng.uniform(prior.B1, prior.B2) : prior.S;
}

// Exact E[1/nu^2]: slab contributes (1/B1 - 1/B2)/(B2 - B1), spike 1/S^2.
inline double spike_slab_mean_inv_sq(const SpikeSlabPrior& prior) {
    prior.validate();
    if (prior.B1 <= 0.0 && prior.w > 0.0)
        return std::numeric_limits<double>::infinity();
    const double slab = prior.w > 0.0
                            ? (1.0 / prior.B1 - 1.0 / prior.B2) / (prior.B2 - prior.B1)
                            : 0.0;
    return prior.w * slab + (1.0 - prior.w) / (prior.S * prior.S);
}

// ---------------------------------------------------------------------------
// Marginal commensurate predictive prior and the combined MPP
// ---------------------------------------------------------------------------

// Moments (lambda_k, xi_k) of the predictive prior a source subtrial induces
// on the target effect.
struct CommensurateComponent {
    double lambda = 0.0;  // marginal mean
    double xi = 1.0;      // marginal sd, > 0
};

// Monte Carlo over (theta ~ source draws, nu ~ spike-and-slab,
// theta* ~ N(theta, 1/nu^2)).
inline CommensurateComponent marginal_cpp_moments(const PosteriorSummary& source,
                                                  const SpikeSlabPrior& prior,
                                                  std::size_t mc_draws, Rng& rng) {
    prior.validate();
    if (source.draws.size() == 0) throw InvalidStateError("marginal_cpp_moments: empty source draws");
    if (mc_draws < 100000)
        throw std::invalid_argument("marginal_cpp_moments: mc_draws must be >= 1e5");

    const auto n_source = static_cast<std::size_t>(source.draws.size());
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < mc_draws; ++i) {
        const double theta = source.draws[static_cast<Eigen::Index>(rng.index(n_source))];
        const double nu = sample_spike_slab(prior, rng);
        const double t = theta + rng.normal() / nu;
        sum += t;
        sumsq += t * t;
    }
    const auto n = static_cast<double>(mc_draws);
    CommensurateComponent c;
    c.lambda = sum / n;
    c.xi = std::sqrt(std::max(0.0, (sumsq - n * c.lambda * c.lambda) / (n - 1.0)));
    return c;
}

// Softmax over negated distances: p_k = exp(-d_k/s0) / sum exp(-d/s0).
inline Eigen::VectorXd softmax_weights(const Eigen::VectorXd& distances, double s0) {
    if (!(s0 > 0.0)) throw std::invalid_argument("softmax_weights: s0 must be positive");
    if (distances.size() == 0) throw std::invalid_argument("softmax_weights: empty distances");
    if ((distances.array() < 0.0).any() || (distances.array() > 1.0).any())
        throw std::invalid_argument("softmax_weights: distances must lie in [0,1]");
    const Eigen::ArrayXd shifted = -(distances.array() - distances.minCoeff()) / s0;
    const Eigen::ArrayXd e = shifted.exp();
    return (e / e.sum()).matrix();
}

// Weight-combined normal predictive prior for one target subtrial.
struct MppPrior {
    double mean = 0.0;
    double var = 1.0;
    Eigen::VectorXd weights;  // K-1 softmax weights
    double s0 = 0.15;

    double sd() const { return std::sqrt(var); }
};

inline MppPrior combine_mpp(const std::vector<CommensurateComponent>& components,
                            const Eigen::VectorXd& weights) {
    if (static_cast<std::size_t>(weights.size()) != components.size() || components.empty())
        throw std::invalid_argument("combine_mpp: weights and components must match and be non-empty");
    MppPrior prior;
    prior.mean = 0.0;
    prior.var = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) {
        const double p = weights[static_cast<Eigen::Index>(i)];
        prior.mean += p * components[i].lambda;
        prior.var += p * p * components[i].xi * components[i].xi;
    }
    prior.weights = weights;
    return prior;
}

}  // namespace basket
