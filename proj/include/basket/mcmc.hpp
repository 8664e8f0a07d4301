#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "basket/errors.hpp"
#include "basket/rng.hpp"
#include "basket/trial_data.hpp"

namespace basket {

struct McmcConfig {
    int chains = 2;
    int iterations = 10000;  // post burn-in draws per chain
    int burn_in = 3000;
    int thinning = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (chains < 1 || iterations < 1 || burn_in < 0 || thinning < 1)
            throw std::invalid_argument("McmcConfig: chains/iterations >= 1, burn_in >= 0");
    }
    int kept_per_chain() const { return iterations / thinning; }
};

struct VaguePriorConfig {
    double theta_prior_sd = 10.0;  // N(0, 10^2) on the treatment effect
    double gamma_prior_sd = 5.0;   // N(0, 5^2) on each regression coefficient
    double sigma_shape = 0.01;     // inverse-gamma prior on sigma^2
    double sigma_rate = 0.01;
};

// Empirical quantile (linear interpolation on sorted values).
inline double quantile(const Eigen::VectorXd& draws, double p) {
    if (draws.size() == 0) throw InvalidStateError("quantile: empty draws");
    std::vector<double> v(draws.data(), draws.data() + draws.size());
    std::sort(v.begin(), v.end());
    const double h = p * (static_cast<double>(v.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Pooled MCMC draws of a scalar parameter plus moment and interval summaries.
struct PosteriorSummary {
    Eigen::VectorXd draws;
    double mean = 0.0;
    double sd = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    double ci_level = 0.95;

    double ci_width() const { return ci_upper - ci_lower; }

    static PosteriorSummary from_draws(Eigen::VectorXd d, double level = 0.95) {
        if (d.size() == 0) throw InvalidStateError("PosteriorSummary: empty draws");
        PosteriorSummary s;
        s.mean = d.mean();
        s.sd = d.size() > 1
                   ? std::sqrt((d.array() - s.mean).square().sum() / (static_cast<double>(d.size()) - 1.0))
                   : 0.0;
        s.ci_level = level;
        const double alpha = (1.0 - level) / 2.0;
        s.ci_lower = quantile(d, alpha);
        s.ci_upper = quantile(d, 1.0 - alpha);
        s.draws = std::move(d);
        return s;
    }
};

// Fraction of draws strictly above the threshold.
inline double posterior_prob_exceeds(const PosteriorSummary& summary, double threshold) {
    if (summary.draws.size() == 0) throw InvalidStateError("posterior_prob_exceeds: empty draws");
    const auto count = (summary.draws.array() > threshold).count();
    return static_cast<double>(count) / static_cast<double>(summary.draws.size());
}

// ---------------------------------------------------------------------------
// Generic conjugate Gibbs sampler for y = X beta + eps, eps ~ N(0, sigma^2),
// beta_j ~ N(m_j, s_j^2) independently, sigma^2 ~ InvGamma(shape, rate)
// (or fixed). Full conditional of beta is multivariate normal, sampled as a
// block via an LLT factorisation of the posterior precision.
// ---------------------------------------------------------------------------

struct LinearGibbsSpec {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd prior_mean;  // per coefficient
    Eigen::VectorXd prior_sd;    // per coefficient, > 0
    double sigma_shape = 0.01;
    double sigma_rate = 0.01;
    std::optional<double> fixed_sigma;  // skip the sigma update when set
};

struct ChainDraws {
    Eigen::MatrixXd coef;   // kept iterations x p
    Eigen::VectorXd sigma;  // kept iterations
};

inline void check_design(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (!X.allFinite() || !y.allFinite()) throw InvalidDataError("non-finite values in design or outcome");
    if (X.rows() != y.size()) throw std::invalid_argument("design rows must match outcome length");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < X.cols())
        throw SingularDesignError("design matrix is rank deficient (rank " +
                                  std::to_string(qr.rank()) + " < " + std::to_string(X.cols()) + ")");
}

inline std::vector<ChainDraws> run_linear_gibbs(const LinearGibbsSpec& spec, const McmcConfig& cfg) {
    cfg.validate();
    check_design(spec.X, spec.y);
    const auto p = spec.X.cols();
    const auto n = spec.X.rows();
    if (spec.prior_mean.size() != p || spec.prior_sd.size() != p)
        throw std::invalid_argument("prior dimensions must match coefficient count");
    if ((spec.prior_sd.array() <= 0.0).any())
        throw std::invalid_argument("prior sds must be positive");

    const Eigen::MatrixXd XtX = spec.X.transpose() * spec.X;
    const Eigen::VectorXd Xty = spec.X.transpose() * spec.y;
    const Eigen::VectorXd prior_prec = spec.prior_sd.array().square().inverse();
    const Eigen::VectorXd prior_term = prior_prec.array() * spec.prior_mean.array();

    const double y_sd = std::sqrt((spec.y.array() - spec.y.mean()).square().sum() /
                                  std::max<double>(1.0, static_cast<double>(n) - 1.0));

    std::vector<ChainDraws> chains;
    chains.reserve(static_cast<std::size_t>(cfg.chains));
    for (int c = 0; c < cfg.chains; ++c) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(c)));
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
        double sigma = spec.fixed_sigma.value_or(y_sd > 0.0 ? y_sd : 1.0);

        ChainDraws out;
        out.coef.resize(cfg.kept_per_chain(), p);
        out.sigma.resize(cfg.kept_per_chain());
        int kept = 0;

        const int total = cfg.burn_in + cfg.iterations;
        Eigen::VectorXd z(p);
        for (int it = 0; it < total; ++it) {
            const double inv_s2 = 1.0 / (sigma * sigma);
            Eigen::MatrixXd A = XtX * inv_s2;
            A.diagonal() += prior_prec;
            Eigen::LLT<Eigen::MatrixXd> llt(A);
            if (llt.info() != Eigen::Success)
                throw SingularDesignError("full-conditional precision not positive definite");
            const Eigen::VectorXd b = Xty * inv_s2 + prior_term;
            const Eigen::VectorXd mean = llt.solve(b);
            for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.normal();
            // beta = mean + L^-T z  gives covariance A^-1
            beta = mean + llt.matrixU().solve(z);

            if (!spec.fixed_sigma) {
                const double ssr = (spec.y - spec.X * beta).squaredNorm();
                const double shape = spec.sigma_shape + 0.5 * static_cast<double>(n);
                const double rate = spec.sigma_rate + 0.5 * ssr;
                const double prec = rng.gamma(shape, 1.0 / rate);
                sigma = std::sqrt(1.0 / prec);
            }

            if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thinning == 0 &&
                kept < cfg.kept_per_chain()) {
                out.coef.row(kept) = beta.transpose();
                out.sigma[kept] = sigma;
                ++kept;
            }
        }
        chains.push_back(std::move(out));
    }
    return chains;
}

// ---------------------------------------------------------------------------
// Stand-alone fit of one subtrial: design [1, Z, T], vague priors.
// ---------------------------------------------------------------------------

struct StandaloneFit {
    PosteriorSummary theta;
    std::vector<PosteriorSummary> gamma;  // intercept first
    PosteriorSummary sigma;
    std::vector<Eigen::VectorXd> theta_chains;  // per-chain draws, for diagnostics
};

inline Eigen::MatrixXd design_matrix(const SubtrialData& d) {
    const auto n = d.y.size();
    const auto q = d.covariates.cols();
    Eigen::MatrixXd X(n, q + 2);
    X.col(0).setOnes();
    X.middleCols(1, q) = d.covariates;
    for (Eigen::Index i = 0; i < n; ++i) X(i, q + 1) = d.treatment[i];
    return X;
}

inline StandaloneFit fit_standalone(const SubtrialData& data, const VaguePriorConfig& priors,
                                    const McmcConfig& cfg) {
    data.validate();
    const auto q = data.covariates.cols();
    LinearGibbsSpec spec;
    spec.X = design_matrix(data);
    spec.y = data.y;
    spec.prior_mean = Eigen::VectorXd::Zero(q + 2);
    spec.prior_sd.resize(q + 2);
    spec.prior_sd.head(q + 1).setConstant(priors.gamma_prior_sd);
    spec.prior_sd[q + 1] = priors.theta_prior_sd;
    spec.sigma_shape = priors.sigma_shape;
    spec.sigma_rate = priors.sigma_rate;

    const auto chains = run_linear_gibbs(spec, cfg);
    const auto kept = chains.front().coef.rows();
    const auto n_chains = static_cast<Eigen::Index>(chains.size());

    StandaloneFit fit;
    auto pool = [&](auto getter) {
        Eigen::VectorXd pooled(n_chains * kept);
        for (Eigen::Index c = 0; c < n_chains; ++c)
            pooled.segment(c * kept, kept) = getter(chains[static_cast<std::size_t>(c)]);
        return pooled;
    };
    const Eigen::Index theta_col = q + 1;
    fit.theta = PosteriorSummary::from_draws(
        pool([&](const ChainDraws& c) { return c.coef.col(theta_col).eval(); }));
    for (Eigen::Index j = 0; j <= q; ++j)
        fit.gamma.push_back(PosteriorSummary::from_draws(
            pool([&](const ChainDraws& c) { return c.coef.col(j).eval(); })));
    fit.sigma = PosteriorSummary::from_draws(pool([](const ChainDraws& c) { return c.sigma; }));
    for (const auto& c : chains) fit.theta_chains.push_back(c.coef.col(theta_col));
    return fit;
}

// ---------------------------------------------------------------------------
// Convergence diagnostics: split-Rhat and effective sample size.
// ---------------------------------------------------------------------------

struct Diagnostics {
    double rhat = 1.0;
    double ess = 0.0;
    bool flagged = false;  // rhat > 1.05
};

inline Diagnostics diagnostics(const std::vector<Eigen::VectorXd>& chains) {
    if (chains.size() < 2)
        throw InvalidStateError("diagnostics: need at least 2 chains");

    // Split each chain in half.
    std::vector<Eigen::VectorXd> splits;
    for (const auto& c : chains) {
        const auto half = c.size() / 2;
        if (half < 2) throw InvalidStateError("diagnostics: chains too short to split");
        splits.push_back(c.head(half));
        splits.push_back(c.tail(half));
    }
    const auto m = static_cast<double>(splits.size());
    const auto n = static_cast<double>(splits.front().size());

    Eigen::VectorXd means(splits.size()), vars(splits.size());
    for (std::size_t i = 0; i < splits.size(); ++i) {
        means[static_cast<Eigen::Index>(i)] = splits[i].mean();
        vars[static_cast<Eigen::Index>(i)] =
            (splits[i].array() - splits[i].mean()).square().sum() / (n - 1.0);
    }
    const double grand = means.mean();
    const double B = n / (m - 1.0) * (means.array() - grand).square().sum();
    const double W = vars.mean();

    Diagnostics d;
    if (W <= 0.0) {
        d.rhat = B > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    } else {
        const double var_plus = (n - 1.0) / n * W + B / n;
        d.rhat = std::max(1.0, std::sqrt(var_plus / W));
    }
    d.flagged = d.rhat > 1.05;

    // ESS via pooled autocorrelation with Geyer initial-positive truncation.
    const double var_plus = W > 0.0 ? (n - 1.0) / n * W + B / n : 0.0;
    if (var_plus > 0.0) {
        const auto max_lag = std::min<Eigen::Index>(static_cast<Eigen::Index>(n) - 1, 500);
        double rho_sum = 0.0;
        for (Eigen::Index t = 1; t < max_lag; ++t) {
            double acov = 0.0;
            for (std::size_t i = 0; i < splits.size(); ++i) {
                const auto& s = splits[i];
                const double mu = means[static_cast<Eigen::Index>(i)];
                double a = 0.0;
                for (Eigen::Index j = 0; j + t < s.size(); ++j)
                    a += (s[j] - mu) * (s[j + t] - mu);
                acov += a / n;
            }
            acov /= m;
            const double rho = 1.0 - (W - acov) / var_plus;
            if (rho < 0.0) break;
            rho_sum += rho;
        }
        d.ess = m * n / (1.0 + 2.0 * rho_sum);
    } else {
        d.ess = m * n;
    }
    return d;
}

}  // namespace basket
