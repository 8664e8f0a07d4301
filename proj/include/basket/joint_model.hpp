#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "basket/errors.hpp"
#include "basket/mcmc.hpp"
#include "basket/rng.hpp"
#include "basket/trial_data.hpp"

namespace basket {

// Go iff P(theta_k > delta_u) > zeta.
struct DecisionConfig {
    double delta_u = 0.25;
    double zeta = 0.975;

    void validate() const {
        if (!(zeta >= 0.0 && zeta <= 1.0))
            throw std::invalid_argument("DecisionConfig: zeta must lie in [0,1]");
    }
};

// Random effects gamma_jk ~ N(chi_j, epsilon_j^2), chi_j ~ N(0, chi_prior_sd^2),
// epsilon_j ~ HN(epsilon_scale). With enabled=false the covariate coefficients
// get independent N(0, fixed_gamma_sd^2) priors instead.
struct RandomEffectsPrior {
    double chi_prior_sd = 5.0;
    double epsilon_scale = 1.0;
    bool enabled = true;
    double fixed_gamma_sd = 5.0;

    void validate() const {
        if (!(chi_prior_sd > 0.0) || !(epsilon_scale > 0.0) || !(fixed_gamma_sd > 0.0))
            throw std::invalid_argument("RandomEffectsPrior: scales must be positive");
    }
};

// Exchangeable layer theta_k ~ N(mu, tau^2), mu ~ N(0, mu_prior_sd^2),
// tau ~ HN(tau_scale). fixed_tau pins tau (no update) when set.
struct HmPrior {
    double mu_prior_sd = 10.0;
    double tau_scale = 0.125;
    std::optional<double> fixed_tau;

    void validate() const {
        if (!(mu_prior_sd > 0.0) || !(tau_scale > 0.0))
            throw std::invalid_argument("HmPrior: scales must be positive");
    }
};

struct ExnexPrior {
    double p_ex = 0.5;
    HmPrior ex;
    double nex_sd = 10.0;

    void validate() const {
        if (!(p_ex >= 0.0 && p_ex <= 1.0))
            throw std::invalid_argument("ExnexPrior: p_ex must lie in [0,1]");
        ex.validate();
        if (!(nex_sd > 0.0)) throw std::invalid_argument("ExnexPrior: nex_sd must be positive");
    }
};

// Half-normal prior median multiplier: qnorm(0.75).
inline constexpr double kHalfNormalMedian = 0.674489750196082;

// One random-walk Metropolis step on log(scale) targeting
//   HN(scale; hn_scale) * prod_k N(resid_k; 0, scale^2),
// where the residuals enter through their count and sum of squares.
// Prior-only runs use n_resid = 0, resid_ss = 0.
inline double half_normal_scale_mh_step(double current, double step, double hn_scale,
                                        double n_resid, double resid_ss, Rng& rng,
                                        bool* accepted = nullptr) {
    auto log_target = [&](double x) {
        return -x * x / (2.0 * hn_scale * hn_scale) - n_resid * std::log(x) -
               resid_ss / (2.0 * x * x);
    };
    const double proposal = current * std::exp(step * rng.normal());
    const double log_alpha = log_target(proposal) - log_target(current) +
                             std::log(proposal) - std::log(current);
    const bool accept = std::log(rng.uniform()) < log_alpha;
    if (accepted) *accepted = accept;
    return accept ? proposal : current;
}

// ---------------------------------------------------------------------------
// Joint Gibbs sampler over all K subtrials with a shared residual sd and a
// per-model prior scheme on the treatment effects:
//   Fixed        — theta_k ~ N(m_k, v_k) given (MPP priors, or vague)
//   Hierarchical — theta_k ~ N(mu, tau^2) (standard HM)
//   ExNex        — mixture of the two with latent membership indicators
// ---------------------------------------------------------------------------

enum class ThetaPriorKind { Fixed, Hierarchical, ExNex };

struct GaussianPrior {
    double mean = 0.0;
    double var = 100.0;
};

struct JointModelConfig {
    ThetaPriorKind kind = ThetaPriorKind::Fixed;
    std::vector<GaussianPrior> theta_priors;  // Fixed: one per subtrial
    HmPrior hm;                               // Hierarchical, and the EX part of ExNex
    double p_ex = 0.5;                        // ExNex
    double nex_sd = 10.0;                     // ExNex
    RandomEffectsPrior random_effects;
    double sigma_shape = 0.01;
    double sigma_rate = 0.01;
    double mh_step = 0.5;  // log-scale random-walk step for tau and epsilon_j
};

struct JointFit {
    std::vector<PosteriorSummary> theta;              // per subtrial
    PosteriorSummary sigma;
    std::vector<double> ex_probability;               // ExNex only
    std::vector<std::vector<Eigen::VectorXd>> theta_chains;  // [subtrial][chain]
};

namespace detail {

inline double log_normal_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * std::log(2.0 * M_PI * var) - d * d / (2.0 * var);
}

struct SubtrialWork {
    Eigen::MatrixXd X;    // [1, Z, T]
    Eigen::MatrixXd XtX;
    Eigen::VectorXd Xty;
    Eigen::VectorXd y;
};

}  // namespace detail

inline JointFit fit_joint(const BasketTrialData& trial, const JointModelConfig& cfg,
                          const McmcConfig& mcmc) {
    trial.validate();
    mcmc.validate();
    cfg.random_effects.validate();
    cfg.hm.validate();
    const auto K = trial.n_subtrials();
    if (K < 1) throw std::invalid_argument("fit_joint: need at least one subtrial");
    const auto q = trial.subtrials.front().covariates.cols();
    for (const auto& s : trial.subtrials)
        if (s.covariates.cols() != q)
            throw std::invalid_argument("fit_joint: subtrials must share the covariate count");
    if (cfg.kind == ThetaPriorKind::Fixed &&
        cfg.theta_priors.size() != static_cast<std::size_t>(K))
        throw std::invalid_argument("fit_joint: one fixed theta prior per subtrial required");

    const Eigen::Index p = q + 2;  // intercept, covariates, treatment
    const Eigen::Index n_gamma = q + 1;
    std::vector<detail::SubtrialWork> work;
    double n_total = 0.0, pooled_mean = 0.0;
    for (const auto& s : trial.subtrials) {
        detail::SubtrialWork w;
        w.X = design_matrix(s);
        check_design(w.X, s.y);
        w.XtX = w.X.transpose() * w.X;
        w.Xty = w.X.transpose() * s.y;
        w.y = s.y;
        n_total += static_cast<double>(s.y.size());
        pooled_mean += s.y.sum();
        work.push_back(std::move(w));
    }
    pooled_mean /= n_total;
    double pooled_ss = 0.0;
    for (const auto& s : trial.subtrials) pooled_ss += (s.y.array() - pooled_mean).square().sum();
    const double init_sigma = std::sqrt(pooled_ss / std::max(1.0, n_total - 1.0));

    const int kept = mcmc.kept_per_chain();
    JointFit fit;
    fit.theta_chains.assign(static_cast<std::size_t>(K), {});

    std::vector<Eigen::MatrixXd> theta_store(static_cast<std::size_t>(mcmc.chains));
    std::vector<Eigen::VectorXd> sigma_store(static_cast<std::size_t>(mcmc.chains));
    std::vector<Eigen::VectorXd> ex_sums(static_cast<std::size_t>(mcmc.chains));

    for (int chain = 0; chain < mcmc.chains; ++chain) {
        Rng rng(derive_seed(mcmc.seed, static_cast<std::uint64_t>(chain)));

        // State
        Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(K, n_gamma);
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(K);
        Eigen::VectorXd chi = Eigen::VectorXd::Zero(n_gamma);
        Eigen::VectorXd eps =
            Eigen::VectorXd::Constant(n_gamma, cfg.random_effects.epsilon_scale * kHalfNormalMedian);
        double mu = 0.0;
        double tau = cfg.hm.fixed_tau.value_or(cfg.hm.tau_scale * kHalfNormalMedian);
        double sigma = init_sigma > 0.0 ? init_sigma : 1.0;
        std::vector<int> ex_member(static_cast<std::size_t>(K), 1);

        Eigen::MatrixXd& th_out = theta_store[static_cast<std::size_t>(chain)];
        th_out.resize(kept, K);
        Eigen::VectorXd& sg_out = sigma_store[static_cast<std::size_t>(chain)];
        sg_out.resize(kept);
        Eigen::VectorXd& ex_out = ex_sums[static_cast<std::size_t>(chain)];
        ex_out = Eigen::VectorXd::Zero(K);

        int kept_count = 0;
        const int total = mcmc.burn_in + mcmc.iterations;
        Eigen::VectorXd z(p), prior_prec(p), prior_term(p);
        for (int it = 0; it < total; ++it) {
            const double inv_s2 = 1.0 / (sigma * sigma);

            // Per-subtrial coefficient block (gamma_k, theta_k)
            for (int k = 0; k < K; ++k) {
                for (Eigen::Index j = 0; j < n_gamma; ++j) {
                    if (cfg.random_effects.enabled) {
                        const double v = eps[j] * eps[j];
                        prior_prec[j] = 1.0 / v;
                        prior_term[j] = chi[j] / v;
                    } else {
                        const double v =
                            cfg.random_effects.fixed_gamma_sd * cfg.random_effects.fixed_gamma_sd;
                        prior_prec[j] = 1.0 / v;
                        prior_term[j] = 0.0;
                    }
                }
                double tm = 0.0, tv = 100.0;
                switch (cfg.kind) {
                    case ThetaPriorKind::Fixed: {
                        const auto& g = cfg.theta_priors[static_cast<std::size_t>(k)];
                        tm = g.mean;
                        tv = g.var;
                        break;
                    }
                    case ThetaPriorKind::Hierarchical:
                        tm = mu;
                        tv = tau * tau;
                        break;
                    case ThetaPriorKind::ExNex:
                        if (ex_member[static_cast<std::size_t>(k)]) {
                            tm = mu;
                            tv = tau * tau;
                        } else {
                            tm = 0.0;
                            tv = cfg.nex_sd * cfg.nex_sd;
                        }
                        break;
                }
                prior_prec[p - 1] = 1.0 / tv;
                prior_term[p - 1] = tm / tv;

                const auto& w = work[static_cast<std::size_t>(k)];
                Eigen::MatrixXd A = w.XtX * inv_s2;
                A.diagonal() += prior_prec;
                Eigen::LLT<Eigen::MatrixXd> llt(A);
                if (llt.info() != Eigen::Success)
                    throw SingularDesignError("fit_joint: block precision not positive definite");
                const Eigen::VectorXd b = w.Xty * inv_s2 + prior_term;
                const Eigen::VectorXd mean = llt.solve(b);
                for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.normal();
                const Eigen::VectorXd beta = mean + llt.matrixU().solve(z);
                gamma.row(k) = beta.head(n_gamma).transpose();
                theta[k] = beta[p - 1];
            }

            // Covariate hierarchy
            if (cfg.random_effects.enabled) {
                for (Eigen::Index j = 0; j < n_gamma; ++j) {
                    const double ev = eps[j] * eps[j];
                    const double prec =
                        static_cast<double>(K) / ev +
                        1.0 / (cfg.random_effects.chi_prior_sd * cfg.random_effects.chi_prior_sd);
                    const double m = (gamma.col(j).sum() / ev) / prec;
                    chi[j] = rng.normal(m, std::sqrt(1.0 / prec));

                    const double ss = (gamma.col(j).array() - chi[j]).square().sum();
                    eps[j] = half_normal_scale_mh_step(eps[j], cfg.mh_step,
                                                       cfg.random_effects.epsilon_scale,
                                                       static_cast<double>(K), ss, rng);
                }
            }

            // Exchangeable layer
            if (cfg.kind != ThetaPriorKind::Fixed) {
                double n_ex = 0.0, sum_ex = 0.0;
                for (int k = 0; k < K; ++k) {
                    const bool in = cfg.kind == ThetaPriorKind::Hierarchical ||
                                    ex_member[static_cast<std::size_t>(k)];
                    if (in) {
                        n_ex += 1.0;
                        sum_ex += theta[k];
                    }
                }
                const double mu_prior_prec = 1.0 / (cfg.hm.mu_prior_sd * cfg.hm.mu_prior_sd);
                const double t2 = tau * tau;
                const double prec = n_ex / t2 + mu_prior_prec;
                mu = rng.normal((sum_ex / t2) / prec, std::sqrt(1.0 / prec));

                if (!cfg.hm.fixed_tau) {
                    double ss = 0.0;
                    for (int k = 0; k < K; ++k) {
                        const bool in = cfg.kind == ThetaPriorKind::Hierarchical ||
                                        ex_member[static_cast<std::size_t>(k)];
                        if (in) ss += (theta[k] - mu) * (theta[k] - mu);
                    }
                    tau = half_normal_scale_mh_step(tau, cfg.mh_step, cfg.hm.tau_scale, n_ex, ss, rng);
                }

                if (cfg.kind == ThetaPriorKind::ExNex) {
                    for (int k = 0; k < K; ++k) {
                        const double log_ex = std::log(std::max(cfg.p_ex, 1e-300)) +
                                              detail::log_normal_pdf(theta[k], mu, tau * tau);
                        const double log_nex = std::log(std::max(1.0 - cfg.p_ex, 1e-300)) +
                                               detail::log_normal_pdf(theta[k], 0.0,
                                                                      cfg.nex_sd * cfg.nex_sd);
                        const double m = std::max(log_ex, log_nex);
                        const double pe = std::exp(log_ex - m) /
                                          (std::exp(log_ex - m) + std::exp(log_nex - m));
                        ex_member[static_cast<std::size_t>(k)] = rng.bernoulli(pe) ? 1 : 0;
                    }
                }
            }

            // Shared residual sd
            {
                double ssr = 0.0;
                for (int k = 0; k < K; ++k) {
                    const auto& w = work[static_cast<std::size_t>(k)];
                    Eigen::VectorXd beta(p);
                    beta.head(n_gamma) = gamma.row(k).transpose();
                    beta[p - 1] = theta[k];
                    ssr += (w.y - w.X * beta).squaredNorm();
                }
                const double shape = cfg.sigma_shape + 0.5 * n_total;
                const double rate = cfg.sigma_rate + 0.5 * ssr;
                sigma = std::sqrt(1.0 / rng.gamma(shape, 1.0 / rate));
            }

            if (it >= mcmc.burn_in && (it - mcmc.burn_in) % mcmc.thinning == 0 &&
                kept_count < kept) {
                th_out.row(kept_count) = theta.transpose();
                sg_out[kept_count] = sigma;
                for (int k = 0; k < K; ++k)
                    ex_out[k] += static_cast<double>(ex_member[static_cast<std::size_t>(k)]);
                ++kept_count;
            }
        }
    }

    // Pool across chains
    const auto n_chains = static_cast<Eigen::Index>(mcmc.chains);
    for (int k = 0; k < K; ++k) {
        Eigen::VectorXd pooled(n_chains * kept);
        for (Eigen::Index c = 0; c < n_chains; ++c) {
            pooled.segment(c * kept, kept) = theta_store[static_cast<std::size_t>(c)].col(k);
            fit.theta_chains[static_cast<std::size_t>(k)].push_back(
                theta_store[static_cast<std::size_t>(c)].col(k));
        }
        fit.theta.push_back(PosteriorSummary::from_draws(std::move(pooled)));
    }
    {
        Eigen::VectorXd pooled(n_chains * kept);
        for (Eigen::Index c = 0; c < n_chains; ++c)
            pooled.segment(c * kept, kept) = sigma_store[static_cast<std::size_t>(c)];
        fit.sigma = PosteriorSummary::from_draws(std::move(pooled));
    }
    if (cfg.kind == ThetaPriorKind::ExNex) {
        fit.ex_probability.assign(static_cast<std::size_t>(K), 0.0);
        for (int k = 0; k < K; ++k) {
            double total_ex = 0.0;
            for (Eigen::Index c = 0; c < n_chains; ++c)
                total_ex += ex_sums[static_cast<std::size_t>(c)][k];
            fit.ex_probability[static_cast<std::size_t>(k)] =
                total_ex / static_cast<double>(n_chains * kept);
        }
    }
    return fit;
}

}  // namespace basket
