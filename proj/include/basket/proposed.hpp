#pragma once

#include <Eigen/Dense>
#include <vector>

#include "basket/borrowing.hpp"
#include "basket/joint_model.hpp"
#include "basket/mcmc.hpp"
#include "basket/trial_data.hpp"

namespace basket {

// Final borrowing-informed fit: joint Gibbs over all subtrials with the
// hierarchical covariate coefficients and each theta_k given its MPP prior.
inline JointFit fit_with_mpp(const BasketTrialData& trial, const std::vector<MppPrior>& mpp_priors,
                             const RandomEffectsPrior& hierarchy, const McmcConfig& mcmc) {
    if (mpp_priors.size() != static_cast<std::size_t>(trial.n_subtrials()))
        throw std::invalid_argument("fit_with_mpp: one MPP prior per subtrial required");
    JointModelConfig cfg;
    cfg.kind = ThetaPriorKind::Fixed;
    for (const auto& m : mpp_priors) {
        if (!(m.var > 0.0)) throw std::invalid_argument("fit_with_mpp: MPP variance must be positive");
        cfg.theta_priors.push_back({m.mean, m.var});
    }
    cfg.random_effects = hierarchy;
    return fit_joint(trial, cfg, mcmc);
}

struct ProposedConfig {
    SpikeSlabPrior spike_slab;          // w is per-pair; B1/B2/S taken from here
    double s0 = 0.15;
    std::size_t cpp_mc_draws = 1000000;
    VaguePriorConfig vague;
    RandomEffectsPrior random_effects;
    // Force every pairwise distance to 0 (complete-pooling limit checks).
    bool force_zero_distances = false;
};

struct ProposedResult {
    std::vector<PosteriorSummary> standalone;  // stage-1 operational posteriors
    Eigen::MatrixXd hellinger;                 // K x K, symmetric, zero diagonal
    Eigen::MatrixXd weights;                   // weights(k, kstar): weight of source k for target kstar
    std::vector<MppPrior> mpp;                 // per target subtrial
    std::vector<PosteriorSummary> theta;       // final posteriors
    std::vector<double> exceed_prob;           // P(theta_k > delta_u)
    std::vector<bool> go;
};

// End-to-end pipeline:
//   1. stand-alone fit per subtrial under vague priors
//   2. pairwise Hellinger matrix from moment-matched normal approximations
//   3. per target k*: slab weights w = d, marginal CPP moments, softmax
//      weights over the K-1 distances, combined MPP
//   4. joint fit with the MPP priors on theta
//   5. Go/No-go via the posterior exceedance probability
inline ProposedResult analyze_proposed(const BasketTrialData& trial, const ProposedConfig& cfg,
                                       const McmcConfig& mcmc, const DecisionConfig& decision) {
    trial.validate();
    decision.validate();
    const auto K = trial.n_subtrials();
    if (K < 2) throw std::invalid_argument("analyze_proposed: need at least two subtrials");

    ProposedResult result;

    // Stage 1: operational posteriors
    for (int k = 0; k < K; ++k) {
        McmcConfig stage1 = mcmc;
        stage1.seed = derive_seed(mcmc.seed, 1000 + static_cast<std::uint64_t>(k));
        result.standalone.push_back(
            fit_standalone(trial.subtrials[static_cast<std::size_t>(k)], cfg.vague, stage1).theta);
    }

    // Stage 2: pairwise discrepancies
    result.hellinger = cfg.force_zero_distances ? Eigen::MatrixXd::Zero(K, K).eval()
                                                : hellinger_matrix(result.standalone);

    // Stage 3: per-target MPP priors
    result.weights = Eigen::MatrixXd::Zero(K, K);
    for (int kstar = 0; kstar < K; ++kstar) {
        std::vector<CommensurateComponent> components;
        Eigen::VectorXd distances(K - 1);
        std::vector<int> sources;
        int idx = 0;
        for (int k = 0; k < K; ++k) {
            if (k == kstar) continue;
            const double d = result.hellinger(k, kstar);
            distances[idx++] = d;
            sources.push_back(k);
            SpikeSlabPrior pair_prior = cfg.spike_slab.with_weight(slab_weight(d));
            Rng rng(derive_seed(mcmc.seed,
                                2000 + static_cast<std::uint64_t>(kstar) * static_cast<std::uint64_t>(K) +
                                    static_cast<std::uint64_t>(k)));
            components.push_back(marginal_cpp_moments(result.standalone[static_cast<std::size_t>(k)],
                                                      pair_prior, cfg.cpp_mc_draws, rng));
        }
        const Eigen::VectorXd w = softmax_weights(distances, cfg.s0);
        MppPrior mpp = combine_mpp(components, w);
        mpp.s0 = cfg.s0;
        for (std::size_t i = 0; i < sources.size(); ++i)
            result.weights(sources[i], kstar) = w[static_cast<Eigen::Index>(i)];
        result.mpp.push_back(std::move(mpp));
    }

    // Stage 4: joint borrowing-informed fit
    McmcConfig stage4 = mcmc;
    stage4.seed = derive_seed(mcmc.seed, 4000);
    const JointFit joint = fit_with_mpp(trial, result.mpp, cfg.random_effects, stage4);
    result.theta = joint.theta;

    // Stage 5: decisions
    for (int k = 0; k < K; ++k) {
        const double pr = posterior_prob_exceeds(result.theta[static_cast<std::size_t>(k)],
                                                 decision.delta_u);
        result.exceed_prob.push_back(pr);
        result.go.push_back(pr > decision.zeta);
    }
    return result;
}

}  // namespace basket
