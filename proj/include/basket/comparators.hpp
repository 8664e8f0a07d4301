#pragma once

#include <vector>

#include "basket/joint_model.hpp"
#include "basket/mcmc.hpp"
#include "basket/trial_data.hpp"

namespace basket {

struct ComparatorResult {
    std::vector<PosteriorSummary> theta;
    std::vector<double> exceed_prob;
    std::vector<bool> go;
    std::vector<double> ex_probability;  // EXNEX only
};

namespace detail {
inline void apply_decision(ComparatorResult& r, const DecisionConfig& decision) {
    decision.validate();
    for (const auto& s : r.theta) {
        const double pr = posterior_prob_exceeds(s, decision.delta_u);
        r.exceed_prob.push_back(pr);
        r.go.push_back(pr > decision.zeta);
    }
}
}  // namespace detail

// Standard hierarchical model: theta_k | mu, tau ~ N(mu, tau^2).
inline ComparatorResult analyze_standard_hm(const BasketTrialData& trial, const HmPrior& hm,
                                            const RandomEffectsPrior& re, const McmcConfig& mcmc,
                                            const DecisionConfig& decision) {
    JointModelConfig cfg;
    cfg.kind = ThetaPriorKind::Hierarchical;
    cfg.hm = hm;
    cfg.random_effects = re;
    const JointFit fit = fit_joint(trial, cfg, mcmc);
    ComparatorResult r;
    r.theta = fit.theta;
    detail::apply_decision(r, decision);
    return r;
}

// Stratified stand-alone analyses: K independent vague-prior fits, each with
// its own residual sd. Per-subtrial seed is derive_seed(mcmc.seed, k-1).
inline ComparatorResult analyze_no_borrowing(const BasketTrialData& trial, const McmcConfig& mcmc,
                                             const DecisionConfig& decision,
                                             const VaguePriorConfig& priors = {}) {
    trial.validate();
    ComparatorResult r;
    for (std::size_t k = 0; k < trial.subtrials.size(); ++k) {
        McmcConfig per = mcmc;
        per.seed = derive_seed(mcmc.seed, static_cast<std::uint64_t>(k));
        r.theta.push_back(fit_standalone(trial.subtrials[k], priors, per).theta);
    }
    detail::apply_decision(r, decision);
    return r;
}

// EXNEX: each theta_k exchangeable (N(mu, tau^2)) with prior probability
// p_ex, otherwise from its own robust N(0, nex_sd^2). Reports posterior
// membership probabilities.
inline ComparatorResult analyze_exnex(const BasketTrialData& trial, const ExnexPrior& prior,
                                      const RandomEffectsPrior& re, const McmcConfig& mcmc,
                                      const DecisionConfig& decision) {
    prior.validate();
    JointModelConfig cfg;
    cfg.kind = ThetaPriorKind::ExNex;
    cfg.hm = prior.ex;
    cfg.p_ex = prior.p_ex;
    cfg.nex_sd = prior.nex_sd;
    cfg.random_effects = re;
    const JointFit fit = fit_joint(trial, cfg, mcmc);
    ComparatorResult r;
    r.theta = fit.theta;
    r.ex_probability = fit.ex_probability;
    detail::apply_decision(r, decision);
    return r;
}

}  // namespace basket
