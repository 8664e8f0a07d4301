#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <string>
#include <thread>
#include <vector>

#include "basket/comparators.hpp"
#include "basket/proposed.hpp"
#include "basket/trial_data.hpp"

namespace basket {

enum class ModelKind { Proposed, StandardHm, NoBorrowing, Exnex };

inline ModelKind model_from_name(const std::string& name) {
    if (name == "proposed") return ModelKind::Proposed;
    if (name == "hm") return ModelKind::StandardHm;
    if (name == "none") return ModelKind::NoBorrowing;
    if (name == "exnex") return ModelKind::Exnex;
    throw std::invalid_argument("unknown model: " + name +
                                " (expected proposed, hm, none or exnex)");
}

inline std::string model_name(ModelKind m) {
    switch (m) {
        case ModelKind::Proposed: return "proposed";
        case ModelKind::StandardHm: return "hm";
        case ModelKind::NoBorrowing: return "none";
        case ModelKind::Exnex: return "exnex";
    }
    return "?";
}

struct StudyConfig {
    Scenario scenario;
    ModelKind model = ModelKind::NoBorrowing;
    int replicates = 1000;
    // Desk-scale MCMC defaults; the full-budget run is
    // {2 chains, 10000 iterations, 3000 burn-in}.
    McmcConfig mcmc{2, 4000, 1000, 1, 0};
    DecisionConfig decision;
    std::vector<double> delta_grid{0.25, 0.30};  // exceedance probabilities stored per replicate
    double s0 = 0.15;
    SpikeSlabPrior spike_slab;
    std::size_t cpp_mc_draws = 100000;
    HmPrior hm;
    ExnexPrior exnex;
    RandomEffectsPrior random_effects;
    VaguePriorConfig vague;
    std::uint64_t master_seed = 0;
    int threads = static_cast<int>(std::thread::hardware_concurrency());

    void validate() const {
        scenario.validate();
        mcmc.validate();
        decision.validate();
        if (replicates < 1) throw std::invalid_argument("StudyConfig: replicates must be >= 1");
        if (delta_grid.empty()) throw std::invalid_argument("StudyConfig: delta grid must be non-empty");
    }
};

// Per-replicate record; exceedance probabilities are kept for every delta in
// the grid so zeta and delta sweeps re-aggregate without refitting.
struct ReplicateResult {
    bool failed = false;
    std::string failure;
    Eigen::VectorXd post_mean;  // K
    Eigen::VectorXd ci_width;   // K
    Eigen::MatrixXd exceed;     // K x |delta_grid|
};

inline ReplicateResult run_replicate(const Scenario& scenario, ModelKind model,
                                     const StudyConfig& cfg, std::uint64_t replicate_seed) {
    const int K = scenario.n_subtrials();
    ReplicateResult r;
    r.post_mean.resize(K);
    r.ci_width.resize(K);
    r.exceed.resize(K, static_cast<Eigen::Index>(cfg.delta_grid.size()));
    try {
        Rng data_rng(derive_seed(replicate_seed, 0));
        const BasketTrialData trial = generate_trial(scenario, data_rng);
        McmcConfig mcmc = cfg.mcmc;
        mcmc.seed = derive_seed(replicate_seed, 1);

        std::vector<PosteriorSummary> theta;
        switch (model) {
            case ModelKind::Proposed: {
                ProposedConfig pc;
                pc.spike_slab = cfg.spike_slab;
                pc.s0 = cfg.s0;
                pc.cpp_mc_draws = cfg.cpp_mc_draws;
                pc.vague = cfg.vague;
                pc.random_effects = cfg.random_effects;
                theta = analyze_proposed(trial, pc, mcmc, cfg.decision).theta;
                break;
            }
            case ModelKind::StandardHm:
                theta = analyze_standard_hm(trial, cfg.hm, cfg.random_effects, mcmc, cfg.decision).theta;
                break;
            case ModelKind::NoBorrowing: {
                VaguePriorConfig vp = cfg.vague;
                theta = analyze_no_borrowing(trial, mcmc, cfg.decision, vp).theta;
                break;
            }
            case ModelKind::Exnex:
                theta = analyze_exnex(trial, cfg.exnex, cfg.random_effects, mcmc, cfg.decision).theta;
                break;
        }
        for (int k = 0; k < K; ++k) {
            const auto& s = theta[static_cast<std::size_t>(k)];
            r.post_mean[k] = s.mean;
            r.ci_width[k] = s.ci_width();
            for (std::size_t d = 0; d < cfg.delta_grid.size(); ++d)
                r.exceed(k, static_cast<Eigen::Index>(d)) =
                    posterior_prob_exceeds(s, cfg.delta_grid[d]);
        }
    } catch (const SingularDesignError& e) {
        r.failed = true;
        r.failure = e.what();
    }
    return r;
}

// Bias ~ mean(estimate) - truth; MSE ~ mean((estimate - truth)^2).
inline std::pair<double, double> bias_mse(const Eigen::VectorXd& estimates, double theta_true) {
    if (estimates.size() == 0) throw std::invalid_argument("bias_mse: empty estimates");
    const double bias = estimates.mean() - theta_true;
    const double mse = (estimates.array() - theta_true).square().mean();
    return {bias, mse};
}

struct DecisionRates {
    Eigen::VectorXd go_rate;            // per subtrial
    std::vector<bool> is_null;          // theta_true == 0 per subtrial
    double overall_erroneous_go = 0.0;  // fraction of replicates with >= 1 Go among null subtrials
};

// decisions: M x K Go flags (nonzero = Go).
inline DecisionRates decision_rates(const Eigen::MatrixXi& decisions,
                                    const Eigen::VectorXd& theta_true) {
    const auto M = decisions.rows();
    const auto K = decisions.cols();
    if (K != theta_true.size() || M == 0)
        throw std::invalid_argument("decision_rates: decisions must be M x K with K = len(theta)");
    DecisionRates r;
    r.go_rate = decisions.cast<double>().colwise().mean();
    for (Eigen::Index k = 0; k < K; ++k) r.is_null.push_back(theta_true[k] == 0.0);
    int erroneous = 0;
    for (Eigen::Index m = 0; m < M; ++m) {
        for (Eigen::Index k = 0; k < K; ++k) {
            if (r.is_null[static_cast<std::size_t>(k)] && decisions(m, k) != 0) {
                ++erroneous;
                break;
            }
        }
    }
    r.overall_erroneous_go = static_cast<double>(erroneous) / static_cast<double>(M);
    return r;
}

struct OperatingCharacteristics {
    Eigen::VectorXd bias;           // per subtrial
    Eigen::VectorXd mse;
    Eigen::VectorXd mean_ci_width;
    Eigen::VectorXd go_rate;
    std::vector<bool> is_null;
    double overall_erroneous_go = 0.0;
    int n_used = 0;
    int n_failed = 0;
};

// Re-aggregate stored replicates under a (possibly different) decision rule.
// decision.delta_u must be one of the deltas the replicates were stored with.
inline OperatingCharacteristics aggregate(const std::vector<ReplicateResult>& replicates,
                                          const Scenario& scenario,
                                          const std::vector<double>& delta_grid,
                                          const DecisionConfig& decision) {
    decision.validate();
    Eigen::Index delta_idx = -1;
    for (std::size_t d = 0; d < delta_grid.size(); ++d)
        if (delta_grid[d] == decision.delta_u) delta_idx = static_cast<Eigen::Index>(d);
    if (delta_idx < 0)
        throw std::invalid_argument("aggregate: delta_u not in the stored delta grid");

    const int K = scenario.n_subtrials();
    std::vector<const ReplicateResult*> ok;
    int failed = 0;
    for (const auto& r : replicates) {
        if (r.failed) ++failed;
        else ok.push_back(&r);
    }
    if (ok.empty()) throw InvalidStateError("aggregate: every replicate failed");

    const auto M = static_cast<Eigen::Index>(ok.size());
    Eigen::MatrixXd means(M, K), widths(M, K);
    Eigen::MatrixXi go(M, K);
    for (Eigen::Index m = 0; m < M; ++m) {
        means.row(m) = ok[static_cast<std::size_t>(m)]->post_mean.transpose();
        widths.row(m) = ok[static_cast<std::size_t>(m)]->ci_width.transpose();
        for (int k = 0; k < K; ++k)
            go(m, k) =
                ok[static_cast<std::size_t>(m)]->exceed(k, delta_idx) > decision.zeta ? 1 : 0;
    }

    OperatingCharacteristics oc;
    oc.bias.resize(K);
    oc.mse.resize(K);
    for (int k = 0; k < K; ++k) {
        auto [b, m2] = bias_mse(means.col(k), scenario.theta_true[k]);
        oc.bias[k] = b;
        oc.mse[k] = m2;
    }
    oc.mean_ci_width = widths.colwise().mean();
    const DecisionRates rates = decision_rates(go, scenario.theta_true);
    oc.go_rate = rates.go_rate;
    oc.is_null = rates.is_null;
    oc.overall_erroneous_go = rates.overall_erroneous_go;
    oc.n_used = static_cast<int>(M);
    oc.n_failed = failed;
    return oc;
}

struct StudyResult {
    OperatingCharacteristics oc;
    std::vector<ReplicateResult> replicates;
};

// Replicates are embarrassingly parallel; each owns an RNG seeded from
// (master_seed, replicate index), so results do not depend on the thread
// count or execution order.
inline StudyResult run_study(const StudyConfig& cfg) {
    cfg.validate();
    std::vector<double> grid = cfg.delta_grid;
    if (std::find(grid.begin(), grid.end(), cfg.decision.delta_u) == grid.end())
        grid.push_back(cfg.decision.delta_u);

    StudyConfig effective = cfg;
    effective.delta_grid = grid;

    std::vector<ReplicateResult> results(static_cast<std::size_t>(cfg.replicates));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int m = next.fetch_add(1);
            if (m >= cfg.replicates) break;
            results[static_cast<std::size_t>(m)] =
                run_replicate(cfg.scenario, cfg.model, effective,
                              derive_seed(cfg.master_seed, static_cast<std::uint64_t>(m)));
        }
    };
    const int n_threads = std::max(1, std::min(cfg.threads, cfg.replicates));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    StudyResult out;
    out.oc = aggregate(results, cfg.scenario, grid, cfg.decision);
    out.replicates = std::move(results);
    return out;
}

}  // namespace basket
