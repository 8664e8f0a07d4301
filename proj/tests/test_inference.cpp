#include <catch2/catch_amalgamated.hpp>

#include "basket/mcmc.hpp"
#include "basket/trial_data.hpp"

using namespace basket;

namespace {

// Intercept-only model with known sigma: the exact normal-normal posterior
// is available in closed form.
LinearGibbsSpec intercept_only_spec(int n, double ybar, double sigma, double prior_sd) {
    LinearGibbsSpec spec;
    spec.X = Eigen::MatrixXd::Ones(n, 1);
    spec.y = Eigen::VectorXd::Constant(n, ybar);
    spec.prior_mean = Eigen::VectorXd::Zero(1);
    spec.prior_sd = Eigen::VectorXd::Constant(1, prior_sd);
    spec.fixed_sigma = sigma;
    return spec;
}

Eigen::VectorXd pooled_coef(const std::vector<ChainDraws>& chains, Eigen::Index col,
                            Eigen::VectorXd* out = nullptr) {
    const auto kept = chains.front().coef.rows();
    Eigen::VectorXd pooled(static_cast<Eigen::Index>(chains.size()) * kept);
    for (std::size_t c = 0; c < chains.size(); ++c)
        pooled.segment(static_cast<Eigen::Index>(c) * kept, kept) = chains[c].coef.col(col);
    if (out) *out = pooled;
    return pooled;
}

}  // namespace

TEST_CASE("conjugate oracle: known-sigma intercept model") {
    // n=25, ybar=2, sigma=1, prior N(0,10^2):
    //   posterior mean = 25*2 / (25 + 1/100), sd = 1/sqrt(25.01)
    const double post_mean = 50.0 / 25.01;
    const double post_sd = 1.0 / std::sqrt(25.01);
    REQUIRE_THAT(post_mean, Catch::Matchers::WithinAbs(1.9992, 1e-4));
    REQUIRE_THAT(post_sd, Catch::Matchers::WithinAbs(0.19996, 1e-5));

    McmcConfig cfg{2, 10000, 1000, 1, 31};
    const auto chains = run_linear_gibbs(intercept_only_spec(25, 2.0, 1.0, 10.0), cfg);
    const auto draws = pooled_coef(chains, 0);
    const auto s = PosteriorSummary::from_draws(draws);

    const double mc_se = post_sd / std::sqrt(static_cast<double>(draws.size()));
    REQUIRE(std::abs(s.mean - post_mean) < 3.0 * mc_se);
    // sd of the sample sd is approximately sd / sqrt(2(n-1))
    REQUIRE(std::abs(s.sd - post_sd) < 3.0 * post_sd / std::sqrt(2.0 * (draws.size() - 1.0)));
}

TEST_CASE("large-n consistency of the stand-alone fit") {
    Scenario sc = scenario_by_name("S5");
    sc.sample_sizes = {10000, 10, 10, 10, 10, 10};
    Rng rng(3);
    const auto data = generate_subtrial(sc, 1, rng);
    const auto fit = fit_standalone(data, {}, McmcConfig{2, 2000, 500, 1, 17});
    REQUIRE(std::abs(fit.theta.mean - 0.45) < 3.0 * fit.theta.sd);
}

TEST_CASE("OLS limit: flat priors recover least squares") {
    const auto& sc = scenario_by_name("S2");
    Rng rng(21);
    const auto data = generate_subtrial(sc, 5, rng);  // n=20
    const Eigen::MatrixXd X = design_matrix(data);
    const Eigen::VectorXd ols = (X.transpose() * X).ldlt().solve(X.transpose() * data.y);

    VaguePriorConfig flat;
    flat.theta_prior_sd = 1e6;
    flat.gamma_prior_sd = 1e6;
    const auto fit = fit_standalone(data, flat, McmcConfig{2, 10000, 2000, 1, 5});
    REQUIRE(std::abs(fit.theta.mean - ols[3]) <
            3.0 * fit.theta.sd / std::sqrt(static_cast<double>(fit.theta.draws.size()) / 20.0));
    for (int j = 0; j < 3; ++j)
        REQUIRE(std::abs(fit.gamma[static_cast<std::size_t>(j)].mean - ols[j]) <
                0.05 * std::max(1.0, std::abs(ols[j])));
}

TEST_CASE("determinism: identical config gives identical draws") {
    const auto& sc = scenario_by_name("S1");
    Rng rng(8);
    const auto data = generate_subtrial(sc, 3, rng);
    const McmcConfig cfg{2, 500, 100, 1, 99};
    const auto a = fit_standalone(data, {}, cfg);
    const auto b = fit_standalone(data, {}, cfg);
    REQUIRE(a.theta.draws == b.theta.draws);
    REQUIRE(a.sigma.draws == b.sigma.draws);
}

TEST_CASE("singular design and invalid data are rejected") {
    SubtrialData d;
    d.index = 1;
    d.y = Eigen::VectorXd::Random(10);
    d.covariates = Eigen::MatrixXd::Ones(10, 2);  // collinear with the intercept
    d.treatment = Eigen::VectorXi::Zero(10);
    for (int i = 0; i < 5; ++i) d.treatment[i] = 1;
    REQUIRE_THROWS_AS(fit_standalone(d, {}, McmcConfig{1, 10, 0, 1, 0}), SingularDesignError);

    LinearGibbsSpec spec = intercept_only_spec(5, 1.0, 1.0, 1.0);
    spec.y[2] = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(run_linear_gibbs(spec, McmcConfig{1, 10, 0, 1, 0}), InvalidDataError);
}

TEST_CASE("posterior_prob_exceeds counts strictly-greater draws") {
    Eigen::VectorXd draws(10000);
    for (int i = 0; i < 10000; ++i) draws[i] = (i < 9800) ? 1.0 : -1.0;
    const auto s = PosteriorSummary::from_draws(draws);
    REQUIRE(posterior_prob_exceeds(s, 0.0) == 0.98);
    REQUIRE(posterior_prob_exceeds(s, 2.0) == 0.0);
    REQUIRE(posterior_prob_exceeds(s, -1e9) == 1.0);

    PosteriorSummary empty;
    REQUIRE_THROWS_AS(posterior_prob_exceeds(empty, 0.0), InvalidStateError);
}

TEST_CASE("posterior_prob_exceeds is nonincreasing in the threshold") {
    Rng rng(4);
    Eigen::VectorXd draws(5000);
    for (Eigen::Index i = 0; i < draws.size(); ++i) draws[i] = rng.normal(0.3, 1.2);
    const auto s = PosteriorSummary::from_draws(draws);
    double prev = 1.0;
    for (double t = -3.0; t < 3.0; t += 0.1) {
        const double p = posterior_prob_exceeds(s, t);
        REQUIRE(p <= prev);
        prev = p;
    }
}

TEST_CASE("diagnostics: identical chains give rhat 1") {
    Eigen::VectorXd c(1000);
    Rng rng(2);
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = rng.normal();
    const auto d = diagnostics({c, c});
    REQUIRE_THAT(d.rhat, Catch::Matchers::WithinAbs(1.0, 1e-9));
    REQUIRE_FALSE(d.flagged);
}

TEST_CASE("diagnostics: stationary sampler chains pass, divergent chains flag") {
    McmcConfig cfg{2, 10000, 1000, 1, 13};
    const auto chains = run_linear_gibbs(intercept_only_spec(25, 2.0, 1.0, 10.0), cfg);
    const auto d = diagnostics({chains[0].coef.col(0), chains[1].coef.col(0)});
    REQUIRE(d.rhat < 1.05);
    REQUIRE(d.ess > 100.0);

    Rng rng(6);
    Eigen::VectorXd a(1000), b(1000);
    for (Eigen::Index i = 0; i < 1000; ++i) {
        a[i] = rng.normal(0.0, 1.0);
        b[i] = rng.normal(10.0, 1.0);
    }
    const auto bad = diagnostics({a, b});
    REQUIRE(bad.rhat > 1.05);
    REQUIRE(bad.flagged);

    REQUIRE_THROWS_AS(diagnostics({a}), InvalidStateError);
}

TEST_CASE("draw counts respect chains x iterations / thinning") {
    const auto& sc = scenario_by_name("S6");
    Rng rng(10);
    const auto data = generate_subtrial(sc, 6, rng);
    const auto fit = fit_standalone(data, {}, McmcConfig{2, 1000, 100, 2, 1});
    REQUIRE(fit.theta.draws.size() == 2 * 1000 / 2);
    REQUIRE(fit.theta.ci_lower <= fit.theta.ci_upper);
    REQUIRE(fit.theta.sd >= 0.0);
}
