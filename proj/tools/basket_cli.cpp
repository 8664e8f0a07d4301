// Command-line driver: configure, run and export basket-trial simulation
// studies and single-dataset analyses.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "basket/basket.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string default_out_dir() {
    if (const char* env = std::getenv("BASKET_OUT_DIR")) return env;
    return ".";
}

basket::Scenario resolve_scenario(const std::string& name, const std::string& config_path) {
    if (!config_path.empty()) {
        for (const auto& sc : basket::load_scenarios_file(config_path))
            if (name.empty() || sc.name == name) return sc;
        throw std::invalid_argument("unknown scenario: " + name + " (not in " + config_path + ")");
    }
    return basket::scenario_by_name(name);
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write output file: " + path.string());
    return out;
}

void print_scenario_table(const std::vector<basket::Scenario>& scenarios, std::ostream& os) {
    for (const auto& sc : scenarios) {
        os << sc.name << ": theta = (";
        for (Eigen::Index i = 0; i < sc.theta_true.size(); ++i)
            os << (i ? ", " : "") << basket::format_number(sc.theta_true[i]);
        os << "), n = (";
        for (std::size_t i = 0; i < sc.sample_sizes.size(); ++i)
            os << (i ? ", " : "") << sc.sample_sizes[i];
        os << "), gamma = (" << basket::format_number(sc.gamma_true[0]) << ", "
           << basket::format_number(sc.gamma_true[1]) << ", "
           << basket::format_number(sc.gamma_true[2])
           << "), sigma = " << basket::format_number(sc.sigma) << "\n";
    }
}

void print_oc_summary(const basket::OperatingCharacteristics& oc, const std::string& scenario,
                      const std::string& model, const basket::DecisionConfig& decision,
                      std::ostream& os) {
    os << "Scenario " << scenario << ", model " << model
       << " (delta_U = " << basket::format_number(decision.delta_u)
       << ", zeta = " << basket::format_number(decision.zeta) << ")\n";
    os << "  subtrial      bias       mse  ci_width   go_rate\n";
    char buf[128];
    for (Eigen::Index k = 0; k < oc.bias.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "  %5d %s %9.4f %9.4f %9.4f %9.4f\n",
                      static_cast<int>(k) + 1,
                      oc.is_null[static_cast<std::size_t>(k)] ? "(null)" : "      ", oc.bias[k],
                      oc.mse[k], oc.mean_ci_width[k], oc.go_rate[k]);
        os << buf;
    }
    bool any_null = false;
    for (bool b : oc.is_null) any_null = any_null || b;
    if (any_null) {
        std::snprintf(buf, sizeof(buf), "  overall erroneous-Go rate: %.4f\n",
                      oc.overall_erroneous_go);
        os << buf;
    }
    os << "  replicates used: " << oc.n_used << ", failed: " << oc.n_failed << "\n";
}

json oc_to_json(const basket::OperatingCharacteristics& oc) {
    json subtrials = json::array();
    for (Eigen::Index k = 0; k < oc.bias.size(); ++k)
        subtrials.push_back({{"subtrial", static_cast<int>(k) + 1},
                             {"bias", oc.bias[k]},
                             {"mse", oc.mse[k]},
                             {"mean_ci_width", oc.mean_ci_width[k]},
                             {"go_rate", oc.go_rate[k]},
                             {"null", static_cast<bool>(oc.is_null[static_cast<std::size_t>(k)])}});
    return {{"subtrials", subtrials},
            {"overall_erroneous_go", oc.overall_erroneous_go},
            {"replicates_used", oc.n_used},
            {"replicates_failed", oc.n_failed}};
}

struct CommonOpts {
    double delta_u = 0.25;
    double zeta = 0.975;
    double s0 = 0.15;
    double slab_b1 = 0.01;
    double slab_b2 = 1.0;
    double spike_s = 100.0;
    std::uint64_t seed = 0;
    std::string out_dir = default_out_dir();
    std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--delta-u", o.delta_u, "Efficacy threshold delta_U")->capture_default_str();
    cmd->add_option("--zeta", o.zeta, "Required evidence level")->capture_default_str();
    cmd->add_option("--s0", o.s0, "Softmax scale for weight allocation")->capture_default_str();
    cmd->add_option("--slab-b1", o.slab_b1, "Slab lower bound B1")->capture_default_str();
    cmd->add_option("--slab-b2", o.slab_b2, "Slab upper bound B2")->capture_default_str();
    cmd->add_option("--spike-s", o.spike_s, "Spike location S")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
    cmd->add_option("-o,--out", o.out_dir, "Output directory (default: $BASKET_OUT_DIR or .)");
    cmd->add_option("--format", o.format, "Report format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
}

int cmd_scenarios(const std::string& config_path) {
    const auto scenarios =
        config_path.empty() ? basket::builtin_scenarios() : basket::load_scenarios_file(config_path);
    print_scenario_table(scenarios, std::cout);
    return kExitOk;
}

int cmd_simulate(const std::string& scenario_name, const std::string& config_path,
                 const std::string& model, int replicates, const basket::McmcConfig& mcmc,
                 int threads, const CommonOpts& o) {
    basket::StudyConfig cfg;
    cfg.scenario = resolve_scenario(scenario_name, config_path);
    cfg.model = basket::model_from_name(model);
    cfg.replicates = replicates;
    cfg.mcmc = mcmc;
    cfg.decision = {o.delta_u, o.zeta};
    cfg.s0 = o.s0;
    cfg.spike_slab = {o.slab_b1, o.slab_b2, o.spike_s, 0.0};
    cfg.master_seed = o.seed;
    cfg.threads = threads;
    if (std::find(cfg.delta_grid.begin(), cfg.delta_grid.end(), o.delta_u) == cfg.delta_grid.end())
        cfg.delta_grid.push_back(o.delta_u);

    const basket::StudyResult result = basket::run_study(cfg);

    fs::create_directories(o.out_dir);
    const auto base = fs::path(o.out_dir);
    {
        auto out = open_out(base / "results.csv");
        basket::write_oc_csv(result.oc, cfg.scenario.name, model, out);
    }
    {
        std::vector<double> grid = cfg.delta_grid;
        auto out = open_out(base / "replicates.csv");
        basket::write_replicates_csv(result.replicates, grid, out);
    }
    if (o.format == "json") {
        auto out = open_out(base / "results.json");
        json j = oc_to_json(result.oc);
        j["scenario"] = cfg.scenario.name;
        j["model"] = model;
        out << j.dump(2) << "\n";
    }
    print_oc_summary(result.oc, cfg.scenario.name, model, cfg.decision, std::cout);
    std::cout << "wrote " << (base / "results.csv").string() << "\n";
    return kExitOk;
}

int cmd_analyze(const std::string& data_path, const std::string& model, int threads,
                const basket::McmcConfig& mcmc, const CommonOpts& o) {
    (void)threads;  // analyses of a single dataset run serially per chain
    const basket::BasketTrialData trial = basket::read_trial_csv_file(data_path);
    const basket::DecisionConfig decision{o.delta_u, o.zeta};
    const auto kind = basket::model_from_name(model);

    fs::create_directories(o.out_dir);
    const auto base = fs::path(o.out_dir);

    std::vector<basket::PosteriorSummary> theta;
    std::vector<double> exceed;
    std::vector<bool> go;
    std::vector<double> ex_prob;

    if (kind == basket::ModelKind::Proposed) {
        basket::ProposedConfig pc;
        pc.spike_slab = {o.slab_b1, o.slab_b2, o.spike_s, 0.0};
        pc.s0 = o.s0;
        const auto res = basket::analyze_proposed(trial, pc, mcmc, decision);
        theta = res.theta;
        exceed = res.exceed_prob;
        go = res.go;
        {
            auto out = open_out(base / "hellinger.csv");
            basket::write_matrix_csv(res.hellinger, out);
        }
        {
            auto out = open_out(base / "weights.csv");
            basket::write_matrix_csv(res.weights, out);
        }
        std::cout << "Hellinger matrix:\n";
        std::cout << res.hellinger.format(
                         Eigen::IOFormat(4, 0, "  ", "\n", "  ", "", "", ""))
                  << "\n";
        std::cout << "Weight matrix (column = target subtrial):\n";
        std::cout << res.weights.format(Eigen::IOFormat(4, 0, "  ", "\n", "  ", "", "", ""))
                  << "\n";
    } else {
        basket::ComparatorResult res;
        switch (kind) {
            case basket::ModelKind::StandardHm:
                res = basket::analyze_standard_hm(trial, {}, {}, mcmc, decision);
                break;
            case basket::ModelKind::NoBorrowing:
                res = basket::analyze_no_borrowing(trial, mcmc, decision);
                break;
            case basket::ModelKind::Exnex:
                res = basket::analyze_exnex(trial, {}, {}, mcmc, decision);
                break;
            default: break;
        }
        theta = res.theta;
        exceed = res.exceed_prob;
        go = res.go;
        ex_prob = res.ex_probability;
    }

    json report = json::array();
    std::cout << "  subtrial  post_mean        sd   ci_lower  ci_upper  P(theta>delta_U)  decision\n";
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const auto& s = theta[k];
        char buf[160];
        std::snprintf(buf, sizeof(buf), "  %5d %12.4f %9.4f %10.4f %9.4f %13.4f      %s\n",
                      trial.subtrials[k].index, s.mean, s.sd, s.ci_lower, s.ci_upper, exceed[k],
                      go[k] ? "Go" : "No-go");
        std::cout << buf;
        json row = {{"subtrial", trial.subtrials[k].index}, {"post_mean", s.mean},
                    {"sd", s.sd},       {"ci_lower", s.ci_lower},
                    {"ci_upper", s.ci_upper}, {"exceed_prob", exceed[k]},
                    {"decision", go[k] ? "Go" : "No-go"}};
        if (!ex_prob.empty()) row["posterior_ex_prob"] = ex_prob[k];
        report.push_back(row);
    }
    if (!ex_prob.empty()) {
        std::cout << "  posterior EX probabilities:";
        for (double p : ex_prob) std::cout << " " << basket::format_number(p);
        std::cout << "\n";
    }

    if (o.format == "json") {
        auto out = open_out(base / "report.json");
        out << json({{"model", model}, {"subtrials", report}}).dump(2) << "\n";
    } else {
        auto out = open_out(base / "report.csv");
        out << "subtrial,post_mean,sd,ci_lower,ci_upper,exceed_prob,decision";
        if (!ex_prob.empty()) out << ",posterior_ex_prob";
        out << "\n";
        for (std::size_t k = 0; k < theta.size(); ++k) {
            const auto& s = theta[k];
            out << trial.subtrials[k].index << "," << basket::format_number(s.mean) << ","
                << basket::format_number(s.sd) << "," << basket::format_number(s.ci_lower) << ","
                << basket::format_number(s.ci_upper) << "," << basket::format_number(exceed[k])
                << "," << (go[k] ? "Go" : "No-go");
            if (!ex_prob.empty()) out << "," << basket::format_number(ex_prob[k]);
            out << "\n";
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian basket-trial analysis and simulation"};
    app.require_subcommand(1);

    std::string scenario_name, config_path, model = "proposed", data_path;
    int replicates = 1000;
    int threads = std::max(1u, std::thread::hardware_concurrency());
    basket::McmcConfig mcmc{2, 4000, 1000, 1, 0};
    CommonOpts opts;

    auto* scen = app.add_subcommand("scenarios", "List scenario definitions");
    scen->add_option("--config", config_path, "Scenario configuration file");

    auto* sim = app.add_subcommand("simulate", "Run a replicated simulation study");
    sim->add_option("--scenario", scenario_name, "Scenario name, e.g. S1..S9");
    sim->add_option("--config", config_path, "Scenario configuration file");
    sim->add_option("-M,--M,--replicates", replicates, "Number of replicates")
        ->capture_default_str();
    sim->add_option("--model", model, "Analysis model: proposed, hm, none, exnex")
        ->capture_default_str();
    sim->add_option("--chains", mcmc.chains)->capture_default_str();
    sim->add_option("--iterations", mcmc.iterations)->capture_default_str();
    sim->add_option("--burn-in", mcmc.burn_in)->capture_default_str();
    sim->add_option("--threads", threads, "Worker threads")->capture_default_str();
    add_common(sim, opts);

    auto* ana = app.add_subcommand("analyze", "Analyse one dataset (CSV: subtrial,y,z1..zq,T)");
    ana->add_option("--data", data_path, "Dataset CSV file")->required();
    ana->add_option("--model", model, "Analysis model: proposed, hm, none, exnex")
        ->capture_default_str();
    ana->add_option("--chains", mcmc.chains)->capture_default_str();
    ana->add_option("--iterations", mcmc.iterations)->capture_default_str();
    ana->add_option("--burn-in", mcmc.burn_in)->capture_default_str();
    ana->add_option("--threads", threads, "Worker threads")->capture_default_str();
    add_common(ana, opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        mcmc.seed = opts.seed;
        if (scen->parsed()) return cmd_scenarios(config_path);
        if (sim->parsed()) {
            if (scenario_name.empty() && config_path.empty())
                throw std::invalid_argument("simulate requires --scenario or --config");
            return cmd_simulate(scenario_name, config_path, model, replicates, mcmc, threads, opts);
        }
        if (ana->parsed()) return cmd_analyze(data_path, model, threads, mcmc, opts);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const basket::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
