#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "basket/errors.hpp"
#include "basket/rng.hpp"

namespace basket {

// Data for one subtrial: continuous outcomes, covariate matrix and a
// balanced binary treatment indicator.
struct SubtrialData {
    int index = 0;                // 1-based subtrial label
    Eigen::VectorXd y;            // outcomes, length n_k
    Eigen::MatrixXd covariates;   // n_k x q
    Eigen::VectorXi treatment;    // n_k, entries in {0,1}

    int size() const { return static_cast<int>(y.size()); }
    int n_covariates() const { return static_cast<int>(covariates.cols()); }

    void validate() const {
        const auto n = y.size();
        if (n < 2 || covariates.rows() != n || treatment.size() != n)
            throw std::invalid_argument("subtrial " + std::to_string(index) +
                                        ": y, covariates and treatment must share n >= 2 rows");
        if (!y.allFinite() || !covariates.allFinite())
            throw InvalidDataError("subtrial " + std::to_string(index) + ": non-finite data");
        for (Eigen::Index i = 0; i < n; ++i)
            if (treatment[i] != 0 && treatment[i] != 1)
                throw std::invalid_argument("subtrial " + std::to_string(index) +
                                            ": treatment indicator must be 0 or 1");
    }
};

struct BasketTrialData {
    std::vector<SubtrialData> subtrials;

    int n_subtrials() const { return static_cast<int>(subtrials.size()); }

    void validate() const {
        std::vector<int> seen;
        for (const auto& s : subtrials) {
            s.validate();
            if (std::find(seen.begin(), seen.end(), s.index) != seen.end())
                throw std::invalid_argument("duplicate subtrial index " + std::to_string(s.index));
            seen.push_back(s.index);
        }
    }
};

// One simulation scenario: true effects, regression coefficients, residual
// sd and per-subtrial sample sizes.
struct Scenario {
    std::string name;
    Eigen::VectorXd theta_true;        // K true treatment effects
    Eigen::Vector3d gamma_true{5.0, 3.0, 1.3};
    double sigma = 0.4;
    std::vector<int> sample_sizes;     // K, all even
    Eigen::Vector2d covariate_means{6.0, 4.0};
    double covariate_sd = 0.2;

    int n_subtrials() const { return static_cast<int>(theta_true.size()); }

    void validate() const {
        if (theta_true.size() == 0 ||
            static_cast<std::size_t>(theta_true.size()) != sample_sizes.size())
            throw std::invalid_argument("scenario " + name +
                                        ": theta and sample sizes must have equal length K >= 1");
        if (!(sigma > 0.0)) throw std::invalid_argument("scenario " + name + ": sigma must be > 0");
        for (int n : sample_sizes)
            if (n <= 0 || n % 2 != 0)
                throw std::invalid_argument("scenario " + name +
                                            ": sample sizes must be positive and even");
    }
};

// Block randomisation: uniformly random permutation of exactly n/2 ones.
inline Eigen::VectorXi assign_treatment(int n, Rng& rng) {
    if (n <= 0 || n % 2 != 0)
        throw std::invalid_argument("assign_treatment: n must be positive and even, got " +
                                    std::to_string(n));
    Eigen::VectorXi t(n);
    for (int i = 0; i < n; ++i) t[i] = (i < n / 2) ? 1 : 0;
    // Fisher-Yates
    for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(rng.index(static_cast<std::size_t>(i) + 1));
        std::swap(t[i], t[j]);
    }
    return t;
}

// Draw one subtrial: z1 ~ N(mean1, sd^2), z2 ~ N(mean2, sd^2),
// y ~ N(gamma0 + z1*gamma1 + z2*gamma2 + T*theta_k, sigma^2).
inline SubtrialData generate_subtrial(const Scenario& sc, int k, Rng& rng) {
    sc.validate();
    if (k < 1 || k > sc.n_subtrials())
        throw std::invalid_argument("generate_subtrial: subtrial index " + std::to_string(k) +
                                    " out of range 1.." + std::to_string(sc.n_subtrials()));
    const int n = sc.sample_sizes[static_cast<std::size_t>(k - 1)];
    SubtrialData d;
    d.index = k;
    d.treatment = assign_treatment(n, rng);
    d.covariates.resize(n, 2);
    d.y.resize(n);
    const double theta = sc.theta_true[k - 1];
    for (int i = 0; i < n; ++i) {
        d.covariates(i, 0) = rng.normal(sc.covariate_means[0], sc.covariate_sd);
        d.covariates(i, 1) = rng.normal(sc.covariate_means[1], sc.covariate_sd);
        const double eta = sc.gamma_true[0] + d.covariates(i, 0) * sc.gamma_true[1] +
                           d.covariates(i, 1) * sc.gamma_true[2] + d.treatment[i] * theta;
        d.y[i] = rng.normal(eta, sc.sigma);
    }
    return d;
}

inline BasketTrialData generate_trial(const Scenario& sc, Rng& rng) {
    sc.validate();
    BasketTrialData trial;
    trial.subtrials.reserve(static_cast<std::size_t>(sc.n_subtrials()));
    for (int k = 1; k <= sc.n_subtrials(); ++k)
        trial.subtrials.push_back(generate_subtrial(sc, k, rng));
    return trial;
}

namespace detail {
inline Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}
}  // namespace detail

// Built-in scenarios S1..S9: K=6 subtrials with n = (10, 10, 14, 16, 20, 20).
inline const std::vector<Scenario>& builtin_scenarios() {
    static const std::vector<Scenario> all = [] {
        const std::vector<int> n{10, 10, 14, 16, 20, 20};
        std::vector<std::pair<std::string, Eigen::VectorXd>> thetas{
            {"S1", detail::vec({0.49, 0.67, 0.54, 0.43, 0.79, 0.35})},
            {"S2", detail::vec({0.35, 0.37, 0.80, 1.30, 1.38, 0.40})},
            {"S3", detail::vec({0.29, 0.77, 0.68, 0.75, 0.33, 0.30})},
            {"S4", detail::vec({0.59, 1.17, 1.02, 0.95, 0.13, 0.75})},
            {"S5", detail::vec({0.45, 0.45, 0.45, 0.45, 0.45, 0.45})},
            {"S6", detail::vec({0.30, 0.30, 0.30, 0.30, 0.30, 0.30})},
            {"S7", detail::vec({0.0, 0.0, 0.0, 0.0, 0.37, 0.37})},
            {"S8", detail::vec({0.33, 0.0, 0.82, 0.90, 0.0, 0.83})},
            {"S9", detail::vec({0.0, 0.0, 0.0, 0.0, 0.0, 0.0})}};
        std::vector<Scenario> out;
        for (auto& [name, th] : thetas) {
            Scenario sc;
            sc.name = name;
            sc.theta_true = th;
            sc.sample_sizes = n;
            out.push_back(std::move(sc));
        }
        return out;
    }();
    return all;
}

inline const Scenario& scenario_by_name(const std::string& name) {
    for (const auto& sc : builtin_scenarios())
        if (sc.name == name) return sc;
    throw std::invalid_argument("unknown scenario: " + name);
}

// ---------------------------------------------------------------------------
// Scenario configuration files.
//
// Key-value sections, one per scenario:
//
//   [scenario]
//   name = S5
//   theta = 0.45 0.45 0.45 0.45 0.45 0.45
//   n = 10 10 14 16 20 20
//   gamma = 5 3 1.3
//   sigma = 0.4
// ---------------------------------------------------------------------------

inline std::vector<Scenario> load_scenarios(std::istream& in) {
    std::vector<Scenario> out;
    std::map<std::string, std::string> kv;
    long line_no = 0;
    bool in_section = false;

    auto flush = [&](long at_line) {
        if (!in_section) return;
        Scenario sc;
        if (!kv.count("name") || !kv.count("theta") || !kv.count("n"))
            throw ParseError("scenario section requires name, theta and n keys", at_line);
        sc.name = kv["name"];
        auto parse_doubles = [&](const std::string& s) {
            std::istringstream iss(s);
            std::vector<double> v;
            double x;
            while (iss >> x) v.push_back(x);
            if (!iss.eof()) throw ParseError("malformed numeric list: " + s, at_line);
            return v;
        };
        auto th = parse_doubles(kv["theta"]);
        sc.theta_true = Eigen::Map<Eigen::VectorXd>(th.data(), static_cast<Eigen::Index>(th.size()));
        for (double x : parse_doubles(kv["n"])) sc.sample_sizes.push_back(static_cast<int>(x));
        if (kv.count("gamma")) {
            auto g = parse_doubles(kv["gamma"]);
            if (g.size() != 3) throw ParseError("gamma must have 3 entries", at_line);
            sc.gamma_true = Eigen::Vector3d(g[0], g[1], g[2]);
        }
        if (kv.count("sigma")) sc.sigma = std::stod(kv["sigma"]);
        if (kv.count("covariate_means")) {
            auto m = parse_doubles(kv["covariate_means"]);
            if (m.size() != 2) throw ParseError("covariate_means must have 2 entries", at_line);
            sc.covariate_means = Eigen::Vector2d(m[0], m[1]);
        }
        if (kv.count("covariate_sd")) sc.covariate_sd = std::stod(kv["covariate_sd"]);
        sc.validate();
        out.push_back(std::move(sc));
        kv.clear();
    };

    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        if (line == "[scenario]") {
            flush(line_no);
            in_section = true;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos || !in_section)
            throw ParseError("expected [scenario] or key = value, got: " + line, line_no);
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    flush(line_no);
    if (out.empty()) throw ParseError("no scenarios in file", -1);
    return out;
}

inline std::vector<Scenario> load_scenarios_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    return load_scenarios(in);
}

inline void save_scenarios(const std::vector<Scenario>& scenarios, std::ostream& out) {
    out.precision(17);
    for (const auto& sc : scenarios) {
        out << "[scenario]\n";
        out << "name = " << sc.name << "\n";
        out << "theta =";
        for (Eigen::Index i = 0; i < sc.theta_true.size(); ++i) out << " " << sc.theta_true[i];
        out << "\nn =";
        for (int n : sc.sample_sizes) out << " " << n;
        out << "\ngamma = " << sc.gamma_true[0] << " " << sc.gamma_true[1] << " "
            << sc.gamma_true[2] << "\n";
        out << "sigma = " << sc.sigma << "\n";
        out << "covariate_means = " << sc.covariate_means[0] << " " << sc.covariate_means[1]
            << "\n";
        out << "covariate_sd = " << sc.covariate_sd << "\n\n";
    }
}

}  // namespace basket
