#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "basket/errors.hpp"
#include "basket/harness.hpp"
#include "basket/trial_data.hpp"

namespace basket {

inline std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", x);
    return buf;
}

// ---------------------------------------------------------------------------
// Dataset CSV: header "subtrial,y,z1,...,zq,T", one row per patient.
// ---------------------------------------------------------------------------

inline BasketTrialData read_trial_csv(std::istream& in) {
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty dataset file", 1);
    ++line_no;

    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
            out.push_back(cell);
        }
        return out;
    };

    const auto header = split(line);
    if (header.size() < 4 || header[0] != "subtrial" || header[1] != "y" || header.back() != "T")
        throw ParseError("expected header subtrial,y,z1,...,zq,T", 1);
    const auto q = header.size() - 3;
    for (std::size_t j = 0; j < q; ++j)
        if (header[2 + j] != "z" + std::to_string(j + 1))
            throw ParseError("expected covariate column z" + std::to_string(j + 1), 1);

    struct Row {
        double y;
        std::vector<double> z;
        int t;
    };
    std::map<int, std::vector<Row>> by_subtrial;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " columns, got " +
                                 std::to_string(cells.size()),
                             line_no);
        try {
            Row r;
            const int k = std::stoi(cells[0]);
            r.y = std::stod(cells[1]);
            for (std::size_t j = 0; j < q; ++j) r.z.push_back(std::stod(cells[2 + j]));
            const double t = std::stod(cells.back());
            if (t != 0.0 && t != 1.0) throw ParseError("treatment indicator must be 0 or 1", line_no);
            r.t = static_cast<int>(t);
            by_subtrial[k].push_back(std::move(r));
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception&) {
            throw ParseError("malformed numeric value", line_no);
        }
    }
    if (by_subtrial.empty()) throw ParseError("dataset contains no data rows", line_no);

    BasketTrialData trial;
    for (const auto& [k, rows] : by_subtrial) {
        SubtrialData s;
        s.index = k;
        const auto n = static_cast<Eigen::Index>(rows.size());
        s.y.resize(n);
        s.covariates.resize(n, static_cast<Eigen::Index>(q));
        s.treatment.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& r = rows[static_cast<std::size_t>(i)];
            s.y[i] = r.y;
            for (std::size_t j = 0; j < q; ++j)
                s.covariates(i, static_cast<Eigen::Index>(j)) = r.z[j];
            s.treatment[i] = r.t;
        }
        trial.subtrials.push_back(std::move(s));
    }
    trial.validate();
    return trial;
}

inline BasketTrialData read_trial_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    return read_trial_csv(in);
}

inline void write_trial_csv(const BasketTrialData& trial, std::ostream& out) {
    const auto q = trial.subtrials.empty() ? 0 : trial.subtrials.front().n_covariates();
    out << "subtrial,y";
    for (int j = 1; j <= q; ++j) out << ",z" << j;
    out << ",T\n";
    for (const auto& s : trial.subtrials)
        for (Eigen::Index i = 0; i < s.y.size(); ++i) {
            out << s.index << "," << format_number(s.y[i]);
            for (Eigen::Index j = 0; j < s.covariates.cols(); ++j)
                out << "," << format_number(s.covariates(i, j));
            out << "," << s.treatment[i] << "\n";
        }
}

// ---------------------------------------------------------------------------
// Result files
// ---------------------------------------------------------------------------

inline void write_matrix_csv(const Eigen::MatrixXd& m, std::ostream& out) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ",";
            out << format_number(m(i, j));
        }
        out << "\n";
    }
}

// Tidy long format: scenario, model, subtrial, metric, value. Subtrial 0
// carries the trial-level metrics.
inline void write_oc_csv(const OperatingCharacteristics& oc, const std::string& scenario,
                         const std::string& model, std::ostream& out, bool header = true) {
    if (header) out << "scenario,model,subtrial,metric,value\n";
    const auto K = oc.bias.size();
    auto row = [&](int k, const char* metric, double v) {
        out << scenario << "," << model << "," << k << "," << metric << "," << format_number(v)
            << "\n";
    };
    for (Eigen::Index k = 0; k < K; ++k) {
        const int label = static_cast<int>(k) + 1;
        row(label, "bias", oc.bias[k]);
        row(label, "mse", oc.mse[k]);
        row(label, "mean_ci_width", oc.mean_ci_width[k]);
        row(label, oc.is_null[static_cast<std::size_t>(k)] ? "type1" : "power", oc.go_rate[k]);
    }
    bool any_null = false;
    for (bool b : oc.is_null) any_null = any_null || b;
    if (any_null) row(0, "overall_erroneous_go", oc.overall_erroneous_go);
    row(0, "replicates_used", oc.n_used);
    row(0, "replicates_failed", oc.n_failed);
}

// Per-replicate posterior summaries and stored exceedance probabilities.
inline void write_replicates_csv(const std::vector<ReplicateResult>& replicates,
                                 const std::vector<double>& delta_grid, std::ostream& out) {
    out << "replicate,subtrial,post_mean,ci_width";
    for (double d : delta_grid) out << ",exceed_" << format_number(d);
    out << ",failed\n";
    for (std::size_t m = 0; m < replicates.size(); ++m) {
        const auto& r = replicates[m];
        if (r.failed) {
            out << m << ",0,nan,nan";
            for (std::size_t d = 0; d < delta_grid.size(); ++d) out << ",nan";
            out << ",1\n";
            continue;
        }
        for (Eigen::Index k = 0; k < r.post_mean.size(); ++k) {
            out << m << "," << (k + 1) << "," << format_number(r.post_mean[k]) << ","
                << format_number(r.ci_width[k]);
            for (std::size_t d = 0; d < delta_grid.size(); ++d)
                out << "," << format_number(r.exceed(k, static_cast<Eigen::Index>(d)));
            out << ",0\n";
        }
    }
}

// Debugging export: one column per parameter.
inline void write_draws_csv(const std::vector<std::pair<std::string, Eigen::VectorXd>>& columns,
                            std::ostream& out) {
    if (columns.empty()) return;
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (j) out << ",";
        out << columns[j].first;
    }
    out << "\n";
    const auto n = columns.front().second.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < columns.size(); ++j) {
            if (j) out << ",";
            out << format_number(columns[j].second[i]);
        }
        out << "\n";
    }
}

}  // namespace basket
