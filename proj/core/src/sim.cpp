#include "mtp/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <thread>

#include "json.hpp"
#include "mtp/errors.hpp"
#include "mtp/rng.hpp"

namespace mtp {

void DgpSpec::validate() const {
    if (p <= 0) throw ConfigError("dgp: covariate dimension must be positive");
    if (!(sigma_a > 0)) throw ConfigError("dgp: exposure noise sd must be positive");
    if (!(sigma_y >= 0)) throw ConfigError("dgp: outcome noise sd must be nonnegative");
    auto need_len = [&](const std::vector<double>& v, const char* what) {
        if (static_cast<int>(v.size()) != p)
            throw ConfigError(std::string("dgp: ") + what + " must have length " +
                              std::to_string(p));
    };
    need_len(exposure_coefs, "exposure coefficients");
    need_len(w_coefs, "outcome covariate coefficients");
    if (family == Family::Interaction) need_len(interaction_coefs, "interaction coefficients");
}

double DgpSpec::mean_outcome(double a, const Eigen::Ref<const Eigen::RowVectorXd>& w) const {
    double mu = intercept + exposure_coef * a;
    for (int j = 0; j < p; ++j) mu += w_coefs[j] * w[j];
    if (family == Family::QuadraticInA) mu += quadratic_coef * a * a;
    if (family == Family::Interaction)
        for (int j = 0; j < p; ++j) mu += interaction_coefs[j] * a * w[j];
    return mu;
}

DgpSpec DgpSpec::default_spec() {
    DgpSpec d;
    d.p = 4;
    d.family = Family::Linear;
    d.exposure_coefs = {0.5, 0.5, 0.0, 0.0};
    d.sigma_a = 1.0;
    d.intercept = 10.0;
    d.exposure_coef = 2.0;
    d.w_coefs = {1.0, -1.0, 0.0, 0.0};
    d.sigma_y = 2.0;
    return d;
}

AnalysisFrame generate(const DgpSpec& dgp, Eigen::Index n, std::uint64_t seed) {
    dgp.validate();
    if (n <= 0) throw ConfigError("dgp: sample size must be positive");
    auto rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    AnalysisFrame frame;
    frame.covariates.resize(n, dgp.p);
    frame.exposure.resize(n);
    frame.outcome.resize(n);
    frame.unit_ids.reserve(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        frame.unit_ids.push_back("sim-" + std::to_string(i));
        for (int j = 0; j < dgp.p; ++j) frame.covariates(i, j) = normal(rng);
        double lin = 0.0;
        for (int j = 0; j < dgp.p; ++j) lin += dgp.exposure_coefs[j] * frame.covariates(i, j);
        frame.exposure[i] = lin + dgp.sigma_a * normal(rng);
        frame.outcome[i] = dgp.mean_outcome(frame.exposure[i], frame.covariates.row(i)) +
                           dgp.sigma_y * normal(rng);
    }
    return frame;
}

TruthReport true_value(const DgpSpec& dgp, const ShiftPolicy& policy, Eigen::Index n_mc,
                       std::uint64_t seed) {
    dgp.validate();
    policy.validate();
    if (n_mc < 2) throw ConfigError("dgp: truth sample size must be at least 2");
    auto rng = make_rng(mix_seed(seed, "truth"));
    std::normal_distribution<double> normal(0.0, 1.0);

    // Common random numbers: one draw of (W, A) evaluated under both exposures.
    double sum_nat = 0.0, sum_shift = 0.0, sum_delta = 0.0, sum_delta2 = 0.0;
    Eigen::RowVectorXd w(dgp.p);
    for (Eigen::Index i = 0; i < n_mc; ++i) {
        for (int j = 0; j < dgp.p; ++j) w[j] = normal(rng);
        double lin = 0.0;
        for (int j = 0; j < dgp.p; ++j) lin += dgp.exposure_coefs[j] * w[j];
        const double a = lin + dgp.sigma_a * normal(rng);
        const double mu_nat = dgp.mean_outcome(a, w);
        const double mu_shift = dgp.mean_outcome(apply_shift(policy, a), w);
        sum_nat += mu_nat;
        sum_shift += mu_shift;
        const double d = mu_shift - mu_nat;
        sum_delta += d;
        sum_delta2 += d * d;
    }
    TruthReport truth;
    truth.n_mc = n_mc;
    truth.psi_observed = sum_nat / n_mc;
    truth.psi_shift = sum_shift / n_mc;
    truth.psi_delta = sum_delta / n_mc;
    const double var =
        std::max(0.0, (sum_delta2 - sum_delta * sum_delta / n_mc) / (n_mc - 1));
    truth.mc_std_err = std::sqrt(var / n_mc);
    return truth;
}

ReplicationReport replicate(const DgpSpec& dgp, const ShiftPolicy& policy, Eigen::Index n,
                            int R, const ReplicationOptions& options, std::uint64_t seed) {
    if (R < 2) throw ConfigError("replication study needs R >= 2");
    const TruthReport truth = true_value(dgp, policy, options.n_mc, seed);

    struct RepOutcome {
        bool ok = false;
        double estimate = 0.0, se = 0.0, lo = 0.0, hi = 0.0;
        double score_residual = 0.0, ensemble_gap = 0.0, simplex_violation = 0.0;
        std::string error;
    };
    std::vector<RepOutcome> reps(R);

    auto ensemble_gap = [](const SuperLearnerFit& fit) {
        double best = std::numeric_limits<double>::infinity();
        for (double r : fit.cv_risks)
            if (std::isfinite(r)) best = std::min(best, r);
        return std::isfinite(best) ? fit.ensemble_cv_risk - best : 0.0;
    };
    auto simplex_violation = [](const SuperLearnerFit& fit) {
        double neg = 0.0;
        for (Eigen::Index j = 0; j < fit.weights.size(); ++j)
            neg = std::max(neg, -fit.weights[j]);
        return std::max(std::abs(fit.weights.sum() - 1.0), neg);
    };

    auto run_one = [&](int r) {
        RepOutcome& out = reps[r];
        const std::uint64_t rep_seed =
            mix_seed(mix_seed(seed, "rep"), static_cast<std::uint64_t>(r));
        try {
            const AnalysisFrame frame = generate(dgp, n, mix_seed(rep_seed, "data"));
            const ShiftFit fit = estimate_shift_full(frame, policy, mix_seed(rep_seed, "est"),
                                                     options.estimator);
            out.estimate = fit.estimate.psi_delta;
            out.se = fit.estimate.std_err;
            out.lo = fit.estimate.ci_lo;
            out.hi = fit.estimate.ci_hi;
            out.score_residual = fit.target.score_residual;
            out.ensemble_gap = std::max(ensemble_gap(fit.outcome_fit),
                                        ensemble_gap(fit.ratio_fit.classifier));
            out.simplex_violation = std::max(simplex_violation(fit.outcome_fit),
                                             simplex_violation(fit.ratio_fit.classifier));
            out.ok = true;
        } catch (const std::exception& e) {
            out.error = e.what();
        }
    };

    const int jobs = std::max(1, options.jobs);
    if (jobs == 1 || R <= 1) {
        for (int r = 0; r < R; ++r) run_one(r);
    } else {
        std::vector<std::thread> workers;
        const int n_workers = std::min(jobs, R);
        for (int t = 0; t < n_workers; ++t)
            workers.emplace_back([&, t] {
                for (int r = t; r < R; r += n_workers) run_one(r);
            });
        for (auto& w : workers) w.join();
    }

    ReplicationReport report;
    report.cell = options.cell;
    report.n = n;
    report.replications = R;
    report.truth = truth.psi_delta;

    double sum = 0.0, sum2 = 0.0, sum_se = 0.0, sum_width = 0.0;
    int ok = 0, covered = 0;
    for (const auto& rep : reps) {
        if (!rep.ok) {
            ++report.failures;
            if (report.failure_messages.size() < 10) report.failure_messages.push_back(rep.error);
            continue;
        }
        ++ok;
        sum += rep.estimate;
        sum2 += rep.estimate * rep.estimate;
        sum_se += rep.se;
        sum_width += rep.hi - rep.lo;
        // tolerance guards degenerate zero-width intervals against float ties
        const double tie = 1e-8 * (1.0 + std::abs(truth.psi_delta));
        if (rep.lo - tie <= truth.psi_delta && truth.psi_delta <= rep.hi + tie) ++covered;
        report.worst_score_residual = std::max(report.worst_score_residual, rep.score_residual);
        report.worst_ensemble_gap = std::max(report.worst_ensemble_gap, rep.ensemble_gap);
        report.worst_simplex_violation =
            std::max(report.worst_simplex_violation, rep.simplex_violation);
    }
    if (report.failures * 20 > R) {
        std::string detail;
        if (!report.failure_messages.empty()) detail = " (first: " + report.failure_messages[0] + ")";
        throw EstimationError("replication study failed: " + std::to_string(report.failures) +
                              " of " + std::to_string(R) + " replications errored" + detail);
    }
    if (ok > 0) {
        report.mean_estimate = sum / ok;
        report.bias = report.mean_estimate - truth.psi_delta;
        report.sd = ok > 1 ? std::sqrt(std::max(0.0, (sum2 - sum * sum / ok) / (ok - 1))) : 0.0;
        report.mean_se = sum_se / ok;
        report.coverage = static_cast<double>(covered) / ok;
        report.ci_width = sum_width / ok;
    }
    return report;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
    if (!out) throw DataError("error while writing file: " + path);
}

}  // namespace

std::string report_csv_string(const std::vector<ReplicationReport>& reports) {
    std::string out = "cell,n,R,truth,mean_estimate,bias,sd,mean_se,coverage,ci_width\n";
    for (const auto& r : reports) {
        out += csv_escape(r.cell);
        out += ',' + std::to_string(r.n);
        out += ',' + std::to_string(r.replications);
        out += ',' + fmt_double(r.truth);
        out += ',' + fmt_double(r.mean_estimate);
        out += ',' + fmt_double(r.bias);
        out += ',' + fmt_double(r.sd);
        out += ',' + fmt_double(r.mean_se);
        out += ',' + fmt_double(r.coverage);
        out += ',' + fmt_double(r.ci_width);
        out += '\n';
    }
    return out;
}

std::string report_json_string(const std::vector<ReplicationReport>& reports) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["reports"] = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json e;
        e["cell"] = r.cell;
        e["n"] = r.n;
        e["R"] = r.replications;
        e["truth"] = r.truth;
        e["mean_estimate"] = r.mean_estimate;
        e["bias"] = r.bias;
        e["sd"] = r.sd;
        e["mean_se"] = r.mean_se;
        e["coverage"] = r.coverage;
        e["ci_width"] = r.ci_width;
        e["failures"] = r.failures;
        j["reports"].push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

void write_report_csv(const std::vector<ReplicationReport>& reports, const std::string& path) {
    write_file(path, report_csv_string(reports));
}

void write_report_json(const std::vector<ReplicationReport>& reports, const std::string& path) {
    write_file(path, report_json_string(reports));
}

}  // namespace mtp
