#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtp/core.hpp"
#include "mtp/tmle.hpp"

namespace mtp {

// Structural model with independent units:
//   W ~ N(0, I_p)
//   A = exposure_coefs' W + N(0, sigma_a^2)
//   Y = mu(A, W) + N(0, sigma_y^2)
// where mu depends on the family:
//   Linear:       intercept + exposure_coef*A + w_coefs' W
//   QuadraticInA: linear + quadratic_coef * A^2
//   Interaction:  linear + sum_j interaction_coefs[j] * A * W_j
struct DgpSpec {
    enum class Family { Linear, QuadraticInA, Interaction };

    int p = 4;
    Family family = Family::Linear;
    std::vector<double> exposure_coefs;  // length p
    double sigma_a = 1.0;
    double intercept = 10.0;
    double exposure_coef = 2.0;
    std::vector<double> w_coefs;  // length p
    double quadratic_coef = 0.0;
    std::vector<double> interaction_coefs;  // length p (Interaction family)
    double sigma_y = 2.0;

    void validate() const;

    // Structural mean mu(a, w).
    double mean_outcome(double a, const Eigen::Ref<const Eigen::RowVectorXd>& w) const;

    // p=4, A = 0.5(w1+w2) + N(0,1), Y = 10 + 2A + w1 - w2 + N(0,2).
    static DgpSpec default_spec();
};

// n independent draws from the structural equations; deterministic per seed.
AnalysisFrame generate(const DgpSpec& dgp, Eigen::Index n, std::uint64_t seed);

struct TruthReport {
    double psi_shift = 0.0;
    double psi_observed = 0.0;
    double psi_delta = 0.0;
    double mc_std_err = 0.0;  // Monte Carlo error of psi_delta
    Eigen::Index n_mc = 0;
};

// Monte Carlo truth with common random numbers: the same draws of W are
// evaluated through mu under the natural and the shifted exposure, so additive
// shifts of a linear-in-A model have zero Monte Carlo error.
TruthReport true_value(const DgpSpec& dgp, const ShiftPolicy& policy,
                       Eigen::Index n_mc = 1'000'000, std::uint64_t seed = 1);

struct ReplicationOptions {
    EstimatorOptions estimator;
    Eigen::Index n_mc = 1'000'000;  // truth sample size
    int jobs = 1;
    std::string cell = "default";  // label carried into the report
};

struct ReplicationReport {
    std::string cell;
    Eigen::Index n = 0;
    int replications = 0;  // requested R
    int failures = 0;      // excluded reps (> 5% aborts instead)
    double truth = 0.0;
    double mean_estimate = 0.0;
    double bias = 0.0;
    double sd = 0.0;       // empirical sd of the estimates
    double mean_se = 0.0;  // mean reported standard error
    double coverage = 0.0;
    double ci_width = 0.0;
    // Worst-case diagnostics across replications (both nuisance fits).
    double worst_score_residual = 0.0;
    double worst_ensemble_gap = 0.0;       // ensemble cv risk minus best single
    double worst_simplex_violation = 0.0;  // |sum w - 1| and negative mass
    std::vector<std::string> failure_messages;
};

// Runs estimate_shift on R independent frames and compares against the Monte
// Carlo truth. Per-replication seeds derive from (seed, "rep", r), so the
// aggregate is deterministic and independent of the job count.
ReplicationReport replicate(const DgpSpec& dgp, const ShiftPolicy& policy, Eigen::Index n,
                            int R, const ReplicationOptions& options, std::uint64_t seed);

// Report serialization: cell,n,R,truth,mean_estimate,bias,sd,mean_se,coverage,ci_width.
std::string report_csv_string(const std::vector<ReplicationReport>& reports);
std::string report_json_string(const std::vector<ReplicationReport>& reports);
void write_report_csv(const std::vector<ReplicationReport>& reports, const std::string& path);
void write_report_json(const std::vector<ReplicationReport>& reports, const std::string& path);

}  // namespace mtp
