#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "mtp/core.hpp"
#include "mtp/density_ratio.hpp"
#include "mtp/super_learner.hpp"

namespace mtp {

struct EstimatorOptions {
    // Outcome-regression candidates; empty means the default regression library.
    std::vector<LearnerSpec> outcome_library;
    SuperLearnerOptions outcome_super_learner;
    DensityRatioOptions density_ratio;
    // Known outcome range; defaults to the observed min/max.
    std::optional<std::pair<double, double>> outcome_bounds;
    int max_target_iterations = 100;
    // Hard failure threshold on |mean weighted score| after targeting.
    double target_tolerance = 1e-8;
};

struct TargetResult {
    double epsilon = 0.0;
    int iterations = 0;
    double score_residual = 0.0;  // |sum_i r_i (y_i - q_i)| / n at the solution
};

// Intercept-only logistic fluctuation: solves for the epsilon such that the
// ratio-weighted residuals of expit(logit(q) + epsilon) against y sum to
// (numerically) zero. q and y live on the [0, 1] scale; q must already be
// clipped away from {0, 1}. Throws EstimationError if Newton cannot push the
// mean score below `tol` within `max_iter` steps.
TargetResult target_step(const VectorXd& q, const VectorXd& y, const VectorXd& ratios,
                         int max_iter = 100, double tol = 1e-8);

// Everything produced while estimating one shift on one frame.
struct ShiftFit {
    ShiftEstimate estimate;
    SuperLearnerFit outcome_fit;
    DensityRatioFit ratio_fit;
    TargetResult target;
    VectorXd influence;  // per-observation influence values, original outcome scale
};

// Targeted estimate of the population mean outcome under the shift policy,
// with its contrast against the observed mean.
//
// Pipeline: shift the exposure; estimate the density ratio of shifted vs
// observed exposure by classification; regress the scaled outcome on
// (exposure, covariates) with a cross-validated ensemble; run the weighted
// intercept fluctuation; average the fluctuated predictions at the shifted
// exposure; report the delta with an influence-curve standard error and a
// 95% Wald interval.
ShiftFit estimate_shift_full(const AnalysisFrame& frame, const ShiftPolicy& policy,
                             std::uint64_t seed, const EstimatorOptions& options = {});

ShiftEstimate estimate_shift(const AnalysisFrame& frame, const ShiftPolicy& policy,
                             std::uint64_t seed, const EstimatorOptions& options = {});

// Influence values for the delta contrast: r * (y - q_nat) + q_shift -
// psi_shift - (y - mean(y)), all on the original outcome scale.
VectorXd influence_curve(const VectorXd& y, const VectorXd& q_nat, const VectorXd& q_shift,
                         const VectorXd& ratios, double psi_shift);

// Standard error and 95% interval from influence values: se = sqrt(sum
// ic_i^2) / n, interval = center +/- 1.96 se.
struct WaldInterval {
    double std_err = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};
WaldInterval wald_interval(const VectorXd& influence, double center);

}  // namespace mtp
