#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace mtp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// One cross-sectional slice of units: covariates W (n x p, p may be 0),
/// exposure A and outcome Y. All entries must be finite; missing-value
/// filtering happens upstream. Immutable after construction.
struct AnalysisFrame {
    std::vector<std::string> unit_ids;
    MatrixXd covariates;  // n x p
    VectorXd exposure;    // n
    VectorXd outcome;     // n

    Eigen::Index n() const { return exposure.size(); }
    Eigen::Index p() const { return covariates.cols(); }

    /// Throws DataError on any invariant violation (non-finite entries,
    /// mismatched lengths, n < 2).
    void validate() const;
};

/// Deterministic shift d(a): additive (a + value) or multiplicative
/// (value * a), optionally clamped to [clamp_lo, clamp_hi] afterwards.
struct ShiftPolicy {
    enum class Kind { Additive, Multiplicative };

    Kind kind = Kind::Additive;
    double value = 0.0;
    std::optional<double> clamp_lo;
    std::optional<double> clamp_hi;

    static ShiftPolicy additive(double c,
                                std::optional<double> lo = std::nullopt,
                                std::optional<double> hi = std::nullopt);
    static ShiftPolicy multiplicative(double k,
                                      std::optional<double> lo = std::nullopt,
                                      std::optional<double> hi = std::nullopt);
    static ShiftPolicy identity() { return additive(0.0); }

    bool is_identity() const;
    void validate() const;
    std::string describe() const;
};

/// d(a) with truncation at the clamp bounds.
double apply_shift(const ShiftPolicy& policy, double a);

/// Elementwise apply_shift plus the count of units that hit a clamp bound.
struct ShiftedExposure {
    VectorXd values;
    Eigen::Index truncated_count = 0;
};

ShiftedExposure shift_frame(const AnalysisFrame& frame, const ShiftPolicy& policy);

/// Affine map between the outcome's natural units and [0, 1].
struct OutcomeScaler {
    double y_min = 0.0;
    double y_max = 1.0;

    double scale(double y) const { return (y - y_min) / (y_max - y_min); }
    double unscale(double s) const { return y_min + s * (y_max - y_min); }
    VectorXd scale(const VectorXd& y) const;
    VectorXd unscale(const VectorXd& s) const;
};

/// Bounds default to the observed min/max; declared bounds take precedence
/// (useful for cross-slice comparability). Constant y without declared
/// bounds is a degenerate outcome and raises EstimationError.
OutcomeScaler fit_scaler(const VectorXd& y,
                         std::optional<std::pair<double, double>> declared_bounds = std::nullopt);

/// Result of one shift analysis: the shifted-mean estimate, the observed
/// mean, their difference with influence-curve inference, and positivity /
/// targeting diagnostics.
struct ShiftEstimate {
    double psi_shift = 0.0;     // estimated mean outcome under the shift
    double psi_observed = 0.0;  // empirical mean outcome
    double psi_delta = 0.0;     // psi_shift - psi_observed, set at construction
    double std_err = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double max_density_ratio = 1.0;
    double mean_density_ratio = 1.0;
    double score_residual = 0.0;  // |weighted targeting score| / n, scaled space
    Eigen::Index truncated_shift_count = 0;
    double shifted_out_of_support_fraction = 0.0;

    ShiftEstimate() = default;
    ShiftEstimate(double shift_mean, double observed_mean, double se);
};

}  // namespace mtp
