#include "mtp/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mtp/errors.hpp"

namespace mtp {

void AnalysisFrame::validate() const {
    const Eigen::Index rows = exposure.size();
    if (rows < 2) throw DataError("AnalysisFrame: need at least 2 units, got " + std::to_string(rows));
    if (outcome.size() != rows)
        throw DataError("AnalysisFrame: outcome length " + std::to_string(outcome.size()) +
                        " != exposure length " + std::to_string(rows));
    if (covariates.rows() != rows)
        throw DataError("AnalysisFrame: covariate rows " + std::to_string(covariates.rows()) +
                        " != n " + std::to_string(rows));
    if (!unit_ids.empty() && static_cast<Eigen::Index>(unit_ids.size()) != rows)
        throw DataError("AnalysisFrame: unit_ids length != n");
    if (!exposure.allFinite()) throw DataError("AnalysisFrame: non-finite exposure value");
    if (!outcome.allFinite()) throw DataError("AnalysisFrame: non-finite outcome value");
    if (covariates.size() > 0 && !covariates.allFinite())
        throw DataError("AnalysisFrame: non-finite covariate value");
}

ShiftPolicy ShiftPolicy::additive(double c, std::optional<double> lo, std::optional<double> hi) {
    ShiftPolicy p;
    p.kind = Kind::Additive;
    p.value = c;
    p.clamp_lo = lo;
    p.clamp_hi = hi;
    p.validate();
    return p;
}

ShiftPolicy ShiftPolicy::multiplicative(double k, std::optional<double> lo, std::optional<double> hi) {
    ShiftPolicy p;
    p.kind = Kind::Multiplicative;
    p.value = k;
    p.clamp_lo = lo;
    p.clamp_hi = hi;
    p.validate();
    return p;
}

bool ShiftPolicy::is_identity() const {
    return (kind == Kind::Additive && value == 0.0) ||
           (kind == Kind::Multiplicative && value == 1.0);
}

void ShiftPolicy::validate() const {
    if (!std::isfinite(value)) throw ConfigError("ShiftPolicy: non-finite shift value");
    if (kind == Kind::Multiplicative && value <= 0.0)
        throw ConfigError("ShiftPolicy: multiplicative factor must be > 0");
    if (clamp_lo && clamp_hi && !(*clamp_lo < *clamp_hi))
        throw ConfigError("ShiftPolicy: clamp_lo must be < clamp_hi");
}

std::string ShiftPolicy::describe() const {
    std::ostringstream os;
    os << (kind == Kind::Additive ? "additive " : "multiplicative ") << value;
    if (clamp_lo) os << " lo=" << *clamp_lo;
    if (clamp_hi) os << " hi=" << *clamp_hi;
    return os.str();
}

double apply_shift(const ShiftPolicy& policy, double a) {
    double d = policy.kind == ShiftPolicy::Kind::Additive ? a + policy.value : policy.value * a;
    if (policy.clamp_lo && d < *policy.clamp_lo) d = *policy.clamp_lo;
    if (policy.clamp_hi && d > *policy.clamp_hi) d = *policy.clamp_hi;
    return d;
}

ShiftedExposure shift_frame(const AnalysisFrame& frame, const ShiftPolicy& policy) {
    ShiftedExposure out;
    const Eigen::Index n = frame.n();
    out.values.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double a = frame.exposure[i];
        const double raw = policy.kind == ShiftPolicy::Kind::Additive ? a + policy.value
                                                                      : policy.value * a;
        double d = raw;
        if (policy.clamp_lo && d < *policy.clamp_lo) d = *policy.clamp_lo;
        if (policy.clamp_hi && d > *policy.clamp_hi) d = *policy.clamp_hi;
        if (d != raw) ++out.truncated_count;
        out.values[i] = d;
    }
    return out;
}

VectorXd OutcomeScaler::scale(const VectorXd& y) const {
    return (y.array() - y_min) / (y_max - y_min);
}

VectorXd OutcomeScaler::unscale(const VectorXd& s) const {
    return y_min + s.array() * (y_max - y_min);
}

OutcomeScaler fit_scaler(const VectorXd& y, std::optional<std::pair<double, double>> declared_bounds) {
    OutcomeScaler sc;
    if (declared_bounds) {
        sc.y_min = declared_bounds->first;
        sc.y_max = declared_bounds->second;
    } else {
        sc.y_min = y.minCoeff();
        sc.y_max = y.maxCoeff();
    }
    if (!(sc.y_min < sc.y_max))
        throw EstimationError("fit_scaler: degenerate outcome (constant y and no declared bounds)");
    return sc;
}

ShiftEstimate::ShiftEstimate(double shift_mean, double observed_mean, double se)
    : psi_shift(shift_mean),
      psi_observed(observed_mean),
      psi_delta(shift_mean - observed_mean),
      std_err(se),
      ci_lo(psi_delta - 1.96 * se),
      ci_hi(psi_delta + 1.96 * se) {}

}  // namespace mtp
