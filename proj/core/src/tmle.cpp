#include "mtp/tmle.hpp"

#include <algorithm>
#include <cmath>

#include "mtp/detail/glm.hpp"
#include "mtp/errors.hpp"
#include "mtp/rng.hpp"

namespace mtp {

TargetResult target_step(const VectorXd& q, const VectorXd& y, const VectorXd& ratios,
                         int max_iter, double tol) {
    const Eigen::Index n = q.size();
    if (y.size() != n || ratios.size() != n)
        throw DataError("targeting inputs have mismatched lengths");
    if (n == 0) throw DataError("targeting called with no observations");

    VectorXd logits(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(q[i] > 0.0 && q[i] < 1.0))
            throw EstimationError("targeting requires initial predictions strictly inside (0, 1)");
        logits[i] = detail::logit(q[i]);
    }

    const double nn = static_cast<double>(n);
    auto mean_score = [&](double eps, double* curvature) {
        double f = 0.0, h = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double p = detail::expit(logits[i] + eps);
            f += ratios[i] * (y[i] - p);
            h += ratios[i] * p * (1.0 - p);
        }
        if (curvature) *curvature = h;
        return f / nn;
    };

    TargetResult out;
    double eps = 0.0;
    double h = 0.0;
    double score = mean_score(eps, &h);
    double best_eps = eps, best_abs = std::abs(score);
    for (int it = 0; it < max_iter; ++it) {
        if (best_abs == 0.0) break;
        if (h <= 0.0) break;
        double step = score * nn / h;
        step = std::clamp(step, -10.0, 10.0);
        eps += step;
        score = mean_score(eps, &h);
        out.iterations = it + 1;
        if (std::abs(score) < best_abs) {
            best_abs = std::abs(score);
            best_eps = eps;
        } else {
            break;  // no further progress at this precision
        }
        if (std::abs(step) < 1e-14) break;
    }
    out.epsilon = best_eps;
    out.score_residual = best_abs;
    if (!(out.score_residual <= tol))
        throw EstimationError("targeting did not converge: |mean score| = " +
                              std::to_string(out.score_residual) + " after " +
                              std::to_string(out.iterations) + " iterations");
    return out;
}

VectorXd influence_curve(const VectorXd& y, const VectorXd& q_nat, const VectorXd& q_shift,
                         const VectorXd& ratios, double psi_shift) {
    const Eigen::Index n = y.size();
    if (q_nat.size() != n || q_shift.size() != n || ratios.size() != n)
        throw DataError("influence curve inputs have mismatched lengths");
    const double ybar = y.mean();
    VectorXd ic(n);
    for (Eigen::Index i = 0; i < n; ++i)
        ic[i] = ratios[i] * (y[i] - q_nat[i]) + q_shift[i] - psi_shift - (y[i] - ybar);
    return ic;
}

WaldInterval wald_interval(const VectorXd& influence, double center) {
    const double n = static_cast<double>(influence.size());
    if (n == 0.0) throw DataError("empty influence vector");
    WaldInterval w;
    w.std_err = std::sqrt(influence.squaredNorm()) / n;
    w.lo = center - 1.96 * w.std_err;
    w.hi = center + 1.96 * w.std_err;
    return w;
}

namespace {

MatrixXd design_matrix(const AnalysisFrame& frame, const VectorXd& exposure) {
    MatrixXd X(frame.n(), 1 + frame.p());
    X.col(0) = exposure;
    if (frame.p() > 0) X.rightCols(frame.p()) = frame.covariates;
    return X;
}

VectorXd clip_unit(VectorXd v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i], 1e-4, 1.0 - 1e-4);
    return v;
}

VectorXd fluctuate(const VectorXd& q, double eps) {
    VectorXd out(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i)
        out[i] = detail::expit(detail::logit(q[i]) + eps);
    return out;
}

}  // namespace

ShiftFit estimate_shift_full(const AnalysisFrame& frame, const ShiftPolicy& policy,
                             std::uint64_t seed, const EstimatorOptions& options) {
    frame.validate();
    policy.validate();

    ShiftFit fit;
    const ShiftedExposure shifted = shift_frame(frame, policy);
    fit.ratio_fit = estimate_density_ratio(frame, shifted.values, mix_seed(seed, "ratio"),
                                           options.density_ratio);

    const OutcomeScaler scaler = fit_scaler(frame.outcome, options.outcome_bounds);
    const VectorXd y_scaled = scaler.scale(frame.outcome);

    std::vector<LearnerSpec> library = options.outcome_library;
    if (library.empty()) library = default_library(Task::Regression);
    for (const auto& spec : library)
        if (spec.task != Task::Regression)
            throw ConfigError("outcome learner '" + spec.name + "' must be a regression learner");

    const MatrixXd X_nat = design_matrix(frame, frame.exposure);
    const MatrixXd X_shift = design_matrix(frame, shifted.values);
    fit.outcome_fit = fit_super_learner(library, X_nat, y_scaled, nullptr,
                                        mix_seed(seed, "outcome"), options.outcome_super_learner);

    const VectorXd q_nat = clip_unit(fit.outcome_fit.predict(X_nat));
    const VectorXd q_shift = clip_unit(fit.outcome_fit.predict(X_shift));

    fit.target = target_step(q_nat, y_scaled, fit.ratio_fit.ratios,
                             options.max_target_iterations, options.target_tolerance);

    const VectorXd q_nat_star = scaler.unscale(fluctuate(q_nat, fit.target.epsilon));
    const VectorXd q_shift_star = scaler.unscale(fluctuate(q_shift, fit.target.epsilon));

    const double psi_shift = q_shift_star.mean();
    const double psi_observed = frame.outcome.mean();
    fit.influence = influence_curve(frame.outcome, q_nat_star, q_shift_star,
                                    fit.ratio_fit.ratios, psi_shift);
    const WaldInterval wald = wald_interval(fit.influence, psi_shift - psi_observed);

    fit.estimate = ShiftEstimate(psi_shift, psi_observed, wald.std_err);
    fit.estimate.max_density_ratio = fit.ratio_fit.max_ratio;
    fit.estimate.mean_density_ratio = fit.ratio_fit.mean_ratio;
    fit.estimate.score_residual = fit.target.score_residual;
    fit.estimate.truncated_shift_count = shifted.truncated_count;

    const double a_lo = frame.exposure.minCoeff(), a_hi = frame.exposure.maxCoeff();
    Eigen::Index outside = 0;
    for (Eigen::Index i = 0; i < shifted.values.size(); ++i)
        if (shifted.values[i] < a_lo || shifted.values[i] > a_hi) ++outside;
    fit.estimate.shifted_out_of_support_fraction =
        static_cast<double>(outside) / static_cast<double>(frame.n());
    return fit;
}

ShiftEstimate estimate_shift(const AnalysisFrame& frame, const ShiftPolicy& policy,
                             std::uint64_t seed, const EstimatorOptions& options) {
    return estimate_shift_full(frame, policy, seed, options).estimate;
}

}  // namespace mtp
