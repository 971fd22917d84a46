#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "mtp/errors.hpp"
#include "mtp/tmle.hpp"

using namespace mtp;

namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

EstimatorOptions fast_options() {
    EstimatorOptions opt;
    opt.outcome_library = {LearnerSpec{"mean", "mean", Task::Regression, {}},
                           LearnerSpec{"ols", "linear", Task::Regression, {}}};
    opt.density_ratio.library = {LearnerSpec{"logit", "logistic", Task::BinaryProbability, {}}};
    return opt;
}

}  // namespace

TEST_CASE("fluctuation recovers a known offset") {
    // y = expit(logit(q) + 0.3) exactly, so the solution is epsilon = 0.3.
    const double delta = 0.3;
    VectorXd q0(5), q(5), y(5), r(5);
    q0 << 0.2, 0.35, 0.5, 0.65, 0.8;
    for (Eigen::Index i = 0; i < 5; ++i) {
        y[i] = q0[i];
        q[i] = expit(logit(q0[i]) - delta);
        r[i] = 1.0 + 0.25 * static_cast<double>(i);
    }
    const auto res = target_step(q, y, r);
    CHECK(res.epsilon == doctest::Approx(delta).epsilon(1e-8));
    CHECK(res.score_residual < 1e-12);
    CHECK(res.iterations >= 1);
}

TEST_CASE("zero residuals leave epsilon at zero") {
    VectorXd q = VectorXd::Constant(8, 0.5);
    VectorXd r = VectorXd::Ones(8);
    const auto res = target_step(q, q, r);
    CHECK(res.epsilon == 0.0);
    CHECK(res.score_residual == 0.0);
    CHECK(res.iterations == 0);

    // same with a generic vector, up to float roundtrip error
    VectorXd q2(4);
    q2 << 0.1, 0.4, 0.6, 0.93;
    const auto res2 = target_step(q2, q2, r.head(4));
    CHECK(std::abs(res2.epsilon) < 1e-10);
}

TEST_CASE("doubling the ratios does not move the solution") {
    VectorXd q(4), y(4), r(4);
    q << 0.3, 0.5, 0.6, 0.7;
    y << 0.0, 1.0, 0.25, 0.9;
    r << 1.0, 2.0, 0.5, 1.5;
    const auto a = target_step(q, y, r);
    const VectorXd r2 = 2.0 * r;
    const auto b = target_step(q, y, r2);
    CHECK(a.epsilon == b.epsilon);  // exact: every intermediate scales by a power of two
}

TEST_CASE("targeting input validation") {
    VectorXd q(3), y(3), r(3);
    q << 0.2, 0.5, 0.8;
    y << 0.1, 0.5, 0.9;
    r.setOnes();
    VectorXd bad = q;
    bad[1] = 1.0;
    CHECK_THROWS_AS(target_step(bad, y, r), EstimationError);
    bad[1] = 0.0;
    CHECK_THROWS_AS(target_step(bad, y, r), EstimationError);
    CHECK_THROWS_AS(target_step(q, y.head(2), r), DataError);
    CHECK_THROWS_AS(target_step(VectorXd(), VectorXd(), VectorXd()), DataError);
}

TEST_CASE("influence values match the hand formula") {
    VectorXd y(2), q_nat(2), q_shift(2), r(2);
    y << 1.0, 3.0;
    q_nat << 0.5, 2.0;
    q_shift << 2.0, 4.0;
    r << 1.0, 2.0;
    const VectorXd ic = influence_curve(y, q_nat, q_shift, r, 3.0);
    // mean(y) = 2: ic_0 = 0.5 + 2 - 3 - (-1), ic_1 = 2 + 4 - 3 - 1
    CHECK(ic[0] == doctest::Approx(0.5));
    CHECK(ic[1] == doctest::Approx(2.0));
    CHECK_THROWS_AS(influence_curve(y, q_nat.head(1), q_shift, r, 3.0), DataError);
}

TEST_CASE("wald interval from a two-point influence vector") {
    VectorXd ic(2);
    ic << -1.0, 1.0;
    const auto w = wald_interval(ic, 0.0);
    CHECK(w.std_err == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
    CHECK(w.lo == doctest::Approx(-1.96 * std::sqrt(2.0) / 2.0).epsilon(1e-12));
    CHECK(w.hi == doctest::Approx(+1.96 * std::sqrt(2.0) / 2.0).epsilon(1e-12));
    const auto shifted = wald_interval(ic, 0.5);
    CHECK(shifted.lo == doctest::Approx(0.5 - 1.96 * w.std_err));
    CHECK_THROWS_AS(wald_interval(VectorXd(), 0.0), DataError);
}

TEST_CASE("full estimate is internally consistent") {
    auto frame = testutil::random_frame(300, 2, 101);
    const auto fit = estimate_shift_full(frame, ShiftPolicy::additive(0.5), 7, fast_options());
    const auto& est = fit.estimate;

    CHECK(est.psi_delta == doctest::Approx(est.psi_shift - est.psi_observed).epsilon(1e-12));
    CHECK(est.psi_observed == doctest::Approx(frame.outcome.mean()).epsilon(1e-12));
    CHECK(est.psi_shift >= frame.outcome.minCoeff());
    CHECK(est.psi_shift <= frame.outcome.maxCoeff());
    CHECK(est.std_err > 0.0);
    CHECK(est.ci_lo == doctest::Approx(est.psi_delta - 1.96 * est.std_err));
    CHECK(est.ci_hi == doctest::Approx(est.psi_delta + 1.96 * est.std_err));
    CHECK(est.score_residual < 1e-8);
    CHECK(std::abs(fit.influence.mean()) < 1e-6);
    CHECK(est.max_density_ratio >= est.mean_density_ratio);
    CHECK(est.mean_density_ratio > 0.0);
    CHECK(est.truncated_shift_count == 0);
    CHECK(fit.ratio_fit.ratios.size() == frame.n());

    // positive additive shift on a positively sloped outcome moves the mean up
    CHECK(est.psi_delta > 0.5);
    CHECK(est.psi_delta < 1.5);
}

TEST_CASE("identity policy estimates an exact zero contrast") {
    auto frame = testutil::random_frame(200, 3, 103);
    const auto est = estimate_shift(frame, ShiftPolicy::identity(), 11, fast_options());
    CHECK(std::abs(est.psi_delta) < 1e-8);
    CHECK(est.score_residual < 1e-8);
}

TEST_CASE("clamped shifts report the truncation count") {
    auto frame = testutil::random_frame(150, 1, 107);
    const double cap = frame.exposure.maxCoeff() - 0.5;
    const auto policy = ShiftPolicy::additive(1.0, std::nullopt, cap);
    const auto shifted = shift_frame(frame, policy);
    REQUIRE(shifted.truncated_count > 0);
    const auto est = estimate_shift(frame, policy, 13, fast_options());
    CHECK(est.truncated_shift_count == shifted.truncated_count);
    CHECK(est.shifted_out_of_support_fraction >= 0.0);
    CHECK(est.shifted_out_of_support_fraction <= 1.0);
}

TEST_CASE("same seed gives the same estimate, and the short form matches") {
    auto frame = testutil::random_frame(180, 2, 109);
    const auto policy = ShiftPolicy::additive(0.3);
    const auto a = estimate_shift_full(frame, policy, 21, fast_options());
    const auto b = estimate_shift_full(frame, policy, 21, fast_options());
    CHECK(a.estimate.psi_delta == b.estimate.psi_delta);
    CHECK(a.estimate.std_err == b.estimate.std_err);
    const auto c = estimate_shift(frame, policy, 21, fast_options());
    CHECK(c.psi_delta == a.estimate.psi_delta);
}

TEST_CASE("binary outcome learners are rejected") {
    auto frame = testutil::random_frame(60, 1, 113);
    EstimatorOptions opt = fast_options();
    opt.outcome_library = {LearnerSpec{"logit", "logistic", Task::BinaryProbability, {}}};
    CHECK_THROWS_AS(estimate_shift(frame, ShiftPolicy::additive(0.1), 3, opt), ConfigError);
}

TEST_CASE("declared outcome bounds widen the plug-in range") {
    auto frame = testutil::random_frame(120, 1, 127);
    EstimatorOptions opt = fast_options();
    opt.outcome_bounds = {frame.outcome.minCoeff() - 5.0, frame.outcome.maxCoeff() + 5.0};
    const auto est = estimate_shift(frame, ShiftPolicy::additive(0.5), 17, opt);
    CHECK(est.psi_shift >= opt.outcome_bounds->first);
    CHECK(est.psi_shift <= opt.outcome_bounds->second);
    CHECK(std::isfinite(est.std_err));
}
