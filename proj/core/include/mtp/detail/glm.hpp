#pragma once

#include <Eigen/Dense>
#include <vector>

namespace mtp::detail {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

MatrixXd with_intercept(const MatrixXd& X);

struct LeastSquaresFit {
    VectorXd coef;
    bool ridge_fallback = false;
};

// Solves the weighted normal equations; if the exact solve is singular or
// numerically unusable, re-solves with a small ridge term and flags it.
LeastSquaresFit weighted_least_squares(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                                       double ridge = 0.0);

struct IrlsOptions {
    int max_iter = 50;
    double tol = 1e-8;     // max absolute coefficient change
    double ridge = 1e-8;   // jitter on the normal equations
};

struct IrlsFit {
    VectorXd coef;
    int iterations = 0;
    bool converged = false;
    std::vector<double> loss_trace;  // weighted log-loss per iteration, nonincreasing
};

// Newton/IRLS for weighted logistic regression with step halving. X must
// already contain any intercept column. Accepts targets in [0, 1].
IrlsFit logistic_irls(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                      const IrlsOptions& opt = {});

// Per-covariate natural cubic spline expansion with knots at training
// quantiles; covariates are standardized internally before knot placement.
struct SplineBasis {
    std::vector<double> center;
    std::vector<double> scale;
    std::vector<std::vector<double>> knots;  // per covariate, in standardized units

    static SplineBasis fit(const MatrixXd& X, int interior_knots);
    MatrixXd expand(const MatrixXd& X) const;  // no intercept column
    Eigen::Index output_dim() const;
};

}  // namespace mtp::detail
