#include "mtp/detail/glm.hpp"

#include <algorithm>
#include <cmath>

namespace mtp::detail {

MatrixXd with_intercept(const MatrixXd& X) {
    MatrixXd Z(X.rows(), X.cols() + 1);
    Z.col(0).setOnes();
    if (X.cols() > 0) Z.rightCols(X.cols()) = X;
    return Z;
}

namespace {

bool solution_ok(const MatrixXd& A, const VectorXd& b, const VectorXd& beta) {
    if (!beta.allFinite()) return false;
    double resid = (A * beta - b).cwiseAbs().maxCoeff();
    double scale = A.cwiseAbs().maxCoeff() * beta.cwiseAbs().maxCoeff() + b.cwiseAbs().maxCoeff();
    return resid <= 1e-8 * (scale + 1.0);
}

}  // namespace

LeastSquaresFit weighted_least_squares(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                                       double ridge) {
    const MatrixXd WX = w.asDiagonal() * X;
    MatrixXd A = X.transpose() * WX;
    const VectorXd b = X.transpose() * (w.cwiseProduct(y));

    LeastSquaresFit out;
    const double tr = A.trace();
    if (ridge > 0.0) {
        A.diagonal().array() += ridge * (tr / static_cast<double>(A.rows()) + 1.0);
        out.coef = A.ldlt().solve(b);
        return out;
    }

    const auto ldlt = A.ldlt();
    out.coef = ldlt.solve(b);
    // A rank-deficient normal matrix can still yield a consistent system (the
    // target lies in the column span), so look at the pivots, not just the
    // residual: any non-positive or relatively tiny pivot means the solution
    // is not unique and the ridge-stabilized one should be reported.
    const VectorXd D = ldlt.vectorD();
    const bool rank_deficient =
        D.size() > 0 && !(D.minCoeff() > 1e-12 * D.cwiseAbs().maxCoeff());
    if (rank_deficient || !solution_ok(A, b, out.coef)) {
        MatrixXd Ar = A;
        Ar.diagonal().array() += 1e-8 * (tr / static_cast<double>(A.rows()) + 1.0);
        out.coef = Ar.ldlt().solve(b);
        out.ridge_fallback = true;
    }
    return out;
}

namespace {

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// Weighted mean log-loss; y may be any value in [0, 1].
double logistic_loss(const VectorXd& eta, const VectorXd& y, const VectorXd& w, double wsum) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        s += w[i] * (softplus(eta[i]) - y[i] * eta[i]);
    return s / wsum;
}

}  // namespace

IrlsFit logistic_irls(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                      const IrlsOptions& opt) {
    const Eigen::Index n = X.rows(), d = X.cols();
    IrlsFit fit;
    fit.coef = VectorXd::Zero(d);
    const double wsum = w.sum();

    VectorXd eta = VectorXd::Zero(n);
    double loss = logistic_loss(eta, y, w, wsum);
    fit.loss_trace.push_back(loss);

    for (int it = 0; it < opt.max_iter; ++it) {
        VectorXd p(n), h(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p[i] = expit(eta[i]);
            h[i] = w[i] * std::max(p[i] * (1.0 - p[i]), 1e-12);
        }
        const VectorXd grad = X.transpose() * (w.cwiseProduct(p - y));
        MatrixXd H = X.transpose() * (h.asDiagonal() * X);
        H.diagonal().array() += opt.ridge * (H.trace() / static_cast<double>(d) + 1.0);
        VectorXd delta = H.ldlt().solve(-grad);
        if (!delta.allFinite()) break;

        // Backtrack until the step does not increase the loss.
        double step = 1.0;
        VectorXd cand_eta, cand_coef;
        double cand_loss = loss;
        bool accepted = false;
        for (int half = 0; half < 30; ++half) {
            cand_coef = fit.coef + step * delta;
            cand_eta = X * cand_coef;
            cand_loss = logistic_loss(cand_eta, y, w, wsum);
            if (cand_loss <= loss + 1e-14 * (std::abs(loss) + 1.0)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        const double max_change = (step * delta).cwiseAbs().maxCoeff();
        fit.coef = cand_coef;
        eta = cand_eta;
        loss = std::min(cand_loss, loss);
        fit.loss_trace.push_back(loss);
        fit.iterations = it + 1;
        if (max_change < opt.tol) {
            fit.converged = true;
            break;
        }
    }
    return fit;
}

namespace {

double quantile_sorted(const std::vector<double>& v, double prob) {
    const double pos = prob * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const auto hi = static_cast<size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

inline double pos_cube(double x) { return x > 0.0 ? x * x * x : 0.0; }

}  // namespace

SplineBasis SplineBasis::fit(const MatrixXd& X, int interior_knots) {
    const Eigen::Index n = X.rows(), p = X.cols();
    SplineBasis b;
    b.center.resize(p);
    b.scale.resize(p);
    b.knots.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double mean = X.col(j).mean();
        const double var = (X.col(j).array() - mean).square().sum() / static_cast<double>(n);
        const double sd = std::sqrt(var);
        b.center[j] = mean;
        b.scale[j] = sd > 1e-12 ? sd : 1.0;
        if (sd <= 1e-12) continue;  // constant column: linear term only (zeros)

        std::vector<double> z(n);
        for (Eigen::Index i = 0; i < n; ++i) z[i] = (X(i, j) - b.center[j]) / b.scale[j];
        std::sort(z.begin(), z.end());

        std::vector<double> ks;
        ks.push_back(z.front());
        for (int k = 1; k <= interior_knots; ++k)
            ks.push_back(quantile_sorted(z, static_cast<double>(k) / (interior_knots + 1)));
        ks.push_back(z.back());
        std::sort(ks.begin(), ks.end());
        ks.erase(std::unique(ks.begin(), ks.end(),
                             [](double a, double c) { return std::abs(a - c) < 1e-10; }),
                 ks.end());
        if (ks.size() >= 3) b.knots[j] = std::move(ks);
    }
    return b;
}

Eigen::Index SplineBasis::output_dim() const {
    Eigen::Index d = 0;
    for (const auto& ks : knots)
        d += 1 + (ks.size() >= 3 ? static_cast<Eigen::Index>(ks.size()) - 2 : 0);
    return d;
}

MatrixXd SplineBasis::expand(const MatrixXd& X) const {
    const Eigen::Index n = X.rows(), p = X.cols();
    MatrixXd Z(n, output_dim());
    Eigen::Index col = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i < n; ++i)
            Z(i, col) = (X(i, j) - center[j]) / scale[j];
        const auto& ks = knots[j];
        const Eigen::Index zcol = col;
        ++col;
        if (ks.size() < 3) continue;
        const size_t K = ks.size();
        const double last = ks[K - 1], second_last = ks[K - 2];
        for (size_t k = 0; k + 2 < K; ++k) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const double z = Z(i, zcol);
                const double dk = (pos_cube(z - ks[k]) - pos_cube(z - last)) / (last - ks[k]);
                const double dlast =
                    (pos_cube(z - second_last) - pos_cube(z - last)) / (last - second_last);
                Z(i, col) = dk - dlast;
            }
            ++col;
        }
    }
    return Z;
}

}  // namespace mtp::detail
