#include "mtp/super_learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mtp/errors.hpp"
#include "mtp/rng.hpp"

namespace mtp {

void FoldAssignment::validate(Eigen::Index n) const {
    if (V < 2) throw ConfigError("fold count must be at least 2");
    if (static_cast<Eigen::Index>(fold_of.size()) != n)
        throw DataError("fold assignment covers " + std::to_string(fold_of.size()) +
                        " rows, expected " + std::to_string(n));
    for (int f : fold_of)
        if (f < 0 || f >= V) throw DataError("fold label out of range");
}

FoldAssignment make_folds(Eigen::Index n, int V, std::uint64_t seed) {
    if (V < 2) throw ConfigError("fold count must be at least 2");
    if (n < V) throw ConfigError("cannot split " + std::to_string(n) + " rows into " +
                                 std::to_string(V) + " folds");
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    auto rng = make_rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    FoldAssignment fa;
    fa.V = V;
    fa.fold_of.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) fa.fold_of[order[j]] = static_cast<int>(j % V);
    return fa;
}

FoldAssignment make_group_folds(const std::vector<std::int64_t>& groups, int V,
                                std::uint64_t seed) {
    std::vector<std::int64_t> uniq(groups);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    const auto g = static_cast<Eigen::Index>(uniq.size());
    FoldAssignment per_group = make_folds(g, V, seed);
    FoldAssignment fa;
    fa.V = V;
    fa.fold_of.resize(groups.size());
    for (size_t i = 0; i < groups.size(); ++i) {
        const auto it = std::lower_bound(uniq.begin(), uniq.end(), groups[i]);
        fa.fold_of[i] = per_group.fold_of[it - uniq.begin()];
    }
    return fa;
}

namespace {

double clip01(double p) { return std::clamp(p, 1e-6, 1.0 - 1e-6); }

double mix_risk(const MatrixXd& Z, const VectorXd& y, const VectorXd& w, const VectorXd& alpha,
                Task task) {
    const VectorXd m = Z * alpha;
    double s = 0.0;
    if (task == Task::Regression) {
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double r = m[i] - y[i];
            s += w[i] * r * r;
        }
    } else {
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double p = clip01(m[i]);
            s += -w[i] * (y[i] * std::log(p) + (1.0 - y[i]) * std::log1p(-p));
        }
    }
    return s / w.sum();
}

VectorXd mix_gradient(const MatrixXd& Z, const VectorXd& y, const VectorXd& w,
                      const VectorXd& alpha, Task task) {
    const VectorXd m = Z * alpha;
    VectorXd dldm(y.size());
    if (task == Task::Regression) {
        for (Eigen::Index i = 0; i < y.size(); ++i) dldm[i] = 2.0 * (m[i] - y[i]);
    } else {
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double p = clip01(m[i]);
            dldm[i] = (p - y[i]) / (p * (1.0 - p));
        }
    }
    return Z.transpose() * (w.cwiseProduct(dldm)) / w.sum();
}

VectorXd softmax(const VectorXd& log_a) {
    VectorXd a = (log_a.array() - log_a.maxCoeff()).exp();
    return a / a.sum();
}

std::vector<Eigen::Index> row_complement(const FoldAssignment& fa, int v, bool in_fold) {
    std::vector<Eigen::Index> rows;
    for (size_t i = 0; i < fa.fold_of.size(); ++i)
        if ((fa.fold_of[i] == v) == in_fold) rows.push_back(static_cast<Eigen::Index>(i));
    return rows;
}

}  // namespace

SuperLearnerFit fit_super_learner(const std::vector<LearnerSpec>& library, const MatrixXd& X,
                                  const VectorXd& y, const VectorXd* weights, std::uint64_t seed,
                                  const SuperLearnerOptions& options,
                                  const std::vector<std::int64_t>* groups) {
    FoldAssignment fa = make_folds(X.rows(), options.folds, mix_seed(seed, "folds"));
    return fit_super_learner(library, X, y, weights, seed, fa, options, groups);
}

SuperLearnerFit fit_super_learner(const std::vector<LearnerSpec>& library, const MatrixXd& X,
                                  const VectorXd& y, const VectorXd* weights, std::uint64_t seed,
                                  const FoldAssignment& folds, const SuperLearnerOptions& options,
                                  const std::vector<std::int64_t>* groups) {
    const Eigen::Index n = X.rows();
    const auto K = static_cast<Eigen::Index>(library.size());
    if (K == 0) throw ConfigError("super learner: empty candidate library");
    if (y.size() != n) throw DataError("super learner: outcome length mismatch");
    if (weights && weights->size() != n) throw DataError("super learner: weight length mismatch");
    folds.validate(n);

    std::set<std::string> names;
    for (const auto& spec : library) {
        if (spec.task != library.front().task)
            throw ConfigError("super learner: candidates mix regression and probability tasks");
        if (!names.insert(spec.name).second)
            throw ConfigError("super learner: duplicate candidate name '" + spec.name + "'");
    }

    SuperLearnerFit fit;
    fit.task = library.front().task;
    fit.library = library;
    fit.folds = folds;
    fit.models.resize(K);
    fit.cv_predictions.resize(n, K);
    fit.cv_risks.assign(K, 0.0);

    const VectorXd w = weights ? *weights : VectorXd::Ones(n);
    const bool binary = fit.task == Task::BinaryProbability;

    std::vector<bool> failed(K, false);
    for (Eigen::Index k = 0; k < K; ++k) {
        const LearnerSpec& spec = library[k];
        const std::uint64_t cand_seed = mix_seed(mix_seed(seed, "candidate"), spec.name);
        for (int v = 0; v < folds.V; ++v) {
            const auto train = row_complement(folds, v, false);
            const auto test = row_complement(folds, v, true);
            if (test.empty()) continue;
            if (train.empty()) throw ConfigError("super learner: a fold contains every row");
            const MatrixXd Xt = X(train, Eigen::all);
            const VectorXd yt = y(train);
            const VectorXd wt = w(train);
            std::vector<std::int64_t> gt;
            if (groups)
                for (auto r : train) gt.push_back((*groups)[r]);
            try {
                FittedModel m = fit_learner(spec, Xt, yt, &wt,
                                            mix_seed(cand_seed, static_cast<std::uint64_t>(v)),
                                            groups ? &gt : nullptr);
                const VectorXd pred = m.predict(X(test, Eigen::all));
                for (size_t j = 0; j < test.size(); ++j) fit.cv_predictions(test[j], k) = pred[j];
            } catch (const std::exception& e) {
                if (!failed[k])
                    fit.warnings.push_back("candidate '" + spec.name + "' dropped: " + e.what());
                failed[k] = true;
                double mean = wt.dot(yt) / wt.sum();
                if (binary) mean = clip01(mean);
                for (auto r : test) fit.cv_predictions(r, k) = mean;
            }
        }
        if (!failed[k]) {
            try {
                fit.models[k] = fit_learner(spec, X, y, &w, mix_seed(cand_seed, "full"), groups);
            } catch (const std::exception& e) {
                fit.warnings.push_back("candidate '" + spec.name + "' dropped at refit: " +
                                       e.what());
                failed[k] = true;
            }
        }
    }

    std::vector<Eigen::Index> ok;
    for (Eigen::Index k = 0; k < K; ++k) {
        VectorXd one = VectorXd::Zero(K);
        one[k] = 1.0;
        fit.cv_risks[k] = mix_risk(fit.cv_predictions, y, w, one, fit.task);
        if (!failed[k]) ok.push_back(k);
    }
    if (ok.empty()) throw EstimationError("super learner: every candidate fit failed");

    // Exponentiated-gradient weight fit over the surviving candidates.
    const auto Kok = static_cast<Eigen::Index>(ok.size());
    const MatrixXd Zok = fit.cv_predictions(Eigen::all, ok);
    VectorXd log_a = VectorXd::Constant(Kok, -std::log(static_cast<double>(Kok)));
    VectorXd alpha = softmax(log_a);
    for (int t = 0; t < options.eg_iterations; ++t) {
        const VectorXd g = mix_gradient(Zok, y, w, alpha, fit.task);
        log_a -= options.eg_step * g;
        const VectorXd next = softmax(log_a);
        const double change = (next - alpha).cwiseAbs().maxCoeff();
        alpha = next;
        if (change < options.eg_tol) break;
    }

    Eigen::Index best = ok.front();
    for (Eigen::Index k : ok) {
        if (fit.cv_risks[k] < fit.cv_risks[best] ||
            (fit.cv_risks[k] == fit.cv_risks[best] && library[k].name < library[best].name))
            best = k;
    }

    const double eg_risk = mix_risk(Zok, y, w, alpha, fit.task);
    fit.weights = VectorXd::Zero(K);
    if (eg_risk > fit.cv_risks[best]) {
        // The fixed-step weight fit stalled short of a vertex; use the best
        // single candidate so the ensemble never loses to its own library.
        fit.used_best_single = true;
        fit.weights[best] = 1.0;
        VectorXd one = VectorXd::Zero(K);
        one[best] = 1.0;
        fit.ensemble_cv_risk = mix_risk(fit.cv_predictions, y, w, one, fit.task);
    } else {
        for (Eigen::Index j = 0; j < Kok; ++j) fit.weights[ok[j]] = alpha[j];
        fit.ensemble_cv_risk = eg_risk;
    }
    fit.weights /= fit.weights.sum();
    return fit;
}

VectorXd SuperLearnerFit::predict(const MatrixXd& X) const {
    VectorXd out = VectorXd::Zero(X.rows());
    for (size_t k = 0; k < library.size(); ++k) {
        if (weights[static_cast<Eigen::Index>(k)] == 0.0) continue;
        out += weights[static_cast<Eigen::Index>(k)] * models[k].predict(X);
    }
    if (task == Task::BinaryProbability)
        for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = clip01(out[i]);
    return out;
}

}  // namespace mtp
