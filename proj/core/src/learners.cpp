#include "mtp/learners.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

#include "mtp/detail/glm.hpp"
#include "mtp/detail/tree.hpp"
#include "mtp/errors.hpp"
#include "mtp/rng.hpp"

namespace mtp {

namespace detail {

struct Model {
    virtual ~Model() = default;
    virtual VectorXd predict(const MatrixXd& X) const = 0;
};

namespace {

struct ConstModel final : Model {
    double value = 0.0;
    VectorXd predict(const MatrixXd& X) const override {
        return VectorXd::Constant(X.rows(), value);
    }
};

struct LinearModel final : Model {
    VectorXd coef;  // over [1, X]
    VectorXd predict(const MatrixXd& X) const override { return with_intercept(X) * coef; }
};

struct LogisticModel final : Model {
    VectorXd coef;
    VectorXd predict(const MatrixXd& X) const override {
        VectorXd eta = with_intercept(X) * coef;
        for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = expit(eta[i]);
        return eta;
    }
};

struct GamModel final : Model {
    SplineBasis basis;
    VectorXd coef;
    bool binary = false;
    VectorXd predict(const MatrixXd& X) const override {
        VectorXd eta = with_intercept(basis.expand(X)) * coef;
        if (binary)
            for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = expit(eta[i]);
        return eta;
    }
};

struct ForestModel final : Model {
    RandomForest forest;
    VectorXd predict(const MatrixXd& X) const override { return forest.predict(X); }
};

struct BoostModel final : Model {
    BoostedTrees boost;
    VectorXd predict(const MatrixXd& X) const override { return boost.predict(X); }
};

}  // namespace

}  // namespace detail

FittedModel::FittedModel(std::shared_ptr<const detail::Model> impl, Task task,
                         Eigen::Index n_features, bool ridge_fallback)
    : impl_(std::move(impl)),
      task_(task),
      n_features_(n_features),
      ridge_fallback_(ridge_fallback) {}

VectorXd FittedModel::predict(const MatrixXd& X) const {
    if (!impl_) throw EstimationError("predict called on an empty model");
    if (X.cols() != n_features_)
        throw DataError("prediction matrix has " + std::to_string(X.cols()) +
                        " columns, model was trained with " + std::to_string(n_features_));
    VectorXd out = impl_->predict(X);
    if (task_ == Task::BinaryProbability)
        for (Eigen::Index i = 0; i < out.size(); ++i)
            out[i] = std::clamp(out[i], 1e-6, 1.0 - 1e-6);
    return out;
}

namespace {

class HyperParams {
  public:
    HyperParams(const LearnerSpec& spec, std::initializer_list<const char*> allowed)
        : spec_(spec) {
        for (const auto& [key, value] : spec.hyperparameters) {
            if (std::find_if(allowed.begin(), allowed.end(),
                             [&](const char* a) { return key == a; }) == allowed.end())
                throw ConfigError("learner '" + spec.name + "': unknown hyperparameter '" + key +
                                  "'");
            (void)value;
        }
    }

    double get(const std::string& key, double fallback) const {
        auto it = spec_.hyperparameters.find(key);
        return it == spec_.hyperparameters.end() ? fallback : it->second;
    }

    int get_int(const std::string& key, int fallback, int lo, int hi) const {
        const double v = get(key, fallback);
        if (std::floor(v) != v || v < lo || v > hi)
            throw ConfigError("learner '" + spec_.name + "': hyperparameter '" + key +
                              "' must be an integer in [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
        return static_cast<int>(v);
    }

    double get_pos(const std::string& key, double fallback, double lo, double hi) const {
        const double v = get(key, fallback);
        if (!(v > lo) || v > hi)
            throw ConfigError("learner '" + spec_.name + "': hyperparameter '" + key +
                              "' out of range");
        return v;
    }

  private:
    const LearnerSpec& spec_;
};

void require_task(const LearnerSpec& spec, Task needed) {
    if (spec.task != needed)
        throw ConfigError("learner '" + spec.name + "': family '" + spec.family +
                          "' does not support the requested task");
}

detail::TreeOptions tree_options(const HyperParams& hp, int default_depth) {
    detail::TreeOptions t;
    t.max_depth = hp.get_int("max_depth", default_depth, 1, 64);
    t.min_leaf = hp.get_int("min_leaf", 5, 1, 1'000'000);
    return t;
}

// Rows sharing a group id resample together; ids are compacted so sparse
// identifiers (postal codes, unit indices) do not inflate the group table.
std::vector<std::vector<int>> make_row_groups(Eigen::Index n,
                                              const std::vector<std::int64_t>* groups) {
    if (!groups) return detail::build_groups(n, {});
    std::vector<std::int64_t> uniq(*groups);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<int> ids(groups->size());
    for (size_t i = 0; i < groups->size(); ++i) {
        const auto it = std::lower_bound(uniq.begin(), uniq.end(), (*groups)[i]);
        ids[i] = static_cast<int>(it - uniq.begin());
    }
    return detail::build_groups(n, ids);
}

}  // namespace

FittedModel fit_learner(const LearnerSpec& spec, const MatrixXd& X, const VectorXd& y,
                        const VectorXd* weights, std::uint64_t seed,
                        const std::vector<std::int64_t>* groups) {
    const Eigen::Index n = X.rows();
    if (n == 0) throw DataError("learner '" + spec.name + "': no training rows");
    if (y.size() != n)
        throw DataError("learner '" + spec.name + "': outcome length " +
                        std::to_string(y.size()) + " does not match " + std::to_string(n) +
                        " rows");
    if (weights && weights->size() != n)
        throw DataError("learner '" + spec.name + "': weight length mismatch");
    if (groups && static_cast<Eigen::Index>(groups->size()) != n)
        throw DataError("learner '" + spec.name + "': group length mismatch");

    VectorXd w;
    if (weights) {
        if (weights->minCoeff() < 0.0)
            throw DataError("learner '" + spec.name + "': negative weight");
        const double mean = weights->mean();
        if (!(mean > 0.0)) throw DataError("learner '" + spec.name + "': all weights are zero");
        w = *weights / mean;  // scale invariance: only relative weights matter
    } else {
        w = VectorXd::Ones(n);
    }

    if (spec.task == Task::BinaryProbability) {
        if (y.minCoeff() < 0.0 || y.maxCoeff() > 1.0)
            throw DataError("learner '" + spec.name +
                            "': binary-probability targets must lie in [0, 1]");
    }

    const bool binary = spec.task == Task::BinaryProbability;

    if (spec.family == "mean") {
        HyperParams hp(spec, {});
        auto m = std::make_shared<detail::ConstModel>();
        m->value = w.dot(y) / w.sum();
        return FittedModel(std::move(m), spec.task, X.cols(), false);
    }

    if (spec.family == "linear") {
        require_task(spec, Task::Regression);
        HyperParams hp(spec, {"ridge"});
        const double ridge = hp.get("ridge", 0.0);
        if (ridge < 0.0) throw ConfigError("learner '" + spec.name + "': ridge must be >= 0");
        auto ls = detail::weighted_least_squares(detail::with_intercept(X), y, w, ridge);
        auto m = std::make_shared<detail::LinearModel>();
        m->coef = std::move(ls.coef);
        return FittedModel(std::move(m), spec.task, X.cols(), ls.ridge_fallback);
    }

    if (spec.family == "logistic") {
        require_task(spec, Task::BinaryProbability);
        HyperParams hp(spec, {"max_iter", "tol", "ridge"});
        detail::IrlsOptions opt;
        opt.max_iter = hp.get_int("max_iter", 50, 1, 10'000);
        opt.tol = hp.get_pos("tol", 1e-8, 0.0, 1.0);
        opt.ridge = hp.get("ridge", 1e-8);
        if (opt.ridge < 0.0) throw ConfigError("learner '" + spec.name + "': ridge must be >= 0");
        auto fit = detail::logistic_irls(detail::with_intercept(X), y, w, opt);
        auto m = std::make_shared<detail::LogisticModel>();
        m->coef = std::move(fit.coef);
        return FittedModel(std::move(m), spec.task, X.cols(), false);
    }

    if (spec.family == "gam") {
        HyperParams hp(spec, {"interior_knots", "ridge"});
        const int knots = hp.get_int("interior_knots", 4, 1, 50);
        const double ridge = hp.get("ridge", 1e-3);
        if (ridge < 0.0) throw ConfigError("learner '" + spec.name + "': ridge must be >= 0");
        auto m = std::make_shared<detail::GamModel>();
        m->basis = detail::SplineBasis::fit(X, knots);
        m->binary = binary;
        const MatrixXd Z = detail::with_intercept(m->basis.expand(X));

        // The cubic basis columns grow like z^3, so a raw ridge would shrink
        // them far harder than the linear terms. Standardize to unit RMS for
        // the penalized solve, then map the coefficients back.
        VectorXd scale = VectorXd::Ones(Z.cols());
        for (Eigen::Index j = 1; j < Z.cols(); ++j) {
            const double rms = std::sqrt(Z.col(j).squaredNorm() / static_cast<double>(n));
            if (rms > 1e-12) scale[j] = rms;
        }
        const MatrixXd Zs = Z * scale.cwiseInverse().asDiagonal();

        bool fallback = false;
        VectorXd coef;
        if (binary) {
            detail::IrlsOptions opt;
            opt.ridge = std::max(ridge, 1e-8);
            coef = detail::logistic_irls(Zs, y, w, opt).coef;
        } else {
            auto ls = detail::weighted_least_squares(Zs, y, w, ridge);
            coef = std::move(ls.coef);
            fallback = ls.ridge_fallback;
        }
        m->coef = coef.cwiseQuotient(scale);
        return FittedModel(std::move(m), spec.task, X.cols(), fallback);
    }

    if (spec.family == "gbt") {
        HyperParams hp(spec, {"max_depth", "min_leaf", "rounds", "learning_rate", "subsample"});
        detail::BoostOptions opt;
        opt.tree = tree_options(hp, 3);
        opt.rounds = hp.get_int("rounds", 100, 0, 100'000);  // 0 rounds = base score only
        opt.learning_rate = hp.get_pos("learning_rate", 0.1, 0.0, 1.0);
        opt.subsample = hp.get_pos("subsample", 1.0, 0.0, 1.0);
        opt.seed = mix_seed(seed, "gbt");
        opt.logit = binary;
        auto m = std::make_shared<detail::BoostModel>();
        m->boost.fit(X, y, w, make_row_groups(n, groups), opt);
        return FittedModel(std::move(m), spec.task, X.cols(), false);
    }

    if (spec.family == "random_forest") {
        HyperParams hp(spec, {"n_trees", "max_depth", "min_leaf", "mtry"});
        detail::ForestOptions opt;
        opt.tree.max_depth = hp.get_int("max_depth", 12, 1, 64);
        opt.tree.min_leaf = hp.get_int("min_leaf", 5, 1, 1'000'000);
        opt.tree.mtry = hp.get_int("mtry", 0, 0, 10'000);
        opt.n_trees = hp.get_int("n_trees", 100, 1, 100'000);
        opt.seed = mix_seed(seed, "random_forest");
        auto m = std::make_shared<detail::ForestModel>();
        m->forest.fit(X, y, w, make_row_groups(n, groups), opt);
        return FittedModel(std::move(m), spec.task, X.cols(), false);
    }

    throw ConfigError("learner '" + spec.name + "': unknown family '" + spec.family + "'");
}

std::vector<LearnerSpec> default_library(Task task, bool exclude_tree_learners) {
    std::vector<LearnerSpec> lib;
    auto add = [&](std::string name, std::string family,
                   std::map<std::string, double> hp = {}) {
        lib.push_back(LearnerSpec{std::move(name), std::move(family), task, std::move(hp)});
    };
    add("mean", "mean");
    if (task == Task::Regression)
        add("linear", "linear");
    else
        add("logistic", "logistic");
    add("gam", "gam");
    if (!exclude_tree_learners) {
        add("gbt_depth1", "gbt", {{"max_depth", 1}});
        add("gbt_depth2", "gbt", {{"max_depth", 2}});
        add("gbt_depth3", "gbt", {{"max_depth", 3}});
        add("random_forest", "random_forest");
    }
    return lib;
}

}  // namespace mtp
