#include "doctest.h"

#include <algorithm>
#include <random>

#include "mtp/errors.hpp"
#include "mtp/rng.hpp"
#include "mtp/super_learner.hpp"

using namespace mtp;

namespace {

LearnerSpec named(std::string name, std::string family, Task task = Task::Regression,
                  std::map<std::string, double> hp = {}) {
    return LearnerSpec{std::move(name), std::move(family), task, std::move(hp)};
}

}  // namespace

TEST_CASE("fold sizes differ by at most one") {
    auto fa = make_folds(10, 5, 1);
    fa.validate(10);
    std::vector<int> counts(5, 0);
    for (int f : fa.fold_of) ++counts[f];
    for (int c : counts) CHECK(c == 2);

    fa = make_folds(7, 3, 2);
    std::vector<int> c3(3, 0);
    for (int f : fa.fold_of) ++c3[f];
    std::sort(c3.begin(), c3.end());
    CHECK(c3[0] == 2);
    CHECK(c3[1] == 2);
    CHECK(c3[2] == 3);

    CHECK_THROWS_AS(make_folds(10, 1, 1), ConfigError);
    CHECK_THROWS_AS(make_folds(3, 5, 1), ConfigError);
}

TEST_CASE("group folds keep groups intact") {
    std::vector<std::int64_t> groups;
    for (int i = 0; i < 40; ++i) {
        groups.push_back(1000 + i / 2);  // sparse ids, rows paired
    }
    const auto fa = make_group_folds(groups, 5, 3);
    fa.validate(40);
    for (int i = 0; i < 40; i += 2) CHECK(fa.fold_of[i] == fa.fold_of[i + 1]);
}

TEST_CASE("single candidate gets weight one") {
    MatrixXd X(30, 1);
    VectorXd y(30);
    for (Eigen::Index i = 0; i < 30; ++i) {
        X(i, 0) = i;
        y[i] = 2.0 * i;
    }
    const auto fit = fit_super_learner({named("only", "linear")}, X, y, nullptr, 1);
    CHECK(fit.weights.size() == 1);
    CHECK(fit.weights[0] == doctest::Approx(1.0));
}

TEST_CASE("noiseless linear data puts nearly all weight on the linear candidate") {
    MatrixXd X(50, 1);
    VectorXd y(50);
    for (Eigen::Index i = 0; i < 50; ++i) {
        X(i, 0) = 0.1 * i - 2.5;
        y[i] = 3.0 * X(i, 0);
    }
    const auto fit = fit_super_learner({named("mean", "mean"), named("ols", "linear")}, X, y,
                                       nullptr, 7);
    CHECK(fit.weights[1] > 0.99);
    const VectorXd pred = fit.predict(X);
    for (Eigen::Index i = 0; i < 50; ++i) CHECK(pred[i] == doctest::Approx(y[i]).epsilon(1e-6));
}

TEST_CASE("identical candidates keep symmetric weights") {
    MatrixXd X(60, 2);
    VectorXd y(60);
    auto rng = make_rng(19);
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < 60; ++i) {
        X(i, 0) = normal(rng);
        X(i, 1) = normal(rng);
        y[i] = X(i, 0) + 0.5 * normal(rng);
    }
    const auto fit = fit_super_learner({named("a", "linear"), named("b", "linear")}, X, y,
                                       nullptr, 5);
    CHECK(fit.weights[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(fit.weights[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("library order does not change the ensemble") {
    auto rng = make_rng(21);
    std::normal_distribution<double> normal;
    MatrixXd X(80, 2);
    VectorXd y(80);
    for (Eigen::Index i = 0; i < 80; ++i) {
        X(i, 0) = normal(rng);
        X(i, 1) = normal(rng);
        y[i] = X(i, 0) * X(i, 0) + normal(rng);
    }
    const std::vector<LearnerSpec> lib1 = {named("mean", "mean"), named("ols", "linear"),
                                           named("trees", "gbt", Task::Regression,
                                                 {{"rounds", 30}})};
    std::vector<LearnerSpec> lib2 = {lib1[2], lib1[0], lib1[1]};
    const auto f1 = fit_super_learner(lib1, X, y, nullptr, 77);
    const auto f2 = fit_super_learner(lib2, X, y, nullptr, 77);
    // match weights by candidate name
    auto weight_of = [](const SuperLearnerFit& f, const std::string& name) {
        for (size_t k = 0; k < f.library.size(); ++k)
            if (f.library[k].name == name) return f.weights[static_cast<Eigen::Index>(k)];
        return -1.0;
    };
    for (const char* name : {"mean", "ols", "trees"})
        CHECK(weight_of(f1, name) == doctest::Approx(weight_of(f2, name)).epsilon(1e-10));
    const VectorXd p1 = f1.predict(X), p2 = f2.predict(X);
    for (Eigen::Index i = 0; i < 80; ++i) CHECK(p1[i] == doctest::Approx(p2[i]).epsilon(1e-10));
}

TEST_CASE("ensemble risk never loses to the best candidate") {
    auto rng = make_rng(31);
    std::normal_distribution<double> normal;
    for (int rep = 0; rep < 5; ++rep) {
        MatrixXd X(70, 2);
        VectorXd y(70);
        for (Eigen::Index i = 0; i < 70; ++i) {
            X(i, 0) = normal(rng);
            X(i, 1) = normal(rng);
            y[i] = std::sin(2.0 * X(i, 0)) + 0.3 * normal(rng);
        }
        const auto fit = fit_super_learner(
            {named("mean", "mean"), named("ols", "linear"), named("gam", "gam")}, X, y, nullptr,
            static_cast<std::uint64_t>(rep));
        double best = 1e300;
        for (double r : fit.cv_risks) best = std::min(best, r);
        CHECK(fit.ensemble_cv_risk <= best + 1e-10);
        CHECK(fit.weights.minCoeff() >= 0.0);
        CHECK(fit.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("library validation") {
    MatrixXd X(20, 1);
    X.setRandom();
    VectorXd y = X.col(0);
    CHECK_THROWS_AS(fit_super_learner({}, X, y, nullptr, 1), ConfigError);
    CHECK_THROWS_AS(
        fit_super_learner({named("a", "linear"), named("a", "mean")}, X, y, nullptr, 1),
        ConfigError);
    CHECK_THROWS_AS(fit_super_learner({named("a", "linear", Task::Regression),
                                       named("b", "mean", Task::BinaryProbability)},
                                      X, y, nullptr, 1),
                    ConfigError);
}

TEST_CASE("failing candidates are dropped with a warning") {
    MatrixXd X(24, 1);
    X.setRandom();
    VectorXd y(24);
    for (Eigen::Index i = 0; i < 24; ++i) y[i] = i % 2;
    // 'linear' cannot do binary probability, so it fails in every fold
    const std::vector<LearnerSpec> lib = {named("bad", "linear", Task::BinaryProbability),
                                          named("good", "mean", Task::BinaryProbability)};
    const auto fit = fit_super_learner(lib, X, y, nullptr, 3);
    CHECK_FALSE(fit.warnings.empty());
    CHECK(fit.weights[0] == 0.0);
    CHECK(fit.weights[1] == doctest::Approx(1.0));
    CHECK(fit.models[0].empty());

    CHECK_THROWS_AS(
        fit_super_learner({named("bad", "linear", Task::BinaryProbability)}, X, y, nullptr, 3),
        EstimationError);
}

TEST_CASE("binary ensembles emit clipped probabilities") {
    auto rng = make_rng(47);
    std::uniform_real_distribution<double> unif(0, 1);
    MatrixXd X(100, 1);
    VectorXd y(100);
    for (Eigen::Index i = 0; i < 100; ++i) {
        X(i, 0) = unif(rng);
        y[i] = unif(rng) < X(i, 0) ? 1.0 : 0.0;
    }
    const auto fit = fit_super_learner({named("mean", "mean", Task::BinaryProbability),
                                        named("logit", "logistic", Task::BinaryProbability)},
                                       X, y, nullptr, 11);
    const VectorXd p = fit.predict(X);
    CHECK(p.minCoeff() >= 1e-6);
    CHECK(p.maxCoeff() <= 1.0 - 1e-6);
    CHECK(fit.task == Task::BinaryProbability);
}

TEST_CASE("same seed reproduces the fit bit for bit") {
    auto rng = make_rng(53);
    std::normal_distribution<double> normal;
    MatrixXd X(90, 2);
    VectorXd y(90);
    for (Eigen::Index i = 0; i < 90; ++i) {
        X(i, 0) = normal(rng);
        X(i, 1) = normal(rng);
        y[i] = X(i, 0) - X(i, 1) + normal(rng);
    }
    const std::vector<LearnerSpec> lib = {named("mean", "mean"), named("ols", "linear"),
                                          named("rf", "random_forest", Task::Regression,
                                                {{"n_trees", 10}})};
    const auto a = fit_super_learner(lib, X, y, nullptr, 123);
    const auto b = fit_super_learner(lib, X, y, nullptr, 123);
    const VectorXd pa = a.predict(X), pb = b.predict(X);
    for (Eigen::Index i = 0; i < 90; ++i) CHECK(pa[i] == pb[i]);
    const auto c = fit_super_learner(lib, X, y, nullptr, 124);
    CHECK(c.folds.fold_of != a.folds.fold_of);  // different seed shuffles folds
}
