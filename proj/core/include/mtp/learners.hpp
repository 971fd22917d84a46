#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace mtp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Task { Regression, BinaryProbability };

// A named learner configuration. `family` selects the algorithm; unknown
// hyperparameter keys or out-of-range values are rejected at fit time.
//
// Families: mean, linear (regression), logistic (binary), gam, gbt,
// random_forest.
struct LearnerSpec {
    std::string name;
    std::string family;
    Task task = Task::Regression;
    std::map<std::string, double> hyperparameters;
};

namespace detail {
struct Model;
}

// Handle to a trained model. Predictions for BinaryProbability tasks are
// clipped to [1e-6, 1 - 1e-6].
class FittedModel {
  public:
    FittedModel() = default;
    FittedModel(std::shared_ptr<const detail::Model> impl, Task task, Eigen::Index n_features,
                bool ridge_fallback);

    VectorXd predict(const MatrixXd& X) const;
    Task task() const { return task_; }
    bool empty() const { return impl_ == nullptr; }
    // True when a singular least-squares system was re-solved with a ridge term.
    bool ridge_fallback() const { return ridge_fallback_; }

  private:
    std::shared_ptr<const detail::Model> impl_;
    Task task_ = Task::Regression;
    Eigen::Index n_features_ = 0;
    bool ridge_fallback_ = false;
};

// Trains a learner. Weights default to uniform and are rescaled to mean one
// internally, so predictions are invariant to the overall weight scale.
// `groups` (one id per row, same id = same sampling unit) controls bootstrap
// and subsample draws in the tree-based families; rows of a group always move
// together.
FittedModel fit_learner(const LearnerSpec& spec, const MatrixXd& X, const VectorXd& y,
                        const VectorXd* weights, std::uint64_t seed,
                        const std::vector<std::int64_t>* groups = nullptr);

// The standard candidate set for each task. Tree-based entries (gradient
// boosting, random forest) can be excluded for speed.
std::vector<LearnerSpec> default_library(Task task, bool exclude_tree_learners = false);

}  // namespace mtp
