#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtp/learners.hpp"

namespace mtp {

// Cross-validation fold labels, one per row, values in [0, V).
struct FoldAssignment {
    int V = 0;
    std::vector<int> fold_of;

    void validate(Eigen::Index n) const;
};

// Rows are shuffled and dealt round-robin, so fold sizes differ by at most one.
FoldAssignment make_folds(Eigen::Index n, int V, std::uint64_t seed);

// Same, but all rows sharing a group id land in the same fold.
FoldAssignment make_group_folds(const std::vector<std::int64_t>& groups, int V,
                                std::uint64_t seed);

struct SuperLearnerOptions {
    int folds = 5;
    int eg_iterations = 500;   // exponentiated-gradient steps for the weight fit
    double eg_step = 0.5;
    double eg_tol = 1e-10;     // stop when no weight moves more than this
};

class SuperLearnerFit {
  public:
    VectorXd predict(const MatrixXd& X) const;

    Task task = Task::Regression;
    std::vector<LearnerSpec> library;
    std::vector<FittedModel> models;   // refit on the full data, empty slot if a fit failed
    VectorXd weights;                  // simplex weights over the library
    std::vector<double> cv_risks;      // out-of-fold risk per candidate
    double ensemble_cv_risk = 0.0;     // out-of-fold risk of the weighted mix
    bool used_best_single = false;     // weight fit fell back to the best candidate
    FoldAssignment folds;
    MatrixXd cv_predictions;           // n x K out-of-fold predictions
    std::vector<std::string> warnings;
};

// Cross-validated stacking: out-of-fold predictions for every candidate, a
// simplex-constrained weight fit minimizing the pooled out-of-fold risk
// (squared error or log loss by task), then a full-data refit of each
// candidate. If the exponentiated-gradient weights do not match the best
// single candidate's risk, the ensemble falls back to that candidate. A
// candidate whose fit throws is dropped with a warning; its out-of-fold slots
// are filled with the training-fold mean so the risk report stays complete.
//
// Candidate seeds are derived from the candidate *name*, so reordering the
// library does not change any candidate's fitted model.
SuperLearnerFit fit_super_learner(const std::vector<LearnerSpec>& library, const MatrixXd& X,
                                  const VectorXd& y, const VectorXd* weights, std::uint64_t seed,
                                  const SuperLearnerOptions& options = {},
                                  const std::vector<std::int64_t>* groups = nullptr);

// Variant with caller-supplied folds (e.g. to keep paired rows together).
SuperLearnerFit fit_super_learner(const std::vector<LearnerSpec>& library, const MatrixXd& X,
                                  const VectorXd& y, const VectorXd* weights, std::uint64_t seed,
                                  const FoldAssignment& folds, const SuperLearnerOptions& options = {},
                                  const std::vector<std::int64_t>* groups = nullptr);

}  // namespace mtp
