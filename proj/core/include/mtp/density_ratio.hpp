#pragma once

#include <cstdint>
#include <optional>

#include "mtp/core.hpp"
#include "mtp/super_learner.hpp"

namespace mtp {

struct DensityRatioOptions {
    // Binary-probability candidates; empty means the default library.
    std::vector<LearnerSpec> library;
    SuperLearnerOptions super_learner;
    // Cap applied to the per-row ratios after the diagnostics are recorded.
    std::optional<double> truncate_at;
};

struct DensityRatioFit {
    VectorXd ratios;                 // one per observation, after any truncation
    VectorXd lambda;                 // classifier probabilities at the observed rows
    double max_ratio = 0.0;          // before truncation
    double mean_ratio = 0.0;         // before truncation
    Eigen::Index truncated_count = 0;
    SuperLearnerFit classifier;
};

// Interleaved two-row-per-observation classification stack: row 2i holds the
// observed exposure with label 0, row 2i+1 the shifted exposure with label 1.
// Column 0 is the exposure, the remaining columns are the covariates.
// `pair_ids` gets the observation index for both rows, so fold assignment and
// resampling can keep each pair together.
void build_stack(const AnalysisFrame& frame, const VectorXd& shifted_exposure, MatrixXd* stack_X,
                 VectorXd* labels, std::vector<std::int64_t>* pair_ids);

// Density ratio of the shifted exposure distribution against the observed one,
// obtained from a cross-validated probabilistic classifier on the stack:
// r(a, w) = p / (1 - p) where p is the classifier's shifted-row probability
// evaluated at the observed exposure. Both rows of a pair share a fold, and
// tree resampling draws pairs, never single rows.
DensityRatioFit estimate_density_ratio(const AnalysisFrame& frame,
                                       const VectorXd& shifted_exposure, std::uint64_t seed,
                                       const DensityRatioOptions& options = {});

}  // namespace mtp
