#include "mtp/density_ratio.hpp"

#include <algorithm>

#include "mtp/errors.hpp"
#include "mtp/rng.hpp"

namespace mtp {

void build_stack(const AnalysisFrame& frame, const VectorXd& shifted_exposure, MatrixXd* stack_X,
                 VectorXd* labels, std::vector<std::int64_t>* pair_ids) {
    const Eigen::Index n = frame.n(), p = frame.p();
    if (shifted_exposure.size() != n)
        throw DataError("shifted exposure length does not match the frame");
    stack_X->resize(2 * n, 1 + p);
    labels->resize(2 * n);
    pair_ids->assign(2 * static_cast<size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        (*stack_X)(2 * i, 0) = frame.exposure[i];
        (*stack_X)(2 * i + 1, 0) = shifted_exposure[i];
        if (p > 0) {
            stack_X->block(2 * i, 1, 1, p) = frame.covariates.row(i);
            stack_X->block(2 * i + 1, 1, 1, p) = frame.covariates.row(i);
        }
        (*labels)[2 * i] = 0.0;
        (*labels)[2 * i + 1] = 1.0;
        (*pair_ids)[static_cast<size_t>(2 * i)] = i;
        (*pair_ids)[static_cast<size_t>(2 * i) + 1] = i;
    }
}

DensityRatioFit estimate_density_ratio(const AnalysisFrame& frame,
                                       const VectorXd& shifted_exposure, std::uint64_t seed,
                                       const DensityRatioOptions& options) {
    frame.validate();
    const Eigen::Index n = frame.n();

    MatrixXd stack_X;
    VectorXd labels;
    std::vector<std::int64_t> pair_ids;
    build_stack(frame, shifted_exposure, &stack_X, &labels, &pair_ids);

    const std::vector<LearnerSpec> library =
        options.library.empty() ? default_library(Task::BinaryProbability) : options.library;
    for (const auto& spec : library)
        if (spec.task != Task::BinaryProbability)
            throw ConfigError("density ratio classifier '" + spec.name +
                              "' must be a binary-probability learner");

    const FoldAssignment folds =
        make_group_folds(pair_ids, options.super_learner.folds, mix_seed(seed, "folds"));

    DensityRatioFit fit;
    fit.classifier = fit_super_learner(library, stack_X, labels, nullptr, seed, folds,
                                       options.super_learner, &pair_ids);

    MatrixXd natural(n, stack_X.cols());
    for (Eigen::Index i = 0; i < n; ++i) natural.row(i) = stack_X.row(2 * i);
    fit.lambda = fit.classifier.predict(natural);

    fit.ratios.resize(n);
    Eigen::Index at_clip = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        fit.ratios[i] = fit.lambda[i] / (1.0 - fit.lambda[i]);
        if (fit.lambda[i] <= 1e-6 || fit.lambda[i] >= 1.0 - 1e-6) ++at_clip;
    }
    if (2 * at_clip > n)
        throw EstimationError(
            "density ratio classifier saturated on most observations; shifted and observed "
            "exposures are nearly separable (severe positivity violation)");
    fit.max_ratio = fit.ratios.maxCoeff();
    fit.mean_ratio = fit.ratios.mean();

    if (options.truncate_at) {
        const double cap = *options.truncate_at;
        if (!(cap > 0.0)) throw ConfigError("density ratio truncation cap must be positive");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (fit.ratios[i] > cap) {
                fit.ratios[i] = cap;
                ++fit.truncated_count;
            }
        }
        if (2 * fit.truncated_count > n)
            throw EstimationError(
                "density ratio truncation clipped more than half of the observations; the "
                "shifted exposure distribution is too far from the observed one");
    }
    return fit;
}

}  // namespace mtp
