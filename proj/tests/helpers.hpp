#pragma once

#include <random>

#include "mtp/core.hpp"
#include "mtp/rng.hpp"

namespace testutil {

// Random frame with standard-normal covariates, exposure correlated with the
// first covariates, and a smooth outcome; for property tests.
inline mtp::AnalysisFrame random_frame(Eigen::Index n, Eigen::Index p, std::uint64_t seed,
                                       double noise = 1.0) {
    auto rng = mtp::make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    mtp::AnalysisFrame f;
    f.covariates.resize(n, p);
    f.exposure.resize(n);
    f.outcome.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) f.covariates(i, j) = normal(rng);
        double lin = 0.0;
        if (p > 0) lin += 0.5 * f.covariates(i, 0);
        if (p > 1) lin += 0.5 * f.covariates(i, 1);
        f.exposure[i] = lin + normal(rng);
        double mu = 10.0 + 2.0 * f.exposure[i];
        if (p > 0) mu += f.covariates(i, 0);
        if (p > 1) mu -= f.covariates(i, 1);
        f.outcome[i] = mu + noise * normal(rng);
    }
    return f;
}

}  // namespace testutil
