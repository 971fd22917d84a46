// Microbenchmarks for the hot paths: single learner fits, the stacked
// density-ratio classifier, and a full shift estimate.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>

#include "mtp/core.hpp"
#include "mtp/density_ratio.hpp"
#include "mtp/learners.hpp"
#include "mtp/super_learner.hpp"
#include "mtp/tmle.hpp"

using namespace mtp;

namespace {

struct Data {
    MatrixXd X;
    VectorXd y;
    VectorXd labels;
    AnalysisFrame frame;
};

Data make_data(Eigen::Index n, Eigen::Index p) {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> z(0.0, 1.0);
    Data d;
    d.X.resize(n, p);
    d.y.resize(n);
    d.labels.resize(n);
    d.frame.covariates.resize(n, p > 1 ? p - 1 : 0);
    d.frame.exposure.resize(n);
    d.frame.outcome.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double lin = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            d.X(i, j) = z(gen);
            if (j < 3) lin += 0.4 * d.X(i, j);
        }
        d.y[i] = lin + z(gen);
        d.labels[i] = (lin + z(gen) > 0.0) ? 1.0 : 0.0;
        for (Eigen::Index j = 0; j + 1 < p; ++j) d.frame.covariates(i, j) = d.X(i, j + 1);
        d.frame.exposure[i] = d.X(i, 0);
        d.frame.outcome[i] = d.y[i];
        d.frame.unit_ids.push_back("u" + std::to_string(i));
    }
    return d;
}

LearnerSpec spec(const char* family, Task task, std::map<std::string, double> hp = {}) {
    return LearnerSpec{family, family, task, std::move(hp)};
}

void fit_family(benchmark::State& state, const char* family, Task task,
                std::map<std::string, double> hp = {}) {
    const auto d = make_data(state.range(0), 8);
    const VectorXd& target = task == Task::Regression ? d.y : d.labels;
    for (auto _ : state) {
        auto model = fit_learner(spec(family, task, hp), d.X, target, nullptr, 1);
        benchmark::DoNotOptimize(model);
    }
}

void bm_linear(benchmark::State& s) { fit_family(s, "linear", Task::Regression); }
void bm_logistic(benchmark::State& s) { fit_family(s, "logistic", Task::BinaryProbability); }
void bm_gam(benchmark::State& s) { fit_family(s, "gam", Task::Regression); }
void bm_gbt(benchmark::State& s) { fit_family(s, "gbt", Task::Regression); }
void bm_forest(benchmark::State& s) { fit_family(s, "random_forest", Task::Regression); }

void bm_folds(benchmark::State& state) {
    for (auto _ : state) {
        auto folds = make_folds(state.range(0), 5, 42);
        benchmark::DoNotOptimize(folds);
    }
}

void bm_density_ratio(benchmark::State& state) {
    const auto d = make_data(state.range(0), 4);
    DensityRatioOptions opt;
    opt.library = {spec("logistic", Task::BinaryProbability)};
    const VectorXd shifted = d.frame.exposure.array() + 0.5;
    for (auto _ : state) {
        auto fit = estimate_density_ratio(d.frame, shifted, 3, opt);
        benchmark::DoNotOptimize(fit);
    }
}

void bm_estimate_shift(benchmark::State& state) {
    const auto d = make_data(state.range(0), 4);
    EstimatorOptions opt;
    opt.outcome_library = {spec("mean", Task::Regression), spec("linear", Task::Regression)};
    opt.density_ratio.library = {spec("logistic", Task::BinaryProbability)};
    for (auto _ : state) {
        auto est = estimate_shift(d.frame, ShiftPolicy::additive(0.5), 3, opt);
        benchmark::DoNotOptimize(est);
    }
}

BENCHMARK(bm_linear)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_logistic)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_gam)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_gbt)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_forest)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_folds)->Arg(100000)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_density_ratio)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_estimate_shift)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
