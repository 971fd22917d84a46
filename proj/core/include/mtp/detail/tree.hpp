#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace mtp::detail {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Exact greedy CART regression trees on presorted feature arrays.
// Split thresholds are midpoints between distinct adjacent values, so rows
// with identical feature vectors always land in the same leaf.

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct TreeOptions {
    int max_depth = 6;
    int min_leaf = 5;
    int mtry = 0;  // 0 => consider all features at every split
};

class RegressionTree {
public:
    // rows may contain duplicates (bootstrap multiplicity).
    void fit(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
             const std::vector<int>& rows, const TreeOptions& opt, std::mt19937_64* rng);

    // Same fit, but the caller supplies each feature's training rows already
    // sorted by value (one vector per feature; a single vector when p == 0).
    // Ensembles sort once and reuse the order across their member trees.
    // When train_pred is non-null, entry r receives the leaf value of every
    // training row r, which spares the ensemble a full prediction pass.
    void fit_presorted(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                       std::vector<std::vector<int>> sorted_by_feature, const TreeOptions& opt,
                       std::mt19937_64* rng, VectorXd* train_pred);

    double predict_row(const MatrixXd& X, Eigen::Index i) const;
    VectorXd predict(const MatrixXd& X) const;

    bool empty() const { return nodes_.empty(); }

private:
    int build(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
              std::vector<std::vector<int>>& sorted_by_feature, int depth,
              const TreeOptions& opt, std::mt19937_64* rng, VectorXd* train_pred);

    std::vector<TreeNode> nodes_;
};

// Row indices grouped for joint resampling. With no explicit groups every
// row is its own group; the density-ratio stack passes one group per unit
// so a unit's natural and shifted copies are always resampled together.
std::vector<std::vector<int>> build_groups(Eigen::Index n_rows, const std::vector<int>& group_ids);

struct ForestOptions {
    int n_trees = 100;
    TreeOptions tree;
    std::uint64_t seed = 0;
};

class RandomForest {
public:
    void fit(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
             const std::vector<std::vector<int>>& groups, const ForestOptions& opt);
    VectorXd predict(const MatrixXd& X) const;

private:
    std::vector<RegressionTree> trees_;
};

struct BoostOptions {
    int rounds = 100;
    double learning_rate = 0.1;
    TreeOptions tree;
    double subsample = 1.0;  // fraction of groups per round, sampled without replacement
    std::uint64_t seed = 0;
    bool logit = false;  // fit log-odds for binary targets instead of raw values
};

class BoostedTrees {
public:
    void fit(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
             const std::vector<std::vector<int>>& groups, const BoostOptions& opt);
    // Raw score: regression value, or log-odds when logit.
    VectorXd predict_score(const MatrixXd& X) const;
    VectorXd predict(const MatrixXd& X) const;

    double base_score() const { return base_; }

private:
    double base_ = 0.0;
    double shrinkage_ = 0.1;
    bool logit_ = false;
    double clamp_lo_ = 0.0;  // training-target range, applied to regression output
    double clamp_hi_ = 0.0;
    std::vector<RegressionTree> trees_;
};

}  // namespace mtp::detail
