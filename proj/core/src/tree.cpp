#include "mtp/detail/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mtp::detail {

namespace {

double weighted_leaf_value(const VectorXd& y, const VectorXd& w, const std::vector<int>& rows) {
    double sw = 0.0, swy = 0.0;
    for (int r : rows) {
        sw += w[r];
        swy += w[r] * y[r];
    }
    return sw > 0.0 ? swy / sw : 0.0;
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
    int left_count = 0;
};

// Proxy objective: S_L^2/W_L + S_R^2/W_R (parent term constant).
SplitChoice best_split_on_feature(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                                  const std::vector<int>& sorted_rows, int feature, int min_leaf,
                                  double total_sw, double total_swy) {
    SplitChoice best;
    const int n = static_cast<int>(sorted_rows.size());
    const double parent = total_swy * total_swy / total_sw;
    double sw_left = 0.0, swy_left = 0.0;
    int i = 0;
    while (i < n) {
        // advance over a block of equal feature values; cannot split inside it
        const double v = X(sorted_rows[i], feature);
        int j = i;
        while (j < n && X(sorted_rows[j], feature) == v) {
            sw_left += w[sorted_rows[j]];
            swy_left += w[sorted_rows[j]] * y[sorted_rows[j]];
            ++j;
        }
        if (j >= n) break;  // no block to the right
        const int left_count = j;
        const int right_count = n - j;
        if (left_count >= min_leaf && right_count >= min_leaf && sw_left > 0.0 &&
            total_sw - sw_left > 0.0) {
            const double sw_right = total_sw - sw_left;
            const double swy_right = total_swy - swy_left;
            const double objective =
                swy_left * swy_left / sw_left + swy_right * swy_right / sw_right;
            const double gain = objective - parent;
            if (gain > best.gain) {
                best.feature = feature;
                best.threshold = 0.5 * (v + X(sorted_rows[j], feature));
                best.gain = gain;
                best.left_count = left_count;
            }
        }
        i = j;
    }
    return best;
}

std::vector<std::vector<int>> sort_rows_by_feature(const MatrixXd& X,
                                                   const std::vector<int>& rows) {
    const int p = static_cast<int>(X.cols());
    std::vector<std::vector<int>> sorted(p);
    for (int f = 0; f < p; ++f) {
        sorted[f] = rows;
        std::stable_sort(sorted[f].begin(), sorted[f].end(),
                         [&X, f](int a, int b) { return X(a, f) < X(b, f); });
    }
    if (p == 0) sorted.push_back(rows);  // featureless: single leaf
    return sorted;
}

}  // namespace

void RegressionTree::fit(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                         const std::vector<int>& rows, const TreeOptions& opt,
                         std::mt19937_64* rng) {
    fit_presorted(X, y, w, sort_rows_by_feature(X, rows), opt, rng, nullptr);
}

void RegressionTree::fit_presorted(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                                   std::vector<std::vector<int>> sorted_by_feature,
                                   const TreeOptions& opt, std::mt19937_64* rng,
                                   VectorXd* train_pred) {
    nodes_.clear();
    build(X, y, w, sorted_by_feature, 0, opt, rng, train_pred);
}

int RegressionTree::build(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                          std::vector<std::vector<int>>& sorted_by_feature, int depth,
                          const TreeOptions& opt, std::mt19937_64* rng, VectorXd* train_pred) {
    const std::vector<int>& rows = sorted_by_feature[0];
    const int node_index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_[node_index].value = weighted_leaf_value(y, w, rows);

    const auto leaf = [&]() {
        if (train_pred != nullptr) {
            const double v = nodes_[node_index].value;
            for (int r : rows) (*train_pred)[r] = v;
        }
        return node_index;
    };

    const int p = static_cast<int>(X.cols());
    const int n = static_cast<int>(rows.size());
    if (p == 0 || depth >= opt.max_depth || n < 2 * opt.min_leaf) return leaf();

    double sw = 0.0, swy = 0.0;
    bool pure = true;
    for (int r : rows) {
        sw += w[r];
        swy += w[r] * y[r];
        if (y[r] != y[rows[0]]) pure = false;
    }
    if (pure || sw <= 0.0) return leaf();

    // feature subset for this split
    std::vector<int> features(p);
    std::iota(features.begin(), features.end(), 0);
    if (opt.mtry > 0 && opt.mtry < p && rng != nullptr) {
        for (int k = 0; k < opt.mtry; ++k) {
            std::uniform_int_distribution<int> pick(k, p - 1);
            std::swap(features[k], features[pick(*rng)]);
        }
        features.resize(opt.mtry);
        std::sort(features.begin(), features.end());  // scan order independent of draw order
    }

    SplitChoice best;
    for (int f : features) {
        SplitChoice c = best_split_on_feature(X, y, w, sorted_by_feature[f], f, opt.min_leaf, sw, swy);
        if (c.feature >= 0 && (best.feature < 0 || c.gain > best.gain)) best = c;
    }
    if (best.feature < 0 || !(best.gain > 1e-14 * (std::abs(swy * swy / sw) + 1.0)))
        return leaf();

    // stable partition of every feature's sorted order by the chosen split
    std::vector<std::vector<int>> left_sorted(sorted_by_feature.size());
    std::vector<std::vector<int>> right_sorted(sorted_by_feature.size());
    for (std::size_t f = 0; f < sorted_by_feature.size(); ++f) {
        left_sorted[f].reserve(best.left_count);
        right_sorted[f].reserve(n - best.left_count);
        for (int r : sorted_by_feature[f]) {
            if (X(r, best.feature) < best.threshold)
                left_sorted[f].push_back(r);
            else
                right_sorted[f].push_back(r);
        }
        sorted_by_feature[f].clear();
        sorted_by_feature[f].shrink_to_fit();
    }

    const int left = build(X, y, w, left_sorted, depth + 1, opt, rng, train_pred);
    left_sorted.clear();
    const int right = build(X, y, w, right_sorted, depth + 1, opt, rng, train_pred);

    nodes_[node_index].feature = best.feature;
    nodes_[node_index].threshold = best.threshold;
    nodes_[node_index].left = left;
    nodes_[node_index].right = right;
    return node_index;
}

double RegressionTree::predict_row(const MatrixXd& X, Eigen::Index i) const {
    int node = 0;
    while (nodes_[node].feature >= 0) {
        node = X(i, nodes_[node].feature) < nodes_[node].threshold ? nodes_[node].left
                                                                   : nodes_[node].right;
    }
    return nodes_[node].value;
}

VectorXd RegressionTree::predict(const MatrixXd& X) const {
    VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = predict_row(X, i);
    return out;
}

std::vector<std::vector<int>> build_groups(Eigen::Index n_rows, const std::vector<int>& group_ids) {
    std::vector<std::vector<int>> groups;
    if (group_ids.empty()) {
        groups.resize(n_rows);
        for (Eigen::Index i = 0; i < n_rows; ++i) groups[i] = {static_cast<int>(i)};
        return groups;
    }
    int max_id = 0;
    for (int g : group_ids) max_id = std::max(max_id, g);
    groups.resize(max_id + 1);
    for (Eigen::Index i = 0; i < n_rows; ++i) groups[group_ids[i]].push_back(static_cast<int>(i));
    return groups;
}

void RandomForest::fit(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                       const std::vector<std::vector<int>>& groups, const ForestOptions& opt) {
    trees_.assign(opt.n_trees, RegressionTree());
    const int n_groups = static_cast<int>(groups.size());

    std::vector<int> base_rows;
    base_rows.reserve(X.rows());
    for (const auto& g : groups) base_rows.insert(base_rows.end(), g.begin(), g.end());

    // Sort each feature once; every bootstrap's order is then recovered by
    // replaying the master order with per-row multiplicities, which keeps
    // each tree fit linear in n instead of n log n.
    const std::vector<std::vector<int>> master = sort_rows_by_feature(X, base_rows);

    std::vector<int> count(X.rows(), 0);
    for (int b = 0; b < opt.n_trees; ++b) {
        std::mt19937_64 rng(opt.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(b + 1));
        std::uniform_int_distribution<int> pick(0, n_groups - 1);
        std::fill(count.begin(), count.end(), 0);
        int total = 0;
        for (int g = 0; g < n_groups; ++g) {
            for (int r : groups[pick(rng)]) {
                ++count[r];
                ++total;
            }
        }
        std::vector<std::vector<int>> sorted(master.size());
        for (std::size_t f = 0; f < master.size(); ++f) {
            sorted[f].reserve(total);
            for (int r : master[f])
                for (int k = 0; k < count[r]; ++k) sorted[f].push_back(r);
        }
        trees_[b].fit_presorted(X, y, w, std::move(sorted), opt.tree, &rng, nullptr);
    }
}

VectorXd RandomForest::predict(const MatrixXd& X) const {
    VectorXd out = VectorXd::Zero(X.rows());
    for (const RegressionTree& t : trees_)
        for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] += t.predict_row(X, i);
    return out / static_cast<double>(trees_.size());
}

namespace {
double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

void BoostedTrees::fit(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                       const std::vector<std::vector<int>>& groups, const BoostOptions& opt) {
    trees_.clear();
    shrinkage_ = opt.learning_rate;
    logit_ = opt.logit;

    double sw = 0.0, swy = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        sw += w[i];
        swy += w[i] * y[i];
    }
    const double mean = swy / sw;
    if (logit_) {
        const double p0 = std::clamp(mean, 1e-6, 1.0 - 1e-6);
        base_ = std::log(p0 / (1.0 - p0));
    } else {
        base_ = mean;
        clamp_lo_ = y.minCoeff();
        clamp_hi_ = y.maxCoeff();
    }

    const int n_groups = static_cast<int>(groups.size());
    std::vector<int> all_rows;
    all_rows.reserve(X.rows());
    for (const auto& g : groups) all_rows.insert(all_rows.end(), g.begin(), g.end());

    // The design never changes across rounds, so sort it once up front.
    const std::vector<std::vector<int>> master = sort_rows_by_feature(X, all_rows);
    const bool full_sample = !(opt.subsample < 1.0);
    const bool covers_all = all_rows.size() == static_cast<std::size_t>(y.size());

    VectorXd score = VectorXd::Constant(y.size(), base_);
    VectorXd resid(y.size());
    VectorXd tree_pred = VectorXd::Zero(y.size());
    std::vector<char> in_sample;
    if (full_sample && !covers_all) {
        // groups that span only part of y: scored rows outside them need a
        // real tree pass below, just like rows left out of a subsample
        in_sample.assign(static_cast<std::size_t>(y.size()), 0);
        for (int r : all_rows) in_sample[static_cast<std::size_t>(r)] = 1;
    }
    for (int round = 0; round < opt.rounds; ++round) {
        if (logit_) {
            for (Eigen::Index i = 0; i < y.size(); ++i) resid[i] = y[i] - expit(score[i]);
        } else {
            resid = y - score;
        }

        std::mt19937_64 rng(opt.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(round + 1));
        std::vector<std::vector<int>> sorted;
        if (full_sample) {
            sorted = master;
        } else {
            std::vector<int> gidx(n_groups);
            std::iota(gidx.begin(), gidx.end(), 0);
            const int take = std::max(1, static_cast<int>(opt.subsample * n_groups));
            for (int k = 0; k < take; ++k) {
                std::uniform_int_distribution<int> pick(k, n_groups - 1);
                std::swap(gidx[k], gidx[pick(rng)]);
            }
            in_sample.assign(static_cast<std::size_t>(X.rows()), 0);
            for (int k = 0; k < take; ++k)
                for (int r : groups[gidx[k]]) in_sample[static_cast<std::size_t>(r)] = 1;
            sorted.resize(master.size());
            for (std::size_t f = 0; f < master.size(); ++f) {
                sorted[f].reserve(master[f].size());
                for (int r : master[f])
                    if (in_sample[static_cast<std::size_t>(r)]) sorted[f].push_back(r);
            }
        }

        RegressionTree tree;
        tree.fit_presorted(X, resid, w, std::move(sorted), opt.tree, &rng, &tree_pred);
        if (full_sample && covers_all) {
            score += shrinkage_ * tree_pred;
        } else {
            // rows left out of this round's subsample still need a tree pass
            for (Eigen::Index i = 0; i < y.size(); ++i)
                score[i] += shrinkage_ * (in_sample[static_cast<std::size_t>(i)]
                                              ? tree_pred[i]
                                              : tree.predict_row(X, i));
        }
        trees_.push_back(std::move(tree));
    }
}

VectorXd BoostedTrees::predict_score(const MatrixXd& X) const {
    VectorXd out = VectorXd::Constant(X.rows(), base_);
    for (const RegressionTree& t : trees_)
        for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] += shrinkage_ * t.predict_row(X, i);
    return out;
}

VectorXd BoostedTrees::predict(const MatrixXd& X) const {
    VectorXd s = predict_score(X);
    if (logit_) {
        for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = expit(s[i]);
    } else {
        for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = std::clamp(s[i], clamp_lo_, clamp_hi_);
    }
    return s;
}

}  // namespace mtp::detail
