#pragma once

// Classical baselines on the 72-value per-grasp vector: a Gini random
// forest, a linear SVM trained by hinge-loss subgradient descent, and the
// MLP network preset.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "taxelgrid/error.hpp"
#include "taxelgrid/json_envelope.hpp"
#include "taxelgrid/nn/spec.hpp"
#include "taxelgrid/random.hpp"
#include "taxelgrid/sensor_image.hpp"

namespace taxelgrid {

struct FlatSample {
    std::array<double, kFlatFeatures> features{};
    Label label = Label::stable;
};

inline FlatSample to_flat_sample(const GraspSample& s) { return {flat_features(s), s.label}; }

inline std::vector<FlatSample> to_flat_samples(std::span<const GraspSample> samples) {
    std::vector<FlatSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(to_flat_sample(s));
    return out;
}

inline TactileImage flat_image(const FlatSample& s) {
    TactileImage img(1, kFlatFeatures, 1);
    std::copy(s.features.begin(), s.features.end(), img.data.begin());
    return img;
}

namespace detail {

inline void require_two_classes(std::span<const FlatSample> samples) {
    if (samples.empty()) throw Error(Errc::empty_dataset, "cannot train on an empty dataset");
    const auto stable = std::count_if(samples.begin(), samples.end(),
                                      [](const FlatSample& s) { return s.label == Label::stable; });
    if (stable == 0 || static_cast<std::size_t>(stable) == samples.size())
        throw Error(Errc::single_class, "training data contains a single class");
}

// Majority with ties resolved to slippery.
inline Label majority(std::size_t stable, std::size_t slippery) {
    return stable > slippery ? Label::stable : Label::slippery;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Random forest

struct ForestConfig {
    std::size_t n_trees = 100;
    std::optional<std::size_t> max_depth;  // unlimited when empty
    std::size_t features_per_split = 8;    // floor(sqrt(72))
    std::uint64_t bootstrap_seed = 0;

    void validate() const {
        if (n_trees == 0) throw Error(Errc::config_invalid, "n_trees must be >= 1");
        if (features_per_split == 0 || features_per_split > kFlatFeatures)
            throw Error(Errc::config_invalid, "features_per_split must lie in 1..72");
    }
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;     // x[feature] <= threshold
    int right = -1;
    Label label = Label::slippery;

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    Label predict(std::span<const double> x) const {
        std::size_t i = 0;
        while (nodes[i].feature >= 0)
            i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold
                                             ? nodes[i].left
                                             : nodes[i].right);
        return nodes[i].label;
    }

    std::size_t depth() const {
        std::size_t best = 0;
        std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
        while (!stack.empty()) {
            auto [i, d] = stack.back();
            stack.pop_back();
            best = std::max(best, d);
            if (nodes[i].feature >= 0) {
                stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
                stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
            }
        }
        return best;
    }

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct Forest {
    ForestConfig config;
    std::vector<DecisionTree> trees;
    std::vector<std::vector<std::uint32_t>> bootstrap;  // training rows drawn for each tree

    friend bool operator==(const Forest& a, const Forest& b) { return a.trees == b.trees; }
};

inline double gini(std::size_t stable, std::size_t slippery) {
    const double n = static_cast<double>(stable + slippery);
    if (n == 0.0) return 0.0;
    const double p = static_cast<double>(stable) / n, q = static_cast<double>(slippery) / n;
    return 1.0 - p * p - q * q;
}

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(std::span<const FlatSample> samples, const ForestConfig& cfg, Rng& rng)
        : samples_(samples), cfg_(cfg), rng_(rng) {}

    DecisionTree build(std::vector<std::uint32_t> rows) {
        DecisionTree tree;
        tree.nodes.emplace_back();
        grow(tree, 0, rows, 0);
        return tree;
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double impurity = 0.0;
    };

    void grow(DecisionTree& tree, std::size_t node, std::vector<std::uint32_t>& rows, std::size_t depth) {
        std::size_t stable = 0;
        for (auto r : rows) stable += samples_[r].label == Label::stable;
        const std::size_t slippery = rows.size() - stable;
        tree.nodes[node].label = majority(stable, slippery);
        if (stable == 0 || slippery == 0) return;
        if (cfg_.max_depth && depth >= *cfg_.max_depth) return;
        const Split split = best_split(rows);
        if (split.feature < 0) return;

        std::vector<std::uint32_t> left, right;
        for (auto r : rows)
            (samples_[r].features[static_cast<std::size_t>(split.feature)] <= split.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        const auto l = tree.nodes.size();
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        tree.nodes[node].feature = split.feature;
        tree.nodes[node].threshold = split.threshold;
        tree.nodes[node].left = static_cast<int>(l);
        tree.nodes[node].right = static_cast<int>(l + 1);
        grow(tree, l, left, depth + 1);
        grow(tree, l + 1, right, depth + 1);
    }

    // Visits features in random order and scores the first
    // features_per_split that are not constant within the node.
    Split best_split(const std::vector<std::uint32_t>& rows) {
        std::array<std::size_t, kFlatFeatures> order;
        std::iota(order.begin(), order.end(), std::size_t{0});
        Split best;
        std::size_t evaluated = 0;
        std::vector<std::pair<double, Label>> column(rows.size());
        std::size_t total_stable = 0;
        for (auto r : rows) total_stable += samples_[r].label == Label::stable;
        const std::size_t n = rows.size();
        for (std::size_t k = 0; k < kFlatFeatures && evaluated < cfg_.features_per_split; ++k) {
            const std::size_t pick = k + static_cast<std::size_t>(rng_() % (kFlatFeatures - k));
            std::swap(order[k], order[pick]);
            const std::size_t f = order[k];
            for (std::size_t i = 0; i < n; ++i) column[i] = {samples_[rows[i]].features[f], samples_[rows[i]].label};
            std::sort(column.begin(), column.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            if (column.front().first == column.back().first) continue;
            ++evaluated;
            std::size_t left_stable = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_stable += column[i].second == Label::stable;
                if (column[i].first == column[i + 1].first) continue;
                const std::size_t nl = i + 1, nr = n - nl;
                const std::size_t right_stable = total_stable - left_stable;
                const double impurity = (static_cast<double>(nl) * gini(left_stable, nl - left_stable) +
                                         static_cast<double>(nr) * gini(right_stable, nr - right_stable)) /
                                        static_cast<double>(n);
                if (best.feature < 0 || impurity < best.impurity) {
                    best.feature = static_cast<int>(f);
                    best.threshold = column[i].first + (column[i + 1].first - column[i].first) / 2.0;
                    best.impurity = impurity;
                }
            }
        }
        return best;
    }

    std::span<const FlatSample> samples_;
    const ForestConfig& cfg_;
    Rng& rng_;
};

}  // namespace detail

/// Grows n_trees CART trees on bootstrap resamples. Tree t uses a seed
/// derived from (bootstrap_seed, t), so each tree is independent of the others.
inline Forest rf_train(std::span<const FlatSample> samples, const ForestConfig& cfg) {
    cfg.validate();
    detail::require_two_classes(samples);
    Forest forest{cfg, {}, {}};
    const auto n = samples.size();
    for (std::size_t t = 0; t < cfg.n_trees; ++t) {
        Rng rng(derive_seed(cfg.bootstrap_seed, t));
        std::vector<std::uint32_t> rows(n);
        for (auto& r : rows) r = static_cast<std::uint32_t>(rng() % n);
        forest.bootstrap.push_back(rows);
        detail::TreeBuilder builder(samples, cfg, rng);
        forest.trees.push_back(builder.build(std::move(rows)));
    }
    return forest;
}

struct VoteCount {
    std::size_t stable = 0;
    std::size_t slippery = 0;
};

inline VoteCount rf_votes(const Forest& forest, std::span<const double> x) {
    VoteCount v;
    for (const auto& tree : forest.trees) (tree.predict(x) == Label::stable ? v.stable : v.slippery)++;
    return v;
}

/// Majority vote over trees; a tie is slippery.
inline Label rf_predict(const Forest& forest, std::span<const double> x) {
    const auto v = rf_votes(forest, x);
    return detail::majority(v.stable, v.slippery);
}

/// Accuracy of each sample's vote among trees that did not draw it.
inline double rf_oob_accuracy(const Forest& forest, std::span<const FlatSample> samples) {
    std::vector<VoteCount> votes(samples.size());
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        std::vector<bool> in_bag(samples.size(), false);
        for (auto r : forest.bootstrap[t]) in_bag[r] = true;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (in_bag[i]) continue;
            (forest.trees[t].predict(samples[i].features) == Label::stable ? votes[i].stable : votes[i].slippery)++;
        }
    }
    std::size_t scored = 0, correct = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (votes[i].stable + votes[i].slippery == 0) continue;
        ++scored;
        correct += detail::majority(votes[i].stable, votes[i].slippery) == samples[i].label;
    }
    return scored == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(scored);
}

inline json forest_to_json(const Forest& forest) {
    json j = make_envelope("random_forest");
    j["config"] = {{"n_trees", forest.config.n_trees},
                   {"max_depth", forest.config.max_depth ? json(*forest.config.max_depth) : json(nullptr)},
                   {"features_per_split", forest.config.features_per_split},
                   {"bootstrap_seed", forest.config.bootstrap_seed}};
    json params = json::array();
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        json nodes = json::array();
        for (const auto& n : forest.trees[t].nodes)
            nodes.push_back({n.feature, n.threshold, n.left, n.right, to_string(n.label)});
        params.push_back({{"name", "tree_" + std::to_string(t)}, {"nodes", std::move(nodes)}});
    }
    j["parameters"] = std::move(params);
    return j;
}

inline Forest forest_from_json(const json& j) {
    check_envelope(j, "random_forest");
    return with_json_errors([&] {
        Forest forest;
        const auto& c = j.at("config");
        forest.config.n_trees = c.at("n_trees").get<std::size_t>();
        if (!c.at("max_depth").is_null()) forest.config.max_depth = c["max_depth"].get<std::size_t>();
        forest.config.features_per_split = c.at("features_per_split").get<std::size_t>();
        forest.config.bootstrap_seed = c.at("bootstrap_seed").get<std::uint64_t>();
        for (const auto& t : j.at("parameters")) {
            DecisionTree tree;
            for (const auto& n : t.at("nodes")) {
                TreeNode node{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                              n.at(4).get<std::string>() == "stable" ? Label::stable : Label::slippery};
                tree.nodes.push_back(node);
            }
            const auto count = static_cast<int>(tree.nodes.size());
            for (const auto& n : tree.nodes)
                if (n.feature >= static_cast<int>(kFlatFeatures) ||
                    (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count)))
                    throw Error(Errc::shape_mismatch, "tree node references are out of range");
            if (tree.nodes.empty()) throw Error(Errc::shape_mismatch, "empty tree");
            forest.trees.push_back(std::move(tree));
        }
        if (forest.trees.size() != forest.config.n_trees)
            throw Error(Errc::shape_mismatch, "tree count does not match config");
        return forest;
    });
}

// ---------------------------------------------------------------------------
// Linear SVM

struct SvmConfig {
    double lambda = 1e-3;
    std::size_t epochs = 200;
    std::uint64_t seed = 0;
    double initial_step = 0.1;

    void validate() const {
        if (!(lambda > 0.0)) throw Error(Errc::config_invalid, "SVM lambda must be > 0");
        if (!(initial_step > 0.0)) throw Error(Errc::config_invalid, "SVM initial_step must be > 0");
    }
};

struct LinearModel {
    std::vector<double> w;
    double b = 0.0;
    std::vector<double> objective_history;  // after each epoch

    double decision(std::span<const double> x) const {
        double s = b;
        for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
        return s;
    }

    /// sign(w.x + b): positive is stable, zero or negative is slippery.
    Label predict(std::span<const double> x) const { return decision(x) > 0.0 ? Label::stable : Label::slippery; }

    double norm() const { return std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0)); }
};

inline double label_sign(Label l) { return l == Label::stable ? 1.0 : -1.0; }

/// Mean hinge loss plus lambda * ||w||^2.
inline double svm_objective(const LinearModel& m, std::span<const FlatSample> samples, double lambda) {
    double hinge = 0.0;
    for (const auto& s : samples) hinge += std::max(0.0, 1.0 - label_sign(s.label) * m.decision(s.features));
    const double n2 = m.norm();
    return hinge / static_cast<double>(samples.size()) + lambda * n2 * n2;
}

/// Stochastic subgradient descent on the regularised hinge objective with
/// step 1 / (2 lambda (t0 + t)), t0 chosen so the first step equals
/// initial_step, and projection of w onto the ball of radius 1/sqrt(2 lambda).
/// The bias is not regularised.
inline LinearModel svm_train(std::span<const FlatSample> samples, const SvmConfig& cfg) {
    cfg.validate();
    detail::require_two_classes(samples);
    const double reg = 2.0 * cfg.lambda;
    const double t0 = 1.0 / (reg * cfg.initial_step);
    const double radius = 1.0 / std::sqrt(reg);
    LinearModel m{std::vector<double>(kFlatFeatures, 0.0), 0.0, {}};
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed);
    double t = 0.0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (auto i : order) {
            const auto& s = samples[i];
            const double eta = 1.0 / (reg * (t0 + t));
            t += 1.0;
            const double y = label_sign(s.label);
            const double margin = y * m.decision(s.features);
            const double shrink = 1.0 - eta * reg;
            for (auto& wi : m.w) wi *= shrink;
            if (margin < 1.0) {
                for (std::size_t k = 0; k < kFlatFeatures; ++k) m.w[k] += eta * y * s.features[k];
                m.b += eta * y;
            }
            if (const double n = m.norm(); n > radius)
                for (auto& wi : m.w) wi *= radius / n;
        }
        m.objective_history.push_back(svm_objective(m, samples, cfg.lambda));
    }
    return m;
}

inline json linear_to_json(const LinearModel& m) {
    json j = make_envelope("linear_svm");
    j["parameters"] = json::array({json{{"name", "w"}, {"shape", {m.w.size()}}, {"values", m.w}},
                                   json{{"name", "b"}, {"shape", {1}}, {"values", {m.b}}}});
    return j;
}

inline LinearModel linear_from_json(const json& j) {
    check_envelope(j, "linear_svm");
    return with_json_errors([&] {
        LinearModel m;
        const auto& p = j.at("parameters");
        m.w = p.at(0).at("values").get<std::vector<double>>();
        if (m.w.size() != kFlatFeatures) throw Error(Errc::shape_mismatch, "w must have 72 values");
        const auto b = p.at(1).at("values").get<std::vector<double>>();
        if (b.size() != 1) throw Error(Errc::shape_mismatch, "b must have one value");
        m.b = b[0];
        return m;
    });
}

// ---------------------------------------------------------------------------
// MLP

/// 72 inputs, one hidden layer of 128 relu units, softmax output.
inline nn::ModelSpec mlp_preset() {
    return {"MLP", {1, kFlatFeatures, 1},
            {nn::LayerSpec::dense(128), nn::LayerSpec::relu(), nn::LayerSpec::softmax_output()}};
}

}  // namespace taxelgrid
