#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stratus/features.hpp"

namespace stratus {

enum class SplitCriterion { gini, entropy };

struct ForestConfig {
    int n_estimators = 100;
    SplitCriterion criterion = SplitCriterion::gini;
    // Candidate features per split: ceil(max_features * n_features) when
    // use_sqrt_features is false, else ceil(sqrt(n_features)).
    double max_features = 1.0;
    bool use_sqrt_features = true;
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    bool bootstrap = true;
    std::uint64_t seed = 1;

    void validate() const;
};

struct TreeNode {
    int feature = -1;        // -1 for leaves
    double threshold = 0.0;  // go left when x <= threshold
    int left = -1;
    int right = -1;
    std::size_t count_neg = 0;
    std::size_t count_pos = 0;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // node 0 is the root
};

struct Forest {
    ForestConfig config;
    std::vector<std::string> feature_order;
    std::vector<Tree> trees;
    std::size_t n_training_rows = 0;
};

// gini = 1 - sum p^2; entropy = -sum p log2 p (in bits).
double impurity(std::size_t count_neg, std::size_t count_pos, SplitCriterion criterion);

Forest forest_fit(const FeatureTable& table, const LabelVector& labels, const ForestConfig& config);

std::vector<double> forest_predict_proba(const Forest& forest, const FeatureTable& table);

struct MdiReport {
    std::vector<double> importance;  // per feature, summing to 1 when defined
    bool normalized = true;          // false when every tree is a single leaf
};
MdiReport mdi(const Forest& forest);

void write_forest_csv(const std::string& path, const Forest& forest);

} // namespace stratus
