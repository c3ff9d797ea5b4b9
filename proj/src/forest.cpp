#include "stratus/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "stratus/rng.hpp"

namespace stratus {

void ForestConfig::validate() const {
    if (n_estimators < 1) throw std::invalid_argument("forest: n_estimators must be >= 1");
    if (!use_sqrt_features && (max_features <= 0.0 || max_features > 1.0))
        throw std::invalid_argument("forest: max_features fraction must be in (0, 1]");
    if (min_samples_split < 2) throw std::invalid_argument("forest: min_samples_split must be >= 2");
    if (min_samples_leaf < 1) throw std::invalid_argument("forest: min_samples_leaf must be >= 1");
}

double impurity(std::size_t count_neg, std::size_t count_pos, SplitCriterion criterion) {
    const std::size_t total = count_neg + count_pos;
    if (total == 0) throw std::invalid_argument("impurity: empty node");
    const double p0 = double(count_neg) / double(total);
    const double p1 = double(count_pos) / double(total);
    if (criterion == SplitCriterion::gini) return 1.0 - p0 * p0 - p1 * p1;
    double e = 0.0;
    if (p0 > 0.0) e -= p0 * std::log2(p0);
    if (p1 > 0.0) e -= p1 * std::log2(p1);
    return e;
}

namespace {

struct Builder {
    const FeatureTable& table;
    const LabelVector& labels;
    const ForestConfig& cfg;
    int n_candidates;
    Tree* tree;
    Pcg32* rng;
    std::vector<std::uint32_t> rows;     // bootstrap sample, partitioned in place
    std::vector<std::uint32_t> scratch;  // per-node sort buffer

    struct BestSplit {
        int feature = -1;
        double threshold = 0.0;
        double score = 0.0;  // impurity decrease, weighted by node fraction of the left/right
        bool found = false;
    };

    // Examine one candidate feature; keep the best split. Candidates are
    // visited in ascending feature index and thresholds in ascending order,
    // so keeping the first maximum implements the tie-breaking rule.
    void scan_feature(int f, std::uint32_t lo, std::uint32_t hi, std::size_t node_pos,
                      double node_imp, BestSplit* best) {
        const auto& col = table.columns[std::size_t(f)];
        const std::size_t n = hi - lo;
        scratch.assign(rows.begin() + lo, rows.begin() + hi);
        std::sort(scratch.begin(), scratch.end(), [&](std::uint32_t a, std::uint32_t b) {
            return col[a] < col[b];
        });

        std::size_t left_pos = 0;
        const std::size_t min_leaf = std::size_t(cfg.min_samples_leaf);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left_pos += labels[scratch[i]];
            const double a = col[scratch[i]], b = col[scratch[i + 1]];
            if (a == b) continue;  // can only split between distinct values
            const std::size_t nl = i + 1, nr = n - nl;
            if (nl < min_leaf || nr < min_leaf) continue;
            const std::size_t lneg = nl - left_pos, lpos = left_pos;
            const std::size_t rpos = node_pos - left_pos, rneg = nr - rpos;
            const double child =
                (double(nl) * impurity(lneg, lpos, cfg.criterion) +
                 double(nr) * impurity(rneg, rpos, cfg.criterion)) /
                double(n);
            const double score = node_imp - child;
            const double threshold = a + (b - a) / 2.0;  // midpoint between adjacent values
            if (!best->found || score > best->score) *best = BestSplit{f, threshold, score, true};
        }
    }

    int grow(std::uint32_t lo, std::uint32_t hi) {
        const std::size_t n = hi - lo;
        std::size_t n_pos = 0;
        for (std::uint32_t i = lo; i < hi; ++i) n_pos += labels[rows[i]];

        const int node_id = int(tree->nodes.size());
        tree->nodes.push_back(TreeNode{-1, 0.0, -1, -1, n - n_pos, n_pos});

        if (n < std::size_t(cfg.min_samples_split) || n_pos == 0 || n_pos == n) return node_id;

        // Candidate features resampled at every node.
        const int k = int(table.n_cols());
        std::vector<int> pool(std::size_t(k));
        std::iota(pool.begin(), pool.end(), 0);
        for (int i = 0; i < n_candidates; ++i) {
            const int j = i + int(rng->next_below(std::uint32_t(k - i)));
            std::swap(pool[std::size_t(i)], pool[std::size_t(j)]);
        }
        std::vector<int> cand(pool.begin(), pool.begin() + n_candidates);
        std::sort(cand.begin(), cand.end());  // deterministic tie-breaking by feature index

        const double node_imp = impurity(n - n_pos, n_pos, cfg.criterion);
        BestSplit best;
        for (int f : cand) scan_feature(f, lo, hi, n_pos, node_imp, &best);
        if (!best.found || best.score <= 0.0) return node_id;

        // Partition rows in place around the chosen threshold.
        const auto& col = table.columns[std::size_t(best.feature)];
        std::uint32_t mid = lo;
        for (std::uint32_t i = lo; i < hi; ++i)
            if (col[rows[i]] <= best.threshold) std::swap(rows[i], rows[mid++]);

        tree->nodes[std::size_t(node_id)].feature = best.feature;
        tree->nodes[std::size_t(node_id)].threshold = best.threshold;
        const int left = grow(lo, mid);
        tree->nodes[std::size_t(node_id)].left = left;
        const int right = grow(mid, hi);
        tree->nodes[std::size_t(node_id)].right = right;
        return node_id;
    }
};

} // namespace

Forest forest_fit(const FeatureTable& table, const LabelVector& labels, const ForestConfig& config) {
    config.validate();
    if (labels.size() != table.n_rows()) throw std::invalid_argument("forest: label count mismatch");
    if (table.n_rows() == 0 || table.n_cols() == 0)
        throw std::invalid_argument("forest: empty table");
    const std::size_t n_pos = std::size_t(std::accumulate(labels.begin(), labels.end(), 0));
    if (n_pos == 0 || n_pos == labels.size())
        throw std::invalid_argument("forest: need both classes present");

    const int k = int(table.n_cols());
    const int n_candidates =
        config.use_sqrt_features
            ? std::min(k, int(std::ceil(std::sqrt(double(k)))))
            : std::min(k, std::max(1, int(std::ceil(config.max_features * double(k)))));

    Forest forest;
    forest.config = config;
    forest.feature_order = table.column_names;
    forest.n_training_rows = table.n_rows();
    const std::size_t n = table.n_rows();

    for (int t = 0; t < config.n_estimators; ++t) {
        // Per-tree PRNG substream: parallel growth would give identical trees.
        Pcg32 rng(config.seed, 1000 + std::uint64_t(t));
        Builder b{table, labels, config, n_candidates, nullptr, &rng, {}, {}};
        b.rows.resize(n);
        if (config.bootstrap) {
            for (std::size_t i = 0; i < n; ++i) b.rows[i] = rng.next_below(std::uint32_t(n));
        } else {
            std::iota(b.rows.begin(), b.rows.end(), 0u);
        }
        Tree tree;
        b.tree = &tree;
        b.grow(0, std::uint32_t(n));
        forest.trees.push_back(std::move(tree));
    }
    return forest;
}

std::vector<double> forest_predict_proba(const Forest& forest, const FeatureTable& table) {
    if (table.column_names != forest.feature_order)
        throw std::invalid_argument("forest: column order does not match fitted forest");
    std::vector<double> out(table.n_rows(), 0.0);
    for (const Tree& tree : forest.trees) {
        for (std::size_t i = 0; i < table.n_rows(); ++i) {
            int node = 0;
            while (!tree.nodes[std::size_t(node)].is_leaf()) {
                const TreeNode& nd = tree.nodes[std::size_t(node)];
                node = table.columns[std::size_t(nd.feature)][i] <= nd.threshold ? nd.left : nd.right;
            }
            const TreeNode& leaf = tree.nodes[std::size_t(node)];
            out[i] += double(leaf.count_pos) / double(leaf.count_pos + leaf.count_neg);
        }
    }
    for (auto& v : out) v /= double(forest.trees.size());
    return out;
}

MdiReport mdi(const Forest& forest) {
    if (forest.trees.empty()) throw std::invalid_argument("mdi: unfitted forest");
    const std::size_t k = forest.feature_order.size();
    std::vector<double> total(k, 0.0);
    for (const Tree& tree : forest.trees) {
        const double n_root =
            double(tree.nodes[0].count_neg + tree.nodes[0].count_pos);
        for (const TreeNode& nd : tree.nodes) {
            if (nd.is_leaf()) continue;
            const auto& l = tree.nodes[std::size_t(nd.left)];
            const auto& r = tree.nodes[std::size_t(nd.right)];
            const double n_node = double(nd.count_neg + nd.count_pos);
            const double n_l = double(l.count_neg + l.count_pos);
            const double n_r = double(r.count_neg + r.count_pos);
            const double decrease =
                n_node * impurity(nd.count_neg, nd.count_pos, forest.config.criterion) -
                n_l * impurity(l.count_neg, l.count_pos, forest.config.criterion) -
                n_r * impurity(r.count_neg, r.count_pos, forest.config.criterion);
            total[std::size_t(nd.feature)] += decrease / n_root;
        }
    }
    MdiReport rep;
    rep.importance = total;
    for (auto& v : rep.importance) v /= double(forest.trees.size());
    const double sum = std::accumulate(rep.importance.begin(), rep.importance.end(), 0.0);
    if (sum > 0.0) {
        for (auto& v : rep.importance) v /= sum;
        rep.normalized = true;
    } else {
        rep.normalized = false;  // all single-leaf trees
    }
    return rep;
}

void write_forest_csv(const std::string& path, const Forest& forest) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "tree,node,feature,threshold,left,right,count_neg,count_pos\n";
    char buf[40];
    for (std::size_t t = 0; t < forest.trees.size(); ++t)
        for (std::size_t n = 0; n < forest.trees[t].nodes.size(); ++n) {
            const TreeNode& nd = forest.trees[t].nodes[n];
            std::snprintf(buf, sizeof(buf), "%.17g", nd.threshold);
            out << t << "," << n << "," << nd.feature << "," << buf << "," << nd.left << ","
                << nd.right << "," << nd.count_neg << "," << nd.count_pos << "\n";
        }
}

} // namespace stratus
