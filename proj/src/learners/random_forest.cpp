#include <algorithm>
#include <numeric>
#include <random>

#include "cla/common.hpp"
#include "cla/learners.hpp"

namespace cla {

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    int id = 0;
    while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
        const TreeNode& node = nodes[static_cast<std::size_t>(id)];
        id = row(node.feature) <= node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(id)].value;
}

namespace {

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double sse_reduction = 0.0;
    std::size_t left_count = 0;
};

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::size_t mtry, std::size_t min_leaf,
                std::mt19937_64& rng)
        : x_(X), y_(y), mtry_(mtry), min_leaf_(min_leaf), rng_(rng) {}

    RegressionTree build(std::vector<Eigen::Index> samples) {
        RegressionTree tree;
        tree.root_samples = samples.size();
        struct Pending {
            int node;
            std::vector<Eigen::Index> samples;
        };
        tree.nodes.emplace_back();
        std::vector<Pending> stack;
        stack.push_back({0, std::move(samples)});
        while (!stack.empty()) {
            Pending job = std::move(stack.back());
            stack.pop_back();
            auto& idx = job.samples;
            double sum = 0.0;
            for (auto i : idx) sum += y_(i);
            {
                TreeNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
                node.samples = idx.size();
                node.value = sum / static_cast<double>(idx.size());
            }
            const Split split = find_split(idx, sum);
            if (split.feature < 0) continue;

            std::vector<Eigen::Index> left, right;
            for (auto i : idx) (x_(i, split.feature) <= split.threshold ? left : right).push_back(i);
            const int left_id = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            TreeNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
            node.feature = split.feature;
            node.threshold = split.threshold;
            node.sse_reduction = split.sse_reduction;
            node.left = left_id;
            node.right = left_id + 1;
            stack.push_back({left_id + 1, std::move(right)});
            stack.push_back({left_id, std::move(left)});
        }
        return tree;
    }

private:
    Split find_split(const std::vector<Eigen::Index>& idx, double total) {
        Split best;
        const std::size_t m = idx.size();
        if (m < 2 * min_leaf_) return best;
        const double parent = total * total / static_cast<double>(m);

        // Features are drawn without replacement until mtry non-constant ones were tried.
        const auto p = static_cast<std::size_t>(x_.cols());
        std::vector<int> order(p);
        std::iota(order.begin(), order.end(), 0);
        std::size_t tried = 0;
        std::vector<std::pair<double, double>> values(m);
        for (std::size_t k = 0; k < p && tried < mtry_; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, p - 1);
            std::swap(order[k], order[pick(rng_)]);
            const int f = order[k];
            for (std::size_t s = 0; s < m; ++s) values[s] = {x_(idx[s], f), y_(idx[s])};
            std::sort(values.begin(), values.end());
            if (values.front().first == values.back().first) continue;
            ++tried;
            double left_sum = 0.0;
            for (std::size_t s = 0; s + 1 < m; ++s) {
                left_sum += values[s].second;
                if (values[s].first == values[s + 1].first) continue;
                const std::size_t nl = s + 1;
                const std::size_t nr = m - nl;
                if (nl < min_leaf_ || nr < min_leaf_) continue;
                const double right_sum = total - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(nl) +
                                    right_sum * right_sum / static_cast<double>(nr) - parent;
                if (gain > best.sse_reduction + 1e-12 * std::abs(parent) + 1e-15) {
                    best.feature = f;
                    best.threshold = 0.5 * (values[s].first + values[s + 1].first);
                    best.sse_reduction = gain;
                    best.left_count = nl;
                }
            }
        }
        return best;
    }

    const Eigen::MatrixXd& x_;
    const Eigen::VectorXd& y_;
    std::size_t mtry_;
    std::size_t min_leaf_;
    std::mt19937_64& rng_;
};

}  // namespace

FittedModel fit_random_forest(const Eigen::MatrixXd& X, const std::vector<std::string>& columns,
                              const Eigen::VectorXd& y, const ForestParams& params, std::uint64_t seed) {
    if (X.rows() != y.size() || X.rows() < 2) throw InputError("random forest needs >= 2 rows matching y");
    if (X.cols() != static_cast<Eigen::Index>(columns.size())) throw InputError("column list width mismatch");
    if (params.n_trees < 1 || params.min_leaf < 1) throw InputError("invalid random forest parameters");
    if (!X.allFinite() || !y.allFinite()) throw ComputeError("non-finite input to learner");

    const Eigen::Index n = X.rows();
    const std::size_t mtry = params.max_features.resolve(static_cast<std::size_t>(X.cols()));
    ForestModel forest;
    forest.trees.reserve(static_cast<std::size_t>(params.n_trees));
    for (int t = 0; t < params.n_trees; ++t) {
        std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
        std::uniform_int_distribution<Eigen::Index> draw(0, n - 1);
        std::vector<Eigen::Index> bootstrap(static_cast<std::size_t>(n));
        for (auto& b : bootstrap) b = draw(rng);
        TreeBuilder builder(X, y, mtry, static_cast<std::size_t>(params.min_leaf), rng);
        forest.trees.push_back(builder.build(std::move(bootstrap)));
    }
    return FittedModel(params, columns, Standardization::fit(X), std::move(forest));
}

}  // namespace cla
