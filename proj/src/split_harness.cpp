#include "cla/split_harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>

#include "cla/common.hpp"

namespace cla {

void SplitPlan::validate() const {
    if (n_outer < 1) throw InputError("split plan: n_outer must be >= 1");
    if (n_inner < 1) throw InputError("split plan: n_inner must be >= 1");
    if (!(outer_holdout_fraction > 0 && outer_holdout_fraction < 1))
        throw InputError("split plan: outer_holdout_fraction must be in (0,1)");
    if (!(inner_validation_fraction > 0 && inner_validation_fraction < 1))
        throw InputError("split plan: inner_validation_fraction must be in (0,1)");
}

nlohmann::json SplitPlan::to_json() const {
    return {{"n_outer", n_outer},
            {"outer_holdout_fraction", outer_holdout_fraction},
            {"n_inner", n_inner},
            {"inner_validation_fraction", inner_validation_fraction}};
}

SplitPlan SplitPlan::from_json(const nlohmann::json& j) {
    SplitPlan p;
    try {
        p.n_outer = j.value("n_outer", p.n_outer);
        p.outer_holdout_fraction = j.value("outer_holdout_fraction", p.outer_holdout_fraction);
        p.n_inner = j.value("n_inner", p.n_inner);
        p.inner_validation_fraction = j.value("inner_validation_fraction", p.inner_validation_fraction);
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it.key() != "n_outer" && it.key() != "outer_holdout_fraction" && it.key() != "n_inner" &&
                it.key() != "inner_validation_fraction")
                throw InputError("unknown split key '" + it.key() + "'");
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed split plan: ") + e.what());
    }
    p.validate();
    return p;
}

double r2(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size()) throw InputError("r2: length mismatch");
    if (y_true.size() < 2) throw InputError("r2: need at least 2 points");
    const double mean = std::accumulate(y_true.begin(), y_true.end(), 0.0) / static_cast<double>(y_true.size());
    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        sse += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
        sst += (y_true[i] - mean) * (y_true[i] - mean);
    }
    if (sst == 0.0) throw ComputeError("r2 undefined: holdout responses are constant");
    return 1.0 - sse / sst;
}

namespace {

std::size_t part_size(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

// Random partition of `ids`; both parts keep the input order.
std::pair<std::vector<std::string>, std::vector<std::string>> partition(const std::vector<std::string>& ids,
                                                                        std::size_t held,
                                                                        std::uint64_t seed) {
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> is_held(ids.size(), false);
    for (std::size_t k = 0; k < held; ++k) is_held[order[k]] = true;
    std::vector<std::string> train, hold;
    for (std::size_t i = 0; i < ids.size(); ++i) (is_held[i] ? hold : train).push_back(ids[i]);
    return {std::move(train), std::move(hold)};
}

}  // namespace

std::vector<OuterSplit> make_split_plan(const SplitPlan& plan, const std::vector<std::string>& ids) {
    plan.validate();
    const std::size_t n = ids.size();
    if (n < 10) throw InputError("split plan needs at least 10 ids, got " + std::to_string(n));
    const std::size_t held = part_size(plan.outer_holdout_fraction, n);
    const std::size_t train = n - held;
    const std::size_t inner_val = part_size(plan.inner_validation_fraction, train);
    if (held < 2 || train < 2 || inner_val < 2 || train - inner_val < 2)
        throw InputError("too few ids (" + std::to_string(n) + ") for the requested split fractions");

    std::vector<OuterSplit> out;
    for (int k = 0; k < plan.n_outer; ++k) {
        OuterSplit split;
        std::tie(split.train_ids, split.holdout_ids) =
            partition(ids, held, derive_seed(plan.seed, {0x6f75746572ULL, static_cast<std::uint64_t>(k)}));
        for (int s = 0; s < plan.n_inner; ++s) {
            InnerSplit inner;
            std::tie(inner.train_ids, inner.validation_ids) = partition(
                split.train_ids, inner_val,
                derive_seed(plan.seed, {0x696e6e6572ULL, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(s)}));
            split.inner.push_back(std::move(inner));
        }
        out.push_back(std::move(split));
    }
    return out;
}

std::vector<double> EvaluationResult::r2_values() const {
    std::vector<double> v;
    for (const auto& l : loops)
        if (!l.failed) v.push_back(l.r2);
    return v;
}

namespace {

class RowIndex {
public:
    explicit RowIndex(const DesignMatrix& design) {
        for (std::size_t i = 0; i < design.cell_line_ids.size(); ++i)
            index_.emplace(design.cell_line_ids[i], static_cast<Eigen::Index>(i));
    }
    std::vector<Eigen::Index> rows(const std::vector<std::string>& ids) const {
        std::vector<Eigen::Index> out;
        out.reserve(ids.size());
        for (const auto& id : ids) {
            auto it = index_.find(id);
            if (it == index_.end()) throw InputError("design matrix lacks cell line '" + id + "'");
            out.push_back(it->second);
        }
        return out;
    }

private:
    std::unordered_map<std::string, Eigen::Index> index_;
};

Eigen::VectorXd responses(const ResponseMap& y, const std::vector<std::string>& ids) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto it = y.find(ids[i]);
        if (it == y.end()) throw InputError("no response for cell line '" + ids[i] + "'");
        out(static_cast<Eigen::Index>(i)) = it->second;
    }
    return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.begin(), v.end()}; }

}  // namespace

EvaluationResult tune_and_evaluate(const DesignSource& design, const std::vector<OuterSplit>& splits,
                                   const ResponseMap& y, const HyperparameterGrid& grid,
                                   std::uint64_t seed, const EvaluationOptions& options) {
    const std::vector<Hyperparameters> points = grid.points();
    EvaluationResult result;

    std::optional<DesignMatrix> shared;
    if (!design.fold_scoped) shared = design.build({}, {});

    for (std::size_t k = 0; k < splits.size(); ++k) {
        const OuterSplit& split = splits[k];
        LoopResult loop;
        loop.index = static_cast<int>(k);
        loop.holdout_ids = split.holdout_ids;
        try {
            // Only outer-training responses are visible until the final holdout scoring.
            const Eigen::VectorXd y_train = responses(y, split.train_ids);
            DesignMatrix fold_design = shared ? *shared : design.build(split.train_ids, to_std(y_train));
            loop.dropped_genes = fold_design.dropped_genes;
            const RowIndex index(fold_design);

            loop.grid_scores.assign(points.size(), std::numeric_limits<double>::quiet_NaN());
            std::vector<double> score_sum(points.size(), 0.0);
            std::vector<int> score_count(points.size(), 0);
            for (std::size_t s = 0; s < split.inner.size(); ++s) {
                const InnerSplit& inner = split.inner[s];
                const Eigen::MatrixXd X_fit = fold_design.rows(index.rows(inner.train_ids));
                const Eigen::MatrixXd X_val = fold_design.rows(index.rows(inner.validation_ids));
                const Eigen::VectorXd y_fit = responses(y, inner.train_ids);
                const std::vector<double> y_val = to_std(responses(y, inner.validation_ids));
                for (std::size_t g = 0; g < points.size(); ++g) {
                    try {
                        const FittedModel model =
                            fit(points[g], X_fit, fold_design.column_names, y_fit,
                                derive_seed(seed, {k, s, g, 0x696eULL}));
                        const Eigen::VectorXd pred = predict(model, X_val, fold_design.column_names);
                        score_sum[g] += r2(y_val, to_std(pred));
                        ++score_count[g];
                    } catch (const ComputeError&) {
                        // excluded from this grid point's mean
                    }
                }
            }
            std::optional<std::size_t> best;
            for (std::size_t g = 0; g < points.size(); ++g) {
                if (score_count[g] == 0) continue;
                loop.grid_scores[g] = score_sum[g] / score_count[g];
                if (!best || loop.grid_scores[g] > loop.grid_scores[*best]) best = g;
            }
            if (!best) throw ComputeError("every grid point failed during inner tuning");
            loop.chosen = points[*best];

            const Eigen::MatrixXd X_train = fold_design.rows(index.rows(split.train_ids));
            FittedModel model = fit(points[*best], X_train, fold_design.column_names, y_train,
                                    derive_seed(seed, {k, 0x726566ULL}));
            const Eigen::MatrixXd X_hold = fold_design.rows(index.rows(split.holdout_ids));
            loop.y_pred = to_std(predict(model, X_hold, fold_design.column_names));
            loop.y_true = to_std(responses(y, split.holdout_ids));
            loop.r2 = r2(loop.y_true, loop.y_pred);
            loop.importances = feature_importances(model);
            if (options.keep_models) loop.model = std::move(model);
        } catch (const ComputeError& e) {
            loop.failed = true;
            loop.failure = e.what();
            result.warnings.push_back("outer loop " + std::to_string(k) + " failed: " + e.what());
        }
        result.loops.push_back(std::move(loop));
    }

    const std::vector<double> values = result.r2_values();
    result.failed_loops = static_cast<int>(result.loops.size() - values.size());
    if (values.empty()) {
        result.mean_r2 = std::numeric_limits<double>::quiet_NaN();
        result.r2_variance = std::numeric_limits<double>::quiet_NaN();
        result.valid = false;
    } else {
        const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        result.mean_r2 = mean;
        result.r2_variance = var / static_cast<double>(values.size());
        result.valid = result.failed_loops <= kMaxFailedLoops;
    }
    if (!result.valid)
        result.warnings.push_back(std::to_string(result.failed_loops) + " outer loops failed; evaluation invalid");
    return result;
}

EvaluationResult tune_and_evaluate(const DesignSource& design, const std::vector<std::string>& ids,
                                   const ResponseMap& y, const HyperparameterGrid& grid,
                                   const SplitPlan& plan, const EvaluationOptions& options) {
    return tune_and_evaluate(design, make_split_plan(plan, ids), y, grid, plan.seed, options);
}

}  // namespace cla
