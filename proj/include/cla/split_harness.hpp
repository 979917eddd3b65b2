#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cla/genomic_data.hpp"
#include "cla/learners.hpp"

namespace cla {

/// Repeated double-split holdout: n_outer Monte-Carlo holdouts, each outer training
/// set split n_inner times into inner train/validation for tuning.
struct SplitPlan {
    int n_outer = 10;
    double outer_holdout_fraction = 0.2;
    int n_inner = 5;
    double inner_validation_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static SplitPlan from_json(const nlohmann::json& j);
};

struct InnerSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> validation_ids;
};

struct OuterSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> holdout_ids;
    std::vector<InnerSplit> inner;
};

/// 1 - SSE/SST with the mean taken over y_true. Throws ComputeError when y_true is
/// constant and InputError for fewer than 2 points or unequal lengths.
double r2(std::span<const double> y_true, std::span<const double> y_pred);

/// Fully determined by plan.seed. Id order inside each part follows the input order.
/// Throws InputError when there are fewer than 10 ids or a part would hold < 2 ids.
std::vector<OuterSplit> make_split_plan(const SplitPlan& plan, const std::vector<std::string>& ids);

using ResponseMap = std::map<std::string, double>;

/// Produces the design matrix over every evaluated id. Any data-driven feature
/// selection inside `build` may only look at the rows and responses it is handed.
struct DesignSource {
    std::function<DesignMatrix(const std::vector<std::string>& train_ids,
                               const std::vector<double>& train_y)>
        build;
    /// False: built once (with empty arguments) and shared by every loop.
    bool fold_scoped = false;
};

struct LoopResult {
    int index = 0;
    bool failed = false;
    std::string failure;
    double r2 = 0.0;
    std::optional<Hyperparameters> chosen;
    /// Mean inner validation R2 per grid point; NaN where every inner fit failed.
    std::vector<double> grid_scores;
    std::vector<std::string> holdout_ids;
    std::vector<double> y_true;
    std::vector<double> y_pred;
    std::optional<FeatureImportances> importances;
    std::optional<FittedModel> model;
    std::array<std::size_t, 3> dropped_genes{0, 0, 0};
};

struct EvaluationResult {
    std::vector<LoopResult> loops;
    double mean_r2 = 0.0;
    double r2_variance = 0.0;
    int failed_loops = 0;
    /// False when more than kMaxFailedLoops loops failed (or all did).
    bool valid = true;
    std::vector<std::string> warnings;

    /// R2 of non-failed loops, in loop order.
    std::vector<double> r2_values() const;
};

inline constexpr int kMaxFailedLoops = 2;

struct EvaluationOptions {
    bool keep_models = false;
};

/// For each outer loop: grid search on the inner splits (mean validation R2, first grid
/// point wins ties), refit on the outer training set, score once on the holdout.
EvaluationResult tune_and_evaluate(const DesignSource& design, const std::vector<OuterSplit>& splits,
                                   const ResponseMap& y, const HyperparameterGrid& grid,
                                   std::uint64_t seed, const EvaluationOptions& options = {});

/// Convenience overload that builds the split plan from `ids`.
EvaluationResult tune_and_evaluate(const DesignSource& design, const std::vector<std::string>& ids,
                                   const ResponseMap& y, const HyperparameterGrid& grid,
                                   const SplitPlan& plan, const EvaluationOptions& options = {});

}  // namespace cla
