#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cla/dose_response.hpp"
#include "cla/genomic_data.hpp"
#include "cla/learners.hpp"
#include "cla/split_harness.hpp"

namespace cla {

enum class ResponseKind { Auc, Viability, Custom };

std::string_view to_string(ResponseKind kind);
ResponseKind parse_response_kind(std::string_view text);

/// Name of the per-feature-type gene list chosen by univariate selection.
inline constexpr std::string_view kUnivariateSetName = "univariate";
inline constexpr std::size_t kDefaultUnivariateK = 263;
inline constexpr double kSignificanceLevel = 0.05;

struct UnivariateOptions {
    bool enabled = false;
    std::size_t k = kDefaultUnivariateK;
};

struct RandomGeneSetSpec {
    std::vector<std::size_t> sizes;
    std::size_t count_per_size = 0;
    std::uint64_t seed = 0;
};

struct MasRunConfig {
    /// Empty: every drug in the response table.
    std::vector<std::string> drugs;
    std::vector<Algorithm> algorithms{Algorithm::ElasticNet, Algorithm::SvrRbf, Algorithm::RandomForest};
    /// Missing entries fall back to HyperparameterGrid::defaults.
    std::map<Algorithm, HyperparameterGrid> grids;
    std::vector<FeatureType> feature_types{kAllFeatureTypes.begin(), kAllFeatureTypes.end()};
    SplitPlan plan;
    EncodingOptions encoding;
    ResponseKind response_kind = ResponseKind::Auc;
    UnivariateOptions univariate;
    std::optional<RandomGeneSetSpec> random_sets;
    std::size_t min_cell_lines = 30;
    std::size_t top_k_importance = 10;
    std::size_t workers = 1;
    std::uint64_t seed = 0;
    bool keep_models = false;

    /// Throws InputError (e.g. no algorithms, empty feature types).
    void validate() const;
    HyperparameterGrid grid_for(Algorithm algorithm) const;
};

struct ComboEvaluation {
    Algorithm algorithm;
    Combo combo;
    /// False for combos using random or univariate gene lists.
    bool curated = true;
    EvaluationResult result;
};

struct BestConfiguration {
    Algorithm algorithm;
    Combo combo;
    /// Most frequently chosen grid point over the outer loops (first in grid order on ties).
    Hyperparameters hyperparameters;
    double mean_r2 = 0.0;
    std::vector<double> r2_per_loop;
    bool univariate = false;
};

struct MasDrugResult {
    std::string drug;
    std::vector<std::string> cell_lines;
    std::vector<ComboEvaluation> evaluations;  // algorithm order, then combo order
    std::optional<BestConfiguration> best;
    std::vector<std::string> warnings;
};

struct MasRunResult {
    std::map<std::string, MasDrugResult> drugs;
    /// Every gene set evaluated, including generated random sets.
    std::map<std::string, GeneSet> gene_sets;
    std::vector<std::string> curated_sets;
    std::vector<std::string> warnings;
    bool valid = true;
};

/// Evaluates every (algorithm, combo) for every drug under the double-split plan.
/// Drugs with fewer than min_cell_lines usable cell lines are skipped with a warning.
MasRunResult run_mas(const MasRunConfig& config, const GenomicData& data, const ScalarResponse& responses);

/// Top-k genes by |Spearman rho| (expression, copy number) or by smallest rank-sum
/// p-value of mutated vs wild-type responses (mutation, collapsed to binary). Ties go
/// to the lexicographically smaller gene id. Only the rows handed in are consulted.
std::vector<std::string> univariate_select(FeatureType type, const Eigen::MatrixXd& train_X,
                                           const std::vector<std::string>& gene_ids,
                                           std::span<const double> train_y, std::size_t k = kDefaultUnivariateK);

/// Uniform sampling without replacement, named "random_<size>_<replicate>".
std::vector<GeneSet> generate_random_gene_sets(const std::vector<std::string>& universe,
                                               const std::vector<std::size_t>& sizes,
                                               std::size_t count_per_size, std::uint64_t seed);

struct GeneSetComparison {
    std::string gene_set;
    std::vector<double> with_set;
    std::vector<double> without_set;
    double p_value = 1.0;
    int usage_count = 0;
};

/// Rank-sum comparison of combo mean R2 with vs without the set, plus the number of
/// slot usages of the set in the top-5 combos of each algorithm.
GeneSetComparison compare_gene_set(const MasDrugResult& result, const std::string& set_name);

/// Slot usages of each set in the top `top` combos per algorithm.
std::map<std::string, int> top_combo_usage(const MasDrugResult& result, std::size_t top = 5);

/// Per-combo importances averaged over outer loops, then averaged over the top-k
/// combos by mean R2 and renormalized. Restricted to `algorithm` when given;
/// nullopt when no evaluated algorithm yields importances.
std::optional<FeatureImportances> aggregate_importances(const MasDrugResult& result, std::size_t top_k = 10,
                                                        std::optional<Algorithm> algorithm = std::nullopt);

/// Best-first ordering used for selection: mean R2 desc, R2 variance asc, algorithm
/// order, combo order. Invalid evaluations are excluded.
std::vector<std::size_t> rank_evaluations(const MasDrugResult& result);

/// The handoff document consumed by the recommendation stage.
nlohmann::json mas_best_to_json(const MasRunResult& run, const EncodingOptions& encoding);

struct MasBestEntry {
    Algorithm algorithm;
    Combo combo;
    Hyperparameters hyperparameters;
    double mean_r2 = 0.0;
    bool univariate = false;
};

struct MasBest {
    std::map<std::string, MasBestEntry> drugs;
    std::map<std::string, GeneSet> gene_sets;
    EncodingOptions encoding;
};

MasBest mas_best_from_json(const nlohmann::json& j);

}  // namespace cla
