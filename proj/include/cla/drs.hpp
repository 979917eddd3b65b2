#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cla/dose_response.hpp"
#include "cla/genomic_data.hpp"
#include "cla/mas.hpp"

namespace cla {

struct TopNPolicy {
    int n = 1;
};

struct EpsilonPolicy {
    double epsilon = 0.025;
};

using Policy = std::variant<TopNPolicy, EpsilonPolicy>;

inline constexpr double kDefaultEpsilon = 0.025;

struct DrsConfig {
    std::size_t min_drugs_per_cell_line = 15;
    std::size_t min_training_cell_lines = 30;
    Policy policy = TopNPolicy{1};
    /// Width used for the epsilon-policy evaluation (epsilon*).
    double evaluation_epsilon = kDefaultEpsilon;
    double target_viability = kTargetViability;
    double min_level_coverage = kMinLevelCoverage;
    MasBest mas_best;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    /// Restricts the evaluated cell lines (empty: every eligible one).
    std::vector<std::string> only_cell_lines;
    /// Called with each (held-out cell line, drug, training ids) before fitting.
    std::function<void(const std::string&, const std::string&, const std::vector<std::string>&)> on_training_set;

    void validate() const;
};

struct RankedDrug {
    std::string drug;
    double score = 0.0;  // predicted viability (or baseline score)
};

/// Sorted ascending by score, ties by drug id.
std::vector<RankedDrug> make_ranking(const std::map<std::string, double>& scores);

/// First min(n, |ranking|) drugs. Throws InputError for n < 1.
std::vector<std::string> policy_top_n(const std::vector<RankedDrug>& ranking, int n);
/// Every drug with score <= lowest score + epsilon. Throws InputError for epsilon < 0.
std::vector<std::string> policy_epsilon(const std::vector<RankedDrug>& ranking, double epsilon);
std::vector<std::string> apply_policy(const std::vector<RankedDrug>& ranking, const Policy& policy);

struct Recommendation {
    std::string cell_line;
    std::vector<RankedDrug> ranking;
    std::vector<std::string> recommended;
};

using ViabilityLookup =
    std::function<std::optional<double>(const std::string& cell_line, const std::string& drug)>;

struct TissueBaseline {
    /// Drugs ordered by mean viability over same-tissue cell lines (current one excluded).
    std::vector<RankedDrug> ranking;
    /// The cell line's tissue had no other member; global means were used.
    bool fallback = false;

    const std::string& drug() const { return ranking.front().drug; }
};

TissueBaseline baseline_tissue(const std::string& cell_line, const std::vector<std::string>& drugs,
                               const std::vector<std::string>& pool, const ViabilityLookup& viability,
                               const TissueLabels& tissue);

/// Uniformly shuffled drug order, seeded per (seed, cell line); the first entry is the pick.
std::vector<std::string> baseline_random_order(const std::string& cell_line, std::vector<std::string> drugs,
                                               std::uint64_t seed);
std::string baseline_random(const std::string& cell_line, const std::vector<std::string>& drugs,
                            std::uint64_t seed);

struct DrsRun {
    std::map<std::string, Recommendation> recommendations;
    /// cell line -> drug -> true viability at the drug's calibrated level.
    std::map<std::string, std::map<std::string, double>> truth;
    std::map<std::string, std::vector<RankedDrug>> tissue_rankings;
    std::map<std::string, std::vector<std::string>> random_orders;
    std::map<std::string, bool> tissue_fallback;
    /// Calibration over every tested cell line (report only; training uses leave-one-out levels).
    std::map<std::string, CalibratedDose> calibration;
    std::vector<std::string> drugs;
    std::vector<std::string> warnings;
};

/// Leave-one-out recommendation for every eligible cell line.
DrsRun recommend_loo(const DrsConfig& config, const GenomicData& data, const DoseResponseData& dose);

/// Rankings of one prescription method. Unscored methods (random) have no meaningful
/// scores and their epsilon policy degenerates to the top-1 pick.
struct MethodRankings {
    std::string name;
    std::map<std::string, std::vector<std::string>> order;
    std::map<std::string, std::vector<RankedDrug>> scored;
};

struct MethodMetrics {
    std::string name;
    std::vector<std::string> cell_lines;
    std::vector<int> top1_true_rank;
    std::vector<double> top1_gap;
    std::vector<double> epsilon_star;
    std::map<int, int> rank_histogram;
    std::vector<double> rank_cdf;           // [r-1] = fraction with top-1 true rank <= r
    std::vector<double> inclusion_curve;    // [N-1] = fraction with a true best drug among top N
    std::vector<double> topn_gap_curve;     // [N-1] = mean(top-N prescribed) - mean(top-N true)
    double top1_accuracy = 0.0;
    double top5_accuracy = 0.0;
    double mean_top1_gap = 0.0;
    double fraction_gap_within_002 = 0.0;
    double fraction_epsilon_star_within = 0.0;
    double mean_true_rank = 0.0;
    double expected_random_rank = 0.0;  // mean over cell lines of (n + 1) / 2
};

struct DrsEvaluation {
    std::size_t max_drugs = 0;
    double epsilon = kDefaultEpsilon;
    std::vector<MethodMetrics> methods;

    const MethodMetrics& method(const std::string& name) const;
};

/// Metrics for every method over the cell lines present in truth.
DrsEvaluation evaluate(const std::vector<MethodRankings>& methods,
                       const std::map<std::string, std::map<std::string, double>>& truth, double epsilon);

/// Dr.S, tissue (when available) and random rankings of a run.
std::vector<MethodRankings> method_rankings(const DrsRun& run);

nlohmann::json evaluation_to_json(const DrsEvaluation& evaluation);

}  // namespace cla
