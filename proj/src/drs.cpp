#include "cla/drs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "cla/common.hpp"
#include "cla/parallel.hpp"

namespace cla {

void DrsConfig::validate() const {
    if (const auto* top = std::get_if<TopNPolicy>(&policy); top && top->n < 1)
        throw InputError("top-N policy needs N >= 1");
    if (const auto* eps = std::get_if<EpsilonPolicy>(&policy); eps && !(eps->epsilon >= 0))
        throw InputError("epsilon policy needs epsilon >= 0");
    if (!(evaluation_epsilon >= 0)) throw InputError("evaluation epsilon must be >= 0");
    if (min_drugs_per_cell_line < 1) throw InputError("min_drugs_per_cell_line must be >= 1");
    if (min_training_cell_lines < 2) throw InputError("min_training_cell_lines must be >= 2");
    if (!(min_level_coverage >= 0 && min_level_coverage <= 1)) throw InputError("coverage must be in [0,1]");
}

std::vector<RankedDrug> make_ranking(const std::map<std::string, double>& scores) {
    std::vector<RankedDrug> out;
    for (const auto& [drug, s] : scores) out.push_back({drug, s});
    // map iteration is already by drug id; stable sort keeps that as the tie-break
    std::stable_sort(out.begin(), out.end(), [](const RankedDrug& a, const RankedDrug& b) { return a.score < b.score; });
    return out;
}

std::vector<std::string> policy_top_n(const std::vector<RankedDrug>& ranking, int n) {
    if (n < 1) throw InputError("top-N policy needs N >= 1");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranking.size() && i < static_cast<std::size_t>(n); ++i) out.push_back(ranking[i].drug);
    return out;
}

std::vector<std::string> policy_epsilon(const std::vector<RankedDrug>& ranking, double epsilon) {
    if (!(epsilon >= 0)) throw InputError("epsilon policy needs epsilon >= 0");
    std::vector<std::string> out;
    if (ranking.empty()) return out;
    double lowest = ranking.front().score;
    for (const auto& r : ranking) lowest = std::min(lowest, r.score);
    for (const auto& r : ranking)
        if (r.score <= lowest + epsilon) out.push_back(r.drug);
    return out;
}

std::vector<std::string> apply_policy(const std::vector<RankedDrug>& ranking, const Policy& policy) {
    if (const auto* top = std::get_if<TopNPolicy>(&policy)) return policy_top_n(ranking, top->n);
    return policy_epsilon(ranking, std::get<EpsilonPolicy>(policy).epsilon);
}

TissueBaseline baseline_tissue(const std::string& cell_line, const std::vector<std::string>& drugs,
                               const std::vector<std::string>& pool, const ViabilityLookup& viability,
                               const TissueLabels& tissue) {
    if (drugs.empty()) throw InputError("baseline_tissue: no drugs");
    auto own = tissue.find(cell_line);
    if (own == tissue.end()) throw InputError("no tissue label for cell line '" + cell_line + "'");

    TissueBaseline out;
    std::size_t same_tissue_peers = 0;
    for (const auto& other : pool) {
        if (other == cell_line) continue;
        auto t = tissue.find(other);
        if (t != tissue.end() && t->second == own->second) ++same_tissue_peers;
    }
    out.fallback = same_tissue_peers == 0;

    std::map<std::string, double> scores;
    for (const auto& drug : drugs) {
        double same_sum = 0.0, all_sum = 0.0;
        int same_n = 0, all_n = 0;
        for (const auto& other : pool) {
            if (other == cell_line) continue;
            const auto v = viability(other, drug);
            if (!v) continue;
            all_sum += *v;
            ++all_n;
            auto t = tissue.find(other);
            if (t != tissue.end() && t->second == own->second) {
                same_sum += *v;
                ++same_n;
            }
        }
        if (same_n > 0)
            scores[drug] = same_sum / same_n;
        else if (all_n > 0)
            scores[drug] = all_sum / all_n;
        else
            scores[drug] = 1.0;  // never observed on any other cell line: least preferred
    }
    out.ranking = make_ranking(scores);
    return out;
}

std::vector<std::string> baseline_random_order(const std::string& cell_line, std::vector<std::string> drugs,
                                               std::uint64_t seed) {
    std::sort(drugs.begin(), drugs.end());
    std::mt19937_64 rng(derive_seed(seed, {hash_string(cell_line), 0x72616e64ULL}));
    std::shuffle(drugs.begin(), drugs.end(), rng);
    return drugs;
}

std::string baseline_random(const std::string& cell_line, const std::vector<std::string>& drugs, std::uint64_t seed) {
    if (drugs.empty()) throw InputError("baseline_random: no tested drugs");
    return baseline_random_order(cell_line, drugs, seed).front();
}

namespace {

struct DrugModelInputs {
    std::string drug;
    const DoseResponseTable* table = nullptr;
    MasBestEntry best;
    DesignMatrix design;
    std::unordered_map<std::string, Eigen::Index> row;
};

GenesPerType resolve_genes(const Combo& combo, const MasBest& best, const GenomicData& data) {
    GenesPerType genes;
    for (auto t : kAllFeatureTypes) {
        const auto& name = combo.at(t);
        if (!name) continue;
        if (auto it = best.gene_sets.find(*name); it != best.gene_sets.end())
            genes[static_cast<int>(t)] = it->second.genes;
        else if (auto jt = data.gene_sets.find(*name); jt != data.gene_sets.end())
            genes[static_cast<int>(t)] = jt->second.genes;
        else
            throw InputError("gene set '" + *name + "' named by mas_best is unknown");
    }
    return genes;
}

struct CellLineOutcome {
    bool kept = false;
    Recommendation recommendation;
    std::map<std::string, double> truth;
    std::vector<RankedDrug> tissue;
    bool tissue_fallback = false;
    std::vector<std::string> random_order;
    std::vector<std::string> warnings;
};

}  // namespace

DrsRun recommend_loo(const DrsConfig& config, const GenomicData& data, const DoseResponseData& dose) {
    config.validate();
    DrsRun run;
    const EncodingOptions& encoding = config.mas_best.encoding;
    if (encoding.include_tissue && !data.tissue)
        throw InputError("mas_best uses tissue features but no tissue file is loaded");

    // Drugs in scope and their design matrices over every usable cell line.
    std::vector<DrugModelInputs> models;
    for (const auto& [drug, table] : dose) {
        auto it = config.mas_best.drugs.find(drug);
        if (it == config.mas_best.drugs.end()) {
            run.warnings.push_back("drug '" + drug + "' has no mas_best entry; excluded");
            continue;
        }
        if (it->second.univariate) {
            run.warnings.push_back("drug '" + drug + "' best configuration uses univariate selection; excluded");
            continue;
        }
        try {
            run.calibration.emplace(drug, calibrate_concentration(table, config.target_viability,
                                                                  config.min_level_coverage));
        } catch (const ComputeError& e) {
            run.warnings.push_back(std::string(e.what()) + "; excluded");
            continue;
        }
        DrugModelInputs m;
        m.drug = drug;
        m.table = &table;
        m.best = it->second;
        std::vector<std::string> pool;
        for (const auto& id : data.common_cell_lines()) {
            if (encoding.include_tissue && !data.tissue->count(id)) continue;
            pool.push_back(id);
        }
        m.design = build_design_matrix(resolve_genes(m.best.combo, config.mas_best, data), data, pool, encoding);
        for (std::size_t i = 0; i < pool.size(); ++i) m.row.emplace(pool[i], static_cast<Eigen::Index>(i));
        run.drugs.push_back(drug);
        models.push_back(std::move(m));
    }
    for (const auto& [drug, entry] : config.mas_best.drugs)
        if (!dose.count(drug)) run.warnings.push_back("mas_best drug '" + drug + "' has no dose-response data");

    // Candidate cell lines: tested on enough in-scope drugs.
    std::map<std::string, std::size_t> tested_count;
    for (const auto& m : models)
        for (const auto& [cell, row] : m.table->rows) ++tested_count[cell];
    std::vector<std::string> candidates;
    const std::set<std::string> only(config.only_cell_lines.begin(), config.only_cell_lines.end());
    for (const auto& [cell, count] : tested_count) {
        if (!only.empty() && !only.count(cell)) continue;
        if (count >= config.min_drugs_per_cell_line) candidates.push_back(cell);
    }
    std::vector<std::string> tissue_pool;
    if (data.tissue)
        for (const auto& [cell, count] : tested_count)
            if (data.tissue->count(cell)) tissue_pool.push_back(cell);

    std::vector<CellLineOutcome> outcomes(candidates.size());
    parallel_for(candidates.size(), config.workers, [&](std::size_t ci) {
        const std::string& cell = candidates[ci];
        CellLineOutcome& out = outcomes[ci];
        std::map<std::string, double> predicted;
        std::map<std::string, int> level_of;
        for (const auto& m : models) {
            if (!m.table->rows.count(cell)) continue;
            if (!m.row.count(cell)) {
                out.warnings.push_back("cell line '" + cell + "' lacks features for drug '" + m.drug + "'");
                continue;
            }
            // The calibration that fixes the training response must not see the held-out cell line.
            int level = 0;
            try {
                level = calibrate_concentration(*m.table, config.target_viability, config.min_level_coverage, &cell).level;
            } catch (const ComputeError& e) {
                out.warnings.push_back(e.what());
                continue;
            }
            const auto true_v = viability_at(*m.table, cell, level);
            if (!true_v) {
                out.warnings.push_back("cell line '" + cell + "' unmeasured for drug '" + m.drug +
                                       "' at level " + std::to_string(level) + "; drug excluded");
                continue;
            }
            std::vector<std::string> train_ids;
            std::vector<Eigen::Index> train_rows;
            std::vector<double> train_y;
            for (const auto& [other, row] : m.table->rows) {
                if (other == cell || !row[level]) continue;
                auto r = m.row.find(other);
                if (r == m.row.end()) continue;
                train_ids.push_back(other);
                train_rows.push_back(r->second);
                train_y.push_back(*row[level]);
            }
            if (train_ids.size() < config.min_training_cell_lines) {
                out.warnings.push_back("drug '" + m.drug + "' has " + std::to_string(train_ids.size()) +
                                       " training cell lines without '" + cell + "'; skipped for it");
                continue;
            }
            if (config.on_training_set) config.on_training_set(cell, m.drug, train_ids);
            const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(train_y.data(), static_cast<Eigen::Index>(train_y.size()));
            try {
                const FittedModel model =
                    fit(m.best.hyperparameters, m.design.rows(train_rows), m.design.column_names, y,
                        derive_seed(config.seed, {hash_string(m.drug), hash_string(cell)}));
                const Eigen::VectorXd p = predict(model, m.design.rows({m.row.at(cell)}), m.design.column_names);
                predicted[m.drug] = p(0);
            } catch (const ComputeError& e) {
                out.warnings.push_back("fit failed for drug '" + m.drug + "' without '" + cell + "': " + e.what());
                continue;
            }
            out.truth[m.drug] = *true_v;
            level_of[m.drug] = level;
        }
        if (predicted.size() < 2) {
            out.warnings.push_back("cell line '" + cell + "' has fewer than 2 usable drugs; excluded");
            return;
        }
        out.kept = true;
        out.recommendation.cell_line = cell;
        out.recommendation.ranking = make_ranking(predicted);
        out.recommendation.recommended = apply_policy(out.recommendation.ranking, config.policy);

        std::vector<std::string> drugs;
        for (const auto& [d, v] : predicted) drugs.push_back(d);
        out.random_order = baseline_random_order(cell, drugs, config.seed);
        if (data.tissue && data.tissue->count(cell)) {
            const ViabilityLookup lookup = [&](const std::string& other, const std::string& drug) -> std::optional<double> {
                const auto& table = dose.at(drug);
                return viability_at(table, other, level_of.at(drug));
            };
            TissueBaseline tb = baseline_tissue(cell, drugs, tissue_pool, lookup, *data.tissue);
            out.tissue = std::move(tb.ranking);
            out.tissue_fallback = tb.fallback;
            if (tb.fallback)
                out.warnings.push_back("cell line '" + cell + "' is the only one of its tissue; tissue baseline used global means");
        }
    });

    for (auto& o : outcomes) {
        run.warnings.insert(run.warnings.end(), o.warnings.begin(), o.warnings.end());
        if (!o.kept) continue;
        const std::string cell = o.recommendation.cell_line;
        run.truth.emplace(cell, std::move(o.truth));
        run.random_orders.emplace(cell, std::move(o.random_order));
        if (!o.tissue.empty()) {
            run.tissue_rankings.emplace(cell, std::move(o.tissue));
            run.tissue_fallback.emplace(cell, o.tissue_fallback);
        }
        run.recommendations.emplace(cell, std::move(o.recommendation));
    }
    return run;
}

std::vector<MethodRankings> method_rankings(const DrsRun& run) {
    std::vector<MethodRankings> out;
    MethodRankings drs{"drs", {}, {}};
    for (const auto& [cell, rec] : run.recommendations) {
        drs.scored[cell] = rec.ranking;
        for (const auto& r : rec.ranking) drs.order[cell].push_back(r.drug);
    }
    out.push_back(std::move(drs));
    if (!run.tissue_rankings.empty()) {
        MethodRankings tissue{"tissue", {}, {}};
        for (const auto& [cell, ranking] : run.tissue_rankings) {
            tissue.scored[cell] = ranking;
            for (const auto& r : ranking) tissue.order[cell].push_back(r.drug);
        }
        out.push_back(std::move(tissue));
    }
    MethodRankings random{"random", run.random_orders, {}};
    out.push_back(std::move(random));
    return out;
}

const MethodMetrics& DrsEvaluation::method(const std::string& name) const {
    for (const auto& m : methods)
        if (m.name == name) return m;
    throw InputError("no evaluation for method '" + name + "'");
}

DrsEvaluation evaluate(const std::vector<MethodRankings>& methods,
                       const std::map<std::string, std::map<std::string, double>>& truth, double epsilon) {
    DrsEvaluation ev;
    ev.epsilon = epsilon;
    for (const auto& [cell, t] : truth) ev.max_drugs = std::max(ev.max_drugs, t.size());

    for (const auto& method : methods) {
        MethodMetrics mm;
        mm.name = method.name;
        std::vector<double> inclusion(ev.max_drugs, 0.0);
        std::vector<double> gap_sum(ev.max_drugs, 0.0);
        double rank_sum = 0.0, expected_sum = 0.0;
        for (const auto& [cell, t] : truth) {
            auto it = method.order.find(cell);
            if (it == method.order.end() || it->second.empty()) continue;
            const std::vector<std::string>& order = it->second;
            std::vector<double> sorted_truth;
            for (const auto& [d, v] : t) sorted_truth.push_back(v);
            std::sort(sorted_truth.begin(), sorted_truth.end());
            const double best = sorted_truth.front();
            const std::size_t n = t.size();

            mm.cell_lines.push_back(cell);
            const int rank = true_rank(t, order.front());
            mm.top1_true_rank.push_back(rank);
            mm.top1_gap.push_back(t.at(order.front()) - best);
            ++mm.rank_histogram[rank];
            rank_sum += rank;
            expected_sum += (static_cast<double>(n) + 1.0) / 2.0;

            std::vector<std::string> eps_set;
            if (auto s = method.scored.find(cell); s != method.scored.end())
                eps_set = policy_epsilon(s->second, epsilon);
            else
                eps_set = {order.front()};
            double eps_star = 0.0;
            for (const auto& d : eps_set) eps_star = std::max(eps_star, t.at(d) - best);
            mm.epsilon_star.push_back(eps_star);

            bool found = false;
            double prescribed_sum = 0.0, true_sum = 0.0;
            for (std::size_t k = 0; k < ev.max_drugs; ++k) {
                if (k < order.size()) {
                    if (true_rank(t, order[k]) == 1) found = true;
                    prescribed_sum += t.at(order[k]);
                    true_sum += sorted_truth[k];
                }
                const double used = static_cast<double>(std::min(k + 1, order.size()));
                if (found) inclusion[k] += 1.0;
                gap_sum[k] += prescribed_sum / used - true_sum / used;
            }
        }
        const double cells = static_cast<double>(mm.cell_lines.size());
        if (cells > 0) {
            for (std::size_t k = 0; k < ev.max_drugs; ++k) {
                mm.inclusion_curve.push_back(inclusion[k] / cells);
                mm.topn_gap_curve.push_back(gap_sum[k] / cells);
            }
            int cumulative = 0;
            for (std::size_t r = 1; r <= ev.max_drugs; ++r) {
                auto h = mm.rank_histogram.find(static_cast<int>(r));
                if (h != mm.rank_histogram.end()) cumulative += h->second;
                mm.rank_cdf.push_back(cumulative / cells);
            }
            auto fraction = [&](auto pred, const auto& values) {
                return static_cast<double>(std::count_if(values.begin(), values.end(), pred)) / cells;
            };
            mm.top1_accuracy = fraction([](int r) { return r == 1; }, mm.top1_true_rank);
            mm.top5_accuracy = fraction([](int r) { return r <= 5; }, mm.top1_true_rank);
            mm.mean_top1_gap = std::accumulate(mm.top1_gap.begin(), mm.top1_gap.end(), 0.0) / cells;
            mm.fraction_gap_within_002 = fraction([](double g) { return g <= 0.02; }, mm.top1_gap);
            mm.fraction_epsilon_star_within = fraction([&](double e) { return e <= epsilon; }, mm.epsilon_star);
            mm.mean_true_rank = rank_sum / cells;
            mm.expected_random_rank = expected_sum / cells;
        }
        ev.methods.push_back(std::move(mm));
    }
    return ev;
}

nlohmann::json evaluation_to_json(const DrsEvaluation& evaluation) {
    nlohmann::json j;
    j["max_drugs"] = evaluation.max_drugs;
    j["epsilon"] = evaluation.epsilon;
    nlohmann::json methods = nlohmann::json::object();
    for (const auto& m : evaluation.methods) {
        nlohmann::json hist = nlohmann::json::object();
        for (const auto& [r, c] : m.rank_histogram) hist[std::to_string(r)] = c;
        methods[m.name] = {{"cell_lines", m.cell_lines.size()},
                           {"top1_accuracy", m.top1_accuracy},
                           {"top5_accuracy", m.top5_accuracy},
                           {"mean_top1_gap", m.mean_top1_gap},
                           {"fraction_gap_within_0.02", m.fraction_gap_within_002},
                           {"fraction_epsilon_star_within_epsilon", m.fraction_epsilon_star_within},
                           {"mean_true_rank", m.mean_true_rank},
                           {"expected_random_rank", m.expected_random_rank},
                           {"rank_histogram", hist},
                           {"rank_cdf", m.rank_cdf},
                           {"inclusion_curve", m.inclusion_curve},
                           {"topn_gap_curve", m.topn_gap_curve},
                           {"per_cell_line",
                            {{"cell_line", m.cell_lines},
                             {"top1_true_rank", m.top1_true_rank},
                             {"top1_gap", m.top1_gap},
                             {"epsilon_star", m.epsilon_star}}}};
    }
    j["methods"] = methods;
    return j;
}

}  // namespace cla
