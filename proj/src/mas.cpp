#include "cla/mas.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "cla/common.hpp"
#include "cla/parallel.hpp"
#include "cla/statistics.hpp"

namespace cla {

std::string_view to_string(ResponseKind kind) {
    switch (kind) {
        case ResponseKind::Auc: return "auc";
        case ResponseKind::Viability: return "viability";
        case ResponseKind::Custom: return "custom";
    }
    return "?";
}

ResponseKind parse_response_kind(std::string_view text) {
    for (auto k : {ResponseKind::Auc, ResponseKind::Viability, ResponseKind::Custom})
        if (text == to_string(k)) return k;
    throw InputError("unknown response kind '" + std::string(text) + "'");
}

void MasRunConfig::validate() const {
    if (algorithms.empty()) throw InputError("MAS config: no algorithms selected");
    if (feature_types.empty()) throw InputError("MAS config: no feature types selected");
    if (min_cell_lines < 10) throw InputError("MAS config: min_cell_lines must be >= 10");
    if (top_k_importance == 0) throw InputError("MAS config: top_k_importance must be >= 1");
    if (univariate.enabled && univariate.k == 0) throw InputError("MAS config: univariate k must be >= 1");
    plan.validate();
    for (auto a : algorithms) grid_for(a).validate();
    if (random_sets) {
        if (random_sets->sizes.empty() || random_sets->count_per_size == 0)
            throw InputError("MAS config: random gene sets need sizes and a positive count");
    }
}

HyperparameterGrid MasRunConfig::grid_for(Algorithm algorithm) const {
    auto it = grids.find(algorithm);
    return it != grids.end() ? it->second : HyperparameterGrid::defaults(algorithm);
}

std::vector<std::string> univariate_select(FeatureType type, const Eigen::MatrixXd& train_X,
                                           const std::vector<std::string>& gene_ids,
                                           std::span<const double> train_y, std::size_t k) {
    if (train_X.cols() != static_cast<Eigen::Index>(gene_ids.size()))
        throw InputError("univariate_select: gene list width mismatch");
    if (train_X.rows() != static_cast<Eigen::Index>(train_y.size()))
        throw InputError("univariate_select: response length mismatch");
    if (k > gene_ids.size())
        throw InputError("univariate_select: k=" + std::to_string(k) + " exceeds gene count " +
                         std::to_string(gene_ids.size()));

    // score: larger is better
    std::vector<double> score(gene_ids.size());
    std::vector<double> column(static_cast<std::size_t>(train_X.rows()));
    for (Eigen::Index j = 0; j < train_X.cols(); ++j) {
        for (Eigen::Index i = 0; i < train_X.rows(); ++i) column[static_cast<std::size_t>(i)] = train_X(i, j);
        if (type == FeatureType::Mutation) {
            std::vector<double> mutated, wild;
            for (std::size_t i = 0; i < column.size(); ++i) (column[i] != 0.0 ? mutated : wild).push_back(train_y[i]);
            const double p = (mutated.empty() || wild.empty()) ? 1.0 : stats::ranksum_test(mutated, wild);
            score[static_cast<std::size_t>(j)] = -p;
        } else {
            score[static_cast<std::size_t>(j)] =
                column.size() >= 3 ? std::abs(stats::spearman(column, train_y)) : 0.0;
        }
    }
    std::vector<std::size_t> order(gene_ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b]) return score[a] > score[b];
        return gene_ids[a] < gene_ids[b];
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(gene_ids[order[i]]);
    return out;
}

std::vector<GeneSet> generate_random_gene_sets(const std::vector<std::string>& universe,
                                               const std::vector<std::size_t>& sizes,
                                               std::size_t count_per_size, std::uint64_t seed) {
    std::vector<std::string> pool = universe;
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    std::vector<GeneSet> out;
    for (std::size_t size : sizes) {
        if (size == 0 || size > pool.size())
            throw InputError("random gene set size " + std::to_string(size) + " exceeds universe of " +
                             std::to_string(pool.size()) + " genes");
        for (std::size_t rep = 1; rep <= count_per_size; ++rep) {
            std::mt19937_64 rng(derive_seed(seed, {size, rep}));
            std::vector<std::string> shuffled = pool;
            // partial Fisher-Yates
            for (std::size_t i = 0; i < size; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, shuffled.size() - 1);
                std::swap(shuffled[i], shuffled[pick(rng)]);
            }
            shuffled.resize(size);
            out.emplace_back("random_" + std::to_string(size) + "_" + std::to_string(rep), std::move(shuffled));
        }
    }
    return out;
}

std::vector<std::size_t> rank_evaluations(const MasDrugResult& result) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < result.evaluations.size(); ++i) {
        const auto& r = result.evaluations[i].result;
        if (r.valid && std::isfinite(r.mean_r2)) idx.push_back(i);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto& ea = result.evaluations[a];
        const auto& eb = result.evaluations[b];
        if (ea.result.mean_r2 != eb.result.mean_r2) return ea.result.mean_r2 > eb.result.mean_r2;
        if (ea.result.r2_variance != eb.result.r2_variance) return ea.result.r2_variance < eb.result.r2_variance;
        if (ea.algorithm != eb.algorithm) return ea.algorithm < eb.algorithm;
        return false;  // stable: combo order
    });
    return idx;
}

std::map<std::string, int> top_combo_usage(const MasDrugResult& result, std::size_t top) {
    std::map<std::string, int> usage;
    const std::vector<std::size_t> ranked = rank_evaluations(result);
    std::map<Algorithm, std::size_t> taken;
    for (std::size_t i : ranked) {
        const auto& e = result.evaluations[i];
        if (taken[e.algorithm]++ >= top) continue;
        for (auto t : kAllFeatureTypes)
            if (e.combo.at(t)) ++usage[*e.combo.at(t)];
    }
    return usage;
}

GeneSetComparison compare_gene_set(const MasDrugResult& result, const std::string& set_name) {
    GeneSetComparison cmp;
    cmp.gene_set = set_name;
    bool seen = false;
    for (const auto& e : result.evaluations) {
        if (e.combo.uses(set_name) > 0) seen = true;
        if (!e.result.valid || !std::isfinite(e.result.mean_r2)) continue;
        (e.combo.uses(set_name) > 0 ? cmp.with_set : cmp.without_set).push_back(e.result.mean_r2);
    }
    if (!seen) throw InputError("gene set '" + set_name + "' was not part of the run for drug '" + result.drug + "'");
    if (cmp.with_set.empty() || cmp.without_set.empty())
        throw InputError("gene set '" + set_name + "': need evaluations both with and without the set");
    cmp.p_value = stats::ranksum_test(cmp.with_set, cmp.without_set);
    const auto usage = top_combo_usage(result, 5);
    auto it = usage.find(set_name);
    cmp.usage_count = it == usage.end() ? 0 : it->second;
    return cmp;
}

std::optional<FeatureImportances> aggregate_importances(const MasDrugResult& result, std::size_t top_k,
                                                        std::optional<Algorithm> algorithm) {
    std::vector<FeatureImportances> per_combo;
    for (std::size_t i : rank_evaluations(result)) {
        if (per_combo.size() >= top_k) break;
        const auto& e = result.evaluations[i];
        if (algorithm && e.algorithm != *algorithm) continue;
        if (e.algorithm == Algorithm::SvrRbf) continue;
        FeatureImportances avg;
        int loops = 0;
        for (const auto& loop : e.result.loops) {
            if (loop.failed || !loop.importances) continue;
            ++loops;
            for (const auto& [f, w] : *loop.importances) avg[f] += w;
        }
        if (loops == 0) continue;
        for (auto& [f, w] : avg) w /= loops;
        per_combo.push_back(std::move(avg));
    }
    if (per_combo.empty()) return std::nullopt;
    FeatureImportances out;
    for (const auto& imp : per_combo)
        for (const auto& [f, w] : imp) out[f] += w / static_cast<double>(per_combo.size());
    double total = 0.0;
    for (const auto& [f, w] : out) total += w;
    if (total > 0)
        for (auto& [f, w] : out) w /= total;
    return out;
}

namespace {

struct Task {
    std::size_t drug;
    Algorithm algorithm;
    std::size_t combo;
};

bool is_bounded_response(ResponseKind kind) { return kind != ResponseKind::Custom; }

Hyperparameters modal_choice(const EvaluationResult& r, const std::vector<Hyperparameters>& grid_points) {
    std::vector<int> votes(grid_points.size(), 0);
    for (const auto& loop : r.loops) {
        if (loop.failed || !loop.chosen) continue;
        const nlohmann::json chosen = to_json(*loop.chosen);
        for (std::size_t g = 0; g < grid_points.size(); ++g)
            if (to_json(grid_points[g]) == chosen) {
                ++votes[g];
                break;
            }
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < votes.size(); ++g)
        if (votes[g] > votes[best]) best = g;
    return grid_points[best];
}

}  // namespace

MasRunResult run_mas(const MasRunConfig& config, const GenomicData& data, const ScalarResponse& responses) {
    config.validate();
    MasRunResult run;

    for (auto t : config.feature_types)
        if (!data.matrices.count(t))
            throw InputError("MAS config uses " + std::string(to_string(t)) + " but no such matrix is loaded");
    if (config.encoding.include_tissue && !data.tissue)
        throw InputError("MAS config requests tissue features but no tissue file is loaded");

    // Gene lists available to combos.
    GenomicData working = data;
    std::vector<std::string> set_names;
    if (config.univariate.enabled) {
        set_names.push_back(std::string(kUnivariateSetName));
    } else {
        for (const auto& [name, set] : data.gene_sets) {
            set_names.push_back(name);
            run.curated_sets.push_back(name);
            run.gene_sets.emplace(name, set);
        }
        if (config.random_sets) {
            for (auto& set : generate_random_gene_sets(data.gene_universe(), config.random_sets->sizes,
                                                       config.random_sets->count_per_size,
                                                       config.random_sets->seed)) {
                if (working.gene_sets.count(set.name))
                    throw InputError("random gene set name '" + set.name + "' clashes with a curated set");
                set_names.push_back(set.name);
                working.gene_sets.emplace(set.name, set);
                run.gene_sets.emplace(set.name, std::move(set));
            }
        }
        if (set_names.empty()) throw InputError("MAS needs at least one gene set");
        for (const auto& [name, set] : run.gene_sets) {
            for (auto t : config.feature_types) {
                const FeatureMatrix& m = data.matrices.at(t);
                std::size_t missing = 0;
                for (const auto& g : set.genes)
                    if (!m.column_of(g)) ++missing;
                if (missing > 0)
                    run.warnings.push_back("gene set '" + name + "': " + std::to_string(missing) + " of " +
                                           std::to_string(set.genes.size()) + " genes absent from " +
                                           std::string(to_string(t)) + " matrix (dropped)");
            }
        }
    }
    const std::vector<Combo> combos = enumerate_combos(set_names, config.feature_types);

    // Usable cell lines per drug.
    std::vector<std::string> drugs = config.drugs;
    if (drugs.empty())
        for (const auto& [d, v] : responses) drugs.push_back(d);
    std::vector<std::string> base_ids;
    {
        const FeatureMatrix& first = data.matrices.at(config.feature_types.front());
        for (const auto& id : first.cell_line_ids()) {
            bool ok = true;
            for (auto t : config.feature_types)
                if (!data.matrices.at(t).row_of(id)) ok = false;
            if (config.encoding.include_tissue && !data.tissue->count(id)) ok = false;
            if (ok) base_ids.push_back(id);
        }
    }

    std::vector<MasDrugResult> drug_results;
    std::vector<ResponseMap> drug_y;
    for (const auto& drug : drugs) {
        auto it = responses.find(drug);
        if (it == responses.end()) {
            run.warnings.push_back("drug '" + drug + "' has no responses; skipped");
            continue;
        }
        MasDrugResult r;
        r.drug = drug;
        ResponseMap y;
        for (const auto& id : base_ids) {
            auto v = it->second.find(id);
            if (v == it->second.end()) continue;
            if (is_bounded_response(config.response_kind) && !(v->second >= 0.0 && v->second <= 1.0))
                throw InputError("response for drug '" + drug + "', cell line '" + id + "' outside [0,1]");
            r.cell_lines.push_back(id);
            y.emplace(id, v->second);
        }
        if (r.cell_lines.size() < config.min_cell_lines) {
            run.warnings.push_back("drug '" + drug + "' has " + std::to_string(r.cell_lines.size()) +
                                   " usable cell lines (< " + std::to_string(config.min_cell_lines) + "); skipped");
            continue;
        }
        drug_results.push_back(std::move(r));
        drug_y.push_back(std::move(y));
    }

    std::vector<Task> tasks;
    for (std::size_t d = 0; d < drug_results.size(); ++d)
        for (auto a : config.algorithms)
            for (std::size_t c = 0; c < combos.size(); ++c) tasks.push_back({d, a, c});

    std::vector<std::vector<OuterSplit>> splits(drug_results.size());
    std::vector<std::uint64_t> drug_seed(drug_results.size());
    for (std::size_t d = 0; d < drug_results.size(); ++d) {
        drug_seed[d] = derive_seed(config.seed, {hash_string(drug_results[d].drug)});
        SplitPlan plan = config.plan;
        plan.seed = drug_seed[d];
        splits[d] = make_split_plan(plan, drug_results[d].cell_lines);
    }

    std::vector<EvaluationResult> outcomes(tasks.size());
    const EvaluationOptions eval_options{config.keep_models};
    parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
        const Task& task = tasks[i];
        const Combo& combo = combos[task.combo];
        const auto& ids = drug_results[task.drug].cell_lines;
        DesignSource source;
        if (config.univariate.enabled) {
            source.fold_scoped = true;
            source.build = [&, ids](const std::vector<std::string>& train_ids, const std::vector<double>& train_y) {
                GenesPerType genes;
                for (auto t : kAllFeatureTypes) {
                    if (!combo.at(t)) continue;
                    const FeatureMatrix& m = data.matrices.at(t);
                    Eigen::MatrixXd train_X(static_cast<Eigen::Index>(train_ids.size()), m.values().cols());
                    for (std::size_t r = 0; r < train_ids.size(); ++r)
                        train_X.row(static_cast<Eigen::Index>(r)) = m.values().row(*m.row_of(train_ids[r]));
                    const std::size_t k = std::min(config.univariate.k, m.gene_ids().size());
                    genes[static_cast<int>(t)] = univariate_select(t, train_X, m.gene_ids(), train_y, k);
                }
                return build_design_matrix(genes, data, ids, config.encoding);
            };
        } else {
            source.build = [&, ids](const std::vector<std::string>&, const std::vector<double>&) {
                return build_design_matrix(combo, working, ids, config.encoding);
            };
        }
        const std::uint64_t learner_seed =
            derive_seed(drug_seed[task.drug], {static_cast<std::uint64_t>(task.algorithm), task.combo});
        outcomes[i] = tune_and_evaluate(source, splits[task.drug], drug_y[task.drug],
                                        config.grid_for(task.algorithm), learner_seed, eval_options);
    });

    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Task& task = tasks[i];
        MasDrugResult& r = drug_results[task.drug];
        const Combo& combo = combos[task.combo];
        bool curated = !config.univariate.enabled;
        for (auto t : kAllFeatureTypes)
            if (combo.at(t) && std::find(run.curated_sets.begin(), run.curated_sets.end(), *combo.at(t)) ==
                                   run.curated_sets.end())
                curated = false;
        for (const auto& w : outcomes[i].warnings)
            r.warnings.push_back(std::string(to_string(task.algorithm)) + " " + combo.id() + ": " + w);
        if (!outcomes[i].valid) run.valid = false;
        r.evaluations.push_back({task.algorithm, combo, curated, std::move(outcomes[i])});
    }

    for (auto& r : drug_results) {
        // Best configuration: curated combos only, unless none exists (univariate mode).
        const bool any_curated = std::any_of(r.evaluations.begin(), r.evaluations.end(),
                                             [](const ComboEvaluation& e) { return e.curated; });
        for (std::size_t i : rank_evaluations(r)) {
            const auto& e = r.evaluations[i];
            if (any_curated && !e.curated) continue;
            BestConfiguration best{e.algorithm, e.combo,
                                   modal_choice(e.result, config.grid_for(e.algorithm).points()),
                                   e.result.mean_r2, e.result.r2_values(), config.univariate.enabled};
            r.best = std::move(best);
            break;
        }
        if (!r.best) r.warnings.push_back("no valid evaluation; no best configuration");
        run.warnings.insert(run.warnings.end(), r.warnings.begin(), r.warnings.end());
        std::string drug = r.drug;
        run.drugs.emplace(std::move(drug), std::move(r));
    }
    return run;
}

nlohmann::json mas_best_to_json(const MasRunResult& run, const EncodingOptions& encoding) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["encoding"] = {{"binary_mutation", encoding.binary_mutation}, {"include_tissue", encoding.include_tissue}};
    nlohmann::json drugs = nlohmann::json::object();
    std::set<std::string> used_sets;
    for (const auto& [drug, r] : run.drugs) {
        if (!r.best) continue;
        const auto& b = *r.best;
        nlohmann::json combo = nlohmann::json::object();
        for (auto t : kAllFeatureTypes) {
            combo[std::string(to_string(t))] = b.combo.at(t) ? nlohmann::json(*b.combo.at(t)) : nlohmann::json();
            if (b.combo.at(t)) used_sets.insert(*b.combo.at(t));
        }
        drugs[drug] = {{"algorithm", std::string(to_string(b.algorithm))},
                       {"combo", combo},
                       {"combo_id", b.combo.id()},
                       {"hyperparameters", to_json(b.hyperparameters)},
                       {"mean_r2", b.mean_r2},
                       {"r2_per_loop", b.r2_per_loop},
                       {"univariate", b.univariate}};
    }
    j["drugs"] = drugs;
    nlohmann::json sets = nlohmann::json::object();
    for (const auto& name : used_sets) {
        auto it = run.gene_sets.find(name);
        if (it != run.gene_sets.end()) sets[name] = it->second.genes;
    }
    j["gene_sets"] = sets;
    return j;
}

MasBest mas_best_from_json(const nlohmann::json& j) {
    MasBest out;
    try {
        if (j.contains("encoding")) {
            out.encoding.binary_mutation = j["encoding"].value("binary_mutation", false);
            out.encoding.include_tissue = j["encoding"].value("include_tissue", false);
        }
        for (auto it = j.at("gene_sets").begin(); it != j.at("gene_sets").end(); ++it)
            out.gene_sets.emplace(it.key(), GeneSet(it.key(), it->get<std::vector<std::string>>()));
        for (auto it = j.at("drugs").begin(); it != j.at("drugs").end(); ++it) {
            const auto& e = *it;
            const Algorithm algorithm = parse_algorithm(e.at("algorithm").get<std::string>());
            std::array<std::optional<std::string>, 3> a;
            for (auto t : kAllFeatureTypes) {
                const auto& v = e.at("combo").at(std::string(to_string(t)));
                if (!v.is_null()) a[static_cast<int>(t)] = v.get<std::string>();
            }
            out.drugs.emplace(it.key(), MasBestEntry{algorithm, Combo(a),
                                                     hyperparameters_from_json(algorithm, e.at("hyperparameters")),
                                                     e.value("mean_r2", 0.0), e.value("univariate", false)});
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed mas_best document: ") + e.what());
    }
    return out;
}

}  // namespace cla
