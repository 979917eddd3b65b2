#include <algorithm>
#include <iostream>
#include <set>

#include "cla/cli.hpp"
#include "cla/common.hpp"
#include "cla/csv.hpp"

namespace cla::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kEqualToxicityNote =
    "Each drug is evaluated at the concentration level whose mean viability over tested cell lines is "
    "closest to the target; this treats drugs as equally toxic at those levels.";

void apply_overrides(RunConfig& cfg, const Overrides& o) {
    if (o.seed) cfg.seed = cfg.mas.seed = cfg.drs.seed = *o.seed;
    if (o.workers) cfg.workers = cfg.mas.workers = cfg.drs.workers = *o.workers;
    if (o.epsilon) {
        cfg.drs.policy = EpsilonPolicy{*o.epsilon};
        cfg.drs.evaluation_epsilon = *o.epsilon;
    }
    if (o.top_n) cfg.drs.policy = TopNPolicy{*o.top_n};
    if (o.mas_best) cfg.inputs.mas_best = *o.mas_best;
}

std::vector<fs::path> gene_set_files(const fs::path& p) {
    if (!fs::exists(p)) throw InputError("gene set path not found: " + p.string());
    if (!fs::is_directory(p)) return {p};
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

std::string policy_label(const Policy& policy) {
    if (const auto* t = std::get_if<TopNPolicy>(&policy)) return "top_n:" + std::to_string(t->n);
    return "epsilon:" + format_double(std::get<EpsilonPolicy>(policy).epsilon);
}

/// Errors are reported on stderr and in the manifest; the manifest is always written.
template <class Body>
int guarded(const std::string& command, const fs::path& out, Manifest& manifest, Body body) {
    int code = kOk;
    try {
        code = body();
    } catch (const InputError& e) {
        std::cerr << "cla " << command << ": input error: " << e.what() << "\n";
        manifest.warn(std::string("input error: ") + e.what());
        code = kInputError;
    } catch (const ComputeError& e) {
        std::cerr << "cla " << command << ": " << e.what() << "\n";
        manifest.warn(e.what());
        code = kInvalidResults;
    }
    try {
        manifest.write(out, code);
    } catch (const std::exception& e) {
        std::cerr << "cla " << command << ": could not write manifest: " << e.what() << "\n";
        if (code == kOk) code = kInputError;
    }
    if (!manifest.warnings().empty())
        std::cerr << "cla " << command << ": " << manifest.warnings().size()
                  << " warning(s), see run_manifest.json\n";
    return code;
}

void write_mas_outputs(const MasRunConfig& cfg, const MasRunResult& run, const fs::path& out, Manifest& manifest) {
    csv::Writer results({"drug", "algorithm", "combo", "curated", "loop", "status", "r2", "hyperparameters"});
    csv::Writer summary({"drug", "algorithm", "combo", "curated", "mean_r2", "r2_variance", "failed_loops", "valid"});
    for (const auto& [drug, r] : run.drugs) {
        for (const auto& e : r.evaluations) {
            const std::string algorithm(to_string(e.algorithm));
            const std::string curated = e.curated ? "1" : "0";
            for (const auto& loop : e.result.loops)
                results.add({drug, algorithm, e.combo.id(), curated, std::to_string(loop.index),
                             loop.failed ? "failed" : "ok", loop.failed ? "" : format_double(loop.r2),
                             loop.chosen ? to_json(*loop.chosen).dump() : ""});
            summary.add({drug, algorithm, e.combo.id(), curated, format_double(e.result.mean_r2),
                         format_double(e.result.r2_variance), std::to_string(e.result.failed_loops),
                         e.result.valid ? "1" : "0"});
        }
    }
    results.write(out / "mas_results.csv");
    summary.write(out / "mas_summary.csv");
    csv::write_text(out / "mas_best.json", mas_best_to_json(run, cfg.encoding).dump(2) + "\n");

    csv::Writer comparison({"drug", "gene_set", "n_with", "n_without", "mean_with", "mean_without", "p_value",
                            "significant", "top5_usage"});
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    for (const auto& [drug, r] : run.drugs) {
        for (const auto& [name, set] : run.gene_sets) {
            try {
                const GeneSetComparison c = compare_gene_set(r, name);
                comparison.add({drug, name, std::to_string(c.with_set.size()), std::to_string(c.without_set.size()),
                                format_double(mean(c.with_set)), format_double(mean(c.without_set)),
                                format_double(c.p_value), c.p_value < kSignificanceLevel ? "1" : "0",
                                std::to_string(c.usage_count)});
            } catch (const InputError& e) {
                manifest.warn("gene set comparison skipped for drug '" + drug + "': " + e.what());
            }
        }
    }
    comparison.write(out / "gene_set_comparison.csv");

    csv::Writer importances({"drug", "scope", "rank", "feature", "importance"});
    for (const auto& [drug, r] : run.drugs) {
        std::vector<std::pair<std::string, std::optional<Algorithm>>> scopes;
        for (auto a : {Algorithm::ElasticNet, Algorithm::RandomForest})
            if (std::find(cfg.algorithms.begin(), cfg.algorithms.end(), a) != cfg.algorithms.end())
                scopes.emplace_back(std::string(to_string(a)), a);
        scopes.emplace_back("all", std::nullopt);
        for (const auto& [scope, algorithm] : scopes) {
            const auto imp = aggregate_importances(r, cfg.top_k_importance, algorithm);
            if (!imp) {
                manifest.warn("feature importances unavailable for drug '" + drug + "' (" + scope + ")");
                continue;
            }
            std::vector<std::pair<std::string, double>> sorted(imp->begin(), imp->end());
            std::stable_sort(sorted.begin(), sorted.end(),
                             [](const auto& a, const auto& b) { return a.second > b.second; });
            for (std::size_t i = 0; i < sorted.size(); ++i)
                importances.add({drug, scope, std::to_string(i + 1), sorted[i].first, format_double(sorted[i].second)});
        }
    }
    importances.write(out / "feature_importances.csv");
    for (const char* f : {"mas_results.csv", "mas_summary.csv", "mas_best.json", "gene_set_comparison.csv",
                          "feature_importances.csv"})
        manifest.add_output(out / f);
}

}  // namespace

GenomicData load_genomic_data(const InputPaths& inputs, const std::vector<FeatureType>& types, Manifest& manifest) {
    GenomicData data;
    for (auto t : types) {
        const std::optional<fs::path>& p = t == FeatureType::Expression ? inputs.expression
                                           : t == FeatureType::Mutation ? inputs.mutation
                                                                        : inputs.copy_number;
        const std::string label(to_string(t));
        if (!p) throw InputError("feature type " + label + " is used but inputs." + label + " is not set");
        if (!fs::exists(*p)) throw InputError("input file not found: " + p->string());
        data.matrices.emplace(t, load_feature_matrix(*p, t));
        manifest.add_input(label, *p);
    }
    for (const auto& p : inputs.gene_sets) {
        for (const auto& f : gene_set_files(p)) {
            GeneSet set = load_gene_set(f);
            if (data.gene_sets.count(set.name)) throw InputError("duplicate gene set name '" + set.name + "'");
            data.gene_sets.emplace(set.name, std::move(set));
        }
        manifest.add_input("gene_sets:" + p.filename().string(), p);
    }
    if (inputs.tissue) {
        if (!fs::exists(*inputs.tissue)) throw InputError("input file not found: " + inputs.tissue->string());
        data.tissue = load_tissue_labels(*inputs.tissue);
        manifest.add_input("tissue", *inputs.tissue);
        data.validate_tissue();
    }
    return data;
}

int cmd_mas(const fs::path& config, const fs::path& out, const Overrides& overrides) {
    Manifest manifest("mas");
    return guarded("mas", out, manifest, [&] {
        RunConfig cfg = RunConfig::load(config);
        apply_overrides(cfg, overrides);
        manifest.set_config(cfg.text);
        manifest.set_seed(cfg.seed);
        cfg.mas.validate();
        for (auto a : cfg.mas.algorithms) cfg.mas.grid_for(a).validate();

        GenomicData data = load_genomic_data(cfg.inputs, cfg.mas.feature_types, manifest);
        ScalarResponse responses;
        if (cfg.mas.response_kind == ResponseKind::Viability) {
            if (!cfg.inputs.dose_response) throw InputError("response_kind viability needs inputs.dose_response");
            if (!fs::exists(*cfg.inputs.dose_response))
                throw InputError("input file not found: " + cfg.inputs.dose_response->string());
            const DoseResponseData dose = load_dose_response(*cfg.inputs.dose_response);
            manifest.add_input("dose_response", *cfg.inputs.dose_response);
            for (const auto& [drug, table] : dose) {
                const CalibratedDose cal = calibrate_concentration(table, cfg.drs.target_viability,
                                                                   cfg.drs.min_level_coverage);
                for (const auto& [cell, row] : table.rows)
                    if (row[cal.level]) responses[drug][cell] = *row[cal.level];
            }
        } else {
            if (!cfg.inputs.responses) throw InputError("MAS needs inputs.responses");
            if (!fs::exists(*cfg.inputs.responses))
                throw InputError("input file not found: " + cfg.inputs.responses->string());
            responses = load_scalar_response(*cfg.inputs.responses, cfg.inputs.response_column);
            manifest.add_input("responses", *cfg.inputs.responses);
        }

        const MasRunResult run = run_mas(cfg.mas, data, responses);
        manifest.warn_all(run.warnings);
        fs::create_directories(out);
        write_mas_outputs(cfg.mas, run, out, manifest);
        for (const auto& p : write_mas_plot_data(out, out)) manifest.add_output(p);
        for (const auto& [drug, r] : run.drugs)
            if (!r.best) return static_cast<int>(kInvalidResults);
        return run.valid ? static_cast<int>(kOk) : static_cast<int>(kInvalidResults);
    });
}

int cmd_drs(const fs::path& config, const fs::path& out, const Overrides& overrides) {
    Manifest manifest("drs");
    return guarded("drs", out, manifest, [&] {
        RunConfig cfg = RunConfig::load(config);
        apply_overrides(cfg, overrides);
        manifest.set_config(cfg.text);
        manifest.set_seed(cfg.seed);
        if (!cfg.inputs.mas_best) throw InputError("Dr.S needs a mas_best document (inputs.mas_best or --mas-best)");
        if (!fs::exists(*cfg.inputs.mas_best)) throw InputError("mas_best not found: " + cfg.inputs.mas_best->string());
        try {
            cfg.drs.mas_best = mas_best_from_json(json::parse(csv::read_text(*cfg.inputs.mas_best)));
        } catch (const json::parse_error& e) {
            throw InputError(cfg.inputs.mas_best->string() + ": " + e.what());
        }
        manifest.add_input("mas_best", *cfg.inputs.mas_best);
        cfg.drs.validate();

        std::set<FeatureType> used;
        for (const auto& [drug, entry] : cfg.drs.mas_best.drugs)
            for (auto t : kAllFeatureTypes)
                if (entry.combo.at(t)) used.insert(t);
        GenomicData data = load_genomic_data(cfg.inputs, {used.begin(), used.end()}, manifest);
        if (!cfg.inputs.dose_response) throw InputError("Dr.S needs inputs.dose_response");
        if (!fs::exists(*cfg.inputs.dose_response))
            throw InputError("input file not found: " + cfg.inputs.dose_response->string());
        const DoseResponseData dose = load_dose_response(*cfg.inputs.dose_response);
        manifest.add_input("dose_response", *cfg.inputs.dose_response);

        const DrsRun run = recommend_loo(cfg.drs, data, dose);
        manifest.warn_all(run.warnings);
        const DrsEvaluation ev = evaluate(method_rankings(run), run.truth, cfg.drs.evaluation_epsilon);

        fs::create_directories(out);
        csv::Writer recs({"cell_line", "rank", "drug", "predicted_viability", "true_viability", "true_rank",
                          "recommended"});
        csv::Writer policy({"cell_line", "policy", "drug"});
        csv::Writer baselines({"cell_line", "tissue_drug", "tissue_fallback", "random_drug"});
        const Policy eval_policy = EpsilonPolicy{cfg.drs.evaluation_epsilon};
        const bool extra_policy = policy_label(eval_policy) != policy_label(cfg.drs.policy);
        for (const auto& [cell, rec] : run.recommendations) {
            const auto& truth = run.truth.at(cell);
            const std::set<std::string> chosen(rec.recommended.begin(), rec.recommended.end());
            for (std::size_t i = 0; i < rec.ranking.size(); ++i) {
                const auto& r = rec.ranking[i];
                recs.add({cell, std::to_string(i + 1), r.drug, format_double(r.score), format_double(truth.at(r.drug)),
                          std::to_string(true_rank(truth, r.drug)), chosen.count(r.drug) ? "1" : "0"});
            }
            for (const auto& d : rec.recommended) policy.add({cell, policy_label(cfg.drs.policy), d});
            if (extra_policy)
                for (const auto& d : apply_policy(rec.ranking, eval_policy)) policy.add({cell, policy_label(eval_policy), d});
            auto t = run.tissue_rankings.find(cell);
            baselines.add({cell, t == run.tissue_rankings.end() ? "" : t->second.front().drug,
                           t == run.tissue_rankings.end() ? "" : (run.tissue_fallback.at(cell) ? "1" : "0"),
                           run.random_orders.at(cell).front()});
        }
        recs.write(out / "drs_recommendations.csv");
        policy.write(out / "drs_policy.csv");
        baselines.write(out / "drs_baselines.csv");

        csv::Writer calibration({"drug", "level", "mean_viability"});
        for (const auto& [drug, cal] : run.calibration)
            calibration.add({drug, std::to_string(cal.level), format_double(cal.mean_viability)});
        calibration.write(out / "drs_calibration.csv");

        json doc = evaluation_to_json(ev);
        doc["assumption"] = kEqualToxicityNote;
        doc["policy"] = policy_label(cfg.drs.policy);
        doc["target_viability"] = cfg.drs.target_viability;
        doc["drugs"] = run.drugs;
        csv::write_text(out / "drs_eval.json", doc.dump(2) + "\n");
        for (const char* f : {"drs_recommendations.csv", "drs_policy.csv", "drs_baselines.csv", "drs_calibration.csv",
                              "drs_eval.json"})
            manifest.add_output(out / f);
        for (const auto& p : write_drs_plot_data(out, out)) manifest.add_output(p);
        return run.recommendations.empty() ? static_cast<int>(kInvalidResults) : static_cast<int>(kOk);
    });
}

int cmd_synth(const std::optional<fs::path>& config, const fs::path& out, const Overrides& overrides) {
    Manifest manifest("synth");
    return guarded("synth", out, manifest, [&] {
        json j = json::object();
        if (config) {
            if (!fs::exists(*config)) throw InputError("config file not found: " + config->string());
            const std::string text = csv::read_text(*config);
            manifest.set_config(text);
            try {
                j = json::parse(text);
            } catch (const json::parse_error& e) {
                throw InputError(config->string() + ": " + e.what());
            }
            if (!j.is_object()) throw InputError(config->string() + ": must be a JSON object");
            for (auto it = j.begin(); it != j.end(); ++it)
                if (it.key() != "synthetic" && it.key() != "run")
                    throw InputError(config->string() + ": unknown key '" + it.key() + "'");
        }
        SyntheticSpec spec = SyntheticSpec::from_json(j.value("synthetic", json::object()));
        if (overrides.seed) spec.seed = *overrides.seed;
        manifest.set_seed(spec.seed);
        const SyntheticWorld world = generate_world(spec);
        fs::create_directories(out);
        write_world(world, spec, out);

        json run_config = example_config();
        run_config["seed"] = spec.seed;
        if (j.contains("run")) run_config.merge_patch(j["run"]);
        // Validate the generated config the same way mas/drs will read it.
        RunConfig::parse(run_config.dump(), out, out / "config.json");
        csv::write_text(out / "config.json", run_config.dump(2) + "\n");
        csv::write_text(out / "config.example", example_config().dump(2) + "\n");
        for (const char* f : {"expression.csv", "mutation.csv", "copy_number.csv", "tissue.csv", "dose_response.csv",
                              "responses.csv", "ground_truth.json", "config.json", "config.example"})
            manifest.add_output(out / f);
        return static_cast<int>(kOk);
    });
}

}  // namespace cla::cli
