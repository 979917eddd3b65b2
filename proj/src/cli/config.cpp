#include <set>

#include "cla/cli.hpp"
#include "cla/common.hpp"
#include "cla/csv.hpp"

namespace cla::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw InputError(where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw InputError(where + ": unknown key '" + it.key() + "'");
}

fs::path resolve(const fs::path& base, const json& value) {
    fs::path p = value.get<std::string>();
    return p.is_absolute() ? p : base / p;
}

void parse_inputs(const json& j, const fs::path& base, InputPaths& in) {
    check_keys(j, {"expression", "mutation", "copy_number", "tissue", "gene_sets", "responses", "response_column",
                   "dose_response", "mas_best"},
               "inputs");
    auto opt = [&](const char* key, std::optional<fs::path>& target) {
        if (j.contains(key) && !j[key].is_null()) target = resolve(base, j[key]);
    };
    opt("expression", in.expression);
    opt("mutation", in.mutation);
    opt("copy_number", in.copy_number);
    opt("tissue", in.tissue);
    opt("responses", in.responses);
    opt("dose_response", in.dose_response);
    opt("mas_best", in.mas_best);
    if (j.contains("gene_sets")) {
        const json& g = j["gene_sets"];
        if (g.is_string())
            in.gene_sets.push_back(resolve(base, g));
        else
            for (const auto& e : g) in.gene_sets.push_back(resolve(base, e));
    }
    in.response_column = j.value("response_column", in.response_column);
}

void parse_mas(const json& j, MasRunConfig& mas) {
    check_keys(j, {"drugs", "algorithms", "grids", "feature_types", "plan", "encoding", "response_kind",
                   "univariate", "random_gene_sets", "min_cell_lines", "top_k_importance", "keep_models"},
               "mas");
    if (j.contains("drugs")) mas.drugs = j["drugs"].get<std::vector<std::string>>();
    if (j.contains("algorithms")) {
        mas.algorithms.clear();
        for (const auto& a : j["algorithms"]) mas.algorithms.push_back(parse_algorithm(a.get<std::string>()));
    }
    if (j.contains("grids")) {
        check_keys(j["grids"], {"elastic_net", "svr_rbf", "random_forest"}, "mas.grids");
        for (auto it = j["grids"].begin(); it != j["grids"].end(); ++it) {
            const Algorithm a = parse_algorithm(it.key());
            mas.grids[a] = HyperparameterGrid::from_json(a, *it);
        }
    }
    if (j.contains("feature_types")) {
        mas.feature_types.clear();
        for (const auto& t : j["feature_types"]) mas.feature_types.push_back(parse_feature_type(t.get<std::string>()));
    }
    if (j.contains("plan")) mas.plan = SplitPlan::from_json(j["plan"]);
    if (j.contains("encoding")) {
        check_keys(j["encoding"], {"binary_mutation", "include_tissue"}, "mas.encoding");
        mas.encoding.binary_mutation = j["encoding"].value("binary_mutation", false);
        mas.encoding.include_tissue = j["encoding"].value("include_tissue", false);
    }
    if (j.contains("response_kind")) mas.response_kind = parse_response_kind(j["response_kind"].get<std::string>());
    if (j.contains("univariate")) {
        check_keys(j["univariate"], {"enabled", "k"}, "mas.univariate");
        mas.univariate.enabled = j["univariate"].value("enabled", false);
        mas.univariate.k = j["univariate"].value("k", kDefaultUnivariateK);
    }
    if (j.contains("random_gene_sets") && !j["random_gene_sets"].is_null()) {
        const json& r = j["random_gene_sets"];
        check_keys(r, {"sizes", "count_per_size", "seed"}, "mas.random_gene_sets");
        RandomGeneSetSpec spec;
        spec.sizes = r.at("sizes").get<std::vector<std::size_t>>();
        spec.count_per_size = r.value("count_per_size", std::size_t{1});
        spec.seed = r.value("seed", std::uint64_t{0});
        mas.random_sets = spec;
    }
    mas.min_cell_lines = j.value("min_cell_lines", mas.min_cell_lines);
    mas.top_k_importance = j.value("top_k_importance", mas.top_k_importance);
    mas.keep_models = j.value("keep_models", mas.keep_models);
}

void parse_drs(const json& j, DrsConfig& drs) {
    check_keys(j, {"min_drugs_per_cell_line", "min_training_cell_lines", "policy", "evaluation_epsilon",
                   "target_viability", "min_level_coverage", "only_cell_lines"},
               "drs");
    drs.min_drugs_per_cell_line = j.value("min_drugs_per_cell_line", drs.min_drugs_per_cell_line);
    drs.min_training_cell_lines = j.value("min_training_cell_lines", drs.min_training_cell_lines);
    if (j.contains("policy")) {
        const json& p = j["policy"];
        check_keys(p, {"type", "n", "epsilon"}, "drs.policy");
        const std::string type = p.value("type", "top_n");
        if (type == "top_n")
            drs.policy = TopNPolicy{p.value("n", 1)};
        else if (type == "epsilon")
            drs.policy = EpsilonPolicy{p.value("epsilon", kDefaultEpsilon)};
        else
            throw InputError("drs.policy.type must be top_n or epsilon");
    }
    drs.evaluation_epsilon = j.value("evaluation_epsilon", drs.evaluation_epsilon);
    drs.target_viability = j.value("target_viability", drs.target_viability);
    drs.min_level_coverage = j.value("min_level_coverage", drs.min_level_coverage);
    if (j.contains("only_cell_lines")) drs.only_cell_lines = j["only_cell_lines"].get<std::vector<std::string>>();
}

json grid_defaults() {
    json g = json::object();
    for (auto a : {Algorithm::ElasticNet, Algorithm::SvrRbf, Algorithm::RandomForest})
        g[std::string(to_string(a))] = HyperparameterGrid::defaults(a).to_json();
    return g;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const fs::path& base_dir, const fs::path& source) {
    RunConfig c;
    c.source = source;
    c.text = text;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(source.string() + ": " + e.what());
    }
    try {
        check_keys(j, {"inputs", "seed", "workers", "mas", "drs"}, source.string());
        if (j.contains("inputs")) parse_inputs(j["inputs"], base_dir, c.inputs);
        c.seed = j.value("seed", c.seed);
        c.workers = j.value("workers", c.workers);
        if (j.contains("mas")) parse_mas(j["mas"], c.mas);
        if (j.contains("drs")) parse_drs(j["drs"], c.drs);
    } catch (const json::exception& e) {
        throw InputError(source.string() + ": " + e.what());
    }
    c.mas.seed = c.seed;
    c.mas.workers = c.workers;
    c.drs.seed = c.seed;
    c.drs.workers = c.workers;
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    if (!fs::exists(path)) throw InputError("config file not found: " + path.string());
    return parse(csv::read_text(path), path.parent_path(), path);
}

json example_config() {
    const MasRunConfig mas;
    const DrsConfig drs;
    json plan = mas.plan.to_json();
    plan.erase("seed");
    return {
        {"inputs",
         {{"expression", "expression.csv"},
          {"mutation", "mutation.csv"},
          {"copy_number", "copy_number.csv"},
          {"tissue", "tissue.csv"},
          {"gene_sets", json::array({"gene_sets"})},
          {"responses", "responses.csv"},
          {"response_column", "auc"},
          {"dose_response", "dose_response.csv"},
          {"mas_best", "mas_best.json"}}},
        {"seed", 0},
        {"workers", 1},
        {"mas",
         {{"drugs", json::array()},
          {"algorithms", {"elastic_net", "svr_rbf", "random_forest"}},
          {"grids", grid_defaults()},
          {"feature_types", {"expression", "mutation", "copy_number"}},
          {"plan", plan},
          {"encoding", {{"binary_mutation", false}, {"include_tissue", false}}},
          {"response_kind", "auc"},
          {"univariate", {{"enabled", false}, {"k", kDefaultUnivariateK}}},
          {"random_gene_sets", nullptr},
          {"min_cell_lines", mas.min_cell_lines},
          {"top_k_importance", mas.top_k_importance},
          {"keep_models", false}}},
        {"drs",
         {{"min_drugs_per_cell_line", drs.min_drugs_per_cell_line},
          {"min_training_cell_lines", drs.min_training_cell_lines},
          {"policy", {{"type", "top_n"}, {"n", 1}}},
          {"evaluation_epsilon", drs.evaluation_epsilon},
          {"target_viability", drs.target_viability},
          {"min_level_coverage", drs.min_level_coverage},
          {"only_cell_lines", json::array()}}},
    };
}

}  // namespace cla::cli
