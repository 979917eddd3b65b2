#include "cla/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "cla/common.hpp"
#include "cla/csv.hpp"

namespace cla {

std::string_view to_string(Link link) {
    switch (link) {
        case Link::Linear: return "linear";
        case Link::Threshold: return "threshold";
        case Link::Interaction: return "interaction";
    }
    return "linear";
}

Link parse_link(std::string_view text) {
    if (text == "linear") return Link::Linear;
    if (text == "threshold") return Link::Threshold;
    if (text == "interaction") return Link::Interaction;
    throw InputError("unknown link '" + std::string(text) + "' (expected linear, threshold or interaction)");
}

namespace {

std::string padded(const std::string& prefix, std::size_t value, std::size_t count, std::size_t min_width) {
    std::size_t width = min_width;
    for (std::size_t c = count; c >= 10; c /= 10) width = std::max(width, std::to_string(c).size());
    std::string digits = std::to_string(value);
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return prefix + digits;
}

std::vector<std::string> gene_universe(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t g = 0; g < n; ++g) out.push_back(synthetic_gene_id(g, n));
    return out;
}

nlohmann::json informative_to_json(const std::vector<InformativeGene>& genes) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& g : genes) out.push_back({{"type", to_string(g.type)}, {"gene", g.gene}, {"weight", g.weight}});
    return out;
}

std::vector<InformativeGene> informative_from_json(const nlohmann::json& j) {
    std::vector<InformativeGene> out;
    for (const auto& e : j) {
        InformativeGene g;
        g.type = parse_feature_type(e.at("type").get<std::string>());
        g.gene = e.at("gene").get<std::string>();
        g.weight = e.value("weight", 1.0);
        out.push_back(std::move(g));
    }
    return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string synthetic_cell_line_id(std::size_t index, std::size_t count) { return padded("CL", index + 1, count, 4); }
std::string synthetic_gene_id(std::size_t index, std::size_t count) { return padded("G", index + 1, count, 4); }
std::string synthetic_drug_id(std::size_t index, std::size_t count) { return padded("D", index + 1, count, 2); }

void SyntheticSpec::validate() const {
    if (n_cell_lines < 2) throw InputError("synthetic: n_cell_lines must be >= 2");
    if (n_genes < 1) throw InputError("synthetic: n_genes must be >= 1");
    if (n_drugs < 1) throw InputError("synthetic: n_drugs must be >= 1");
    const std::size_t pool = planted_pool_size == 0 ? informative_per_drug : planted_pool_size;
    if (informative_per_drug > pool) throw InputError("synthetic: informative_per_drug exceeds the planted pool");
    if (pool + n_decoy_sets * decoy_set_size > n_genes)
        throw InputError("synthetic: planted pool and decoy sets need more genes than n_genes");
    if (n_decoy_sets > 0 && decoy_set_size == 0) throw InputError("synthetic: decoy_set_size must be >= 1");
    if (!(noise >= 0)) throw InputError("synthetic: noise must be >= 0");
    if (!(signal_scale >= 0)) throw InputError("synthetic: signal_scale must be >= 0");
    if (!(missingness >= 0 && missingness < 1)) throw InputError("synthetic: missingness must be in [0,1)");
    if (!(mutation_prevalence >= 0 && mutation_prevalence <= 1))
        throw InputError("synthetic: mutation_prevalence must be in [0,1]");
    if (!(copy_number_sd >= 0)) throw InputError("synthetic: copy_number_sd must be >= 0");
    if (n_tissues < 1 || n_tissues > n_cell_lines) throw InputError("synthetic: n_tissues must be in [1, n_cell_lines]");
    if (!(tissue_effect >= 0)) throw InputError("synthetic: tissue_effect must be >= 0");
    if (!(slope > 0)) throw InputError("synthetic: slope must be > 0");
    if (!(dose_step >= 0)) throw InputError("synthetic: dose_step must be >= 0");
    if (!(offset_min <= offset_max)) throw InputError("synthetic: offset_min must be <= offset_max");
    const std::vector<std::string> universe = gene_universe(n_genes);
    for (const auto& [index, drug] : drug_overrides) {
        if (index >= n_drugs) throw InputError("synthetic: drug override index " + std::to_string(index) + " >= n_drugs");
        if (!(drug.noise >= 0)) throw InputError("synthetic: noise must be >= 0");
        for (const auto& g : drug.informative)
            if (!std::binary_search(universe.begin(), universe.end(), g.gene))
                throw InputError("synthetic: informative gene '" + g.gene + "' is outside the gene universe");
    }
}

nlohmann::json SyntheticSpec::to_json() const {
    nlohmann::json j = {{"n_cell_lines", n_cell_lines},
                        {"n_genes", n_genes},
                        {"n_drugs", n_drugs},
                        {"informative_per_drug", informative_per_drug},
                        {"informative_type", to_string(informative_type)},
                        {"link", to_string(link)},
                        {"noise", noise},
                        {"signal_scale", signal_scale},
                        {"planted_pool_size", planted_pool_size},
                        {"n_decoy_sets", n_decoy_sets},
                        {"decoy_set_size", decoy_set_size},
                        {"n_tissues", n_tissues},
                        {"tissue_effect", tissue_effect},
                        {"mutation_prevalence", mutation_prevalence},
                        {"copy_number_sd", copy_number_sd},
                        {"missingness", missingness},
                        {"slope", slope},
                        {"dose_step", dose_step},
                        {"offset_min", offset_min},
                        {"offset_max", offset_max},
                        {"seed", seed}};
    nlohmann::json drugs = nlohmann::json::array();
    for (const auto& [index, d] : drug_overrides)
        drugs.push_back({{"index", index}, {"informative", informative_to_json(d.informative)},
                         {"link", to_string(d.link)}, {"noise", d.noise}});
    j["drugs"] = drugs;
    return j;
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InputError("synthetic spec must be a JSON object");
    SyntheticSpec s;
    static const std::set<std::string> known = {
        "n_cell_lines", "n_genes", "n_drugs", "informative_per_drug", "informative_type", "link", "noise",
        "signal_scale", "planted_pool_size", "n_decoy_sets", "decoy_set_size", "n_tissues", "tissue_effect",
        "mutation_prevalence", "copy_number_sd", "missingness", "slope", "dose_step", "offset_min",
        "offset_max", "seed", "drugs"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw InputError("synthetic spec: unknown key '" + key + "'");
    try {
        s.n_cell_lines = j.value("n_cell_lines", s.n_cell_lines);
        s.n_genes = j.value("n_genes", s.n_genes);
        s.n_drugs = j.value("n_drugs", s.n_drugs);
        s.informative_per_drug = j.value("informative_per_drug", s.informative_per_drug);
        if (j.contains("informative_type")) s.informative_type = parse_feature_type(j["informative_type"].get<std::string>());
        if (j.contains("link")) s.link = parse_link(j["link"].get<std::string>());
        s.noise = j.value("noise", s.noise);
        s.signal_scale = j.value("signal_scale", s.signal_scale);
        s.planted_pool_size = j.value("planted_pool_size", s.planted_pool_size);
        s.n_decoy_sets = j.value("n_decoy_sets", s.n_decoy_sets);
        s.decoy_set_size = j.value("decoy_set_size", s.decoy_set_size);
        s.n_tissues = j.value("n_tissues", s.n_tissues);
        s.tissue_effect = j.value("tissue_effect", s.tissue_effect);
        s.mutation_prevalence = j.value("mutation_prevalence", s.mutation_prevalence);
        s.copy_number_sd = j.value("copy_number_sd", s.copy_number_sd);
        s.missingness = j.value("missingness", s.missingness);
        s.slope = j.value("slope", s.slope);
        s.dose_step = j.value("dose_step", s.dose_step);
        s.offset_min = j.value("offset_min", s.offset_min);
        s.offset_max = j.value("offset_max", s.offset_max);
        s.seed = j.value("seed", s.seed);
        if (j.contains("drugs")) {
            for (const auto& d : j["drugs"]) {
                SyntheticDrugSpec drug;
                drug.informative = informative_from_json(d.at("informative"));
                if (d.contains("link")) drug.link = parse_link(d["link"].get<std::string>());
                drug.noise = d.value("noise", s.noise);
                s.drug_overrides[d.at("index").get<std::size_t>()] = std::move(drug);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("synthetic spec: ") + e.what());
    }
    return s;
}

SyntheticWorld generate_world(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticWorld world;
    const std::size_t n = spec.n_cell_lines;
    const std::size_t p = spec.n_genes;

    std::vector<std::string> cells;
    for (std::size_t i = 0; i < n; ++i) cells.push_back(synthetic_cell_line_id(i, n));
    const std::vector<std::string> genes = gene_universe(p);

    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Eigen::MatrixXd expression(n, p), mutation(n, p), copy_number(n, p);
    {
        std::mt19937_64 rng(derive_seed(spec.seed, {1}));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t g = 0; g < p; ++g) expression(i, g) = normal(rng);
    }
    {
        std::mt19937_64 rng(derive_seed(spec.seed, {2}));
        std::uniform_int_distribution<int> code(1, kMaxMutationCode);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t g = 0; g < p; ++g) {
                const bool mutated = unit(rng) < spec.mutation_prevalence;
                const int c = code(rng);
                mutation(i, g) = mutated ? c : 0;
            }
    }
    {
        std::mt19937_64 rng(derive_seed(spec.seed, {3}));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t g = 0; g < p; ++g)
                copy_number(i, g) = std::clamp(std::round(spec.copy_number_sd * normal(rng)), -2.0, 2.0);
    }
    world.data.matrices.emplace(FeatureType::Expression, FeatureMatrix(FeatureType::Expression, cells, genes, expression));
    world.data.matrices.emplace(FeatureType::Mutation, FeatureMatrix(FeatureType::Mutation, cells, genes, mutation));
    world.data.matrices.emplace(FeatureType::CopyNumber, FeatureMatrix(FeatureType::CopyNumber, cells, genes, copy_number));

    std::vector<std::string> tissue_names;
    for (std::size_t t = 0; t < spec.n_tissues; ++t) tissue_names.push_back("T" + std::to_string(t + 1));
    std::vector<std::size_t> tissue_of(n);
    {
        for (std::size_t i = 0; i < n; ++i) tissue_of[i] = i % spec.n_tissues;
        std::mt19937_64 rng(derive_seed(spec.seed, {4}));
        std::shuffle(tissue_of.begin(), tissue_of.end(), rng);
        TissueLabels labels;
        for (std::size_t i = 0; i < n; ++i) labels[cells[i]] = tissue_names[tissue_of[i]];
        world.data.tissue = std::move(labels);
    }

    const std::size_t pool_size = spec.planted_pool_size == 0 ? spec.informative_per_drug : spec.planted_pool_size;
    std::vector<std::string> pool;
    {
        std::vector<std::size_t> order(p);
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(derive_seed(spec.seed, {5}));
        std::shuffle(order.begin(), order.end(), rng);
        std::size_t next = 0;
        for (; next < pool_size; ++next) pool.push_back(genes[order[next]]);
        if (!pool.empty()) world.data.gene_sets.emplace("planted", GeneSet("planted", pool));
        for (std::size_t d = 0; d < spec.n_decoy_sets; ++d) {
            std::vector<std::string> decoy;
            for (std::size_t k = 0; k < spec.decoy_set_size; ++k) decoy.push_back(genes[order[next++]]);
            const std::string name = "decoy_" + std::to_string(d + 1);
            world.data.gene_sets.emplace(name, GeneSet(name, decoy));
        }
    }

    auto value_of = [&](FeatureType type, std::size_t row, std::size_t col) {
        switch (type) {
            case FeatureType::Expression: return expression(row, col);
            case FeatureType::Mutation: return mutation(row, col) > 0 ? 1.0 : 0.0;
            case FeatureType::CopyNumber: return copy_number(row, col);
        }
        return 0.0;
    };
    const FeatureMatrix& any = world.data.matrices.at(FeatureType::Expression);

    for (std::size_t d = 0; d < spec.n_drugs; ++d) {
        SyntheticDrugTruth truth;
        truth.drug = synthetic_drug_id(d, spec.n_drugs);
        std::mt19937_64 rng(derive_seed(spec.seed, {6, d}));
        truth.offset = spec.offset_min + (spec.offset_max - spec.offset_min) * unit(rng);
        for (const auto& t : tissue_names) truth.tissue_effects[t] = spec.tissue_effect * normal(rng);
        if (auto o = spec.drug_overrides.find(d); o != spec.drug_overrides.end()) {
            truth.informative = o->second.informative;
            truth.link = o->second.link;
            truth.noise = o->second.noise;
        } else {
            std::vector<std::string> chosen = pool;
            std::shuffle(chosen.begin(), chosen.end(), rng);
            chosen.resize(spec.informative_per_drug);
            std::sort(chosen.begin(), chosen.end());
            for (const auto& g : chosen) {
                const double magnitude = 0.5 + unit(rng);
                const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
                truth.informative.push_back({spec.informative_type, g, sign * magnitude});
            }
            truth.link = spec.link;
            truth.noise = spec.noise;
        }

        Eigen::VectorXd raw = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        const auto& inf = truth.informative;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            if (truth.link == Link::Interaction) {
                for (std::size_t k = 0; k + 1 < inf.size(); k += 2) {
                    const auto a = *any.column_of(inf[k].gene);
                    const auto b = *any.column_of(inf[k + 1].gene);
                    s += inf[k].weight * value_of(inf[k].type, i, a) * value_of(inf[k + 1].type, i, b);
                }
                if (inf.size() % 2 == 1) {
                    const auto& last = inf.back();
                    s += last.weight * value_of(last.type, i, *any.column_of(last.gene));
                }
            } else {
                for (const auto& g : inf) {
                    const double x = value_of(g.type, i, *any.column_of(g.gene));
                    s += g.weight * (truth.link == Link::Threshold ? (x > 0 ? 1.0 : 0.0) : x);
                }
            }
            raw(static_cast<Eigen::Index>(i)) = s;
        }
        const double mean = raw.mean();
        const double sd = std::sqrt((raw.array() - mean).square().mean());
        const Eigen::VectorXd signal = sd > 1e-12 ? Eigen::VectorXd((raw.array() - mean) / sd * spec.signal_scale)
                                                  : Eigen::VectorXd::Zero(raw.size());

        std::mt19937_64 noise_rng(derive_seed(spec.seed, {7, d}));
        std::mt19937_64 miss_rng(derive_seed(spec.seed, {8, d}));
        DoseResponseTable table;
        table.drug_id = truth.drug;
        for (std::size_t i = 0; i < n; ++i) {
            const double eps = normal(noise_rng);
            const bool missing = unit(miss_rng) < spec.missingness;
            if (missing) continue;
            const double z = truth.offset + truth.tissue_effects.at(tissue_names[tissue_of[i]]) +
                             signal(static_cast<Eigen::Index>(i)) + truth.noise * eps;
            truth.latent[cells[i]] = z;
            ViabilityRow row;
            double area = 0.0;
            for (int c = 0; c < kDoseLevels; ++c) {
                row[c] = sigmoid(spec.slope * (z - spec.dose_step * c));
                area += *row[c];
            }
            table.rows.emplace(cells[i], row);
            world.auc[truth.drug][cells[i]] = area / kDoseLevels;
        }
        world.calibration.emplace(truth.drug, calibrate_concentration(table));
        world.dose.emplace(truth.drug, std::move(table));
        world.drugs.push_back(std::move(truth));
    }

    for (const auto& cell : cells) {
        std::vector<std::pair<double, std::string>> tested;
        for (const auto& [drug, table] : world.dose)
            if (auto v = viability_at(table, cell, world.calibration.at(drug).level)) tested.emplace_back(*v, drug);
        std::sort(tested.begin(), tested.end());
        auto& order = world.best_order[cell];
        for (const auto& [v, drug] : tested) order.push_back(drug);
    }
    return world;
}

nlohmann::json ground_truth_json(const SyntheticWorld& world, const SyntheticSpec& spec) {
    nlohmann::json j;
    j["spec"] = spec.to_json();
    nlohmann::json drugs = nlohmann::json::object();
    for (const auto& d : world.drugs) {
        const auto& cal = world.calibration.at(d.drug);
        drugs[d.drug] = {{"informative", informative_to_json(d.informative)},
                         {"link", to_string(d.link)},
                         {"noise", d.noise},
                         {"offset", d.offset},
                         {"tissue_effects", d.tissue_effects},
                         {"calibrated_level", cal.level},
                         {"calibrated_mean_viability", cal.mean_viability}};
    }
    j["drugs"] = drugs;
    j["best_order"] = world.best_order;
    return j;
}

void write_world(const SyntheticWorld& world, const SyntheticSpec& spec, const std::filesystem::path& dir) {
    for (const auto& [type, matrix] : world.data.matrices)
        write_feature_matrix(matrix, dir / (std::string(to_string(type)) + ".csv"));
    for (const auto& [name, set] : world.data.gene_sets) write_gene_set(set, dir / "gene_sets" / (name + ".txt"));
    if (world.data.tissue) write_tissue_labels(*world.data.tissue, dir / "tissue.csv");
    write_dose_response(world.dose, dir / "dose_response.csv");
    write_scalar_response(world.auc, "auc", dir / "responses.csv");
    csv::write_text(dir / "ground_truth.json", ground_truth_json(world, spec).dump(2) + "\n");
}

}  // namespace cla
