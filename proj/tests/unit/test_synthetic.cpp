#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cla/common.hpp"
#include "cla/mas.hpp"
#include "cla/synthetic.hpp"
#include "helpers.hpp"

using namespace cla;

namespace {

SyntheticSpec spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.n_cell_lines = 50;
    s.n_genes = 40;
    s.n_drugs = 3;
    s.informative_per_drug = 5;
    s.planted_pool_size = 10;
    s.n_decoy_sets = 1;
    s.decoy_set_size = 10;
    s.tissue_effect = 0.5;
    s.missingness = 0.2;
    s.seed = seed;
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("generated dose-response rows never increase with concentration") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const SyntheticWorld w = generate_world(spec(seed));
        for (const auto& [drug, table] : w.dose)
            for (const auto& [cell, row] : table.rows)
                for (int c = 1; c < kDoseLevels; ++c) {
                    REQUIRE(row[c].has_value());
                    CHECK(*row[c] <= *row[c - 1]);
                    CHECK(*row[c] >= 0.0);
                }
    }
}

TEST_CASE("truth record agrees with the generated viabilities") {
    const SyntheticWorld w = generate_world(spec(4));
    for (const auto& [cell, order] : w.best_order) {
        std::map<std::string, double> v;
        for (const auto& [drug, table] : w.dose) {
            auto it = table.rows.find(cell);
            if (it == table.rows.end()) continue;
            v[drug] = *it->second[w.calibration.at(drug).level];
        }
        REQUIRE(order.size() == v.size());
        if (order.empty()) continue;
        CHECK(true_rank(v, order.front()) == 1);
        for (std::size_t i = 1; i < order.size(); ++i) CHECK(v.at(order[i - 1]) <= v.at(order[i]));
    }
    for (const auto& [drug, cal] : w.calibration) CHECK(cal.level == calibrate_concentration(w.dose.at(drug)).level);
}

TEST_CASE("same seed gives a bit-identical world on disk, a different seed does not") {
    const auto a = testutil::temp_dir("synth_a"), b = testutil::temp_dir("synth_b"), c = testutil::temp_dir("synth_c");
    write_world(generate_world(spec(5)), spec(5), a);
    write_world(generate_world(spec(5)), spec(5), b);
    write_world(generate_world(spec(6)), spec(6), c);
    for (const char* f : {"expression.csv", "mutation.csv", "copy_number.csv", "tissue.csv", "dose_response.csv",
                          "responses.csv", "ground_truth.json", "gene_sets/planted.txt"}) {
        CHECK(slurp(a / f) == slurp(b / f));
        CHECK(!slurp(a / f).empty());
    }
    CHECK(slurp(a / "expression.csv") != slurp(c / "expression.csv"));
}

TEST_CASE("written world is readable by the ingestion code") {
    const auto dir = testutil::temp_dir("synth_read");
    const SyntheticWorld w = generate_world(spec(7));
    write_world(w, spec(7), dir);
    const FeatureMatrix expr = load_feature_matrix(dir / "expression.csv", FeatureType::Expression);
    CHECK(expr == w.data.matrices.at(FeatureType::Expression));
    const DoseResponseData dose = load_dose_response(dir / "dose_response.csv");
    for (const auto& [drug, table] : w.dose) CHECK(dose.at(drug).rows == table.rows);
    const ScalarResponse auc = load_scalar_response(dir / "responses.csv", "auc");
    CHECK(auc == w.auc);
}

TEST_CASE("missingness leaves pairs untested at roughly the requested rate") {
    SyntheticSpec s = spec(8);
    s.n_cell_lines = 400;
    s.missingness = 0.3;
    const SyntheticWorld w = generate_world(s);
    double tested = 0;
    for (const auto& [drug, table] : w.dose) tested += static_cast<double>(table.rows.size());
    const double rate = 1.0 - tested / (400.0 * 3.0);
    CHECK(std::abs(rate - 0.3) < 0.05);
}

TEST_CASE("spec validation") {
    SyntheticSpec s = spec(9);
    s.noise = -1;
    CHECK_THROWS_AS(s.validate(), InputError);
    s = spec(9);
    s.missingness = 1.0;
    CHECK_THROWS_AS(s.validate(), InputError);
    s = spec(9);
    s.drug_overrides[0] = SyntheticDrugSpec{{{FeatureType::Expression, "nope", 1.0}}, Link::Linear, 0.1};
    try {
        s.validate();
        FAIL("expected an error");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("outside the gene universe") != std::string::npos);
    }
    CHECK_THROWS_AS(SyntheticSpec::from_json({{"n_cell_lines", 10}, {"bogus", 1}}), InputError);
    const SyntheticSpec back = SyntheticSpec::from_json(spec(9).to_json());
    CHECK(back.to_json() == spec(9).to_json());
}

TEST_CASE("noiseless linear world: MAS reaches R2 of at least 0.95 with the planted set") {
    SyntheticSpec s = spec(10);
    s.n_cell_lines = 120;
    s.n_drugs = 1;
    s.noise = 0.0;
    s.tissue_effect = 0.0;
    s.missingness = 0.0;
    const SyntheticWorld w = generate_world(s);
    MasRunConfig c;
    c.algorithms = {Algorithm::ElasticNet};
    HyperparameterGrid g = HyperparameterGrid::defaults(Algorithm::ElasticNet);
    g.penalties = {1e-4};
    g.mixings = {0.5};
    c.grids[Algorithm::ElasticNet] = g;
    c.feature_types = {FeatureType::Expression};
    c.plan.n_outer = 5;
    c.plan.n_inner = 2;
    c.seed = 1;
    // Viability at a fixed level is linear in the planted score up to the sigmoid, so score against the latent directly.
    ScalarResponse latent;
    const auto& truth = w.drugs.front();
    double lo = 1e300, hi = -1e300;
    for (const auto& [cell, z] : truth.latent) {
        lo = std::min(lo, z);
        hi = std::max(hi, z);
    }
    for (const auto& [cell, z] : truth.latent) latent[truth.drug][cell] = (z - lo) / (hi - lo);
    const MasRunResult r = run_mas(c, w.data, latent);
    const auto& d = r.drugs.at(truth.drug);
    REQUIRE(d.best.has_value());
    CHECK(d.best->combo.at(FeatureType::Expression) == "planted");
    CHECK(d.best->mean_r2 >= 0.95);
}
