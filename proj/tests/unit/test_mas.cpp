#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "cla/common.hpp"
#include "cla/mas.hpp"
#include "cla/synthetic.hpp"
#include "helpers.hpp"

using namespace cla;

namespace {

SyntheticSpec small_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.n_cell_lines = 60;
    s.n_genes = 60;
    s.n_drugs = 1;
    s.informative_per_drug = 5;
    s.planted_pool_size = 10;
    s.n_decoy_sets = 1;
    s.decoy_set_size = 10;
    s.seed = seed;
    return s;
}

MasRunConfig small_config(std::uint64_t seed) {
    MasRunConfig c;
    c.algorithms = {Algorithm::ElasticNet};
    HyperparameterGrid g = HyperparameterGrid::defaults(Algorithm::ElasticNet);
    g.penalties = {0.05, 0.005};
    g.mixings = {0.5};
    c.grids[Algorithm::ElasticNet] = g;
    c.plan.n_outer = 3;
    c.plan.n_inner = 2;
    c.seed = seed;
    return c;
}

ComboEvaluation evaluation(Algorithm a, const Combo& combo, std::vector<double> loop_r2,
                           std::vector<FeatureImportances> importances = {}) {
    ComboEvaluation e{a, combo, true, {}};
    double sum = 0;
    for (std::size_t i = 0; i < loop_r2.size(); ++i) {
        LoopResult l;
        l.index = static_cast<int>(i);
        l.r2 = loop_r2[i];
        if (i < importances.size()) l.importances = importances[i];
        e.result.loops.push_back(l);
        sum += loop_r2[i];
    }
    e.result.mean_r2 = sum / static_cast<double>(loop_r2.size());
    double var = 0;
    for (double v : loop_r2) var += (v - e.result.mean_r2) * (v - e.result.mean_r2);
    e.result.r2_variance = var / static_cast<double>(loop_r2.size());
    return e;
}

Combo expr(const std::string& set) { return Combo({set, std::nullopt, std::nullopt}); }

}  // namespace

TEST_CASE("one drug, one algorithm, one set, three feature types gives seven evaluations") {
    SyntheticSpec spec = small_spec(1);
    spec.n_decoy_sets = 0;
    const SyntheticWorld w = generate_world(spec);
    const MasRunResult r = run_mas(small_config(1), w.data, w.auc);
    REQUIRE(r.drugs.size() == 1);
    const MasDrugResult& d = r.drugs.begin()->second;
    CHECK(d.evaluations.size() == 7);
    REQUIRE(d.best.has_value());
    CHECK(r.valid);
}

TEST_CASE("best configuration attains the top mean R2 among curated evaluations") {
    const SyntheticWorld w = generate_world(small_spec(2));
    MasRunConfig c = small_config(2);
    c.feature_types = {FeatureType::Expression};
    c.random_sets = RandomGeneSetSpec{{10}, 2, 5};
    const MasRunResult r = run_mas(c, w.data, w.auc);
    const MasDrugResult& d = r.drugs.begin()->second;
    CHECK(d.evaluations.size() == 4);
    double top = -1e300;
    for (const auto& e : d.evaluations)
        if (e.curated) top = std::max(top, e.result.mean_r2);
    REQUIRE(d.best.has_value());
    CHECK(d.best->mean_r2 == top);
    CHECK(d.best->combo.at(FeatureType::Expression) == "planted");
}

TEST_CASE("too few cell lines skips the drug with a warning") {
    const SyntheticWorld w = generate_world(small_spec(3));
    MasRunConfig c = small_config(3);
    c.min_cell_lines = 100;
    const MasRunResult r = run_mas(c, w.data, w.auc);
    CHECK(r.drugs.empty());
    REQUIRE(!r.warnings.empty());
    CHECK(r.warnings.front().find("skipped") != std::string::npos);
}

TEST_CASE("configuration errors") {
    MasRunConfig c;
    c.algorithms.clear();
    CHECK_THROWS_AS(c.validate(), InputError);
    MasRunConfig e;
    e.feature_types.clear();
    CHECK_THROWS_AS(e.validate(), InputError);
}

TEST_CASE("run_mas output does not depend on the worker count") {
    const SyntheticWorld w = generate_world(small_spec(4));
    MasRunConfig c = small_config(4);
    c.algorithms = {Algorithm::ElasticNet, Algorithm::RandomForest};
    HyperparameterGrid rf = HyperparameterGrid::defaults(Algorithm::RandomForest);
    rf.n_trees = {8};
    rf.min_leafs = {5};
    rf.max_features = {MaxFeatures{true, 0.5}};
    c.grids[Algorithm::RandomForest] = rf;
    c.feature_types = {FeatureType::Expression, FeatureType::CopyNumber};
    c.workers = 1;
    const MasRunResult a = run_mas(c, w.data, w.auc);
    c.workers = 3;
    const MasRunResult b = run_mas(c, w.data, w.auc);
    CHECK(mas_best_to_json(a, c.encoding) == mas_best_to_json(b, c.encoding));
    const auto& ea = a.drugs.begin()->second.evaluations;
    const auto& eb = b.drugs.begin()->second.evaluations;
    REQUIRE(ea.size() == eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) CHECK(ea[i].result.r2_values() == eb[i].result.r2_values());
}

TEST_CASE("univariate selection: monotone gene first, k = all returns every gene") {
    std::mt19937_64 rng(5);
    Eigen::MatrixXd X = testutil::random_matrix(20, 4, rng);
    std::vector<double> y(20);
    for (int i = 0; i < 20; ++i) y[static_cast<std::size_t>(i)] = std::exp(X(i, 2));
    const std::vector<std::string> genes{"a", "b", "c", "d"};
    const auto top = univariate_select(FeatureType::Expression, X, genes, y, 1);
    CHECK(top == std::vector<std::string>{"c"});
    auto all = univariate_select(FeatureType::Expression, X, genes, y, 4);
    std::sort(all.begin(), all.end());
    CHECK(all == genes);
    CHECK_THROWS_AS(univariate_select(FeatureType::Expression, X, genes, y, 5), InputError);
}

TEST_CASE("univariate selection on mutations ranks by rank-sum p and collapses codes") {
    Eigen::MatrixXd X(6, 3);
    // gene m: mutated (codes 2 and 5) exactly on the high responders; gene w: weakly related; gene z: constant
    X << 2, 0, 0,
         5, 1, 0,
         2, 0, 0,
         0, 1, 0,
         0, 0, 0,
         0, 0, 0;
    const std::vector<double> y{5, 6, 7, 1, 2, 3};
    const auto order = univariate_select(FeatureType::Mutation, X, {"m", "w", "z"}, y, 3);
    CHECK(order == std::vector<std::string>{"m", "w", "z"});
}

TEST_CASE("leakage canary: univariate selection ignores rows outside the training partition") {
    std::mt19937_64 rng(6);
    Eigen::MatrixXd X = testutil::random_matrix(40, 30, rng);
    std::vector<double> y(40);
    for (int i = 0; i < 40; ++i) y[static_cast<std::size_t>(i)] = X(i, 3) - X(i, 7) + 0.1 * X(i, 11);
    const auto genes = testutil::names("g", 30);
    std::vector<Eigen::Index> train;
    for (Eigen::Index i = 0; i < 30; ++i) train.push_back(i);
    const Eigen::MatrixXd train_X = X(train, Eigen::all);
    const std::vector<double> train_y(y.begin(), y.begin() + 30);
    const auto base = univariate_select(FeatureType::Expression, train_X, genes, train_y, 5);
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::MatrixXd Xp = X;
        std::vector<double> yp = y;
        Xp.bottomRows(10) = testutil::random_matrix(10, 30, rng) * 100.0;
        for (std::size_t i = 30; i < 40; ++i) yp[i] = -yp[i] * 50.0;
        const auto again = univariate_select(FeatureType::Expression, Xp(train, Eigen::all), genes,
                                             std::vector<double>(yp.begin(), yp.begin() + 30), 5);
        CHECK(again == base);
    }
}

TEST_CASE("univariate mode keeps the planted signal and never marks combos curated") {
    const SyntheticWorld w = generate_world(small_spec(7));
    MasRunConfig c = small_config(7);
    c.feature_types = {FeatureType::Expression};
    c.univariate = {true, 10};
    const MasRunResult r = run_mas(c, w.data, w.auc);
    const MasDrugResult& d = r.drugs.begin()->second;
    REQUIRE(d.evaluations.size() == 1);
    CHECK_FALSE(d.evaluations[0].curated);
    REQUIRE(d.best.has_value());
    CHECK(d.best->univariate);
    CHECK(d.best->mean_r2 > 0.5);
}

TEST_CASE("random gene sets: sizes, distinct genes, names and determinism") {
    const auto universe = testutil::names("g", 300);
    const auto sets = generate_random_gene_sets(universe, {263}, 2, 9);
    REQUIRE(sets.size() == 2);
    for (const auto& s : sets) {
        CHECK(s.genes.size() == 263);
        CHECK(std::set<std::string>(s.genes.begin(), s.genes.end()).size() == 263);
    }
    CHECK(sets[0].name == "random_263_1");
    CHECK(sets[0].genes != sets[1].genes);
    const auto again = generate_random_gene_sets(universe, {263}, 2, 9);
    CHECK(again[1].genes == sets[1].genes);
    const auto whole = generate_random_gene_sets(universe, {300}, 1, 1);
    auto sorted = universe;
    std::sort(sorted.begin(), sorted.end());
    CHECK(whole[0].genes == sorted);
    CHECK_THROWS_AS(generate_random_gene_sets(universe, {301}, 1, 1), InputError);
}

TEST_CASE("gene-set comparison partitions the evaluations") {
    MasDrugResult r;
    r.drug = "d";
    const std::vector<std::string> sets{"S", "A", "B"};
    for (int i = 0; i < 6; ++i) r.evaluations.push_back(evaluation(Algorithm::ElasticNet, expr("S"), {0.6 + 0.05 * i}));
    for (int i = 0; i < 6; ++i)
        r.evaluations.push_back(evaluation(Algorithm::ElasticNet, expr(i % 2 ? "A" : "B"), {0.1 + 0.01 * i}));
    const GeneSetComparison cmp = compare_gene_set(r, "S");
    CHECK(cmp.with_set.size() == 6);
    CHECK(cmp.without_set.size() == 6);
    CHECK(cmp.p_value < 0.01);
    CHECK(cmp.usage_count == 5);
    CHECK_THROWS_AS(compare_gene_set(r, "nope"), InputError);
}

TEST_CASE("top-5 usage counts one increment per slot") {
    MasDrugResult r;
    r.drug = "d";
    // Per algorithm the top five are fixed by descending R2; S appears in 3 of the 15 slots overall.
    const Combo s_expr({std::string("S"), std::nullopt, std::nullopt});
    const Combo s_two({std::string("S"), std::string("S"), std::nullopt});
    const Combo other({std::string("A"), std::nullopt, std::nullopt});
    for (auto a : {Algorithm::ElasticNet, Algorithm::SvrRbf, Algorithm::RandomForest}) {
        for (int i = 0; i < 6; ++i) {
            Combo c = other;
            if (a == Algorithm::ElasticNet && i == 0) c = s_two;
            if (a == Algorithm::SvrRbf && i == 4) c = s_expr;
            if (a == Algorithm::RandomForest && i == 5) c = s_expr;  // rank 6, outside the top 5
            r.evaluations.push_back(evaluation(a, c, {0.9 - 0.1 * i}));
        }
    }
    const auto usage = top_combo_usage(r, 5);
    CHECK(usage.at("S") == 3);
    CHECK(usage.at("A") == 13);
}

TEST_CASE("importance aggregation: pass-through, half weights and unavailable") {
    MasDrugResult single;
    single.evaluations.push_back(evaluation(Algorithm::ElasticNet, expr("S"), {0.5}, {{{"expr:a", 0.25}, {"expr:b", 0.75}}}));
    const auto one = aggregate_importances(single, 10);
    REQUIRE(one.has_value());
    CHECK(one->at("expr:a") == doctest::Approx(0.25));
    CHECK(one->at("expr:b") == doctest::Approx(0.75));

    MasDrugResult two;
    two.evaluations.push_back(evaluation(Algorithm::ElasticNet, expr("S"), {0.5, 0.7},
                                         {{{"expr:a", 1.0}}, {{"expr:a", 1.0}}}));
    two.evaluations.push_back(evaluation(Algorithm::RandomForest, expr("T"), {0.4, 0.4},
                                         {{{"expr:b", 0.5}, {"expr:c", 0.5}}, {{"expr:b", 0.5}, {"expr:c", 0.5}}}));
    const auto both = aggregate_importances(two, 10);
    REQUIRE(both.has_value());
    CHECK(both->at("expr:a") == doctest::Approx(0.5));
    CHECK(both->at("expr:b") == doctest::Approx(0.25));
    CHECK(both->at("expr:c") == doctest::Approx(0.25));
    const auto top1 = aggregate_importances(two, 1);
    CHECK(top1->size() == 1);
    const auto rf = aggregate_importances(two, 10, Algorithm::RandomForest);
    CHECK(rf->count("expr:a") == 0);

    MasDrugResult svr;
    svr.evaluations.push_back(evaluation(Algorithm::SvrRbf, expr("S"), {0.5}));
    CHECK_FALSE(aggregate_importances(svr, 10).has_value());
}

TEST_CASE("ranking ties fall back to variance, then algorithm, then combo order") {
    MasDrugResult r;
    r.evaluations.push_back(evaluation(Algorithm::RandomForest, expr("A"), {0.5, 0.5}));
    r.evaluations.push_back(evaluation(Algorithm::ElasticNet, expr("B"), {0.4, 0.6}));
    r.evaluations.push_back(evaluation(Algorithm::ElasticNet, expr("C"), {0.5, 0.5}));
    r.evaluations.push_back(evaluation(Algorithm::ElasticNet, expr("D"), {0.7, 0.7}));
    ComboEvaluation bad = evaluation(Algorithm::ElasticNet, expr("E"), {0.9, 0.9});
    bad.result.valid = false;
    r.evaluations.push_back(bad);
    CHECK(rank_evaluations(r) == std::vector<std::size_t>{3, 2, 0, 1});
}

TEST_CASE("mas_best round-trips through JSON") {
    const SyntheticWorld w = generate_world(small_spec(8));
    MasRunConfig c = small_config(8);
    c.feature_types = {FeatureType::Expression};
    const MasRunResult r = run_mas(c, w.data, w.auc);
    const MasBest best = mas_best_from_json(mas_best_to_json(r, c.encoding));
    REQUIRE(best.drugs.size() == 1);
    const auto& [drug, entry] = *best.drugs.begin();
    CHECK(entry.combo == r.drugs.at(drug).best->combo);
    CHECK(entry.algorithm == Algorithm::ElasticNet);
    CHECK(best.gene_sets.count(*entry.combo.at(FeatureType::Expression)) == 1);
}
