#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "cla/common.hpp"
#include "cla/genomic_data.hpp"
#include "helpers.hpp"

using namespace cla;

namespace {

GenomicData small_data() {
    GenomicData d;
    Eigen::MatrixXd expr(3, 3);
    expr << 1.0, 2.0, 3.0, 0.5, -1.0, 0.0, 0.0, 3.5, 1.0;
    d.matrices.emplace(FeatureType::Expression, FeatureMatrix(FeatureType::Expression, {"c1", "c2", "c3"}, {"g1", "g2", "g3"}, expr));
    Eigen::MatrixXd mut(3, 2);
    mut << 0, 2, 3, 5, 0, 0;
    d.matrices.emplace(FeatureType::Mutation, FeatureMatrix(FeatureType::Mutation, {"c1", "c2", "c3"}, {"g1", "g2"}, mut));
    d.gene_sets.emplace("S1", GeneSet("S1", {"g2", "g1"}));
    d.gene_sets.emplace("S2", GeneSet("S2", {"g3", "g9"}));
    return d;
}

long long power(long long base, int exp) {
    long long r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

}  // namespace

TEST_CASE("feature matrix ingestion keeps dimensions and values") {
    const std::string text = "cell_line_id,gA,gB\nc1,1.0,2.0\nc2,0.5,-1.0\nc3,0.0,3.5\n";
    const FeatureMatrix m = parse_feature_matrix(text, FeatureType::Expression);
    CHECK(m.values().rows() == 3);
    CHECK(m.values().cols() == 2);
    CHECK(m.values()(1, 1) == -1.0);
    CHECK(m.values()(2, 1) == 3.5);
    CHECK(m.gene_ids() == std::vector<std::string>{"gA", "gB"});
}

TEST_CASE("mutation code outside 0..6 is rejected with its position") {
    const std::string text = "cell_line_id,gA,gB\nc1,0,1\nc2,7,0\n";
    try {
        parse_feature_matrix(text, FeatureType::Mutation);
        FAIL("expected an error");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("mutation code out of range at (") != std::string::npos);
    }
}

TEST_CASE("duplicate cell line id is named in the error") {
    const std::string text = "cell_line_id,gA\ncX,1\ncX,2\n";
    try {
        parse_feature_matrix(text, FeatureType::Expression);
        FAIL("expected an error");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("cX") != std::string::npos);
    }
}

TEST_CASE("header must start with cell_line_id and values must be numeric") {
    CHECK_THROWS_AS(parse_feature_matrix("id,gA\nc1,1\n", FeatureType::Expression), InputError);
    CHECK_THROWS_AS(parse_feature_matrix("cell_line_id,gA\nc1,abc\n", FeatureType::Expression), InputError);
    CHECK_THROWS_AS(parse_feature_matrix("cell_line_id,gA\nc1,nan\n", FeatureType::Expression), InputError);
}

TEST_CASE("feature matrix round-trips bit-exactly through the file format") {
    std::mt19937_64 rng(7);
    Eigen::MatrixXd values = testutil::random_matrix(6, 4, rng);
    values(0, 0) = 1e-300;
    values(1, 1) = -0.1;
    const FeatureMatrix m(FeatureType::Expression, testutil::names("c", 6), testutil::names("g", 4), values);
    const FeatureMatrix back = parse_feature_matrix(feature_matrix_to_csv(m), FeatureType::Expression);
    CHECK(back == m);
    for (Eigen::Index i = 0; i < 6; ++i)
        for (Eigen::Index j = 0; j < 4; ++j) CHECK(back.values()(i, j) == values(i, j));
}

TEST_CASE("gene sets reject empty and duplicate lists") {
    CHECK_THROWS_AS(GeneSet("x", {}), InputError);
    CHECK_THROWS_AS(GeneSet("x", {"a", "b", "a"}), InputError);
    const GeneSet s("x", {"b", "a"});
    CHECK(s.genes == std::vector<std::string>{"a", "b"});
}

TEST_CASE("combo enumeration count is (k+1)^t - 1 with distinct, non-empty combos") {
    const std::vector<FeatureType> all{FeatureType::Expression, FeatureType::Mutation, FeatureType::CopyNumber};
    for (int k : {1, 2, 6}) {
        for (int t = 1; t <= 3; ++t) {
            const std::vector<FeatureType> types(all.begin(), all.begin() + t);
            const auto combos = enumerate_combos(testutil::names("S", static_cast<std::size_t>(k)), types);
            CHECK(static_cast<long long>(combos.size()) == power(k + 1, t) - 1);
            std::set<std::string> ids;
            for (const auto& c : combos) {
                ids.insert(c.id());
                bool any = false;
                for (auto ft : kAllFeatureTypes) any = any || c.at(ft).has_value();
                CHECK(any);
            }
            CHECK(ids.size() == combos.size());
        }
    }
    CHECK(enumerate_combos(testutil::names("S", 6), all).size() == 342);
    CHECK(enumerate_combos(testutil::names("S", 1), all).size() == 7);
    CHECK(enumerate_combos(testutil::names("S", 2), {FeatureType::Expression, FeatureType::Mutation}).size() == 8);
}

TEST_CASE("combo ids parse back and the all-none combo is rejected") {
    const Combo c({std::string("S1"), std::nullopt, std::string("S2")});
    CHECK(c.id() == "expr=S1;mut=none;cnv=S2");
    CHECK(Combo::parse(c.id()) == c);
    CHECK(c.uses("S1") == 1);
    CHECK_THROWS_AS(Combo({std::nullopt, std::nullopt, std::nullopt}), InputError);
}

TEST_CASE("single-type combo passes the set's expression columns through") {
    const GenomicData d = small_data();
    const Combo c({std::string("S1"), std::nullopt, std::nullopt});
    const DesignMatrix m = build_design_matrix(c, d, {"c1", "c2", "c3"}, {});
    CHECK(m.column_names == std::vector<std::string>{"expr:g1", "expr:g2"});
    CHECK(m.values(1, 1) == -1.0);
}

TEST_CASE("binary mutation encoding collapses codes to mutated or not") {
    const GenomicData d = small_data();
    const Combo c({std::nullopt, std::string("S1"), std::nullopt});
    const DesignMatrix m = build_design_matrix(c, d, {"c1", "c2", "c3"}, {true, false});
    REQUIRE(m.column_names == std::vector<std::string>{"mut:g1", "mut:g2"});
    CHECK(m.values(0, 0) == 0.0);
    CHECK(m.values(1, 0) == 1.0);
    CHECK(m.values(2, 0) == 0.0);
}

TEST_CASE("categorical mutation encoding has one indicator per observed code") {
    GenomicData d;
    Eigen::MatrixXd mut(3, 1);
    mut << 0, 2, 5;
    d.matrices.emplace(FeatureType::Mutation, FeatureMatrix(FeatureType::Mutation, {"a", "b", "c"}, {"g1"}, mut));
    d.gene_sets.emplace("S1", GeneSet("S1", {"g1"}));
    const DesignMatrix m = build_design_matrix(Combo({std::nullopt, std::string("S1"), std::nullopt}), d,
                                               {"a", "b", "c"}, {false, false});
    CHECK(m.column_names == std::vector<std::string>{"mut:g1=0", "mut:g1=2", "mut:g1=5"});
    CHECK(m.values == Eigen::MatrixXd::Identity(3, 3));
}

TEST_CASE("property: binary encoding equals categorical code != 0") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> code(0, 6);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::MatrixXd mut(8, 3);
        for (Eigen::Index i = 0; i < 8; ++i)
            for (Eigen::Index j = 0; j < 3; ++j) mut(i, j) = code(rng) < 4 ? 0 : code(rng);
        GenomicData d;
        const auto cells = testutil::names("c", 8);
        d.matrices.emplace(FeatureType::Mutation, FeatureMatrix(FeatureType::Mutation, cells, {"g0", "g1", "g2"}, mut));
        const GenesPerType genes{std::nullopt, std::vector<std::string>{"g0", "g1", "g2"}, std::nullopt};
        const DesignMatrix binary = build_design_matrix(genes, d, cells, {true, false});
        const DesignMatrix cat = build_design_matrix(genes, d, cells, {false, false});
        for (Eigen::Index j = 0; j < 3; ++j) {
            const std::string gene = "g" + std::to_string(j);
            for (Eigen::Index i = 0; i < 8; ++i) {
                double mutated = 0.0;
                for (std::size_t c = 0; c < cat.column_names.size(); ++c)
                    if (cat.column_names[c].rfind("mut:" + gene + "=", 0) == 0 && cat.column_names[c] != "mut:" + gene + "=0")
                        mutated += cat.values(i, static_cast<Eigen::Index>(c));
                CHECK(binary.values(i, j) == mutated);
                CHECK(binary.values(i, j) == (mut(i, j) != 0 ? 1.0 : 0.0));
            }
        }
    }
}

TEST_CASE("genes absent from the matrix are dropped and counted") {
    const GenomicData d = small_data();
    const DesignMatrix m = build_design_matrix(Combo({std::string("S2"), std::nullopt, std::nullopt}), d,
                                               {"c1", "c2"}, {});
    CHECK(m.column_names == std::vector<std::string>{"expr:g3"});
    CHECK(m.dropped_genes[0] == 1);
}

TEST_CASE("tissue indicators come last and a missing cell line is an error") {
    GenomicData d = small_data();
    d.tissue = TissueLabels{{"c1", "lung"}, {"c2", "skin"}, {"c3", "lung"}};
    const DesignMatrix m = build_design_matrix(Combo({std::string("S1"), std::string("S1"), std::nullopt}), d,
                                               {"c1", "c2", "c3"}, {true, true});
    REQUIRE(m.column_names.size() == 6);
    CHECK(m.column_names[4] == "tissue:lung");
    CHECK(m.column_names[5] == "tissue:skin");
    CHECK(m.values(1, 5) == 1.0);
    CHECK(m.values(1, 4) == 0.0);
    CHECK_THROWS_AS(build_design_matrix(Combo({std::string("S1"), std::nullopt, std::nullopt}), d, {"c1", "zz"}, {}),
                    InputError);
}

TEST_CASE("design matrix construction is a pure function of its inputs") {
    const GenomicData d = small_data();
    const Combo c({std::string("S1"), std::string("S1"), std::nullopt});
    const DesignMatrix a = build_design_matrix(c, d, {"c3", "c1"}, {});
    const DesignMatrix b = build_design_matrix(c, d, {"c3", "c1"}, {});
    CHECK(a.column_names == b.column_names);
    CHECK(a.values == b.values);
    CHECK(a.cell_line_ids == std::vector<std::string>{"c3", "c1"});
}

TEST_CASE("tissue labels must refer to known cell lines") {
    GenomicData d = small_data();
    d.tissue = TissueLabels{{"c1", "lung"}, {"ghost", "skin"}};
    CHECK_THROWS_AS(d.validate_tissue(), InputError);
}
