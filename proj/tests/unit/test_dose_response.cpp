#include <doctest.h>

#include <algorithm>
#include <random>

#include "cla/common.hpp"
#include "cla/dose_response.hpp"
#include "helpers.hpp"

using namespace cla;

namespace {

/// One cell line per row of `means`, so level means equal the given values.
DoseResponseTable table_with_level_means(const std::vector<double>& means) {
    DoseResponseTable t;
    t.drug_id = "d";
    ViabilityRow row;
    for (std::size_t c = 0; c < means.size(); ++c) row[c] = means[c];
    t.rows["c1"] = row;
    t.rows["c2"] = row;
    return t;
}

}  // namespace

TEST_CASE("calibration picks the level closest to the target") {
    CHECK(calibrate_concentration(table_with_level_means({0.9, 0.8, 0.74, 0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01})).level == 2);
    CHECK(calibrate_concentration(table_with_level_means({0.9, 0.85, 0.8, 0.75, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1})).level == 3);
    const CalibratedDose tie = calibrate_concentration(table_with_level_means({0.9, 0.76, 0.74, 0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01}));
    CHECK(tie.level == 1);
    CHECK(tie.mean_viability == doctest::Approx(0.76));
}

TEST_CASE("calibration averages over the cell lines measured at each level") {
    DoseResponseTable t;
    t.drug_id = "d";
    ViabilityRow a, b, c;
    for (int l = 0; l < kDoseLevels; ++l) {
        a[l] = 1.0 - 0.1 * l;
        b[l] = 1.0 - 0.05 * l;
        c[l] = 1.0 - 0.08 * l;
    }
    c[5] = std::nullopt;
    t.rows = {{"a", a}, {"b", b}, {"c", c}};
    // Means: level 3 -> (0.7+0.85+0.76)/3 = 0.77, level 4 -> (0.6+0.8+0.68)/3 = 0.6933, level 5 -> (0.5+0.75)/2 = 0.625
    const CalibratedDose d = calibrate_concentration(t);
    CHECK(d.level == 3);
    CHECK(d.mean_viability == doctest::Approx(0.77));
    const std::string skip = "a";
    // Without a: level 4 -> (0.8+0.68)/2 = 0.74, level 5 -> b alone (1 of 2 measured) = 0.75
    CHECK(calibrate_concentration(t, kTargetViability, kMinLevelCoverage, &skip).level == 5);
    CHECK(calibrate_concentration(t, kTargetViability, 0.6, &skip).level == 4);
}

TEST_CASE("a level below the coverage threshold is not eligible") {
    DoseResponseTable t = table_with_level_means({0.9, 0.8, 0.75, 0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01});
    ViabilityRow sparse;
    sparse[0] = 0.9;
    t.rows["c3"] = sparse;
    t.rows["c4"] = sparse;
    t.rows["c5"] = sparse;
    CHECK(calibrate_concentration(t).level == 0);
    ViabilityRow empty;
    DoseResponseTable none;
    none.drug_id = "x";
    none.rows["c"] = empty;
    CHECK_THROWS_AS(calibrate_concentration(none), ComputeError);
}

TEST_CASE("property: target 0 selects a level that kills everything") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 30; ++rep) {
        DoseResponseTable t;
        t.drug_id = "d";
        const int kill = 3 + rep % 7;
        for (int i = 0; i < 6; ++i) {
            ViabilityRow row;
            double v = 1.0;
            for (int l = 0; l < kDoseLevels; ++l) {
                v *= 0.6 + 0.4 * u(rng);
                row[l] = l >= kill ? 0.0 : v;
            }
            t.rows["c" + std::to_string(i)] = row;
        }
        CHECK(calibrate_concentration(t, 0.0).level == kill);
    }
}

TEST_CASE("viability lookup") {
    DoseResponseTable t;
    t.drug_id = "d";
    ViabilityRow row;
    row[4] = 0.42;
    t.rows["c1"] = row;
    CHECK(viability_at(t, "c1", 4) == 0.42);
    CHECK_FALSE(viability_at(t, "c1", 5).has_value());
    CHECK_FALSE(viability_at(t, "zz", 4).has_value());
    CHECK_THROWS_AS(viability_at(t, "c1", 10), InputError);
    CHECK_THROWS_AS(viability_at(t, "c1", -1), InputError);
}

TEST_CASE("normalized viability hand cases") {
    const auto n = normalize_viabilities({{"a", 0.2}, {"b", 0.6}, {"c", 1.0}});
    CHECK(n.values.at("a") == 0.0);
    CHECK(n.values.at("b") == doctest::Approx(0.5));
    CHECK(n.values.at("c") == 1.0);
    CHECK_FALSE(n.degenerate);
    const auto two = normalize_viabilities({{"a", 0.3}, {"b", 0.7}});
    CHECK(two.values.at("a") == 0.0);
    CHECK(two.values.at("b") == 1.0);
    const auto flat = normalize_viabilities({{"a", 0.3}, {"b", 0.3}});
    CHECK(flat.degenerate);
    CHECK(flat.values.at("b") == 0.0);
    CHECK_THROWS_AS(normalize_viabilities({{"a", 0.3}}), InputError);
}

TEST_CASE("property: normalization preserves the drug ordering") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::map<std::string, double> v;
        for (int i = 0; i < 8; ++i) v["d" + std::to_string(i)] = u(rng);
        const auto n = normalize_viabilities(v);
        for (const auto& [a, va] : v)
            for (const auto& [b, vb] : v) CHECK((va < vb) == (n.values.at(a) < n.values.at(b)));
    }
}

TEST_CASE("true rank shares the better rank on ties") {
    const std::map<std::string, double> v{{"a", 0.2}, {"b", 0.2}, {"c", 0.5}};
    CHECK(true_rank(v, "a") == 1);
    CHECK(true_rank(v, "b") == 1);
    CHECK(true_rank(v, "c") == 3);
    CHECK_THROWS_AS(true_rank(v, "zz"), InputError);
    const std::map<std::string, double> u{{"a", 0.9}, {"b", 0.1}, {"c", 0.5}, {"d", 0.3}};
    std::vector<int> ranks;
    for (const auto& [d, x] : u) ranks.push_back(true_rank(u, d));
    std::sort(ranks.begin(), ranks.end());
    CHECK(ranks == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("dose-response file round-trip and validation") {
    const std::string text =
        "drug_id,cell_line_id,level_0,level_1,level_2,level_3,level_4,level_5,level_6,level_7,level_8,level_9\n"
        "d1,c1,1,0.9,0.8,0.7,0.6,0.5,0.4,0.3,0.2,0.1\n"
        "d1,c2,1,,0.8,0.7,0.6,0.5,0.4,0.3,0.2,0.1\n";
    const DoseResponseData d = parse_dose_response(text);
    CHECK(d.at("d1").rows.size() == 2);
    CHECK_FALSE(d.at("d1").rows.at("c2")[1].has_value());
    const auto dir = testutil::temp_dir("dose_rt");
    write_dose_response(d, dir / "dose.csv");
    const DoseResponseData back = load_dose_response(dir / "dose.csv");
    CHECK(back.at("d1").rows == d.at("d1").rows);
    std::string bad = text;
    bad.replace(bad.find("0.9"), 3, "1.5");
    CHECK_THROWS_AS(parse_dose_response(bad), InputError);
}
