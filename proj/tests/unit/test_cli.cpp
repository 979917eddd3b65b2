#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cla/cli.hpp"
#include "cla/common.hpp"
#include "helpers.hpp"

using namespace cla;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

json small_synth(std::uint64_t seed) {
    return {{"synthetic",
             {{"n_cell_lines", 60}, {"n_genes", 40}, {"n_drugs", 3}, {"informative_per_drug", 5},
              {"planted_pool_size", 10}, {"n_decoy_sets", 1}, {"decoy_set_size", 10}, {"seed", seed}}},
            {"run",
             {{"mas",
               {{"algorithms", {"elastic_net"}},
                {"grids", {{"elastic_net", {{"penalty", {0.01}}, {"mixing", {0.5}}}}}},
                {"feature_types", {"expression", "mutation"}},
                {"plan", {{"n_outer", 3}, {"n_inner", 2}}}}},
              {"drs", {{"min_drugs_per_cell_line", 2}, {"min_training_cell_lines", 20}}}}}};
}

/// synth + mas into dir/world and dir/mas.
void synth_and_mas(const fs::path& dir, std::uint64_t seed) {
    spit(dir / "synth.json", small_synth(seed).dump());
    REQUIRE(cli::cmd_synth(dir / "synth.json", dir / "world", {}) == cli::kOk);
    REQUIRE(cli::cmd_mas(dir / "world" / "config.json", dir / "mas", {}) == cli::kOk);
}

std::vector<std::string> csv_column(const std::string& text, const std::string& column) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> header;
    std::stringstream hs(line);
    for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
    const auto idx = static_cast<std::size_t>(std::find(header.begin(), header.end(), column) - header.begin());
    std::vector<std::string> out;
    while (std::getline(in, line)) {
        std::stringstream ls(line);
        std::vector<std::string> cells;
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        out.push_back(cells.at(idx));
    }
    return out;
}

}  // namespace

TEST_CASE("config rejects unknown keys, malformed JSON and missing files") {
    const auto dir = testutil::temp_dir("cli_config");
    CHECK_THROWS_AS(cli::RunConfig::parse(R"({"sed": 1})", dir), InputError);
    CHECK_THROWS_AS(cli::RunConfig::parse("{not json", dir), InputError);
    CHECK_THROWS_AS(cli::RunConfig::load(dir / "missing.json"), InputError);
    const cli::RunConfig ok = cli::RunConfig::parse(R"({"seed": 9, "inputs": {"expression": "e.csv"}})", dir);
    CHECK(ok.seed == 9);
    CHECK(ok.mas.seed == 9);
    CHECK(*ok.inputs.expression == dir / "e.csv");
    CHECK(cli::RunConfig::parse(cli::example_config().dump(), dir).mas.algorithms.size() == 3);
}

TEST_CASE("mas with zero algorithms exits with an input error and still writes a manifest") {
    const auto dir = testutil::temp_dir("cli_zero");
    spit(dir / "c.json", R"({"mas": {"algorithms": []}})");
    CHECK(cli::cmd_mas(dir / "c.json", dir / "out", {}) == cli::kInputError);
    CHECK(fs::exists(dir / "out" / "run_manifest.json"));
    CHECK(json::parse(slurp(dir / "out" / "run_manifest.json"))["exit_code"] == 2);
}

TEST_CASE("sha256 of known strings") {
    CHECK(cli::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(cli::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("synth, mas, drs and report produce every advertised file") {
    const auto dir = testutil::temp_dir("cli_smoke");
    synth_and_mas(dir, 1);
    for (const char* f : {"mas_results.csv", "mas_summary.csv", "mas_best.json", "gene_set_comparison.csv",
                          "feature_importances.csv", "plot_r2_by_drug.csv", "plot_gene_set_usage.csv",
                          "run_manifest.json"})
        CHECK_MESSAGE(fs::exists(dir / "mas" / f), f);
    cli::Overrides o;
    o.mas_best = dir / "mas" / "mas_best.json";
    REQUIRE(cli::cmd_drs(dir / "world" / "config.json", dir / "drs", o) == cli::kOk);
    for (const char* f : {"drs_recommendations.csv", "drs_eval.json", "drs_baselines.csv", "drs_policy.csv",
                          "plot_rank_cdf.csv", "plot_inclusion_curve.csv", "plot_topn_gap.csv",
                          "plot_gap_histogram.csv", "plot_epsilon_star_cdf.csv", "plot_normalized_viability.csv"})
        CHECK_MESSAGE(fs::exists(dir / "drs" / f), f);
    const json manifest = json::parse(slurp(dir / "drs" / "run_manifest.json"));
    CHECK(manifest["exit_code"] == 0);
    CHECK(manifest["config_sha256"].get<std::string>().size() == 64);
    CHECK(manifest["inputs"].contains("dose_response"));

    // The inclusion curve reaches 1 at the largest N for every method.
    const std::string inclusion = slurp(dir / "drs" / "plot_inclusion_curve.csv");
    const json eval = json::parse(slurp(dir / "drs" / "drs_eval.json"));
    for (const auto& [name, m] : eval["methods"].items()) CHECK(m["inclusion_curve"].back().get<double>() == 1.0);

    REQUIRE(cli::cmd_report(dir / "mas", dir / "report_mas") == cli::kOk);
    CHECK(slurp(dir / "report_mas" / "plot_r2_by_drug.csv") == slurp(dir / "mas" / "plot_r2_by_drug.csv"));
    REQUIRE(cli::cmd_report(dir / "drs", dir / "report_drs") == cli::kOk);
    CHECK(slurp(dir / "report_drs" / "plot_inclusion_curve.csv") == inclusion);
}

TEST_CASE("R2 plot data lists drugs by increasing mean R2") {
    const auto dir = testutil::temp_dir("cli_sorted");
    synth_and_mas(dir, 2);
    const std::string text = slurp(dir / "mas" / "plot_r2_by_drug.csv");
    const auto means = csv_column(text, "mean_r2");
    const auto positions = csv_column(text, "position");
    REQUIRE(!means.empty());
    for (std::size_t i = 1; i < means.size(); ++i) {
        if (positions[i] == positions[i - 1]) continue;
        CHECK(std::stod(means[i - 1]) <= std::stod(means[i]));
    }
}

TEST_CASE("mas_best missing a drug: warning and exclusion") {
    const auto dir = testutil::temp_dir("cli_missing");
    synth_and_mas(dir, 3);
    json best = json::parse(slurp(dir / "mas" / "mas_best.json"));
    const std::string dropped = best["drugs"].begin().key();
    best["drugs"].erase(dropped);
    spit(dir / "partial.json", best.dump());
    cli::Overrides o;
    o.mas_best = dir / "partial.json";
    REQUIRE(cli::cmd_drs(dir / "world" / "config.json", dir / "drs", o) == cli::kOk);
    const json manifest = json::parse(slurp(dir / "drs" / "run_manifest.json"));
    bool warned = false;
    for (const auto& w : manifest["warnings"])
        if (w.get<std::string>().find(dropped) != std::string::npos) warned = true;
    CHECK(warned);
    for (const auto& d : csv_column(slurp(dir / "drs" / "drs_recommendations.csv"), "drug")) CHECK(d != dropped);
}

TEST_CASE("epsilon flag yields epsilon-policy output") {
    const auto dir = testutil::temp_dir("cli_eps");
    synth_and_mas(dir, 4);
    cli::Overrides o;
    o.mas_best = dir / "mas" / "mas_best.json";
    o.epsilon = 0.025;
    REQUIRE(cli::cmd_drs(dir / "world" / "config.json", dir / "drs", o) == cli::kOk);
    const auto policies = csv_column(slurp(dir / "drs" / "drs_policy.csv"), "policy");
    CHECK(std::find(policies.begin(), policies.end(), "epsilon:0.025") != policies.end());
    CHECK(json::parse(slurp(dir / "drs" / "drs_eval.json"))["policy"] == "epsilon:0.025");
}

TEST_CASE("report on an empty directory is a clean input error") {
    const auto dir = testutil::temp_dir("cli_empty");
    CHECK(cli::cmd_report(dir, dir / "out") == cli::kInputError);
    CHECK(cli::cmd_report(dir / "nope", dir / "out") == cli::kInputError);
}
