#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>

#include "cla/cli.hpp"
#include "cla/common.hpp"
#include "cla/csv.hpp"

namespace cla::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::size_t kPieTop = 5;
constexpr std::size_t kTopImportances = 20;
constexpr int kGapBins = 20;

json read_json(const fs::path& p) {
    try {
        return json::parse(csv::read_text(p));
    } catch (const json::parse_error& e) {
        throw InputError(p.string() + ": " + e.what());
    }
}

struct SummaryRow {
    std::string drug;
    std::string algorithm;
    std::string combo;
    double mean_r2 = 0.0;
    double variance = 0.0;
};

}  // namespace

std::vector<fs::path> write_mas_plot_data(const fs::path& results, const fs::path& out) {
    std::vector<fs::path> written;

    // Best configuration per drug, drugs ordered by increasing mean R2.
    const json best = read_json(results / "mas_best.json");
    std::vector<std::pair<double, std::string>> order;
    for (auto it = best.at("drugs").begin(); it != best.at("drugs").end(); ++it)
        order.emplace_back(it->at("mean_r2").get<double>(), it.key());
    std::sort(order.begin(), order.end());
    csv::Writer r2({"position", "drug", "algorithm", "combo", "mean_r2", "loop", "r2"});
    for (std::size_t i = 0; i < order.size(); ++i) {
        const json& e = best["drugs"][order[i].second];
        const auto loops = e.at("r2_per_loop").get<std::vector<double>>();
        for (std::size_t l = 0; l < loops.size(); ++l)
            r2.add({std::to_string(i + 1), order[i].second, e.at("algorithm").get<std::string>(),
                    e.at("combo_id").get<std::string>(), format_double(order[i].first), std::to_string(l),
                    format_double(loops[l])});
    }
    r2.write(out / "plot_r2_by_drug.csv");
    written.push_back(out / "plot_r2_by_drug.csv");

    // Slot usage of each gene set among the top combos of every algorithm.
    const csv::Table summary = csv::read_file(results / "mas_summary.csv");
    const std::size_t c_drug = summary.column("drug"), c_alg = summary.column("algorithm"),
                      c_combo = summary.column("combo"), c_mean = summary.column("mean_r2"),
                      c_var = summary.column("r2_variance"), c_valid = summary.column("valid");
    std::map<std::string, std::vector<SummaryRow>> by_drug;
    for (const auto& row : summary.rows) {
        if (row[c_valid] != "1") continue;
        const double m = csv::parse_double(row[c_mean], "mas_summary.csv mean_r2");
        if (!std::isfinite(m)) continue;
        by_drug[row[c_drug]].push_back(
            {row[c_drug], row[c_alg], row[c_combo], m, csv::parse_double(row[c_var], "mas_summary.csv r2_variance")});
    }
    csv::Writer pie({"drug", "gene_set", "count"});
    for (auto& [drug, rows] : by_drug) {
        std::stable_sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
            if (a.mean_r2 != b.mean_r2) return a.mean_r2 > b.mean_r2;
            return a.variance < b.variance;
        });
        std::map<std::string, std::size_t> taken;
        std::map<std::string, int> usage;
        for (const auto& r : rows) {
            if (taken[r.algorithm]++ >= kPieTop) continue;
            const Combo combo = Combo::parse(r.combo);
            for (auto t : kAllFeatureTypes)
                if (combo.at(t)) ++usage[*combo.at(t)];
        }
        for (const auto& [set, count] : usage) pie.add({drug, set, std::to_string(count)});
    }
    pie.write(out / "plot_gene_set_usage.csv");
    written.push_back(out / "plot_gene_set_usage.csv");

    const csv::Table imp = csv::read_file(results / "feature_importances.csv");
    const std::size_t c_rank = imp.column("rank");
    csv::Writer top(imp.header);
    for (const auto& row : imp.rows)
        if (static_cast<std::size_t>(csv::parse_int(row[c_rank], "feature_importances.csv rank")) <= kTopImportances)
            top.add(row);
    top.write(out / "plot_top_importances.csv");
    written.push_back(out / "plot_top_importances.csv");
    return written;
}

std::vector<fs::path> write_drs_plot_data(const fs::path& results, const fs::path& out) {
    std::vector<fs::path> written;
    const json ev = read_json(results / "drs_eval.json");
    const json& methods = ev.at("methods");

    // Normalized true viability of every tested drug, with the Dr.S rank of each.
    const csv::Table recs = csv::read_file(results / "drs_recommendations.csv");
    const std::size_t c_cell = recs.column("cell_line"), c_rank = recs.column("rank"), c_drug = recs.column("drug"),
                      c_true = recs.column("true_viability");
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> rank_of;
    std::map<std::string, std::map<std::string, double>> truth;
    for (const auto& row : recs.rows) {
        truth[row[c_cell]][row[c_drug]] = csv::parse_double(row[c_true], "drs_recommendations.csv true_viability");
        rank_of[row[c_cell]].emplace_back(row[c_drug], row[c_rank]);
    }
    csv::Writer norm({"cell_line", "drug", "drs_rank", "true_viability", "normalized_viability"});
    for (const auto& [cell, drugs] : rank_of) {
        const auto& t = truth.at(cell);
        if (t.size() < 2) continue;
        const NormalizedViabilities nv = normalize_viabilities(t);
        for (const auto& [drug, rank] : drugs)
            norm.add({cell, drug, rank, format_double(t.at(drug)), format_double(nv.values.at(drug))});
    }
    norm.write(out / "plot_normalized_viability.csv");
    written.push_back(out / "plot_normalized_viability.csv");

    csv::Writer cdf({"method", "rank", "count", "cdf"});
    csv::Writer inclusion({"method", "n", "fraction"});
    csv::Writer topn({"method", "n", "mean_gap"});
    csv::Writer hist({"method", "bin_low", "bin_high", "count"});
    csv::Writer eps({"method", "epsilon_star", "cdf"});
    for (auto it = methods.begin(); it != methods.end(); ++it) {
        const std::string name = it.key();
        const json& m = *it;
        const auto rank_cdf = m.at("rank_cdf").get<std::vector<double>>();
        const json& histogram = m.at("rank_histogram");
        for (std::size_t r = 0; r < rank_cdf.size(); ++r) {
            const std::string key = std::to_string(r + 1);
            const int count = histogram.contains(key) ? histogram[key].get<int>() : 0;
            cdf.add({name, key, std::to_string(count), format_double(rank_cdf[r])});
        }
        const auto inc = m.at("inclusion_curve").get<std::vector<double>>();
        for (std::size_t n = 0; n < inc.size(); ++n) inclusion.add({name, std::to_string(n + 1), format_double(inc[n])});
        const auto gaps = m.at("topn_gap_curve").get<std::vector<double>>();
        for (std::size_t n = 0; n < gaps.size(); ++n) topn.add({name, std::to_string(n + 1), format_double(gaps[n])});

        const json& per = m.at("per_cell_line");
        const auto top1_gap = per.at("top1_gap").get<std::vector<double>>();
        std::vector<int> bins(kGapBins, 0);
        for (double g : top1_gap) {
            const int b = std::clamp(static_cast<int>(std::floor(g * kGapBins)), 0, kGapBins - 1);
            ++bins[static_cast<std::size_t>(b)];
        }
        for (int b = 0; b < kGapBins; ++b)
            hist.add({name, format_double(static_cast<double>(b) / kGapBins),
                      format_double(static_cast<double>(b + 1) / kGapBins), std::to_string(bins[static_cast<std::size_t>(b)])});

        auto stars = per.at("epsilon_star").get<std::vector<double>>();
        std::sort(stars.begin(), stars.end());
        for (std::size_t i = 0; i < stars.size(); ++i)
            eps.add({name, format_double(stars[i]),
                     format_double(static_cast<double>(i + 1) / static_cast<double>(stars.size()))});
    }
    const std::vector<std::pair<const csv::Writer*, std::string>> files = {
        {&cdf, "plot_rank_cdf.csv"},   {&inclusion, "plot_inclusion_curve.csv"},
        {&topn, "plot_topn_gap.csv"},  {&hist, "plot_gap_histogram.csv"},
        {&eps, "plot_epsilon_star_cdf.csv"}};
    for (const auto& [writer, file] : files) {
        writer->write(out / file);
        written.push_back(out / file);
    }
    return written;
}

int cmd_report(const fs::path& results, const fs::path& out) {
    Manifest manifest("report");
    int code = kOk;
    try {
        if (!fs::is_directory(results)) throw InputError("results directory not found: " + results.string());
        const bool has_mas = fs::exists(results / "mas_summary.csv") && fs::exists(results / "mas_best.json") &&
                             fs::exists(results / "feature_importances.csv");
        const bool has_drs = fs::exists(results / "drs_eval.json") && fs::exists(results / "drs_recommendations.csv");
        if (!has_mas && !has_drs) throw InputError("no MAS or Dr.S results in " + results.string());
        fs::create_directories(out);
        if (has_mas) {
            manifest.add_input("mas_summary", results / "mas_summary.csv");
            for (const auto& p : write_mas_plot_data(results, out)) manifest.add_output(p);
        }
        if (has_drs) {
            manifest.add_input("drs_eval", results / "drs_eval.json");
            for (const auto& p : write_drs_plot_data(results, out)) manifest.add_output(p);
        }
    } catch (const InputError& e) {
        std::cerr << "cla report: input error: " << e.what() << "\n";
        return kInputError;
    } catch (const json::exception& e) {
        std::cerr << "cla report: malformed results: " << e.what() << "\n";
        return kInputError;
    }
    manifest.write(out, code, "report_manifest.json");
    return code;
}

}  // namespace cla::cli
