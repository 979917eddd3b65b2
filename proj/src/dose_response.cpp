#include "cla/dose_response.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cla/common.hpp"
#include "cla/csv.hpp"

namespace cla {

void DoseResponseTable::validate() const {
    for (const auto& [cell, row] : rows)
        for (int c = 0; c < kDoseLevels; ++c)
            if (row[c] && !(*row[c] >= 0.0 && *row[c] <= 1.0))
                throw InputError("viability outside [0,1] for drug '" + drug_id + "', cell line '" + cell +
                                 "', level " + std::to_string(c));
}

DoseResponseData parse_dose_response(const std::string& text, const std::string& source) {
    const csv::Table table = csv::parse(text, source);
    if (table.header.size() != 2 + kDoseLevels || table.header[0] != "drug_id" ||
        table.header[1] != "cell_line_id")
        throw InputError(source + ": header must be drug_id,cell_line_id,level_0..level_9");
    for (int c = 0; c < kDoseLevels; ++c)
        if (table.header[2 + c] != "level_" + std::to_string(c))
            throw InputError(source + ": header must be drug_id,cell_line_id,level_0..level_9");
    DoseResponseData data;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string line = std::to_string(table.line_numbers[i]);
        if (row.size() != table.header.size()) throw InputError(source + ": wrong cell count at line " + line);
        DoseResponseTable& t = data[row[0]];
        t.drug_id = row[0];
        ViabilityRow values;
        for (int c = 0; c < kDoseLevels; ++c) {
            const std::string& cell = row[2 + static_cast<std::size_t>(c)];
            if (cell.empty()) continue;
            values[c] = csv::parse_double(cell, source + " line " + line + " level_" + std::to_string(c));
        }
        if (!t.rows.emplace(row[1], values).second)
            throw InputError(source + ": duplicate (drug, cell line) pair at line " + line);
    }
    for (const auto& [drug, t] : data) t.validate();
    return data;
}

DoseResponseData load_dose_response(const std::filesystem::path& path) {
    return parse_dose_response(csv::read_text(path), path.string());
}

void write_dose_response(const DoseResponseData& data, const std::filesystem::path& path) {
    csv::Row header{"drug_id", "cell_line_id"};
    for (int c = 0; c < kDoseLevels; ++c) header.push_back("level_" + std::to_string(c));
    csv::Writer w(std::move(header));
    for (const auto& [drug, table] : data) {
        for (const auto& [cell, row] : table.rows) {
            csv::Row r{drug, cell};
            for (const auto& v : row) r.push_back(v ? format_double(*v) : "");
            w.add(std::move(r));
        }
    }
    w.write(path);
}

ScalarResponse load_scalar_response(const std::filesystem::path& path, const std::string& column) {
    const csv::Table table = csv::read_file(path);
    const std::size_t drug_col = table.column("drug_id");
    const std::size_t cell_col = table.column("cell_line_id");
    std::size_t value_col = 0;
    try {
        value_col = table.column(column);
    } catch (const InputError&) {
        throw InputError(path.string() + ": missing column '" + column + "'");
    }
    ScalarResponse out;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string line = std::to_string(table.line_numbers[i]);
        if (row.size() != table.header.size()) throw InputError(path.string() + ": wrong cell count at line " + line);
        if (row[value_col].empty()) continue;
        const double v = csv::parse_double(row[value_col], path.string() + " line " + line);
        if (!std::isfinite(v)) throw InputError(path.string() + ": non-finite value at line " + line);
        if (!out[row[drug_col]].emplace(row[cell_col], v).second)
            throw InputError(path.string() + ": duplicate (drug, cell line) pair at line " + line);
    }
    return out;
}

void write_scalar_response(const ScalarResponse& data, const std::string& column,
                           const std::filesystem::path& path) {
    csv::Writer w({"drug_id", "cell_line_id", column});
    for (const auto& [drug, values] : data)
        for (const auto& [cell, v] : values) w.add({drug, cell, format_double(v)});
    w.write(path);
}

CalibratedDose calibrate_concentration(const DoseResponseTable& table, double target, double min_coverage,
                                       const std::string* exclude) {
    std::array<double, kDoseLevels> sum{};
    std::array<int, kDoseLevels> count{};
    int tested = 0;
    for (const auto& [cell, row] : table.rows) {
        if (exclude && cell == *exclude) continue;
        ++tested;
        for (int c = 0; c < kDoseLevels; ++c) {
            if (!row[c]) continue;
            sum[c] += *row[c];
            ++count[c];
        }
    }
    std::optional<CalibratedDose> best;
    double best_distance = std::numeric_limits<double>::infinity();
    for (int c = 0; c < kDoseLevels; ++c) {
        if (count[c] == 0 || static_cast<double>(count[c]) < min_coverage * static_cast<double>(tested)) continue;
        const double mean = sum[c] / count[c];
        const double distance = std::abs(mean - target);
        // Tolerance so that decimal ties (0.76 vs 0.74 around 0.75) resolve to the lower level.
        if (!best || distance < best_distance - 1e-12) {
            best = CalibratedDose{table.drug_id, c, mean};
            best_distance = distance;
        }
    }
    if (!best) throw ComputeError("no concentration level of drug '" + table.drug_id + "' meets the coverage threshold");
    return *best;
}

std::optional<double> viability_at(const DoseResponseTable& table, const std::string& cell_line, int level) {
    if (level < 0 || level >= kDoseLevels)
        throw InputError("concentration level " + std::to_string(level) + " outside 0..9");
    auto it = table.rows.find(cell_line);
    if (it == table.rows.end()) return std::nullopt;
    return it->second[level];
}

NormalizedViabilities normalize_viabilities(const std::map<std::string, double>& viabilities) {
    if (viabilities.size() < 2) throw InputError("normalize_viabilities needs at least 2 drugs");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& [drug, v] : viabilities) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    NormalizedViabilities out;
    out.degenerate = !(hi > lo);
    for (const auto& [drug, v] : viabilities) out.values[drug] = out.degenerate ? 0.0 : (v - lo) / (hi - lo);
    return out;
}

int true_rank(const std::map<std::string, double>& viabilities, const std::string& drug) {
    auto it = viabilities.find(drug);
    if (it == viabilities.end()) throw InputError("true_rank: drug '" + drug + "' has no viability");
    int rank = 1;
    for (const auto& [other, v] : viabilities)
        if (v < it->second) ++rank;
    return rank;
}

}  // namespace cla
