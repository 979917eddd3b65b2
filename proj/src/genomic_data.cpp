#include "cla/genomic_data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include "cla/common.hpp"
#include "cla/csv.hpp"

namespace cla {

std::string_view to_string(FeatureType type) {
    switch (type) {
        case FeatureType::Expression: return "expression";
        case FeatureType::Mutation: return "mutation";
        case FeatureType::CopyNumber: return "copy_number";
    }
    return "?";
}

std::string_view column_prefix(FeatureType type) {
    switch (type) {
        case FeatureType::Expression: return "expr";
        case FeatureType::Mutation: return "mut";
        case FeatureType::CopyNumber: return "cnv";
    }
    return "?";
}

FeatureType parse_feature_type(std::string_view text) {
    for (auto t : kAllFeatureTypes)
        if (text == to_string(t) || text == column_prefix(t)) return t;
    throw InputError("unknown feature type '" + std::string(text) + "'");
}

FeatureMatrix::FeatureMatrix(FeatureType type, std::vector<std::string> cell_line_ids,
                             std::vector<std::string> gene_ids, Eigen::MatrixXd values)
    : type_(type),
      cell_lines_(std::move(cell_line_ids)),
      genes_(std::move(gene_ids)),
      values_(std::move(values)) {
    if (values_.rows() != static_cast<Eigen::Index>(cell_lines_.size()) ||
        values_.cols() != static_cast<Eigen::Index>(genes_.size()))
        throw InputError("feature matrix dimensions do not match id lists");
    for (std::size_t i = 0; i < cell_lines_.size(); ++i)
        if (!row_index_.emplace(cell_lines_[i], static_cast<Eigen::Index>(i)).second)
            throw InputError("duplicate cell line id '" + cell_lines_[i] + "'");
    for (std::size_t j = 0; j < genes_.size(); ++j)
        if (!col_index_.emplace(genes_[j], static_cast<Eigen::Index>(j)).second)
            throw InputError("duplicate gene id '" + genes_[j] + "'");
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
        for (Eigen::Index j = 0; j < values_.cols(); ++j) {
            const double v = values_(i, j);
            const std::string where = "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
            if (!std::isfinite(v)) throw InputError("non-finite value at " + where);
            if (type_ == FeatureType::Mutation &&
                (v < 0 || v > kMaxMutationCode || std::floor(v) != v))
                throw InputError("mutation code out of range at " + where);
        }
    }
}

std::optional<Eigen::Index> FeatureMatrix::row_of(const std::string& cell_line) const {
    auto it = row_index_.find(cell_line);
    if (it == row_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<Eigen::Index> FeatureMatrix::column_of(const std::string& gene) const {
    auto it = col_index_.find(gene);
    if (it == col_index_.end()) return std::nullopt;
    return it->second;
}

bool FeatureMatrix::operator==(const FeatureMatrix& other) const {
    return type_ == other.type_ && cell_lines_ == other.cell_lines_ && genes_ == other.genes_ &&
           values_ == other.values_;
}

FeatureMatrix parse_feature_matrix(const std::string& text, FeatureType type,
                                   const std::string& source_name) {
    const csv::Table table = csv::parse(text, source_name);
    if (table.header.empty() || table.header[0] != "cell_line_id")
        throw InputError(source_name + ": malformed header, first cell must be 'cell_line_id'");
    std::vector<std::string> genes(table.header.begin() + 1, table.header.end());
    std::vector<std::string> cell_lines;
    Eigen::MatrixXd values(static_cast<Eigen::Index>(table.rows.size()),
                           static_cast<Eigen::Index>(genes.size()));
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string line = std::to_string(table.line_numbers[i]);
        if (row.size() != table.header.size())
            throw InputError(source_name + ": row at line " + line + " has " +
                             std::to_string(row.size()) + " cells, expected " +
                             std::to_string(table.header.size()));
        if (!seen.insert(row[0]).second)
            throw InputError(source_name + ": duplicate cell line id '" + row[0] + "' at line " + line);
        cell_lines.push_back(row[0]);
        for (std::size_t j = 1; j < row.size(); ++j) {
            const std::string where = source_name + " (row " + std::to_string(i + 1) + ", col " +
                                      std::to_string(j) + ")";
            const double v = csv::parse_double(row[j], where);
            if (type == FeatureType::Mutation &&
                (v < 0 || v > kMaxMutationCode || std::floor(v) != v))
                throw InputError("mutation code out of range at (" + std::to_string(i + 1) + "," +
                                 std::to_string(j) + ") in " + source_name);
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) = v;
        }
    }
    std::unordered_set<std::string> seen_genes;
    for (const auto& g : genes)
        if (!seen_genes.insert(g).second)
            throw InputError(source_name + ": duplicate gene id '" + g + "'");
    try {
        return FeatureMatrix(type, std::move(cell_lines), std::move(genes), std::move(values));
    } catch (const InputError& e) {
        throw InputError(source_name + ": " + e.what());
    }
}

FeatureMatrix load_feature_matrix(const std::filesystem::path& path, FeatureType type) {
    return parse_feature_matrix(csv::read_text(path), type, path.string());
}

std::string feature_matrix_to_csv(const FeatureMatrix& matrix) {
    csv::Row header{"cell_line_id"};
    header.insert(header.end(), matrix.gene_ids().begin(), matrix.gene_ids().end());
    csv::Writer w(std::move(header));
    const auto& v = matrix.values();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        csv::Row row{matrix.cell_line_ids()[static_cast<std::size_t>(i)]};
        row.reserve(static_cast<std::size_t>(v.cols()) + 1);
        for (Eigen::Index j = 0; j < v.cols(); ++j) row.push_back(format_double(v(i, j)));
        w.add(std::move(row));
    }
    return w.str();
}

void write_feature_matrix(const FeatureMatrix& matrix, const std::filesystem::path& path) {
    csv::write_text(path, feature_matrix_to_csv(matrix));
}

GeneSet::GeneSet(std::string set_name, std::vector<std::string> gene_list)
    : name(std::move(set_name)), genes(std::move(gene_list)) {
    if (genes.empty()) throw InputError("gene set '" + name + "' is empty");
    std::sort(genes.begin(), genes.end());
    auto dup = std::adjacent_find(genes.begin(), genes.end());
    if (dup != genes.end())
        throw InputError("gene set '" + name + "' lists gene '" + *dup + "' twice");
}

bool GeneSet::contains(const std::string& gene) const {
    return std::binary_search(genes.begin(), genes.end(), gene);
}

GeneSet load_gene_set(const std::filesystem::path& path) {
    std::istringstream in(csv::read_text(path));
    std::vector<std::string> genes;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        genes.push_back(line.substr(start));
    }
    try {
        return GeneSet(path.stem().string(), std::move(genes));
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_gene_set(const GeneSet& set, const std::filesystem::path& path) {
    std::string text;
    for (const auto& g : set.genes) text += g + "\n";
    csv::write_text(path, text);
}

GeneSet union_of(const std::string& name, const std::vector<GeneSet>& sets) {
    std::set<std::string> all;
    for (const auto& s : sets) all.insert(s.genes.begin(), s.genes.end());
    return GeneSet(name, {all.begin(), all.end()});
}

Combo::Combo(std::array<std::optional<std::string>, 3> assignment)
    : assignment_(std::move(assignment)) {
    if (std::none_of(assignment_.begin(), assignment_.end(), [](const auto& a) { return a.has_value(); }))
        throw InputError("combo must assign a gene set to at least one feature type");
}

int Combo::uses(const std::string& set_name) const {
    return static_cast<int>(std::count(assignment_.begin(), assignment_.end(),
                                       std::optional<std::string>(set_name)));
}

std::string Combo::id() const {
    std::string out;
    for (auto t : kAllFeatureTypes) {
        if (!out.empty()) out += ';';
        out += column_prefix(t);
        out += '=';
        out += at(t) ? *at(t) : "none";
    }
    return out;
}

Combo Combo::parse(const std::string& id) {
    std::array<std::optional<std::string>, 3> a;
    std::istringstream in(id);
    std::string part;
    while (std::getline(in, part, ';')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw InputError("malformed combo id '" + id + "'");
        const FeatureType t = parse_feature_type(part.substr(0, eq));
        const std::string value = part.substr(eq + 1);
        if (value != "none") a[static_cast<int>(t)] = value;
    }
    return Combo(std::move(a));
}

std::vector<Combo> enumerate_combos(const std::vector<std::string>& set_names,
                                    const std::vector<FeatureType>& feature_types) {
    if (set_names.empty()) throw InputError("enumerate_combos: no gene sets");
    if (feature_types.empty()) throw InputError("enumerate_combos: no feature types");
    std::vector<std::string> names = set_names;
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    std::vector<FeatureType> types = feature_types;
    {
        std::vector<FeatureType> uniq;
        for (auto t : types)
            if (std::find(uniq.begin(), uniq.end(), t) == uniq.end()) uniq.push_back(t);
        types = std::move(uniq);
    }

    const std::size_t options = names.size() + 1;  // last option = none
    std::vector<std::size_t> digit(types.size(), 0);
    std::vector<Combo> out;
    while (true) {
        std::array<std::optional<std::string>, 3> a;
        bool any = false;
        for (std::size_t s = 0; s < types.size(); ++s) {
            if (digit[s] < names.size()) {
                a[static_cast<int>(types[s])] = names[digit[s]];
                any = true;
            }
        }
        if (any) out.emplace_back(std::move(a));
        // odometer: last feature type varies fastest
        std::size_t pos = types.size();
        while (pos > 0) {
            --pos;
            if (++digit[pos] < options) break;
            digit[pos] = 0;
            if (pos == 0) return out;
        }
    }
}

std::vector<Combo> enumerate_combos(const std::vector<GeneSet>& gene_sets,
                                    const std::vector<FeatureType>& feature_types) {
    std::vector<std::string> names;
    for (const auto& s : gene_sets) names.push_back(s.name);
    return enumerate_combos(names, feature_types);
}

TissueLabels load_tissue_labels(const std::filesystem::path& path) {
    const csv::Table table = csv::read_file(path);
    const std::size_t id_col = table.column("cell_line_id");
    const std::size_t tissue_col = table.column("tissue_type");
    TissueLabels labels;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (row.size() != table.header.size())
            throw InputError(path.string() + ": wrong cell count at line " +
                             std::to_string(table.line_numbers[i]));
        if (!labels.emplace(row[id_col], row[tissue_col]).second)
            throw InputError(path.string() + ": duplicate cell line id '" + row[id_col] + "'");
    }
    return labels;
}

void write_tissue_labels(const TissueLabels& labels, const std::filesystem::path& path) {
    csv::Writer w({"cell_line_id", "tissue_type"});
    for (const auto& [id, t] : labels) w.add({id, t});
    w.write(path);
}

Eigen::MatrixXd DesignMatrix::rows(const std::vector<Eigen::Index>& indices) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), values.cols());
    for (std::size_t i = 0; i < indices.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = values.row(indices[i]);
    return out;
}

std::vector<std::string> GenomicData::common_cell_lines() const {
    if (matrices.empty()) return {};
    const FeatureMatrix& first = matrices.begin()->second;
    std::vector<std::string> out;
    for (const auto& id : first.cell_line_ids()) {
        bool everywhere = true;
        for (const auto& [type, m] : matrices)
            if (!m.row_of(id)) everywhere = false;
        if (everywhere) out.push_back(id);
    }
    return out;
}

std::vector<std::string> GenomicData::gene_universe() const {
    std::set<std::string> all;
    for (const auto& [type, m] : matrices) all.insert(m.gene_ids().begin(), m.gene_ids().end());
    return {all.begin(), all.end()};
}

void GenomicData::validate_tissue() const {
    if (!tissue) return;
    for (const auto& [id, t] : *tissue) {
        bool found = false;
        for (const auto& [type, m] : matrices)
            if (m.row_of(id)) found = true;
        if (!found)
            throw InputError("tissue label for cell line '" + id + "' which is in no feature matrix");
    }
}

namespace {

const FeatureMatrix& matrix_for(const GenomicData& data, FeatureType type) {
    auto it = data.matrices.find(type);
    if (it == data.matrices.end())
        throw InputError("combo uses " + std::string(to_string(type)) + " but no such matrix is loaded");
    return it->second;
}

}  // namespace

DesignMatrix build_design_matrix(const GenesPerType& genes, const GenomicData& data,
                                 const std::vector<std::string>& cell_lines,
                                 const EncodingOptions& options) {
    DesignMatrix out;
    out.cell_line_ids = cell_lines;
    const auto n = static_cast<Eigen::Index>(cell_lines.size());

    // Columns are collected first, then packed.
    std::vector<Eigen::VectorXd> columns;

    for (auto type : kAllFeatureTypes) {
        const auto& requested = genes[static_cast<int>(type)];
        if (!requested) continue;
        const FeatureMatrix& m = matrix_for(data, type);
        std::vector<Eigen::Index> rows(cell_lines.size());
        for (std::size_t i = 0; i < cell_lines.size(); ++i) {
            auto r = m.row_of(cell_lines[i]);
            if (!r)
                throw InputError("cell line '" + cell_lines[i] + "' absent from " +
                                 std::string(to_string(type)) + " matrix");
            rows[i] = *r;
        }
        std::vector<std::string> present;
        for (const auto& g : *requested) {
            if (m.column_of(g))
                present.push_back(g);
            else
                ++out.dropped_genes[static_cast<int>(type)];
        }
        std::sort(present.begin(), present.end());
        present.erase(std::unique(present.begin(), present.end()), present.end());

        const std::string prefix(column_prefix(type));
        for (const auto& g : present) {
            const Eigen::Index c = *m.column_of(g);
            Eigen::VectorXd col(n);
            for (Eigen::Index i = 0; i < n; ++i) col(i) = m.values()(rows[static_cast<std::size_t>(i)], c);
            if (type != FeatureType::Mutation) {
                out.column_names.push_back(prefix + ":" + g);
                columns.push_back(std::move(col));
            } else if (options.binary_mutation) {
                out.column_names.push_back(prefix + ":" + g);
                columns.push_back((col.array() != 0.0).cast<double>());
            } else {
                std::set<int> observed;
                for (Eigen::Index i = 0; i < n; ++i) observed.insert(static_cast<int>(col(i)));
                for (int code : observed) {
                    out.column_names.push_back(prefix + ":" + g + "=" + std::to_string(code));
                    columns.push_back((col.array() == static_cast<double>(code)).cast<double>());
                }
            }
        }
    }

    if (options.include_tissue) {
        if (!data.tissue) throw InputError("tissue features requested but no tissue labels loaded");
        std::vector<std::string> tissue_of(cell_lines.size());
        std::set<std::string> observed;
        for (std::size_t i = 0; i < cell_lines.size(); ++i) {
            auto it = data.tissue->find(cell_lines[i]);
            if (it == data.tissue->end())
                throw InputError("no tissue label for cell line '" + cell_lines[i] + "'");
            tissue_of[i] = it->second;
            observed.insert(it->second);
        }
        for (const auto& t : observed) {
            Eigen::VectorXd col(n);
            for (Eigen::Index i = 0; i < n; ++i) col(i) = tissue_of[static_cast<std::size_t>(i)] == t ? 1.0 : 0.0;
            out.column_names.push_back("tissue:" + t);
            columns.push_back(std::move(col));
        }
    }

    out.values.resize(n, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) out.values.col(static_cast<Eigen::Index>(j)) = columns[j];
    return out;
}

DesignMatrix build_design_matrix(const Combo& combo, const GenomicData& data,
                                 const std::vector<std::string>& cell_lines,
                                 const EncodingOptions& options) {
    GenesPerType genes;
    for (auto type : kAllFeatureTypes) {
        const auto& name = combo.at(type);
        if (!name) continue;
        auto it = data.gene_sets.find(*name);
        if (it == data.gene_sets.end()) throw InputError("combo references unknown gene set '" + *name + "'");
        genes[static_cast<int>(type)] = it->second.genes;
    }
    return build_design_matrix(genes, data, cell_lines, options);
}

}  // namespace cla
