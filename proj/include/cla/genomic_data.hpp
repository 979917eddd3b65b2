#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace cla {

enum class FeatureType { Expression = 0, Mutation = 1, CopyNumber = 2 };

inline constexpr std::array<FeatureType, 3> kAllFeatureTypes = {
    FeatureType::Expression, FeatureType::Mutation, FeatureType::CopyNumber};

/// Config/file name: "expression", "mutation", "copy_number".
std::string_view to_string(FeatureType type);
/// Design-matrix column prefix: "expr", "mut", "cnv".
std::string_view column_prefix(FeatureType type);
FeatureType parse_feature_type(std::string_view text);

inline constexpr int kMaxMutationCode = 6;

/// Cell lines x genes for one feature type. Immutable after construction.
class FeatureMatrix {
public:
    /// Validates dimensions, id uniqueness and value domain; throws InputError.
    FeatureMatrix(FeatureType type, std::vector<std::string> cell_line_ids,
                  std::vector<std::string> gene_ids, Eigen::MatrixXd values);

    FeatureType type() const { return type_; }
    const std::vector<std::string>& cell_line_ids() const { return cell_lines_; }
    const std::vector<std::string>& gene_ids() const { return genes_; }
    const Eigen::MatrixXd& values() const { return values_; }

    std::optional<Eigen::Index> row_of(const std::string& cell_line) const;
    std::optional<Eigen::Index> column_of(const std::string& gene) const;

    bool operator==(const FeatureMatrix& other) const;

private:
    FeatureType type_;
    std::vector<std::string> cell_lines_;
    std::vector<std::string> genes_;
    Eigen::MatrixXd values_;
    std::unordered_map<std::string, Eigen::Index> row_index_;
    std::unordered_map<std::string, Eigen::Index> col_index_;
};

FeatureMatrix parse_feature_matrix(const std::string& text, FeatureType type,
                                   const std::string& source_name = "<memory>");
FeatureMatrix load_feature_matrix(const std::filesystem::path& path, FeatureType type);
std::string feature_matrix_to_csv(const FeatureMatrix& matrix);
void write_feature_matrix(const FeatureMatrix& matrix, const std::filesystem::path& path);

struct GeneSet {
    std::string name;
    std::vector<std::string> genes;  // sorted, unique

    /// Throws InputError on an empty list or duplicate genes.
    GeneSet(std::string name, std::vector<std::string> genes);
    bool contains(const std::string& gene) const;
};

/// One gene id per line; the file stem is the set name.
GeneSet load_gene_set(const std::filesystem::path& path);
void write_gene_set(const GeneSet& set, const std::filesystem::path& path);
GeneSet union_of(const std::string& name, const std::vector<GeneSet>& sets);

/// Gene set name (or none) per feature type.
class Combo {
public:
    Combo() = default;
    /// Throws InputError when every slot is none.
    explicit Combo(std::array<std::optional<std::string>, 3> assignment);

    const std::optional<std::string>& at(FeatureType type) const {
        return assignment_[static_cast<int>(type)];
    }
    /// Number of slots using the set.
    int uses(const std::string& set_name) const;
    /// Stable textual id, e.g. "expr=S1;mut=none;cnv=none".
    std::string id() const;
    static Combo parse(const std::string& id);

    auto operator<=>(const Combo&) const = default;

private:
    std::array<std::optional<std::string>, 3> assignment_;
};

/// All (set or none) assignments over the given feature types, all-none excluded.
/// Feature types not listed stay none. Order: feature type order as given, within a slot
/// gene set names lexicographic with none last.
std::vector<Combo> enumerate_combos(const std::vector<GeneSet>& gene_sets,
                                    const std::vector<FeatureType>& feature_types);
std::vector<Combo> enumerate_combos(const std::vector<std::string>& set_names,
                                    const std::vector<FeatureType>& feature_types);

using TissueLabels = std::map<std::string, std::string>;

TissueLabels load_tissue_labels(const std::filesystem::path& path);
void write_tissue_labels(const TissueLabels& labels, const std::filesystem::path& path);

struct EncodingOptions {
    bool binary_mutation = false;
    bool include_tissue = false;
};

/// Encoded design matrix. Column names carry their feature type prefix:
/// "expr:G", "cnv:G", "mut:G" (binary), "mut:G=code" (categorical), "tissue:T".
struct DesignMatrix {
    std::vector<std::string> cell_line_ids;
    std::vector<std::string> column_names;
    Eigen::MatrixXd values;
    /// Genes requested by a set but absent from the matrix, per feature type.
    std::array<std::size_t, 3> dropped_genes{0, 0, 0};

    Eigen::MatrixXd rows(const std::vector<Eigen::Index>& indices) const;
};

/// All loaded inputs that design matrices are built from.
struct GenomicData {
    std::map<FeatureType, FeatureMatrix> matrices;
    std::map<std::string, GeneSet> gene_sets;
    std::optional<TissueLabels> tissue;

    /// Cell lines present in every loaded matrix, in the order of the first matrix.
    std::vector<std::string> common_cell_lines() const;
    /// Union of gene ids over all matrices, sorted.
    std::vector<std::string> gene_universe() const;
    /// Throws InputError if a tissue label names a cell line absent from every matrix.
    void validate_tissue() const;
};

using GenesPerType = std::array<std::optional<std::vector<std::string>>, 3>;

/// Builds the design matrix from explicit gene lists per feature type.
DesignMatrix build_design_matrix(const GenesPerType& genes, const GenomicData& data,
                                 const std::vector<std::string>& cell_lines,
                                 const EncodingOptions& options);

/// Resolves combo set names against data.gene_sets, then builds.
DesignMatrix build_design_matrix(const Combo& combo, const GenomicData& data,
                                 const std::vector<std::string>& cell_lines,
                                 const EncodingOptions& options);

}  // namespace cla
