#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace cla {

enum class Algorithm { ElasticNet = 0, SvrRbf = 1, RandomForest = 2 };

/// "elastic_net", "svr_rbf", "random_forest".
std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view text);

struct ElasticNetParams {
    double penalty = 0.1;
    double mixing = 0.5;
};

struct SvrParams {
    double c = 1.0;
    double gamma = 1.0;
    double tube = 0.1;
    /// When set, the kernel width is gamma / (number of columns).
    bool gamma_per_column = true;

    double effective_gamma(std::size_t columns) const;
};

/// Features tried per split: floor(sqrt(p)) or floor(fraction * p), at least 1.
struct MaxFeatures {
    bool use_sqrt = false;
    double fraction = 1.0;

    std::size_t resolve(std::size_t columns) const;
    std::string label() const;
    static MaxFeatures parse(const nlohmann::json& j);
    bool operator==(const MaxFeatures&) const = default;
};

struct ForestParams {
    int n_trees = 100;
    MaxFeatures max_features{true, 1.0};
    int min_leaf = 1;
};

using Hyperparameters = std::variant<ElasticNetParams, SvrParams, ForestParams>;

Algorithm algorithm_of(const Hyperparameters& params);
nlohmann::json to_json(const Hyperparameters& params);
Hyperparameters hyperparameters_from_json(Algorithm algorithm, const nlohmann::json& j);

/// Per-algorithm parameter lists; points() enumerates the cartesian product.
struct HyperparameterGrid {
    Algorithm algorithm = Algorithm::ElasticNet;
    // elastic net
    std::vector<double> penalties;
    std::vector<double> mixings;
    // svr
    std::vector<double> cs;
    std::vector<double> gammas;
    std::vector<double> tubes;
    bool gamma_per_column = true;
    // random forest
    std::vector<int> n_trees;
    std::vector<MaxFeatures> max_features;
    std::vector<int> min_leafs;

    static HyperparameterGrid defaults(Algorithm algorithm);
    /// Replaces lists present in j; unknown keys are an InputError.
    static HyperparameterGrid from_json(Algorithm algorithm, const nlohmann::json& j);
    nlohmann::json to_json() const;

    /// Throws InputError for empty lists or out-of-range values.
    void validate() const;
    /// Deterministic order. Elastic net: penalty descending (strongest first), then mixing
    /// as listed. Others: lists in given order, last list fastest.
    std::vector<Hyperparameters> points() const;
};

/// Training-column statistics. scale == 0 marks a zero-variance column.
struct Standardization {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static Standardization fit(const Eigen::MatrixXd& X);
    /// (x - mean) / scale, zero-variance columns mapped to 0.
    Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
};

struct ElasticNetModel {
    Eigen::VectorXd coefficients;  // standardized scale
    double intercept = 0.0;        // standardized scale (training mean of y)
    int sweeps = 0;
    std::vector<double> objective_trace;  // filled only when requested
};

struct SvrModel {
    Eigen::MatrixXd support_vectors;  // standardized rows
    Eigen::VectorXd dual_coefficients;
    std::vector<Eigen::Index> support_indices;  // into the training rows
    double bias = 0.0;
    double gamma = 1.0;
    int iterations = 0;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    std::size_t samples = 0;
    /// Sum-of-squares reduction achieved by this split.
    double sse_reduction = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::size_t root_samples = 0;

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct ForestModel {
    std::vector<RegressionTree> trees;
};

class FittedModel {
public:
    using Learned = std::variant<ElasticNetModel, SvrModel, ForestModel>;

    FittedModel(Hyperparameters params, std::vector<std::string> columns,
                Standardization standardization, Learned learned);

    Algorithm algorithm() const { return algorithm_of(params_); }
    const Hyperparameters& params() const { return params_; }
    const std::vector<std::string>& columns() const { return columns_; }
    const Standardization& standardization() const { return standardization_; }
    const Learned& learned() const { return learned_; }

    template <class T>
    const T& as() const { return std::get<T>(learned_); }

private:
    Hyperparameters params_;
    std::vector<std::string> columns_;
    Standardization standardization_;
    Learned learned_;
};

struct ElasticNetOptions {
    double tolerance = 1e-6;
    int max_sweeps = 10000;
    bool record_objective = false;
};

struct SvrOptions {
    double tolerance = 1e-3;
    int max_iterations = 100000;
};

/// Minimizes (1/2n)|y - Zb - b0|^2 + penalty * (mixing |b|_1 + (1 - mixing)/2 |b|^2)
/// over z-scored columns Z by cyclic coordinate descent. Throws ComputeError on
/// non-finite input or when max_sweeps is exhausted.
FittedModel fit_elastic_net(const Eigen::MatrixXd& X, const std::vector<std::string>& columns,
                            const Eigen::VectorXd& y, double penalty, double mixing,
                            const ElasticNetOptions& options = {});

/// epsilon-insensitive SVR with kernel exp(-gamma |u - v|^2) on z-scored columns,
/// solved in the dual by SMO with second-order working set selection.
FittedModel fit_svr_rbf(const Eigen::MatrixXd& X, const std::vector<std::string>& columns,
                        const Eigen::VectorXd& y, const SvrParams& params,
                        const SvrOptions& options = {});

/// Bagged variance-reduction regression trees on raw column values.
FittedModel fit_random_forest(const Eigen::MatrixXd& X, const std::vector<std::string>& columns,
                              const Eigen::VectorXd& y, const ForestParams& params,
                              std::uint64_t seed);

FittedModel fit(const Hyperparameters& params, const Eigen::MatrixXd& X,
                const std::vector<std::string>& columns, const Eigen::VectorXd& y,
                std::uint64_t seed);

/// Throws InputError listing the names when columns differ from the fit columns.
Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& X,
                        const std::vector<std::string>& columns);

using FeatureImportances = std::map<std::string, double>;

/// Normalized |coefficient| for elastic net, normalized mean impurity decrease for the
/// forest, nullopt for SVR.
std::optional<FeatureImportances> feature_importances(const FittedModel& model);

/// Audit dump; no load guarantee across versions.
nlohmann::json model_report(const FittedModel& model);

}  // namespace cla
