#include <algorithm>
#include <cmath>

#include "cla/common.hpp"
#include "cla/learners.hpp"

namespace cla {

std::string_view to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::ElasticNet: return "elastic_net";
        case Algorithm::SvrRbf: return "svr_rbf";
        case Algorithm::RandomForest: return "random_forest";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view text) {
    for (auto a : {Algorithm::ElasticNet, Algorithm::SvrRbf, Algorithm::RandomForest})
        if (text == to_string(a)) return a;
    throw InputError("unknown algorithm '" + std::string(text) + "'");
}

double SvrParams::effective_gamma(std::size_t columns) const {
    if (!gamma_per_column) return gamma;
    return gamma / static_cast<double>(std::max<std::size_t>(columns, 1));
}

std::size_t MaxFeatures::resolve(std::size_t columns) const {
    if (columns == 0) return 0;
    const double raw = use_sqrt ? std::sqrt(static_cast<double>(columns))
                                : fraction * static_cast<double>(columns);
    return std::clamp<std::size_t>(static_cast<std::size_t>(raw), 1, columns);
}

std::string MaxFeatures::label() const { return use_sqrt ? "sqrt" : format_double(fraction); }

MaxFeatures MaxFeatures::parse(const nlohmann::json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "sqrt") return {true, 1.0};
        throw InputError("max_features must be \"sqrt\" or a fraction");
    }
    if (!j.is_number()) throw InputError("max_features must be \"sqrt\" or a fraction");
    return {false, j.get<double>()};
}

Algorithm algorithm_of(const Hyperparameters& params) {
    return static_cast<Algorithm>(params.index());
}

nlohmann::json to_json(const Hyperparameters& params) {
    return std::visit(
        [](const auto& p) -> nlohmann::json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ElasticNetParams>) {
                return {{"penalty", p.penalty}, {"mixing", p.mixing}};
            } else if constexpr (std::is_same_v<T, SvrParams>) {
                return {{"C", p.c}, {"gamma", p.gamma}, {"tube", p.tube},
                        {"gamma_per_column", p.gamma_per_column}};
            } else {
                nlohmann::json mf = p.max_features.use_sqrt ? nlohmann::json("sqrt")
                                                            : nlohmann::json(p.max_features.fraction);
                return {{"n_trees", p.n_trees}, {"max_features", mf}, {"min_leaf", p.min_leaf}};
            }
        },
        params);
}

Hyperparameters hyperparameters_from_json(Algorithm algorithm, const nlohmann::json& j) {
    try {
        switch (algorithm) {
            case Algorithm::ElasticNet:
                return ElasticNetParams{j.at("penalty").get<double>(), j.at("mixing").get<double>()};
            case Algorithm::SvrRbf:
                return SvrParams{j.at("C").get<double>(), j.at("gamma").get<double>(),
                                 j.at("tube").get<double>(), j.value("gamma_per_column", true)};
            case Algorithm::RandomForest:
                return ForestParams{j.at("n_trees").get<int>(), MaxFeatures::parse(j.at("max_features")),
                                    j.at("min_leaf").get<int>()};
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad hyperparameters for ") + std::string(to_string(algorithm)) +
                         ": " + e.what());
    }
    throw InputError("unknown algorithm");
}

HyperparameterGrid HyperparameterGrid::defaults(Algorithm algorithm) {
    HyperparameterGrid g;
    g.algorithm = algorithm;
    g.penalties = {1e-3, 1e-2, 1e-1, 1.0, 10.0};
    g.mixings = {0.0, 0.25, 0.5, 0.75, 1.0};
    g.cs = {0.1, 1.0, 10.0, 100.0};
    g.gammas = {0.1, 1.0, 10.0};
    g.tubes = {0.01, 0.1};
    g.n_trees = {100};
    g.max_features = {{true, 1.0}, {false, 0.25}, {false, 1.0}};
    g.min_leafs = {1, 5};
    return g;
}

HyperparameterGrid HyperparameterGrid::from_json(Algorithm algorithm, const nlohmann::json& j) {
    HyperparameterGrid g = defaults(algorithm);
    if (j.is_null()) return g;
    if (!j.is_object()) throw InputError("grid must be an object");
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& key = it.key();
            if (key == "penalty") g.penalties = it->get<std::vector<double>>();
            else if (key == "mixing") g.mixings = it->get<std::vector<double>>();
            else if (key == "C") g.cs = it->get<std::vector<double>>();
            else if (key == "gamma") g.gammas = it->get<std::vector<double>>();
            else if (key == "tube") g.tubes = it->get<std::vector<double>>();
            else if (key == "gamma_per_column") g.gamma_per_column = it->get<bool>();
            else if (key == "n_trees") g.n_trees = it->get<std::vector<int>>();
            else if (key == "min_leaf") g.min_leafs = it->get<std::vector<int>>();
            else if (key == "max_features") {
                g.max_features.clear();
                for (const auto& v : *it) g.max_features.push_back(MaxFeatures::parse(v));
            } else {
                throw InputError("unknown grid key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed grid: ") + e.what());
    }
    g.validate();
    return g;
}

nlohmann::json HyperparameterGrid::to_json() const {
    switch (algorithm) {
        case Algorithm::ElasticNet: return {{"penalty", penalties}, {"mixing", mixings}};
        case Algorithm::SvrRbf:
            return {{"C", cs}, {"gamma", gammas}, {"tube", tubes}, {"gamma_per_column", gamma_per_column}};
        case Algorithm::RandomForest: {
            nlohmann::json mf = nlohmann::json::array();
            for (const auto& m : max_features)
                mf.push_back(m.use_sqrt ? nlohmann::json("sqrt") : nlohmann::json(m.fraction));
            return {{"n_trees", n_trees}, {"max_features", mf}, {"min_leaf", min_leafs}};
        }
    }
    return {};
}

void HyperparameterGrid::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw InputError("invalid grid: " + what);
    };
    switch (algorithm) {
        case Algorithm::ElasticNet:
            require(!penalties.empty() && !mixings.empty(), "empty elastic net list");
            for (double p : penalties) require(p > 0, "penalty must be > 0");
            for (double m : mixings) require(m >= 0 && m <= 1, "mixing must be in [0,1]");
            break;
        case Algorithm::SvrRbf:
            require(!cs.empty() && !gammas.empty() && !tubes.empty(), "empty svr list");
            for (double c : cs) require(c > 0, "C must be > 0");
            for (double g : gammas) require(g > 0, "gamma must be > 0");
            for (double t : tubes) require(t >= 0, "tube must be >= 0");
            break;
        case Algorithm::RandomForest:
            require(!n_trees.empty() && !max_features.empty() && !min_leafs.empty(), "empty forest list");
            for (int t : n_trees) require(t >= 1, "tree count must be >= 1");
            for (const auto& m : max_features)
                require(m.use_sqrt || (m.fraction > 0 && m.fraction <= 1), "max_features fraction in (0,1]");
            for (int l : min_leafs) require(l >= 1, "min_leaf must be >= 1");
            break;
    }
}

std::vector<Hyperparameters> HyperparameterGrid::points() const {
    validate();
    std::vector<Hyperparameters> out;
    switch (algorithm) {
        case Algorithm::ElasticNet: {
            std::vector<double> p = penalties;
            std::stable_sort(p.begin(), p.end(), std::greater<>());
            for (double penalty : p)
                for (double mixing : mixings) out.push_back(ElasticNetParams{penalty, mixing});
            break;
        }
        case Algorithm::SvrRbf:
            for (double c : cs)
                for (double g : gammas)
                    for (double t : tubes) out.push_back(SvrParams{c, g, t, gamma_per_column});
            break;
        case Algorithm::RandomForest:
            for (int t : n_trees)
                for (const auto& m : max_features)
                    for (int l : min_leafs) out.push_back(ForestParams{t, m, l});
            break;
    }
    return out;
}

Standardization Standardization::fit(const Eigen::MatrixXd& X) {
    Standardization s;
    const Eigen::Index n = X.rows();
    s.mean = Eigen::VectorXd::Zero(X.cols());
    s.scale = Eigen::VectorXd::Zero(X.cols());
    if (n == 0) return s;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double m = X.col(j).mean();
        const double var = (X.col(j).array() - m).square().sum() / static_cast<double>(n);
        const double sd = std::sqrt(var);
        s.mean(j) = m;
        // Relative threshold so that roundoff on a constant column is not treated as signal.
        s.scale(j) = sd > 1e-12 * std::max(1.0, std::abs(m)) ? sd : 0.0;
    }
    return s;
}

Eigen::MatrixXd Standardization::apply(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd Z(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (scale(j) == 0.0)
            Z.col(j).setZero();
        else
            Z.col(j) = (X.col(j).array() - mean(j)) / scale(j);
    }
    return Z;
}

FittedModel::FittedModel(Hyperparameters params, std::vector<std::string> columns,
                         Standardization standardization, Learned learned)
    : params_(std::move(params)),
      columns_(std::move(columns)),
      standardization_(std::move(standardization)),
      learned_(std::move(learned)) {}

FittedModel fit(const Hyperparameters& params, const Eigen::MatrixXd& X,
                const std::vector<std::string>& columns, const Eigen::VectorXd& y,
                std::uint64_t seed) {
    return std::visit(
        [&](const auto& p) -> FittedModel {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ElasticNetParams>)
                return fit_elastic_net(X, columns, y, p.penalty, p.mixing);
            else if constexpr (std::is_same_v<T, SvrParams>)
                return fit_svr_rbf(X, columns, y, p);
            else
                return fit_random_forest(X, columns, y, p, seed);
        },
        params);
}

namespace {

double rbf(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b,
           double gamma) {
    return std::exp(-gamma * (a - b).squaredNorm());
}

}  // namespace

Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& X,
                        const std::vector<std::string>& columns) {
    if (columns != model.columns()) {
        std::string msg = "column mismatch: model expects [";
        for (std::size_t i = 0; i < model.columns().size(); ++i)
            msg += (i ? "," : "") + model.columns()[i];
        msg += "], got [";
        for (std::size_t i = 0; i < columns.size(); ++i) msg += (i ? "," : "") + columns[i];
        throw InputError(msg + "]");
    }
    if (X.cols() != static_cast<Eigen::Index>(columns.size()))
        throw InputError("matrix width does not match column list");
    const Eigen::Index n = X.rows();
    Eigen::VectorXd out(n);
    if (n == 0) return out;

    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ElasticNetModel>) {
                const Eigen::MatrixXd Z = model.standardization().apply(X);
                out = (Z * m.coefficients).array() + m.intercept;
            } else if constexpr (std::is_same_v<T, SvrModel>) {
                const Eigen::MatrixXd Z = model.standardization().apply(X);
                for (Eigen::Index i = 0; i < n; ++i) {
                    double f = m.bias;
                    for (Eigen::Index s = 0; s < m.support_vectors.rows(); ++s)
                        f += m.dual_coefficients(s) * rbf(m.support_vectors.row(s), Z.row(i), m.gamma);
                    out(i) = f;
                }
            } else {
                for (Eigen::Index i = 0; i < n; ++i) {
                    double sum = 0.0;
                    for (const auto& tree : m.trees) sum += tree.predict(X.row(i));
                    out(i) = sum / static_cast<double>(m.trees.size());
                }
            }
        },
        model.learned());
    return out;
}

std::optional<FeatureImportances> feature_importances(const FittedModel& model) {
    const auto& cols = model.columns();
    Eigen::VectorXd raw = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cols.size()));
    if (const auto* en = std::get_if<ElasticNetModel>(&model.learned())) {
        raw = en->coefficients.cwiseAbs();
    } else if (const auto* forest = std::get_if<ForestModel>(&model.learned())) {
        for (const auto& tree : forest->trees) {
            if (tree.root_samples == 0) continue;
            for (const auto& node : tree.nodes)
                if (node.feature >= 0)
                    raw(node.feature) += node.sse_reduction / static_cast<double>(tree.root_samples);
        }
        raw /= static_cast<double>(std::max<std::size_t>(forest->trees.size(), 1));
    } else {
        return std::nullopt;
    }
    const double total = raw.sum();
    FeatureImportances out;
    for (std::size_t j = 0; j < cols.size(); ++j)
        out[cols[j]] = total > 0 ? raw(static_cast<Eigen::Index>(j)) / total : 0.0;
    return out;
}

nlohmann::json model_report(const FittedModel& model) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["algorithm"] = std::string(to_string(model.algorithm()));
    j["hyperparameters"] = to_json(model.params());
    j["columns"] = model.columns();
    j["standardization"] = {
        {"mean", std::vector<double>(model.standardization().mean.begin(), model.standardization().mean.end())},
        {"scale", std::vector<double>(model.standardization().scale.begin(), model.standardization().scale.end())}};
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ElasticNetModel>) {
                j["coefficients"] = std::vector<double>(m.coefficients.begin(), m.coefficients.end());
                j["intercept"] = m.intercept;
                j["sweeps"] = m.sweeps;
            } else if constexpr (std::is_same_v<T, SvrModel>) {
                j["support_indices"] = m.support_indices;
                j["dual_coefficients"] =
                    std::vector<double>(m.dual_coefficients.begin(), m.dual_coefficients.end());
                j["bias"] = m.bias;
                j["gamma"] = m.gamma;
                j["iterations"] = m.iterations;
            } else {
                nlohmann::json trees = nlohmann::json::array();
                for (const auto& t : m.trees) {
                    nlohmann::json nodes = nlohmann::json::array();
                    for (const auto& n : t.nodes)
                        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.samples});
                    trees.push_back(nodes);
                }
                j["trees"] = trees;
            }
        },
        model.learned());
    return j;
}

}  // namespace cla
