#include <cmath>

#include "cla/common.hpp"
#include "cla/learners.hpp"

namespace cla {

namespace {

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

void require_finite(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (!X.allFinite() || !y.allFinite()) throw ComputeError("non-finite input to learner");
}

}  // namespace

FittedModel fit_elastic_net(const Eigen::MatrixXd& X, const std::vector<std::string>& columns,
                            const Eigen::VectorXd& y, double penalty, double mixing,
                            const ElasticNetOptions& options) {
    if (X.rows() != y.size() || X.rows() < 2) throw InputError("elastic net needs >= 2 rows matching y");
    if (X.cols() != static_cast<Eigen::Index>(columns.size())) throw InputError("column list width mismatch");
    if (!(penalty >= 0) || !(mixing >= 0 && mixing <= 1)) throw InputError("invalid elastic net parameters");
    require_finite(X, y);

    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const double nd = static_cast<double>(n);
    Standardization stats = Standardization::fit(X);
    const Eigen::MatrixXd Z = stats.apply(X);
    const double y_mean = y.mean();
    const Eigen::VectorXd yc = y.array() - y_mean;

    const double l1 = penalty * mixing;
    const double l2 = penalty * (1.0 - mixing);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd col_sq(p);
    for (Eigen::Index j = 0; j < p; ++j) col_sq(j) = Z.col(j).squaredNorm() / nd;

    ElasticNetModel model;
    auto objective = [&](const Eigen::VectorXd& r) {
        return r.squaredNorm() / (2.0 * nd) + l1 * beta.lpNorm<1>() + 0.5 * l2 * beta.squaredNorm();
    };

    // Covariance updates when p <= n, residual updates otherwise.
    const bool use_gram = p <= n;
    Eigen::MatrixXd gram;
    Eigen::VectorXd corr;      // Z'y / n
    Eigen::VectorXd gram_beta;  // G beta
    Eigen::VectorXd resid;
    if (use_gram) {
        gram = Z.transpose() * Z / nd;
        corr = Z.transpose() * yc / nd;
        gram_beta = Eigen::VectorXd::Zero(p);
    } else {
        resid = yc;
    }
    if (options.record_objective) model.objective_trace.push_back(objective(yc));

    bool converged = p == 0;
    int sweep = 0;
    while (!converged && sweep < options.max_sweeps) {
        ++sweep;
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (stats.scale(j) == 0.0) continue;  // frozen at 0
            const double old = beta(j);
            double rho;
            if (use_gram)
                rho = corr(j) - gram_beta(j) + col_sq(j) * old;
            else
                rho = Z.col(j).dot(resid) / nd + col_sq(j) * old;
            const double updated = soft_threshold(rho, l1) / (col_sq(j) + l2);
            const double delta = updated - old;
            if (delta != 0.0) {
                beta(j) = updated;
                if (use_gram)
                    gram_beta += delta * gram.col(j);
                else
                    resid -= delta * Z.col(j);
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        if (options.record_objective) {
            const Eigen::VectorXd r = yc - Z * beta;
            model.objective_trace.push_back(objective(r));
        }
        if (max_change < options.tolerance) converged = true;
    }
    if (!converged)
        throw ComputeError("elastic net did not converge in " + std::to_string(options.max_sweeps) + " sweeps");

    model.coefficients = std::move(beta);
    model.intercept = y_mean;
    model.sweeps = sweep;
    return FittedModel(ElasticNetParams{penalty, mixing}, columns, std::move(stats), std::move(model));
}

}  // namespace cla
