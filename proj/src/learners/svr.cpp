#include <cmath>
#include <limits>

#include "cla/common.hpp"
#include "cla/learners.hpp"

namespace cla {

namespace {

constexpr double kTau = 1e-12;

// Dual of epsilon-SVR in the 2n-variable form
//   min 1/2 a'Qa + p'a   s.t.  s'a = 0,  0 <= a <= C
// with s = (+1..., -1...), p = (tube - y, tube + y), Q_ij = s_i s_j K(i mod n, j mod n).
class SmoSolver {
public:
    SmoSolver(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y, double c, double tube)
        : k_(kernel), n_(kernel.rows()), c_(c) {
        const Eigen::Index l = 2 * n_;
        alpha_ = Eigen::VectorXd::Zero(l);
        sign_.resize(l);
        grad_.resize(l);
        for (Eigen::Index i = 0; i < n_; ++i) {
            sign_(i) = 1.0;
            sign_(i + n_) = -1.0;
            grad_(i) = tube - y(i);
            grad_(i + n_) = tube + y(i);
        }
    }

    /// Returns iterations used; throws ComputeError when max_iterations is hit.
    int solve(double tolerance, int max_iterations) {
        int iter = 0;
        while (true) {
            Eigen::Index i = -1, j = -1;
            if (select_working_set(tolerance, i, j)) return iter;
            if (++iter > max_iterations)
                throw ComputeError("svr solver did not converge in " + std::to_string(max_iterations) +
                                   " iterations");
            update(i, j);
        }
    }

    double rho() const {
        double ub = std::numeric_limits<double>::infinity();
        double lb = -std::numeric_limits<double>::infinity();
        double sum_free = 0.0;
        int n_free = 0;
        for (Eigen::Index t = 0; t < 2 * n_; ++t) {
            const double yg = sign_(t) * grad_(t);
            if (at_upper(t)) {
                if (sign_(t) < 0) ub = std::min(ub, yg);
                else lb = std::max(lb, yg);
            } else if (at_lower(t)) {
                if (sign_(t) > 0) ub = std::min(ub, yg);
                else lb = std::max(lb, yg);
            } else {
                ++n_free;
                sum_free += yg;
            }
        }
        return n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
    }

    Eigen::VectorXd coefficients() const { return alpha_.head(n_) - alpha_.tail(n_); }

private:
    double q(Eigen::Index a, Eigen::Index b) const { return sign_(a) * sign_(b) * k_(a % n_, b % n_); }
    double qd(Eigen::Index a) const { return k_(a % n_, a % n_); }
    bool at_upper(Eigen::Index t) const { return alpha_(t) >= c_; }
    bool at_lower(Eigen::Index t) const { return alpha_(t) <= 0.0; }

    // Second-order working set selection; true when optimal within tolerance.
    bool select_working_set(double tolerance, Eigen::Index& out_i, Eigen::Index& out_j) const {
        const Eigen::Index l = 2 * n_;
        double gmax = -std::numeric_limits<double>::infinity();
        double gmax2 = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1;
        for (Eigen::Index t = 0; t < l; ++t) {
            if (sign_(t) > 0) {
                if (!at_upper(t) && -grad_(t) >= gmax) {
                    gmax = -grad_(t);
                    i = t;
                }
            } else if (!at_lower(t) && grad_(t) >= gmax) {
                gmax = grad_(t);
                i = t;
            }
        }
        Eigen::Index j = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < l; ++t) {
            if (sign_(t) > 0) {
                if (!at_lower(t)) {
                    const double diff = gmax + grad_(t);
                    gmax2 = std::max(gmax2, grad_(t));
                    if (i >= 0 && diff > 0) {
                        double quad = qd(i) + qd(t) - 2.0 * sign_(i) * q(i, t);
                        if (quad <= 0) quad = kTau;
                        const double obj = -(diff * diff) / quad;
                        if (obj <= best) {
                            best = obj;
                            j = t;
                        }
                    }
                }
            } else if (!at_upper(t)) {
                const double diff = gmax - grad_(t);
                gmax2 = std::max(gmax2, -grad_(t));
                if (i >= 0 && diff > 0) {
                    double quad = qd(i) + qd(t) + 2.0 * sign_(i) * q(i, t);
                    if (quad <= 0) quad = kTau;
                    const double obj = -(diff * diff) / quad;
                    if (obj <= best) {
                        best = obj;
                        j = t;
                    }
                }
            }
        }
        if (gmax + gmax2 < tolerance || i < 0 || j < 0) return true;
        out_i = i;
        out_j = j;
        return false;
    }

    void update(Eigen::Index i, Eigen::Index j) {
        const double old_i = alpha_(i);
        const double old_j = alpha_(j);
        double& ai = alpha_(i);
        double& aj = alpha_(j);
        const double qij = q(i, j);
        if (sign_(i) != sign_(j)) {
            double quad = qd(i) + qd(j) + 2.0 * qij;
            if (quad <= 0) quad = kTau;
            const double delta = (-grad_(i) - grad_(j)) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0) {
                if (aj < 0) { aj = 0; ai = diff; }
            } else if (ai < 0) {
                ai = 0;
                aj = -diff;
            }
            if (diff > 0) {
                if (ai > c_) { ai = c_; aj = c_ - diff; }
            } else if (aj > c_) {
                aj = c_;
                ai = c_ + diff;
            }
        } else {
            double quad = qd(i) + qd(j) - 2.0 * qij;
            if (quad <= 0) quad = kTau;
            const double delta = (grad_(i) - grad_(j)) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > c_) {
                if (ai > c_) { ai = c_; aj = sum - c_; }
            } else if (aj < 0) {
                aj = 0;
                ai = sum;
            }
            if (sum > c_) {
                if (aj > c_) { aj = c_; ai = sum - c_; }
            } else if (ai < 0) {
                ai = 0;
                aj = sum;
            }
        }
        const double di = ai - old_i;
        const double dj = aj - old_j;
        for (Eigen::Index t = 0; t < 2 * n_; ++t) grad_(t) += q(i, t) * di + q(j, t) * dj;
    }

    const Eigen::MatrixXd& k_;
    Eigen::Index n_;
    double c_;
    Eigen::VectorXd alpha_;
    Eigen::VectorXd sign_;
    Eigen::VectorXd grad_;
};

}  // namespace

FittedModel fit_svr_rbf(const Eigen::MatrixXd& X, const std::vector<std::string>& columns,
                        const Eigen::VectorXd& y, const SvrParams& params, const SvrOptions& options) {
    if (X.rows() != y.size() || X.rows() < 2) throw InputError("svr needs >= 2 rows matching y");
    if (X.cols() != static_cast<Eigen::Index>(columns.size())) throw InputError("column list width mismatch");
    if (!(params.c > 0) || !(params.gamma > 0) || !(params.tube >= 0)) throw InputError("invalid svr parameters");
    if (!X.allFinite() || !y.allFinite()) throw ComputeError("non-finite input to learner");

    Standardization stats = Standardization::fit(X);
    const Eigen::MatrixXd Z = stats.apply(X);
    const double gamma = params.effective_gamma(static_cast<std::size_t>(X.cols()));
    const Eigen::Index n = Z.rows();

    Eigen::MatrixXd kernel(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        kernel(a, a) = 1.0;
        for (Eigen::Index b = a + 1; b < n; ++b) {
            const double v = std::exp(-gamma * (Z.row(a) - Z.row(b)).squaredNorm());
            kernel(a, b) = v;
            kernel(b, a) = v;
        }
    }

    SmoSolver solver(kernel, y, params.c, params.tube);
    SvrModel model;
    model.iterations = solver.solve(options.tolerance, options.max_iterations);
    model.gamma = gamma;
    model.bias = -solver.rho();
    const Eigen::VectorXd coef = solver.coefficients();
    for (Eigen::Index i = 0; i < n; ++i)
        if (coef(i) != 0.0) model.support_indices.push_back(i);
    const auto n_sv = static_cast<Eigen::Index>(model.support_indices.size());
    model.support_vectors.resize(n_sv, Z.cols());
    model.dual_coefficients.resize(n_sv);
    for (Eigen::Index s = 0; s < n_sv; ++s) {
        model.support_vectors.row(s) = Z.row(model.support_indices[static_cast<std::size_t>(s)]);
        model.dual_coefficients(s) = coef(model.support_indices[static_cast<std::size_t>(s)]);
    }
    return FittedModel(params, columns, std::move(stats), std::move(model));
}

}  // namespace cla
