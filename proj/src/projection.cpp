#include "hdinfer/projection.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace hdinfer {

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                              ModelKind model, const std::vector<bool>& mask) {
    if (X.cols() != beta.size()) {
        throw std::invalid_argument("weighted_gram: dimension mismatch");
    }
    if (mask.size() != static_cast<std::size_t>(X.rows())) {
        throw std::invalid_argument("weighted_gram: mask length mismatch");
    }
    Eigen::Index p = X.cols();
    Eigen::VectorXd eta = X * beta;
    // w * f' is 1 for Linear and Logistic; only LogisticAlter reweights rows
    bool plain = (model != ModelKind::LogisticAlter);
    Eigen::Index kept = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (mask[static_cast<std::size_t>(i)]) ++kept;
    }
    if (kept == 0) throw std::invalid_argument("weighted_gram: empty mask");
    Eigen::MatrixXd S(kept, p);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        double c = plain ? 1.0 : weight(model, eta[i]) * link_derivative(model, eta[i]);
        S.row(k++) = X.row(i) * std::sqrt(c);
    }
    return Eigen::MatrixXd(S.transpose() * S) / static_cast<double>(kept);
}

std::pair<double, double> projection_residuals(const Eigen::MatrixXd& H,
                                               const Eigen::VectorXd& u,
                                               const Eigen::VectorXd& x) {
    Eigen::VectorXd hu = H * u;
    double res_inf = (hu - x).cwiseAbs().maxCoeff();
    double gap = std::fabs(x.dot(hu) - x.squaredNorm());
    return {res_inf, gap};
}

namespace {

// Exact Euclidean projection of r0 onto {||r||_inf <= c1} ∩ {|x'r| <= c2}:
// clip, then bisect the slab multiplier if needed (the KKT point is
// clip(r0 - theta x) with a scalar theta).
Eigen::VectorXd project_box_slab(const Eigen::VectorXd& r0, const Eigen::VectorXd& x,
                                 double c1, double c2) {
    Eigen::VectorXd r = r0.cwiseMax(-c1).cwiseMin(c1);
    double v = x.dot(r);
    if (std::fabs(v) <= c2) return r;
    double sgn = v > 0.0 ? 1.0 : -1.0;
    double target = sgn * c2;
    auto g = [&](double th) {
        return x.dot((r0 - (sgn * th) * x).cwiseMax(-c1).cwiseMin(c1));
    };
    double lo = 0.0, hi = 1.0;
    while (sgn * (g(hi) - target) > 0.0 && hi < 1e14) hi *= 2.0;
    for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        if (sgn * (g(mid) - target) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    double th = 0.5 * (lo + hi);
    return (r0 - (sgn * th) * x).cwiseMax(-c1).cwiseMin(c1);
}

} // namespace

ProjectionSolver::ProjectionSolver(Eigen::MatrixXd H) : H_(std::move(H)) {
    if (H_.rows() != H_.cols()) throw std::invalid_argument("projection: H must be square");
    double hnorm = H_.cwiseAbs().maxCoeff();
    double asym = (H_ - H_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * std::max(1.0, hnorm)) {
        throw std::invalid_argument("projection: H is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H_);
    Q_ = es.eigenvectors();
    eigs_ = es.eigenvalues();
    double top = std::max(eigs_.cwiseAbs().maxCoeff(), 1e-300);
    psd_ok_ = eigs_.minCoeff() >= -1e-8 * top;
    scale_ = std::max(H_.diagonal().cwiseAbs().mean(), 1e-12);
}

std::optional<Eigen::VectorXd> ProjectionSolver::solve_at_radius(const Eigen::VectorXd& x,
                                                                 double radius,
                                                                 State* warm) const {
    const Eigen::Index p = H_.rows();
    if (x.size() != p) throw std::invalid_argument("projection: loading dimension mismatch");
    const double nx = x.norm();
    const double c1 = nx * radius;
    const double c2 = nx * nx * radius;
    const double tol_p = 1e-8 * std::max(1.0, nx);
    const double tol_d = 1e-8 * std::max(1.0, scale_);
    const int max_iter = 5000;

    Eigen::VectorXd lam = eigs_.cwiseMax(0.0); // PSD part drives the u-step
    double rho = 2.0 / scale_;
    auto inv_diag = [&](double r) {
        double eps = 1e-9 * scale_ * (1.0 + r * scale_);
        return (2.0 * lam.array() + r * lam.array().square() + eps).inverse().matrix().eval();
    };
    Eigen::VectorXd minv = inv_diag(rho);

    Eigen::VectorXd u, r, w;
    if (warm && warm->u.size() == p) {
        u = warm->u;
        r = warm->r;
        w = warm->w;
    } else {
        u = Eigen::VectorXd::Zero(p);
        w = Eigen::VectorXd::Zero(p);
        r = project_box_slab(-x, x, c1, c2);
    }

    double prev_prim = std::numeric_limits<double>::infinity();
    bool ok = false;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd rhs = rho * (H_ * (r + x - w));
        u = Q_ * (minv.asDiagonal() * (Q_.transpose() * rhs));
        Eigen::VectorXd hu = H_ * u;
        Eigen::VectorXd r_new = project_box_slab(hu - x + w, x, c1, c2);
        double dual = rho * (H_ * (r_new - r)).cwiseAbs().maxCoeff();
        r = r_new;
        Eigen::VectorXd prim_v = hu - r - x;
        w += prim_v;
        double prim = prim_v.cwiseAbs().maxCoeff();
        if (prim < tol_p && dual < tol_d) {
            ok = true;
            break;
        }
        if (it % 300 == 299) {
            // no meaningful progress on the consensus gap: the radius is
            // (numerically) empty
            if (prim > 0.995 * prev_prim && prim > 50.0 * tol_p) break;
            prev_prim = prim;
        }
        if (it % 100 == 99) {
            if (prim > 10.0 * dual && rho < 1e8 / scale_) {
                rho *= 2.0;
                w /= 2.0;
                minv = inv_diag(rho);
            } else if (dual > 10.0 * prim && rho > 1e-8 / scale_) {
                rho /= 2.0;
                w *= 2.0;
                minv = inv_diag(rho);
            }
        }
    }
    if (!ok) return std::nullopt;
    if (warm) {
        warm->u = u;
        warm->r = r;
        warm->w = w;
    }
    return u;
}

double default_projection_lambda(const Eigen::MatrixXd& H, int n_rate, int p_rate) {
    double scale = std::max(H.diagonal().cwiseAbs().mean(), 1e-12);
    double rate = std::sqrt(std::log(std::max(p_rate, 2)) / static_cast<double>(n_rate));
    return 0.5 * rate * std::max(1.0, scale);
}

namespace {

ProjectionDirection make_direction(const Eigen::MatrixXd& H, const Eigen::VectorXd& u,
                                   const Eigen::VectorXd& x, double lambda, double mu_used) {
    ProjectionDirection d;
    d.u = u;
    auto [res_inf, gap] = projection_residuals(H, u, x);
    d.constraint_infnorm = res_inf;
    d.alignment_gap = gap;
    d.objective = u.dot(H * u);
    d.mu_used = mu_used;
    const double ctol = 1e-6;
    double nx = x.norm();
    d.feasible = res_inf <= nx * lambda * (1.0 + ctol) && gap <= nx * nx * lambda * (1.0 + ctol);
    return d;
}

} // namespace

ProjectionDirection solve_projection(const ProjectionProblem& problem) {
    Loading{problem.x_new, false}.validate();
    if (!(problem.lambda > 0.0)) throw std::invalid_argument("projection: lambda must be > 0");
    ProjectionSolver solver(problem.H);
    if (!solver.psd_ok()) {
        throw SolveError("projection: H has eigenvalue " +
                         std::to_string(solver.min_eigenvalue()) + " below the PSD tolerance");
    }
    double radius = problem.mu.value_or(problem.lambda);
    auto u = solver.solve_at_radius(problem.x_new, radius);
    if (!u) {
        throw SolveError("projection: constraint set empty at radius " + std::to_string(radius));
    }
    ProjectionDirection d = make_direction(problem.H, *u, problem.x_new, problem.lambda, radius);
    if (!d.feasible) {
        std::ostringstream msg;
        msg << "projection: solution at radius " << radius
            << " violates the lambda certificate (res_inf=" << d.constraint_infnorm
            << ", gap=" << d.alignment_gap << ", lambda=" << problem.lambda << ")";
        throw SolveError(msg.str(), d);
    }
    return d;
}

ProjectionDirection auto_tune(const ProjectionSolver& solver, const Eigen::VectorXd& x,
                              int n_rate, int p_rate, std::optional<double> lambda_override) {
    Loading{x, false}.validate();
    if (!solver.psd_ok()) {
        throw SolveError("projection: H has eigenvalue " +
                         std::to_string(solver.min_eigenvalue()) + " below the PSD tolerance");
    }
    double lambda = lambda_override.value_or(
        default_projection_lambda(solver.H(), n_rate, p_rate));
    double mu0 = std::sqrt(std::log(std::max(p_rate, 2)) / static_cast<double>(n_rate));
    const int max_steps = 12;
    std::optional<ProjectionDirection> best;
    ProjectionSolver::State warm;
    std::ostringstream trace;
    for (int k = 0; k < max_steps; ++k) {
        double mu = mu0 / std::pow(2.0, k);
        auto u = solver.solve_at_radius(x, mu, &warm);
        if (!u) {
            trace << "mu=" << mu << ": empty; ";
            break; // radii below an empty one are empty too
        }
        ProjectionDirection d = make_direction(solver.H(), *u, x, lambda, mu);
        trace << "mu=" << mu << ": res_inf=" << d.constraint_infnorm
              << " gap=" << d.alignment_gap << (d.feasible ? " (accepted); " : "; ");
        if (d.feasible) best = std::move(d);
    }
    if (!best) {
        throw SolveError("projection: no feasible radius on the tuning grid [" + trace.str() +
                         "lambda=" + std::to_string(lambda) + "]");
    }
    return *best;
}

} // namespace hdinfer
