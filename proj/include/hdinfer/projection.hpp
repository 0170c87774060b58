#pragma once

#include "hdinfer/model.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hdinfer {

/// min u'Hu  s.t.  ||Hu - x||_inf <= ||x||_2 L   and
///                 |x'Hu - ||x||_2^2| <= ||x||_2^2 L
/// lambda is the certificate radius L; mu, when set, is the working radius
/// the solver runs at (the dual tuning parameter of the reference
/// implementations corresponds one-to-one with a primal radius).
struct ProjectionProblem {
    Eigen::MatrixXd H;
    Eigen::VectorXd x_new;
    double lambda = 0.0;
    std::optional<double> mu;
};

struct ProjectionDirection {
    Eigen::VectorXd u;
    double constraint_infnorm = 0.0; // ||Hu - x||_inf
    double alignment_gap = 0.0;      // |x'Hu - ||x||^2|
    double objective = 0.0;          // u'Hu
    double mu_used = 0.0;
    bool feasible = false;
};

struct SolveError : std::runtime_error {
    explicit SolveError(const std::string& msg) : std::runtime_error(msg) {}
    SolveError(const std::string& msg, ProjectionDirection best)
        : std::runtime_error(msg), best_effort(std::move(best)) {}
    std::optional<ProjectionDirection> best_effort;
};

/// (1/n') sum over unmasked rows of w(eta_i) f'(eta_i) X_i X_i'. Equals the
/// plain Gram of the unmasked rows for Linear and Logistic (w f' = 1).
Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                              ModelKind model, const std::vector<bool>& mask);

/// Residuals of a candidate direction, recomputed from scratch.
std::pair<double, double> projection_residuals(const Eigen::MatrixXd& H,
                                               const Eigen::VectorXd& u,
                                               const Eigen::VectorXd& x);

/// ADMM solver for the constrained quadratic program, sharing one
/// eigendecomposition of H across loadings and radius values.
class ProjectionSolver {
public:
    explicit ProjectionSolver(Eigen::MatrixXd H);

    struct State {
        Eigen::VectorXd u, r, w;
    };

    /// Solve at an explicit working radius. Returns std::nullopt when the
    /// constraint set at this radius is empty or the iteration stalls.
    std::optional<Eigen::VectorXd> solve_at_radius(const Eigen::VectorXd& x, double radius,
                                                   State* warm = nullptr) const;

    double diag_scale() const { return scale_; }
    bool psd_ok() const { return psd_ok_; }
    double min_eigenvalue() const { return eigs_.size() ? eigs_.minCoeff() : 0.0; }
    const Eigen::MatrixXd& H() const { return H_; }

private:
    Eigen::MatrixXd H_;
    Eigen::MatrixXd Q_;     // eigenvectors
    Eigen::VectorXd eigs_;  // eigenvalues
    double scale_ = 1.0;
    bool psd_ok_ = true;
};

/// Certificate radius when the caller does not override it:
/// 0.5 sqrt(log p / n) * max(1, mean |H_jj|).
double default_projection_lambda(const Eigen::MatrixXd& H, int n_rate, int p_rate);

/// Solve at problem.mu (or problem.lambda when mu is absent) and certify
/// against problem.lambda. Throws SolveError when the solve fails or the
/// certificate is violated.
ProjectionDirection solve_projection(const ProjectionProblem& problem);

/// Geometric walk over working radii mu0/2^k (mu0 = sqrt(log p / n),
/// k < 12), keeping the smallest radius whose solution passes the lambda
/// certificate; stops at the first empty radius. Throws SolveError with
/// the residual trace when no grid point is accepted.
ProjectionDirection auto_tune(const ProjectionSolver& solver, const Eigen::VectorXd& x,
                              int n_rate, int p_rate,
                              std::optional<double> lambda_override = std::nullopt);

} // namespace hdinfer
