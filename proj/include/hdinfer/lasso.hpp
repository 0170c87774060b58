#pragma once

#include "hdinfer/model.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace hdinfer {

/// Initial penalized estimate. beta_hat is (intercept, slopes) when the
/// intercept is fitted, otherwise just the slopes. The penalty applied to
/// slope j is lambda0 * ||X_.j||_2 / sqrt(n); the intercept is never
/// penalized.
struct PenalizedFit {
    Eigen::VectorXd beta_hat;
    double lambda0 = 0.0;
    bool intercept_fitted = true;
    double objective_value = 0.0;
    int n_iter = 0;
    std::vector<double> objective_trace; // one entry per sweep when requested
};

struct SplitPlan {
    std::vector<int> fit_indices;
    std::vector<int> infer_indices;
    std::uint64_t seed = 0;
};

struct LassoOptions {
    double tol = 1e-7;      // max coordinate change
    int max_iter = 100000;  // coordinate-descent sweeps
    bool record_trace = false;
};

struct NonConvergenceError : std::runtime_error {
    NonConvergenceError(const std::string& msg, PenalizedFit last_iterate)
        : std::runtime_error(msg), last(std::move(last_iterate)) {}
    PenalizedFit last;
};

struct CvDiagnostics {
    int skipped_folds = 0;
    std::vector<double> mean_losses; // aligned with the grid
};

/// Coordinate-descent solver for the column-weighted lasso. Linear loss is
/// ||y - Xb||^2 / (2n); binary models use the logistic deviance /n driven
/// by an IRLS majorization with weighted inner descent.
PenalizedFit lasso_fit(const Dataset& data, ModelKind model, double lambda0,
                       bool fit_intercept, const LassoOptions& opts = {});

/// Largest gradient violation of the stationarity conditions at fit.beta_hat:
/// |grad_j| - lambda0 w_j for inactive coordinates, |grad_j + lambda0 w_j
/// sign(beta_j)| for active ones, 0 for the intercept.
double kkt_max_violation(const Dataset& data, ModelKind model, const PenalizedFit& fit);

/// 100 log-spaced values from lambda_max (all slopes zero) down to
/// 0.01 lambda_max (0.05 when n < p), descending.
std::vector<double> default_lambda_grid(const Dataset& data, ModelKind model,
                                        bool fit_intercept);

/// K-fold CV on a descending grid with warm starts. Held-out loss is the
/// squared error for linear models and the deviance for binary ones.
/// Folds whose training part is single-class are skipped (counted in
/// diag); throws if every fold is degenerate.
double cv_select_lambda(const Dataset& data, ModelKind model, int n_folds,
                        const std::vector<double>& grid, std::uint64_t seed,
                        bool fit_intercept, CvDiagnostics* diag = nullptr);

/// ceil(n/2) fit rows, the rest for inference; deterministic in seed.
SplitPlan make_split(int n, std::uint64_t seed);

/// CV-tuned fit (or fixed lambda0 when given) on the supplied rows.
PenalizedFit fit_penalized(const Dataset& data, ModelKind model, bool fit_intercept,
                           std::optional<double> lambda0, std::uint64_t seed);

Dataset subset_rows(const Dataset& data, const std::vector<int>& rows);

} // namespace hdinfer
