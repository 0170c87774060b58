#include "hdinfer/lasso.hpp"

#include "hdinfer/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hdinfer {

namespace {

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

// Design with optional leading ones column and per-column penalty weights
// ||X_.j||_2 / sqrt(n) (0 marks an unpenalized or all-zero column).
struct Workspace {
    Eigen::MatrixXd Xa;          // n x m
    Eigen::VectorXd col_sq;      // X_.j' X_.j
    Eigen::VectorXd pen_weight;  // per column, 0 for the intercept
    std::vector<bool> dead;      // all-zero columns, coefficient pinned at 0
    bool intercept = false;
    Eigen::Index n = 0, m = 0;
};

Workspace make_workspace(const Dataset& data, bool fit_intercept) {
    Workspace w;
    w.intercept = fit_intercept;
    w.Xa = fit_intercept ? augment_intercept(data.X) : data.X;
    w.n = w.Xa.rows();
    w.m = w.Xa.cols();
    w.col_sq = w.Xa.colwise().squaredNorm();
    w.pen_weight.resize(w.m);
    w.dead.assign(static_cast<std::size_t>(w.m), false);
    double sqrt_n = std::sqrt(static_cast<double>(w.n));
    for (Eigen::Index j = 0; j < w.m; ++j) {
        bool unpenalized = fit_intercept && j == 0;
        w.pen_weight[j] = unpenalized ? 0.0 : std::sqrt(w.col_sq[j]) / sqrt_n;
        if (w.col_sq[j] == 0.0) w.dead[static_cast<std::size_t>(j)] = true;
    }
    return w;
}

double linear_objective(const Workspace& w, const Eigen::VectorXd& resid,
                        const Eigen::VectorXd& beta, double lambda0) {
    double loss = resid.squaredNorm() / (2.0 * static_cast<double>(w.n));
    double pen = 0.0;
    for (Eigen::Index j = 0; j < w.m; ++j) pen += w.pen_weight[j] * std::fabs(beta[j]);
    return loss + lambda0 * pen;
}

// log(1 + e^eta) - y*eta, stably
inline double logistic_loss_term(double eta, double y) {
    double m = std::max(eta, 0.0);
    return m + std::log1p(std::exp(-std::fabs(eta))) - y * eta;
}

double logistic_objective(const Workspace& w, const Eigen::VectorXd& eta,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                          double lambda0) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < w.n; ++i) loss += logistic_loss_term(eta[i], y[i]);
    loss /= static_cast<double>(w.n);
    double pen = 0.0;
    for (Eigen::Index j = 0; j < w.m; ++j) pen += w.pen_weight[j] * std::fabs(beta[j]);
    return loss + lambda0 * pen;
}

// One cyclic pass; resid tracks y - Xa*beta. Returns max coordinate change.
double linear_sweep(const Workspace& w, double lambda0, Eigen::VectorXd& beta,
                    Eigen::VectorXd& resid, const std::vector<int>& order) {
    double max_delta = 0.0;
    double n = static_cast<double>(w.n);
    for (int j : order) {
        if (w.dead[static_cast<std::size_t>(j)]) continue;
        double bj = beta[j];
        double rho = w.Xa.col(j).dot(resid) / n + w.col_sq[j] / n * bj;
        double bn = soft_threshold(rho, lambda0 * w.pen_weight[j]) / (w.col_sq[j] / n);
        if (bn != bj) {
            resid -= w.Xa.col(j) * (bn - bj);
            beta[j] = bn;
            max_delta = std::max(max_delta, std::fabs(bn - bj));
        }
    }
    return max_delta;
}

// Weighted pass for the IRLS subproblem: resid tracks z - Xa*beta; wx and
// wcol_sq carry the observation weights.
double weighted_sweep(const Workspace& w, double lambda0, const Eigen::MatrixXd& wx,
                      const Eigen::VectorXd& wcol_sq, Eigen::VectorXd& beta,
                      Eigen::VectorXd& resid, const std::vector<int>& order) {
    double max_delta = 0.0;
    double n = static_cast<double>(w.n);
    for (int j : order) {
        if (w.dead[static_cast<std::size_t>(j)] || wcol_sq[j] == 0.0) continue;
        double bj = beta[j];
        double rho = wx.col(j).dot(resid) / n + wcol_sq[j] / n * bj;
        double bn = soft_threshold(rho, lambda0 * w.pen_weight[j]) / (wcol_sq[j] / n);
        if (bn != bj) {
            resid -= w.Xa.col(j) * (bn - bj);
            beta[j] = bn;
            max_delta = std::max(max_delta, std::fabs(bn - bj));
        }
    }
    return max_delta;
}

std::vector<int> full_order(Eigen::Index m) {
    std::vector<int> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    return order;
}

PenalizedFit fit_linear(const Workspace& w, const Eigen::VectorXd& y, double lambda0,
                        const LassoOptions& opts, Eigen::VectorXd beta0) {
    Eigen::VectorXd beta = std::move(beta0);
    Eigen::VectorXd resid = y - w.Xa * beta;
    PenalizedFit fit;
    fit.lambda0 = lambda0;
    fit.intercept_fitted = w.intercept;
    auto order = full_order(w.m);

    std::vector<int> active;
    int sweeps = 0;
    bool converged = false;
    while (sweeps < opts.max_iter) {
        // full pass, then iterate the active set until stable
        double delta = linear_sweep(w, lambda0, beta, resid, order);
        ++sweeps;
        if (opts.record_trace) fit.objective_trace.push_back(linear_objective(w, resid, beta, lambda0));
        if (delta < opts.tol) { converged = true; break; }
        active.clear();
        for (Eigen::Index j = 0; j < w.m; ++j)
            if (beta[j] != 0.0) active.push_back(static_cast<int>(j));
        while (sweeps < opts.max_iter) {
            double d = linear_sweep(w, lambda0, beta, resid, active);
            ++sweeps;
            if (opts.record_trace) fit.objective_trace.push_back(linear_objective(w, resid, beta, lambda0));
            if (d < opts.tol) break;
        }
    }
    fit.beta_hat = beta;
    fit.n_iter = sweeps;
    fit.objective_value = linear_objective(w, resid, beta, lambda0);
    if (!converged && sweeps >= opts.max_iter) {
        throw NonConvergenceError("lasso_fit: linear coordinate descent hit max_iter", fit);
    }
    return fit;
}

PenalizedFit fit_logistic(const Workspace& w, const Eigen::VectorXd& y, double lambda0,
                          const LassoOptions& opts, Eigen::VectorXd beta0) {
    Eigen::VectorXd beta = std::move(beta0);
    Eigen::VectorXd eta = w.Xa * beta;
    PenalizedFit fit;
    fit.lambda0 = lambda0;
    fit.intercept_fitted = w.intercept;
    auto order = full_order(w.m);

    const double wt_floor = 1e-5;
    const int max_outer = 100;
    int sweeps = 0;
    bool converged = false;
    Eigen::VectorXd wt(w.n), z(w.n);
    Eigen::MatrixXd wx;
    Eigen::VectorXd wcol_sq;
    for (int outer = 0; outer < max_outer; ++outer) {
        for (Eigen::Index i = 0; i < w.n; ++i) {
            double f = link_value(ModelKind::Logistic, eta[i]);
            double d = std::max(f * (1.0 - f), wt_floor);
            wt[i] = d;
            z[i] = eta[i] + (y[i] - f) / d;
        }
        wx = w.Xa.array().colwise() * wt.array();
        wcol_sq = (w.Xa.array() * wx.array()).colwise().sum();

        Eigen::VectorXd beta_outer = beta;
        Eigen::VectorXd resid = z - w.Xa * beta;
        // inner weighted descent to tolerance
        int inner_guard = 0;
        while (sweeps < opts.max_iter && inner_guard < 1000) {
            double d = weighted_sweep(w, lambda0, wx, wcol_sq, beta, resid, order);
            ++sweeps;
            ++inner_guard;
            if (opts.record_trace)
                fit.objective_trace.push_back(logistic_objective(w, w.Xa * beta, y, beta, lambda0));
            if (d < opts.tol) break;
        }
        eta = w.Xa * beta;
        double outer_delta = (beta - beta_outer).cwiseAbs().maxCoeff();
        if (outer_delta < opts.tol) { converged = true; break; }
        if (sweeps >= opts.max_iter) break;
    }
    fit.beta_hat = beta;
    fit.n_iter = sweeps;
    fit.objective_value = logistic_objective(w, eta, y, beta, lambda0);
    if (!converged) {
        throw NonConvergenceError("lasso_fit: logistic IRLS hit the iteration cap", fit);
    }
    return fit;
}

Eigen::VectorXd gradient(const Workspace& w, ModelKind model, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& beta) {
    Eigen::VectorXd eta = w.Xa * beta;
    Eigen::VectorXd r(w.n);
    if (model == ModelKind::Linear) {
        r = y - eta;
    } else {
        for (Eigen::Index i = 0; i < w.n; ++i) r[i] = y[i] - link_value(model, eta[i]);
    }
    return -(w.Xa.transpose() * r) / static_cast<double>(w.n);
}

} // namespace

PenalizedFit lasso_fit(const Dataset& data, ModelKind model, double lambda0,
                       bool fit_intercept, const LassoOptions& opts) {
    data.validate(model);
    if (lambda0 < 0.0) throw std::invalid_argument("lasso_fit: lambda0 must be >= 0");
    Workspace w = make_workspace(data, fit_intercept);
    Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(w.m);
    if (model == ModelKind::Linear) return fit_linear(w, data.y, lambda0, opts, std::move(beta0));
    return fit_logistic(w, data.y, lambda0, opts, std::move(beta0));
}

double kkt_max_violation(const Dataset& data, ModelKind model, const PenalizedFit& fit) {
    Workspace w = make_workspace(data, fit.intercept_fitted);
    Eigen::VectorXd g = gradient(w, model, data.y, fit.beta_hat);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < w.m; ++j) {
        if (w.dead[static_cast<std::size_t>(j)]) continue;
        double lw = fit.lambda0 * w.pen_weight[j];
        double v;
        if (w.pen_weight[j] == 0.0) {
            v = std::fabs(g[j]); // unpenalized: plain stationarity
        } else if (fit.beta_hat[j] == 0.0) {
            v = std::max(0.0, std::fabs(g[j]) - lw);
        } else {
            v = std::fabs(g[j] + lw * (fit.beta_hat[j] > 0 ? 1.0 : -1.0));
        }
        worst = std::max(worst, v);
    }
    return worst;
}

std::vector<double> default_lambda_grid(const Dataset& data, ModelKind model,
                                        bool fit_intercept) {
    data.validate(model);
    Workspace w = make_workspace(data, fit_intercept);
    // slope-free baseline: intercept absorbs the mean for linear /
    // log-odds for logistic
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(w.m);
    if (fit_intercept) {
        double ybar = data.y.mean();
        if (model == ModelKind::Linear) {
            beta[0] = ybar;
        } else {
            double pb = std::min(std::max(ybar, 1e-6), 1.0 - 1e-6);
            beta[0] = std::log(pb / (1.0 - pb));
        }
    }
    Eigen::VectorXd g = gradient(w, model, data.y, beta);
    double lam_max = 0.0;
    for (Eigen::Index j = 0; j < w.m; ++j) {
        if (w.pen_weight[j] > 0.0) lam_max = std::max(lam_max, std::fabs(g[j]) / w.pen_weight[j]);
    }
    lam_max = std::max(lam_max, 1e-12);
    double ratio = data.n() < data.p() ? 0.05 : 0.01;
    const int npts = 100;
    std::vector<double> grid(npts);
    double lmax = std::log(lam_max), lmin = std::log(lam_max * ratio);
    for (int k = 0; k < npts; ++k) {
        grid[static_cast<std::size_t>(k)] = std::exp(lmax + (lmin - lmax) * k / (npts - 1));
    }
    return grid;
}

namespace {

// Warm-started path fit on the provided rows; fills per-lambda held-out
// losses for the complement rows.
void path_heldout_losses(const Dataset& train, const Dataset& heldout, ModelKind model,
                         bool fit_intercept, const std::vector<double>& grid,
                         std::vector<double>& losses) {
    Workspace w = make_workspace(train, fit_intercept);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(w.m);
    LassoOptions opts;
    opts.tol = 1e-6; // path fits feed only the CV curve
    opts.max_iter = 20000;
    Eigen::MatrixXd Hx = fit_intercept ? augment_intercept(heldout.X) : heldout.X;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        double lambda0 = grid[k];
        PenalizedFit f;
        if (model == ModelKind::Linear) {
            f = fit_linear(w, train.y, lambda0, opts, beta);
        } else {
            f = fit_logistic(w, train.y, lambda0, opts, beta);
        }
        beta = f.beta_hat; // warm start for the next grid point
        Eigen::VectorXd eta = Hx * beta;
        double loss = 0.0;
        if (model == ModelKind::Linear) {
            loss = (heldout.y - eta).squaredNorm() / static_cast<double>(heldout.y.size());
        } else {
            for (Eigen::Index i = 0; i < eta.size(); ++i) {
                loss += 2.0 * logistic_loss_term(eta[i], heldout.y[i]);
            }
            loss /= static_cast<double>(eta.size());
        }
        losses[k] += loss;
    }
}

} // namespace

double cv_select_lambda(const Dataset& data, ModelKind model, int n_folds,
                        const std::vector<double>& grid, std::uint64_t seed,
                        bool fit_intercept, CvDiagnostics* diag) {
    data.validate(model);
    if (n_folds < 2 || n_folds > data.n()) {
        throw std::invalid_argument("cv_select_lambda: n_folds out of [2, n]");
    }
    if (grid.empty()) throw std::invalid_argument("cv_select_lambda: empty grid");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid[k] <= 0.0) throw std::invalid_argument("cv_select_lambda: grid must be positive");
        if (k > 0 && grid[k] >= grid[k - 1]) {
            throw std::invalid_argument("cv_select_lambda: grid must be strictly descending");
        }
    }
    int n = static_cast<int>(data.n());
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng::substream(seed, 0xF01D);
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }

    std::vector<double> losses(grid.size(), 0.0);
    int used_folds = 0, skipped = 0;
    for (int f = 0; f < n_folds; ++f) {
        std::vector<int> hold, train;
        for (int i = 0; i < n; ++i) {
            (i % n_folds == f ? hold : train).push_back(idx[static_cast<std::size_t>(i)]);
        }
        Dataset tr = subset_rows(data, train);
        Dataset ho = subset_rows(data, hold);
        if (is_binary(model)) {
            double s = tr.y.sum();
            if (s == 0.0 || s == static_cast<double>(tr.y.size())) {
                ++skipped;
                continue; // single-class training fold
            }
        }
        path_heldout_losses(tr, ho, model, fit_intercept, grid, losses);
        ++used_folds;
    }
    if (used_folds == 0) {
        throw std::runtime_error("cv_select_lambda: every fold was degenerate");
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (losses[k] < losses[best]) best = k;
    }
    if (diag) {
        diag->skipped_folds = skipped;
        diag->mean_losses.resize(grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k) {
            diag->mean_losses[k] = losses[k] / used_folds;
        }
    }
    return grid[best];
}

SplitPlan make_split(int n, std::uint64_t seed) {
    if (n < 4) throw std::invalid_argument("make_split: need n >= 4");
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng::substream(seed, 0x5F17);
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    SplitPlan plan;
    plan.seed = seed;
    int n_fit = (n + 1) / 2;
    plan.fit_indices.assign(idx.begin(), idx.begin() + n_fit);
    plan.infer_indices.assign(idx.begin() + n_fit, idx.end());
    std::sort(plan.fit_indices.begin(), plan.fit_indices.end());
    std::sort(plan.infer_indices.begin(), plan.infer_indices.end());
    return plan;
}

PenalizedFit fit_penalized(const Dataset& data, ModelKind model, bool fit_intercept,
                           std::optional<double> lambda0, std::uint64_t seed) {
    double lam;
    if (lambda0.has_value()) {
        lam = *lambda0;
    } else {
        auto grid = default_lambda_grid(data, model, fit_intercept);
        lam = cv_select_lambda(data, model, 10, grid, seed, fit_intercept);
    }
    return lasso_fit(data, model, lam, fit_intercept);
}

Dataset subset_rows(const Dataset& data, const std::vector<int>& rows) {
    Dataset out;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), data.X.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out.X.row(static_cast<Eigen::Index>(k)) = data.X.row(rows[k]);
        out.y[static_cast<Eigen::Index>(k)] = data.y[rows[k]];
    }
    return out;
}

} // namespace hdinfer
