#include "hdinfer/qf.hpp"

#include "hdinfer/stats.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace hdinfer {

void QFOptions::validate(Eigen::Index p) const {
    base.validate();
    if (G.empty()) throw std::invalid_argument("qf: G must be non-empty");
    std::set<int> seen;
    for (int g : G) {
        if (g < 0 || g >= p) throw std::invalid_argument("qf: G index out of range");
        if (!seen.insert(g).second) throw std::invalid_argument("qf: G indices must be distinct");
    }
    if (A) {
        Eigen::Index m = static_cast<Eigen::Index>(G.size());
        if (A->rows() != m || A->cols() != m) {
            throw std::invalid_argument("qf: A must be |G| x |G|");
        }
        double anorm = A->cwiseAbs().maxCoeff();
        if ((*A - A->transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, anorm)) {
            throw std::invalid_argument("qf: A must be symmetric");
        }
    }
    if (tau.empty()) throw std::invalid_argument("qf: need at least one tau");
    for (double t : tau) {
        if (!(t > 0.0)) throw std::invalid_argument("qf: tau entries must be > 0");
    }
}

double qf_sigma_extra(const Eigen::MatrixXd& XG, const Eigen::VectorXd& b_left,
                      const Eigen::VectorXd& b_right, const Eigen::MatrixXd& Sigma_GG) {
    Eigen::VectorXd zl = XG * b_left;
    Eigen::VectorXd zr = XG * b_right;
    double center = b_left.dot(Sigma_GG * b_right);
    double n = static_cast<double>(XG.rows());
    double s = 0.0;
    for (Eigen::Index i = 0; i < XG.rows(); ++i) {
        double d = zl[i] * zr[i] - center;
        s += d * d;
    }
    return s / (n * n);
}

double qf_variance(const Eigen::VectorXd& u, const Eigen::MatrixXd& Xa,
                   const Eigen::VectorXd& beta, ModelKind model,
                   const Eigen::VectorXd& noise, double tau, bool sigma_case,
                   const std::vector<int>& G, const Eigen::MatrixXd& A_or_Sigma) {
    if (!(tau > 0.0)) throw std::invalid_argument("qf_variance: tau must be > 0");
    std::vector<bool> all(static_cast<std::size_t>(Xa.rows()), true);
    double v = 4.0 * variance_lf(u, Xa, beta, model, noise, 1.0, all);
    if (sigma_case) {
        Eigen::MatrixXd XG(Xa.rows(), static_cast<Eigen::Index>(G.size()));
        Eigen::VectorXd bG(static_cast<Eigen::Index>(G.size()));
        for (std::size_t k = 0; k < G.size(); ++k) {
            XG.col(static_cast<Eigen::Index>(k)) = Xa.col(G[k]);
            bG[static_cast<Eigen::Index>(k)] = beta[G[k]];
        }
        v += qf_sigma_extra(XG, bG, bG, A_or_Sigma);
    }
    v += tau / static_cast<double>(Xa.rows());
    if (!std::isfinite(v)) throw std::runtime_error("qf_variance: non-finite variance");
    return v;
}

namespace {

TauRow tau_row(double tau, double plugin, double est_trunc, double v, double rescale,
               double alpha, bool truncate_lower) {
    TauRow r;
    r.tau = tau;
    r.est_plugin = plugin;
    r.est_debias = est_trunc;
    r.std_err = rescale * std::sqrt(v);
    double zq = normal_quantile(1.0 - alpha / 2.0);
    r.ci_lower = est_trunc - zq * r.std_err;
    if (truncate_lower) r.ci_lower = std::max(r.ci_lower, 0.0);
    r.ci_upper = est_trunc + zq * r.std_err;
    r.z_value = r.std_err > 0.0 ? est_trunc / r.std_err : 0.0;
    r.p_value = r.std_err > 0.0 ? two_sided_p_value(r.z_value) : (est_trunc == 0.0 ? 1.0 : 0.0);
    return r;
}

} // namespace

QFResult qf(const Dataset& data, const QFOptions& opts, ModelKind model,
            const std::optional<Eigen::VectorXd>& beta_init) {
    data.validate(model);
    opts.validate(data.p());

    SplitPlan plan;
    const SplitPlan* plan_ptr = nullptr;
    if (opts.split && !beta_init) {
        plan = make_split(static_cast<int>(data.n()), opts.base.seed);
        plan_ptr = &plan;
    }
    PipelineParts parts = build_pipeline(data, model, opts.base, beta_init, plan_ptr);

    const int off = opts.base.fit_intercept ? 1 : 0;
    const auto m = static_cast<Eigen::Index>(opts.G.size());
    Eigen::VectorXd bG(m);
    for (Eigen::Index k = 0; k < m; ++k) bG[k] = parts.beta[opts.G[static_cast<std::size_t>(k)] + off];

    // Sigma_{G,G} from all n rows, split or not
    bool sigma_case = !opts.A.has_value();
    Eigen::MatrixXd XG_all(data.n(), m);
    for (Eigen::Index k = 0; k < m; ++k) {
        XG_all.col(k) = data.X.col(opts.G[static_cast<std::size_t>(k)]);
    }
    Eigen::MatrixXd target = sigma_case
        ? Eigen::MatrixXd((XG_all.transpose() * XG_all) / static_cast<double>(data.n()))
        : *opts.A;

    Eigen::VectorXd xg = target * bG;
    double plugin = bG.dot(xg);

    QFResult result;
    double n_eff = static_cast<double>(parts.Xa_inf.rows());
    double extra = sigma_case ? qf_sigma_extra(XG_all, bG, bG, target) : 0.0;

    double est_raw = 0.0, est = 0.0, base_var = 0.0;
    if (xg.norm() == 0.0) {
        // beta_hat_G' A vanished; the debiased estimate degenerates to the
        // (zero) plug-in and only the tau guard remains in the variance
        result.degenerate_loading = true;
        est_raw = plugin; // = 0 identically
        est = std::max(est_raw, 0.0);
    } else {
        Eigen::VectorXd xa = Eigen::VectorXd::Zero(parts.Xa_inf.cols());
        for (Eigen::Index k = 0; k < m; ++k) xa[opts.G[static_cast<std::size_t>(k)] + off] = xg[k];
        ProjectionSolver solver(parts.H);
        ProjectionDirection dir;
        if (opts.base.mu) {
            ProjectionProblem prob;
            prob.H = parts.H;
            prob.x_new = xa;
            prob.lambda = opts.base.lambda_proj.value_or(
                default_projection_lambda(parts.H, parts.n_masked, parts.p_raw));
            prob.mu = opts.base.mu;
            dir = solve_projection(prob);
        } else {
            dir = auto_tune(solver, xa, parts.n_masked, parts.p_raw, opts.base.lambda_proj);
        }
        result.mu_used = dir.mu_used;
        est_raw = plugin + 2.0 * dir.u.dot(parts.correction);
        est = std::max(est_raw, 0.0);
        base_var = 4.0 * direction_variance(parts, dir.u);
    }
    result.est_debias_raw = est_raw;

    for (double t : opts.tau) {
        double v = base_var + extra + t / n_eff;
        result.rows.push_back(tau_row(t, plugin, est, v, opts.base.rescale, opts.base.alpha,
                                      /*truncate_lower=*/true));
    }
    return result;
}

} // namespace hdinfer
