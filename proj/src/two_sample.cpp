#include "hdinfer/two_sample.hpp"

#include "hdinfer/rng.hpp"
#include "hdinfer/stats.hpp"

#include <cmath>

namespace hdinfer {

void TwoSampleData::validate(ModelKind model) const {
    sample1.validate(model);
    sample2.validate(model);
    if (sample1.p() != sample2.p()) {
        throw std::invalid_argument("two-sample: covariate counts differ");
    }
}

namespace {

struct SampleState {
    PipelineParts parts;
    std::optional<ProjectionSolver> solver;
};

SampleState prepare_sample(const Dataset& data, ModelKind model, const LFOptions& base,
                           const std::optional<Eigen::VectorXd>& beta_init, bool split,
                           int tag) {
    LFOptions o = base;
    o.seed = Rng::derive(base.seed, static_cast<std::uint64_t>(tag));
    SampleState st;
    try {
        SplitPlan plan;
        const SplitPlan* plan_ptr = nullptr;
        if (split && !beta_init) {
            plan = make_split(static_cast<int>(data.n()), o.seed);
            plan_ptr = &plan;
        }
        st.parts = build_pipeline(data, model, o, beta_init, plan_ptr);
        st.solver.emplace(st.parts.H);
    } catch (const SolveError& e) {
        throw SolveError("sample " + std::to_string(tag) + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::invalid_argument("sample " + std::to_string(tag) + ": " + e.what());
    }
    return st;
}

struct DirStats {
    double contribution = 0.0; // u' correction
    double variance = 0.0;     // raw quadratic form
    double mu_used = 0.0;
};

DirStats solve_direction(SampleState& st, const Eigen::VectorXd& xa, const LFOptions& opts,
                         int tag) {
    DirStats out;
    if (xa.norm() == 0.0) return out; // vanished loading: no correction, no variance
    try {
        ProjectionDirection dir;
        if (opts.mu) {
            ProjectionProblem prob;
            prob.H = st.parts.H;
            prob.x_new = xa;
            prob.lambda = opts.lambda_proj.value_or(
                default_projection_lambda(st.parts.H, st.parts.n_masked, st.parts.p_raw));
            prob.mu = opts.mu;
            dir = solve_projection(prob);
        } else {
            dir = auto_tune(*st.solver, xa, st.parts.n_masked, st.parts.p_raw, opts.lambda_proj);
        }
        out.contribution = dir.u.dot(st.parts.correction);
        out.variance = direction_variance(st.parts, dir.u);
        out.mu_used = dir.mu_used;
    } catch (const SolveError& e) {
        throw SolveError("sample " + std::to_string(tag) + ": " + e.what());
    }
    return out;
}

InferenceResult wald(double plugin, double est, double v_raw, double rescale, double alpha,
                     double mu_used) {
    InferenceResult r;
    r.est_plugin = plugin;
    r.est_debias = est;
    r.std_err = rescale * std::sqrt(v_raw);
    double zq = normal_quantile(1.0 - alpha / 2.0);
    r.ci_lower = est - zq * r.std_err;
    r.ci_upper = est + zq * r.std_err;
    r.z_value = r.std_err > 0.0 ? est / r.std_err : 0.0;
    r.p_value = r.std_err > 0.0 ? two_sided_p_value(r.z_value) : (est == 0.0 ? 1.0 : 0.0);
    r.mu_used = mu_used;
    return r;
}

} // namespace

std::vector<CateResult> cate(const TwoSampleData& ts, const Eigen::MatrixXd& loadings,
                             ModelKind model, const LFOptions& opts,
                             const std::optional<Eigen::VectorXd>& beta_init1,
                             const std::optional<Eigen::VectorXd>& beta_init2) {
    ts.validate(model);
    if (loadings.rows() != ts.sample1.p()) {
        throw std::invalid_argument("cate: loading rows must match the covariate count");
    }
    SampleState s1 = prepare_sample(ts.sample1, model, opts, beta_init1, /*split=*/false, 1);
    SampleState s2 = prepare_sample(ts.sample2, model, opts, beta_init2, /*split=*/false, 2);

    std::vector<CateResult> out;
    out.reserve(static_cast<std::size_t>(loadings.cols()));
    for (Eigen::Index l = 0; l < loadings.cols(); ++l) {
        Eigen::VectorXd xa = augment_loading(loadings.col(l), opts.fit_intercept,
                                             opts.include_intercept_in_loading);
        Loading{xa, opts.include_intercept_in_loading}.validate();
        DirStats d1 = solve_direction(s1, xa, opts, 1);
        DirStats d2 = solve_direction(s2, xa, opts, 2);
        double plug1 = xa.dot(s1.parts.beta), plug2 = xa.dot(s2.parts.beta);
        double est1 = plug1 + d1.contribution;
        double est2 = plug2 + d2.contribution;

        CateResult r;
        r.v1_raw = d1.variance;
        r.v2_raw = d2.variance;
        r.linear_scale = wald(plug2 - plug1, est2 - est1, d1.variance + d2.variance,
                              opts.rescale, opts.alpha, std::max(d1.mu_used, d2.mu_used));
        double f1 = link_value(model, est1), f2 = link_value(model, est2);
        double g1 = link_derivative(model, est1), g2 = link_derivative(model, est2);
        double v_prob = g1 * g1 * d1.variance + g2 * g2 * d2.variance;
        r.prob_scale = wald(link_value(model, plug2) - link_value(model, plug1), f2 - f1,
                            v_prob, opts.rescale, opts.alpha,
                            std::max(d1.mu_used, d2.mu_used));
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

void validate_cross(const TwoSampleData& ts, const CrossOptions& opts) {
    QFOptions q;
    q.G = opts.G;
    q.A = opts.A;
    q.tau = opts.tau;
    q.base = opts.base;
    q.validate(ts.sample1.p());
}

Eigen::MatrixXd columns_G(const Eigen::MatrixXd& X, const std::vector<int>& G) {
    Eigen::MatrixXd XG(X.rows(), static_cast<Eigen::Index>(G.size()));
    for (std::size_t k = 0; k < G.size(); ++k) {
        XG.col(static_cast<Eigen::Index>(k)) = X.col(G[k]);
    }
    return XG;
}

struct CrossSetup {
    SampleState s1, s2;
    Eigen::VectorXd bG1, bG2;
    Eigen::MatrixXd target;   // A or pooled Sigma_{G,G}
    Eigen::MatrixXd XG_pool;  // row-combined G-columns (sigma case)
    bool sigma_case = false;
    bool gram_mismatch = false;
    int off = 0;
};

CrossSetup prepare_cross(const TwoSampleData& ts, const CrossOptions& opts, ModelKind model,
                         const std::optional<Eigen::VectorXd>& beta_init1,
                         const std::optional<Eigen::VectorXd>& beta_init2) {
    ts.validate(model);
    validate_cross(ts, opts);
    CrossSetup cs;
    cs.s1 = prepare_sample(ts.sample1, model, opts.base, beta_init1, opts.split, 1);
    cs.s2 = prepare_sample(ts.sample2, model, opts.base, beta_init2, opts.split, 2);
    cs.off = opts.base.fit_intercept ? 1 : 0;
    cs.sigma_case = !opts.A.has_value();

    const auto m = static_cast<Eigen::Index>(opts.G.size());
    cs.bG1.resize(m);
    cs.bG2.resize(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        int g = opts.G[static_cast<std::size_t>(k)];
        cs.bG1[k] = cs.s1.parts.beta[g + cs.off];
        cs.bG2[k] = cs.s2.parts.beta[g + cs.off];
    }

    if (cs.sigma_case) {
        Eigen::MatrixXd XG1 = columns_G(ts.sample1.X, opts.G);
        Eigen::MatrixXd XG2 = columns_G(ts.sample2.X, opts.G);
        cs.XG_pool.resize(XG1.rows() + XG2.rows(), m);
        cs.XG_pool.topRows(XG1.rows()) = XG1;
        cs.XG_pool.bottomRows(XG2.rows()) = XG2;
        cs.target = (cs.XG_pool.transpose() * cs.XG_pool) /
                    static_cast<double>(cs.XG_pool.rows());
        Eigen::MatrixXd S1 = (XG1.transpose() * XG1) / static_cast<double>(XG1.rows());
        Eigen::MatrixXd S2 = (XG2.transpose() * XG2) / static_cast<double>(XG2.rows());
        double ref = std::max(S1.norm(), S2.norm());
        if (ref > 0.0 && (S1 - S2).norm() > 0.2 * ref) cs.gram_mismatch = true;
    } else {
        cs.target = *opts.A;
    }
    return cs;
}

Eigen::VectorXd scatter_loading(const Eigen::VectorXd& xg, const std::vector<int>& G, int off,
                                Eigen::Index dim) {
    Eigen::VectorXd xa = Eigen::VectorXd::Zero(dim);
    for (std::size_t k = 0; k < G.size(); ++k) {
        xa[G[k] + off] = xg[static_cast<Eigen::Index>(k)];
    }
    return xa;
}

std::vector<TauRow> tau_rows(const CrossOptions& opts, double plugin, double est,
                             double base_var, double extra, double n_min,
                             bool truncate_lower) {
    std::vector<TauRow> rows;
    double zq = normal_quantile(1.0 - opts.base.alpha / 2.0);
    for (double t : opts.tau) {
        double v = base_var + extra + t / n_min;
        TauRow r;
        r.tau = t;
        r.est_plugin = plugin;
        r.est_debias = est;
        r.std_err = opts.base.rescale * std::sqrt(v);
        r.ci_lower = est - zq * r.std_err;
        if (truncate_lower) r.ci_lower = std::max(r.ci_lower, 0.0);
        r.ci_upper = est + zq * r.std_err;
        r.z_value = r.std_err > 0.0 ? est / r.std_err : 0.0;
        r.p_value = r.std_err > 0.0 ? two_sided_p_value(r.z_value) : (est == 0.0 ? 1.0 : 0.0);
        rows.push_back(r);
    }
    return rows;
}

} // namespace

CrossResult inner_product(const TwoSampleData& ts, const CrossOptions& opts, ModelKind model,
                          const std::optional<Eigen::VectorXd>& beta_init1,
                          const std::optional<Eigen::VectorXd>& beta_init2) {
    CrossSetup cs = prepare_cross(ts, opts, model, beta_init1, beta_init2);
    Eigen::Index dim = cs.s1.parts.Xa_inf.cols();
    // u1 corrects sample 1 against the sample-2 coefficients and vice versa
    Eigen::VectorXd x1 = scatter_loading(cs.target * cs.bG2, opts.G, cs.off, dim);
    Eigen::VectorXd x2 = scatter_loading(cs.target * cs.bG1, opts.G, cs.off, dim);
    DirStats d1 = solve_direction(cs.s1, x1, opts.base, 1);
    DirStats d2 = solve_direction(cs.s2, x2, opts.base, 2);

    double plugin = cs.bG1.dot(cs.target * cs.bG2);
    double est = plugin + d1.contribution + d2.contribution;
    double extra = cs.sigma_case ? qf_sigma_extra(cs.XG_pool, cs.bG1, cs.bG2, cs.target) : 0.0;
    double n_min = static_cast<double>(std::min(ts.sample1.n(), ts.sample2.n()));

    CrossResult res;
    res.est_debias_raw = est;
    res.gram_mismatch = cs.gram_mismatch;
    res.v1_raw = d1.variance;
    res.v2_raw = d2.variance;
    res.sigma_extra = extra;
    res.rows = tau_rows(opts, plugin, est, d1.variance + d2.variance, extra, n_min,
                        /*truncate_lower=*/false);
    return res;
}

CrossResult distance(const TwoSampleData& ts, const CrossOptions& opts, ModelKind model,
                     const std::optional<Eigen::VectorXd>& beta_init1,
                     const std::optional<Eigen::VectorXd>& beta_init2) {
    CrossSetup cs = prepare_cross(ts, opts, model, beta_init1, beta_init2);
    Eigen::Index dim = cs.s1.parts.Xa_inf.cols();
    Eigen::VectorXd gG = cs.bG2 - cs.bG1;
    Eigen::VectorXd xg = cs.target * gG;
    Eigen::VectorXd xa = scatter_loading(xg, opts.G, cs.off, dim);
    DirStats d1 = solve_direction(cs.s1, xa, opts.base, 1);
    DirStats d2 = solve_direction(cs.s2, xa, opts.base, 2);

    double plugin = gG.dot(xg);
    double raw = plugin - 2.0 * d1.contribution + 2.0 * d2.contribution;
    double est = std::max(raw, 0.0);
    double extra = cs.sigma_case ? qf_sigma_extra(cs.XG_pool, gG, gG, cs.target) : 0.0;
    double n_min = static_cast<double>(std::min(ts.sample1.n(), ts.sample2.n()));

    CrossResult res;
    res.est_debias_raw = raw;
    res.gram_mismatch = cs.gram_mismatch;
    res.v1_raw = d1.variance;
    res.v2_raw = d2.variance;
    res.sigma_extra = extra;
    res.rows = tau_rows(opts, plugin, est, 4.0 * (d1.variance + d2.variance), extra, n_min,
                        /*truncate_lower=*/true);
    return res;
}

} // namespace hdinfer
