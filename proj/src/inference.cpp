#include "hdinfer/inference.hpp"

#include "hdinfer/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace hdinfer {

void LFOptions::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("opts: alpha must be in (0,1)");
    if (!(rescale >= 1.0)) throw std::invalid_argument("opts: rescale must be >= 1");
    if (!(prob_filter >= 0.0 && prob_filter < 0.5)) {
        throw std::invalid_argument("opts: prob_filter must be in [0, 0.5)");
    }
    if (lambda0 && *lambda0 < 0.0) throw std::invalid_argument("opts: lambda must be >= 0");
    if (mu && *mu <= 0.0) throw std::invalid_argument("opts: mu must be > 0");
    if (lambda_proj && *lambda_proj <= 0.0) throw std::invalid_argument("opts: lambda_proj must be > 0");
}

PipelineParts build_pipeline(const Dataset& data, ModelKind model, const LFOptions& opts,
                             const std::optional<Eigen::VectorXd>& beta_init,
                             const SplitPlan* split) {
    opts.validate();
    data.validate(model);

    PipelineParts parts;
    parts.model = model;
    parts.fit_intercept = opts.fit_intercept;
    parts.p_raw = static_cast<int>(data.p());

    Eigen::Index dim = data.p() + (opts.fit_intercept ? 1 : 0);
    if (beta_init) {
        if (beta_init->size() != dim) {
            throw std::invalid_argument("beta_init: expected length " + std::to_string(dim));
        }
        parts.beta = *beta_init;
    } else {
        const Dataset* fit_data = &data;
        Dataset fit_subset;
        if (split) {
            fit_subset = subset_rows(data, split->fit_indices);
            fit_data = &fit_subset;
        }
        parts.beta = fit_penalized(*fit_data, model, opts.fit_intercept, opts.lambda0,
                                   opts.seed).beta_hat;
    }

    Dataset infer_subset;
    const Dataset* infer_data = &data;
    if (split && !beta_init) {
        infer_subset = subset_rows(data, split->infer_indices);
        infer_data = &infer_subset;
    }
    parts.Xa_inf = opts.fit_intercept ? augment_intercept(infer_data->X) : infer_data->X;
    parts.y_inf = infer_data->y;

    Eigen::Index n_inf = parts.Xa_inf.rows();
    if (is_binary(model)) {
        parts.mask = prob_filter_mask(parts.Xa_inf, parts.beta, model, opts.prob_filter);
    } else {
        parts.mask.assign(static_cast<std::size_t>(n_inf), true);
    }
    parts.n_masked = 0;
    for (bool b : parts.mask) parts.n_masked += b ? 1 : 0;
    if (parts.n_masked == 0) {
        throw std::runtime_error("inference: probability filter removed every observation");
    }

    parts.H = weighted_gram(parts.Xa_inf, parts.beta, model, parts.mask);
    parts.noise = noise_levels(parts.Xa_inf, parts.y_inf, parts.beta, model);

    Eigen::VectorXd eta = parts.Xa_inf * parts.beta;
    parts.correction = Eigen::VectorXd::Zero(parts.Xa_inf.cols());
    for (Eigen::Index i = 0; i < n_inf; ++i) {
        if (!parts.mask[static_cast<std::size_t>(i)]) continue;
        double w = weight(model, eta[i]);
        double resid = parts.y_inf[i] - link_value(model, eta[i]);
        parts.correction += w * resid * parts.Xa_inf.row(i).transpose();
    }
    parts.correction /= static_cast<double>(parts.n_masked);
    return parts;
}

Eigen::VectorXd augment_loading(const Eigen::VectorXd& x_new, bool fit_intercept,
                                bool include_intercept) {
    if (!fit_intercept) return x_new;
    Eigen::VectorXd xa(x_new.size() + 1);
    xa[0] = include_intercept ? 1.0 : 0.0;
    xa.tail(x_new.size()) = x_new;
    return xa;
}

double debias_lf(const Eigen::MatrixXd& Xa, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& beta, const Eigen::VectorXd& u, ModelKind model,
                 const std::vector<bool>& mask, double plugin) {
    Eigen::Index n_masked = 0;
    for (bool b : mask) n_masked += b ? 1 : 0;
    if (n_masked == 0) throw std::invalid_argument("debias_lf: empty mask");
    Eigen::VectorXd eta = Xa * beta;
    double corr = 0.0;
    for (Eigen::Index i = 0; i < Xa.rows(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        double w = weight(model, eta[i]);
        corr += w * (y[i] - link_value(model, eta[i])) * Xa.row(i).dot(u);
    }
    return plugin + corr / static_cast<double>(n_masked);
}

Eigen::VectorXd noise_levels(const Eigen::MatrixXd& Xa, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& beta, ModelKind model) {
    Eigen::Index n = Xa.rows();
    Eigen::VectorXd eta = Xa * beta;
    Eigen::VectorXd out(n);
    if (model == ModelKind::Linear) {
        double s2 = (y - eta).squaredNorm() / static_cast<double>(n);
        out.setConstant(s2);
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            double f = link_value(model, eta[i]);
            out[i] = f * (1.0 - f);
        }
    }
    return out;
}

double variance_lf(const Eigen::VectorXd& u, const Eigen::MatrixXd& Xa,
                   const Eigen::VectorXd& beta, ModelKind model,
                   const Eigen::VectorXd& noise, double rescale,
                   const std::vector<bool>& mask) {
    Eigen::Index n_masked = 0;
    for (bool b : mask) n_masked += b ? 1 : 0;
    if (n_masked == 0) throw std::invalid_argument("variance_lf: empty mask");
    Eigen::VectorXd eta = Xa * beta;
    double s = 0.0;
    for (Eigen::Index i = 0; i < Xa.rows(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        double w = weight(model, eta[i]);
        double xu = Xa.row(i).dot(u);
        s += w * w * noise[i] * xu * xu;
    }
    double v = rescale * rescale * s / (static_cast<double>(n_masked) * n_masked);
    if (!std::isfinite(v)) throw std::runtime_error("variance_lf: non-finite variance");
    return v;
}

double direction_variance(const PipelineParts& parts, const Eigen::VectorXd& u) {
    return variance_lf(u, parts.Xa_inf, parts.beta, parts.model, parts.noise, 1.0, parts.mask);
}

namespace {

InferenceResult wald_result(double plugin, double est, double v_raw, double rescale,
                            double alpha, double mu_used) {
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

std::vector<InferenceResult> lf(const Dataset& data, const Eigen::MatrixXd& loadings,
                                ModelKind model, const LFOptions& opts,
                                const std::optional<Eigen::VectorXd>& beta_init) {
    if (loadings.rows() != data.p()) {
        throw std::invalid_argument("lf: loading rows must match the covariate count");
    }
    if (loadings.cols() < 1) throw std::invalid_argument("lf: need at least one loading");

    PipelineParts parts = build_pipeline(data, model, opts, beta_init);
    ProjectionSolver solver(parts.H);

    std::vector<InferenceResult> out;
    out.reserve(static_cast<std::size_t>(loadings.cols()));
    for (Eigen::Index l = 0; l < loadings.cols(); ++l) {
        try {
            Eigen::VectorXd xa = augment_loading(loadings.col(l), opts.fit_intercept,
                                                 opts.include_intercept_in_loading);
            Loading{xa, opts.include_intercept_in_loading}.validate();
            ProjectionDirection dir;
            if (opts.mu) {
                ProjectionProblem prob;
                prob.H = parts.H;
                prob.x_new = xa;
                prob.lambda = opts.lambda_proj.value_or(
                    default_projection_lambda(parts.H, parts.n_masked, parts.p_raw));
                prob.mu = opts.mu;
                dir = solve_projection(prob);
            } else {
                dir = auto_tune(solver, xa, parts.n_masked, parts.p_raw, opts.lambda_proj);
            }
            double plugin = xa.dot(parts.beta);
            double est = plugin + dir.u.dot(parts.correction);
            double v_raw = direction_variance(parts, dir.u);
            out.push_back(wald_result(plugin, est, v_raw, opts.rescale, opts.alpha, dir.mu_used));
        } catch (const SolveError& e) {
            throw SolveError("loading column " + std::to_string(l) + ": " + e.what());
        }
    }
    return out;
}

std::pair<double, double> ci_probability(const InferenceResult& result, ModelKind model) {
    if (!is_binary(model)) {
        throw std::invalid_argument("ci_probability: defined for binary models only");
    }
    return {link_value(model, result.ci_lower), link_value(model, result.ci_upper)};
}

} // namespace hdinfer
