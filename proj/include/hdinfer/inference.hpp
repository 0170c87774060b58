#pragma once

#include "hdinfer/lasso.hpp"
#include "hdinfer/model.hpp"
#include "hdinfer/projection.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace hdinfer {

struct LFOptions {
    double alpha = 0.05;        // CI level 1 - alpha
    double rescale = 1.1;       // standard-error inflation
    double prob_filter = 0.05;  // binary models only
    bool fit_intercept = true;
    bool include_intercept_in_loading = false;
    std::optional<double> lambda0;     // fixed penalty; CV when absent
    std::optional<double> mu;          // fixed working radius; tuned when absent
    std::optional<double> lambda_proj; // certificate radius override
    std::uint64_t seed = 1;

    void validate() const;
};

struct InferenceResult {
    double est_plugin = 0.0;
    double est_debias = 0.0;
    double std_err = 0.0; // rescale * sqrt(V_raw)
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    double z_value = 0.0;
    double p_value = 1.0;
    double mu_used = 0.0;
};

/// Everything the debiasing step needs after the initial fit: augmented
/// inference rows, filter mask, weighted Gram, the shared correction
/// vector (1/n') sum_mask w (y - f) X_i, and per-row noise levels.
struct PipelineParts {
    Eigen::VectorXd beta;
    Eigen::MatrixXd Xa_inf;
    Eigen::VectorXd y_inf;
    std::vector<bool> mask;
    Eigen::MatrixXd H;
    Eigen::VectorXd correction;
    Eigen::VectorXd noise;
    int n_masked = 0;
    int p_raw = 0;
    ModelKind model = ModelKind::Linear;
    bool fit_intercept = true;
};

/// Fits (or adopts beta_init) and precomputes the shared debiasing state.
/// When split is non-null the coefficients come from the fit half and all
/// inference sums from the other half.
PipelineParts build_pipeline(const Dataset& data, ModelKind model, const LFOptions& opts,
                             const std::optional<Eigen::VectorXd>& beta_init,
                             const SplitPlan* split = nullptr);

/// Intercept-augmented loading: leading coordinate 1 or 0 per the flag.
Eigen::VectorXd augment_loading(const Eigen::VectorXd& x_new, bool fit_intercept,
                                bool include_intercept);

/// plugin + u' (1/n') sum_mask w(eta_i)(y_i - f(eta_i)) X_i.
double debias_lf(const Eigen::MatrixXd& Xa, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& beta, const Eigen::VectorXd& u, ModelKind model,
                 const std::vector<bool>& mask, double plugin);

/// Linear: every entry the pooled (1/n)||y - X beta||^2. Binary: f(1-f)
/// per row.
Eigen::VectorXd noise_levels(const Eigen::MatrixXd& Xa, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& beta, ModelKind model);

/// rescale^2 * u' [ (1/n'^2) sum_mask w^2 sigma_i^2 X_i X_i' ] u.
double variance_lf(const Eigen::VectorXd& u, const Eigen::MatrixXd& Xa,
                   const Eigen::VectorXd& beta, ModelKind model,
                   const Eigen::VectorXd& noise, double rescale,
                   const std::vector<bool>& mask);

/// Raw (rescale-free) variance quadratic form for a direction.
double direction_variance(const PipelineParts& parts, const Eigen::VectorXd& u);

/// One-sample inference for x_new' beta, one result per loading column.
std::vector<InferenceResult> lf(const Dataset& data, const Eigen::MatrixXd& loadings,
                                ModelKind model, const LFOptions& opts = {},
                                const std::optional<Eigen::VectorXd>& beta_init = std::nullopt);

/// Case-probability interval (f applied to both CI ends); binary only.
std::pair<double, double> ci_probability(const InferenceResult& result, ModelKind model);

} // namespace hdinfer
