#pragma once

#include "hdinfer/qf.hpp"

#include <optional>
#include <vector>

namespace hdinfer {

struct TwoSampleData {
    Dataset sample1;
    Dataset sample2;

    void validate(ModelKind model) const;
};

/// Treatment-effect contrast for one loading. The linear scale targets
/// x_new'(beta2 - beta1); the probability scale targets
/// f(x_new' beta2) - f(x_new' beta1) with delta-method variance. For the
/// linear model the two coincide.
struct CateResult {
    InferenceResult linear_scale;
    InferenceResult prob_scale;
    double v1_raw = 0.0; // per-sample variance quadratic forms
    double v2_raw = 0.0;
};

std::vector<CateResult> cate(const TwoSampleData& ts, const Eigen::MatrixXd& loadings,
                             ModelKind model, const LFOptions& opts = {},
                             const std::optional<Eigen::VectorXd>& beta_init1 = std::nullopt,
                             const std::optional<Eigen::VectorXd>& beta_init2 = std::nullopt);

struct CrossOptions {
    std::vector<int> G;
    std::optional<Eigen::MatrixXd> A; // absent: pooled Sigma_{G,G}
    std::vector<double> tau = {0.25, 0.5, 1.0};
    bool split = true;
    LFOptions base;
};

struct CrossResult {
    std::vector<TauRow> rows;
    double est_debias_raw = 0.0;
    bool gram_mismatch = false; // per-sample Grams differ by > 20% (Frobenius)
    double v1_raw = 0.0;        // per-sample variance quadratic forms
    double v2_raw = 0.0;
    double sigma_extra = 0.0;   // empirical Sigma term (sigma case only)
};

/// Inference for beta1_G' A beta2_G; CI two-sided, never truncated.
CrossResult inner_product(const TwoSampleData& ts, const CrossOptions& opts, ModelKind model,
                          const std::optional<Eigen::VectorXd>& beta_init1 = std::nullopt,
                          const std::optional<Eigen::VectorXd>& beta_init2 = std::nullopt);

/// Inference for gamma_G' A gamma_G, gamma = beta2 - beta1; estimate and
/// CI lower end truncated at zero.
CrossResult distance(const TwoSampleData& ts, const CrossOptions& opts, ModelKind model,
                     const std::optional<Eigen::VectorXd>& beta_init1 = std::nullopt,
                     const std::optional<Eigen::VectorXd>& beta_init2 = std::nullopt);

} // namespace hdinfer
