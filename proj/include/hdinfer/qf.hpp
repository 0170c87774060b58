#pragma once

#include "hdinfer/inference.hpp"

#include <optional>
#include <vector>

namespace hdinfer {

struct QFOptions {
    std::vector<int> G;                // covariate indices, 0-based
    std::optional<Eigen::MatrixXd> A;  // absent: target Sigma_{G,G}
    std::vector<double> tau = {0.25, 0.5, 1.0};
    bool split = true;
    LFOptions base;

    void validate(Eigen::Index p) const;
};

/// One inference row per tau value.
struct TauRow {
    double tau = 0.0;
    double est_plugin = 0.0;
    double est_debias = 0.0;
    double std_err = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    double z_value = 0.0;
    double p_value = 1.0;
};

struct QFResult {
    std::vector<TauRow> rows;
    double est_debias_raw = 0.0; // before truncation at 0
    double mu_used = 0.0;
    bool degenerate_loading = false; // beta_hat_G' A vanished: no projection run
};

/// Empirical variance of the plug-in quadratic form:
/// (1/n^2) sum_i (bl' X_iG X_iG' br - bl' Sigma br)^2.
double qf_sigma_extra(const Eigen::MatrixXd& XG, const Eigen::VectorXd& b_left,
                      const Eigen::VectorXd& b_right, const Eigen::MatrixXd& Sigma_GG);

/// 4 u'[(1/n^2) sum w^2 sigma_i^2 X_i X_i'] u (+ the empirical Sigma term
/// when sigma_case) + tau/n. G indexes columns of Xa; A_or_Sigma is the
/// |G| x |G| matrix the quadratic form is taken against.
double qf_variance(const Eigen::VectorXd& u, const Eigen::MatrixXd& Xa,
                   const Eigen::VectorXd& beta, ModelKind model,
                   const Eigen::VectorXd& noise, double tau, bool sigma_case,
                   const std::vector<int>& G, const Eigen::MatrixXd& A_or_Sigma);

/// Inference for beta_G' A beta_G (A given) or beta_G' Sigma_{G,G} beta_G
/// (A absent), with truncation at zero and tau-enlarged variances.
QFResult qf(const Dataset& data, const QFOptions& opts, ModelKind model,
            const std::optional<Eigen::VectorXd>& beta_init = std::nullopt);

} // namespace hdinfer
