#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace hdinfer {

/// Outcome model. Logistic and LogisticAlter share the link; they differ
/// in the debiasing weight: Logistic uses the linearization weight
/// w(z) = 1/f'(z), LogisticAlter uses w(z) = 1.
enum class ModelKind { Linear, Logistic, LogisticAlter };

ModelKind model_from_string(const std::string& name);
std::string to_string(ModelKind model);

inline bool is_binary(ModelKind model) { return model != ModelKind::Linear; }

/// Link f(z). Logistic branch is overflow-safe: 1/(1+exp(-z)) for z >= 0,
/// exp(z)/(1+exp(z)) otherwise.
double link_value(ModelKind model, double z);

/// f'(z); in (0, 0.25] for the logistic families.
double link_derivative(ModelKind model, double z);

/// Debiasing weight w(z). For Logistic computed as 1/f'(z) so that
/// w * f' == 1 holds without cancellation.
double weight(ModelKind model, double z);

struct Dataset {
    Eigen::MatrixXd X; // n x p, rows are observations
    Eigen::VectorXd y; // length n

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index p() const { return X.cols(); }

    /// Throws std::invalid_argument on non-finite entries, undersized
    /// data, or (for binary models) outcomes outside {0, 1}.
    void validate(ModelKind model) const;
};

struct Loading {
    Eigen::VectorXd x_new;
    bool include_intercept = false;

    void validate() const; // finite and nonzero
};

/// Prepends a column of ones.
Eigen::MatrixXd augment_intercept(const Eigen::MatrixXd& X);

/// Keep observation i iff f(X_i . beta) lies in [threshold, 1-threshold].
/// Only defined for the logistic families; threshold in [0, 0.5).
std::vector<bool> prob_filter_mask(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                                   ModelKind model, double threshold);

} // namespace hdinfer
