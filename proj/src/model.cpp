#include "hdinfer/model.hpp"

#include <cmath>
#include <stdexcept>

namespace hdinfer {

ModelKind model_from_string(const std::string& name) {
    if (name == "linear") return ModelKind::Linear;
    if (name == "logistic") return ModelKind::Logistic;
    if (name == "logistic_alter") return ModelKind::LogisticAlter;
    throw std::invalid_argument("unknown model '" + name +
                                "' (expected linear|logistic|logistic_alter)");
}

std::string to_string(ModelKind model) {
    switch (model) {
        case ModelKind::Linear: return "linear";
        case ModelKind::Logistic: return "logistic";
        case ModelKind::LogisticAlter: return "logistic_alter";
    }
    return "?";
}

double link_value(ModelKind model, double z) {
    if (model == ModelKind::Linear) return z;
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

double link_derivative(ModelKind model, double z) {
    if (model == ModelKind::Linear) return 1.0;
    // f'(z) = f(z) f(-z), evaluated from the small side to avoid 1-1 loss
    double a = std::exp(-std::fabs(z));
    double denom = 1.0 + a;
    return a / (denom * denom);
}

double weight(ModelKind model, double z) {
    switch (model) {
        case ModelKind::Linear: return 1.0;
        case ModelKind::LogisticAlter: return 1.0;
        case ModelKind::Logistic: return 1.0 / link_derivative(ModelKind::Logistic, z);
    }
    return 1.0;
}

void Dataset::validate(ModelKind model) const {
    if (X.rows() != y.size()) {
        throw std::invalid_argument("dataset: X rows and y length differ");
    }
    if (n() < 2 || p() < 1) {
        throw std::invalid_argument("dataset: need n >= 2 and p >= 1");
    }
    if (!X.allFinite() || !y.allFinite()) {
        throw std::invalid_argument("dataset: non-finite entries");
    }
    if (is_binary(model)) {
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            if (y[i] != 0.0 && y[i] != 1.0) {
                throw std::invalid_argument(
                    "dataset: binary outcome must be exactly 0 or 1 (row " +
                    std::to_string(i) + ")");
            }
        }
    }
}

void Loading::validate() const {
    if (x_new.size() == 0 || !x_new.allFinite()) {
        throw std::invalid_argument("loading: empty or non-finite");
    }
    if (x_new.norm() == 0.0) {
        throw std::invalid_argument("loading: zero vector is not a valid loading");
    }
}

Eigen::MatrixXd augment_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd out(X.rows(), X.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(X.cols()) = X;
    return out;
}

std::vector<bool> prob_filter_mask(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                                   ModelKind model, double threshold) {
    if (model == ModelKind::Linear) {
        throw std::invalid_argument("prob_filter_mask: undefined for the linear model");
    }
    if (!(threshold >= 0.0 && threshold < 0.5)) {
        throw std::invalid_argument("prob_filter_mask: threshold must lie in [0, 0.5)");
    }
    if (X.cols() != beta.size()) {
        throw std::invalid_argument("prob_filter_mask: dimension mismatch");
    }
    Eigen::VectorXd eta = X * beta;
    std::vector<bool> mask(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double f = link_value(model, eta[i]);
        mask[static_cast<std::size_t>(i)] = (f >= threshold && f <= 1.0 - threshold);
    }
    return mask;
}

} // namespace hdinfer
