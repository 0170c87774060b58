#pragma once

namespace hdinfer {

/// Standard normal CDF, evaluated through erfc. Absolute error is at the
/// level of machine precision.
double normal_cdf(double z);

/// Upper alpha quantile helper: normal_quantile(p) returns z with
/// Phi(z) = p. Acklam's rational approximation refined by one Halley step,
/// absolute error well below 1e-9 on (0, 1).
double normal_quantile(double p);

/// Two-sided p-value for a standard normal z statistic: 2 * (1 - Phi(|z|)).
double two_sided_p_value(double z);

} // namespace hdinfer
