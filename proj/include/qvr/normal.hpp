#pragma once

namespace qvr::normal {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

/// Standard normal density.
double pdf(double x);

/// Standard normal cdf, via erfc so the lower tail keeps full relative precision.
double cdf(double x);

/// Inverse of the standard normal cdf on (0, 1) (Wichura's AS 241, ~1e-16
/// relative accuracy). Returns -inf / +inf at 0 / 1 and NaN outside [0, 1].
double quantile(double p);

}  // namespace qvr::normal
