#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <cmath>

#include "sarlin/error.hpp"

namespace sarlin {

namespace detail {

inline void require_level(double alpha) {
  require(alpha > 0.0 && alpha < 1.0, "significance level must lie in (0, 1)");
}

}  // namespace detail

inline double normal_quantile(double prob) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

inline double normal_upper_tail(double x) {
  return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), x));
}

inline double chi2_quantile(int df, double prob) {
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(df), prob);
}

inline double chi2_upper_tail(int df, double x) {
  if (x <= 0.0) return 1.0;
  return boost::math::cdf(
      boost::math::complement(boost::math::chi_squared_distribution<double>(df), x));
}

/// One-sided N(0,1) critical value z_{1-alpha}.
inline double normal_critical(double alpha) {
  detail::require_level(alpha);
  return normal_quantile(1.0 - alpha);
}

/// (chi2_{p,1-alpha} - p) / sqrt(2p): the chi-square reference on the scale
/// of the centred statistic.
inline double chi2_standardized_critical(int p, double alpha) {
  detail::require_level(alpha);
  detail::require(p >= 1, "degrees of freedom must be positive");
  return (chi2_quantile(p, 1.0 - alpha) - p) / std::sqrt(2.0 * p);
}

}  // namespace sarlin
