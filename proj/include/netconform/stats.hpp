#ifndef NETCONFORM_STATS_HPP
#define NETCONFORM_STATS_HPP

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>

#include "netconform/error.hpp"

namespace netconform {

inline double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorCode::parameter, "normal quantile needs p in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Clopper-Pearson exact interval for a binomial proportion at confidence
/// `level`: Beta(a/2; k, n-k+1) and Beta(1-a/2; k+1, n-k) quantiles.
inline Interval binomial_ci(long hits, long total, double level = 0.95) {
  require(total > 0, ErrorCode::parameter, "binomial interval needs at least one trial");
  require(hits >= 0 && hits <= total, ErrorCode::parameter, "hits must lie in [0, total]");
  require(level > 0.0 && level < 1.0, ErrorCode::parameter, "confidence level must lie in (0, 1)");
  const double tail = (1.0 - level) / 2.0;
  const auto k = static_cast<double>(hits);
  const auto n = static_cast<double>(total);
  Interval ci;
  ci.lower = hits == 0 ? 0.0
                       : boost::math::quantile(boost::math::beta_distribution<double>(k, n - k + 1.0), tail);
  ci.upper = hits == total
                 ? 1.0
                 : boost::math::quantile(boost::math::beta_distribution<double>(k + 1.0, n - k), 1.0 - tail);
  return ci;
}

}  // namespace netconform

#endif  // NETCONFORM_STATS_HPP
