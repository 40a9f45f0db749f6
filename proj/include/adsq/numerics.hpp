#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "adsq/errors.hpp"

namespace adsq {

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw DomainError(std::string(what) + ": non-finite input");
}

// Logistic function without overflow for large |x|. The result is kept inside
// the open interval (0, 1) even where the exact value is not representable.
inline double sigmoid_stable(double x) {
  require_finite(x, "sigmoid_stable");
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::clamp(y, lo, hi);
}

// log(1 + e^x) evaluated as max(x, 0) + log1p(e^{-|x|}).
inline double softplus_stable(double x) {
  require_finite(x, "softplus_stable");
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// Negative log-likelihood of a binary label s in {0,1} under P(s=1) = sigmoid(logit).
inline double pair_nll(double s, double logit) { return softplus_stable(logit) - s * logit; }

}  // namespace adsq
