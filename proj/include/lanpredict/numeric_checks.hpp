#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "lanpredict/core_model.hpp"

namespace lanpredict {

/// Largest entrywise deviation measured in ulps of the larger matrix's max-abs
/// entry. Entries that cancel to near zero are judged against the matrix scale,
/// not their own magnitude.
inline double max_ulp_distance(const Mat2d& a, const Mat2d& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  if (scale == 0.0) return 0.0;
  const double ulp = std::numeric_limits<double>::epsilon() * scale;
  return (a - b).cwiseAbs().maxCoeff() / ulp;
}

/// Central difference of a vector-valued map along coordinate `k` of θ.
template <class Fn>
Vec2d central_difference(Fn&& f, const Theta& theta, int k, double step) {
  Theta up = theta;
  Theta dn = theta;
  (k == 0 ? up.alpha : up.beta) += step;
  (k == 0 ? dn.alpha : dn.beta) -= step;
  return (f(up) - f(dn)) / (2.0 * step);
}

}  // namespace lanpredict
