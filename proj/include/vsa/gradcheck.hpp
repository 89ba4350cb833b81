// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "vsa/tensor.hpp"

namespace vsa {

// Central-difference gradient of a scalar loss with respect to a parameter
// buffer, evaluated in place: each element is displaced by +/- step and the
// loss re-run. Double precision only.
inline std::vector<double> fd_gradient(double* data, Index n, double step,
                                       const std::function<double()>& loss) {
  std::vector<double> grad(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const double saved = data[i];
    data[i] = saved + step;
    const double up = loss();
    data[i] = saved - step;
    const double down = loss();
    data[i] = saved;
    grad[static_cast<std::size_t>(i)] = (up - down) / (2.0 * step);
  }
  return grad;
}

// max_i |a_i - f_i| / max(|a_i|, |f_i|, 1): relative where gradients are
// large, absolute near zero.
inline double max_rel_err(const double* analytic, const double* fd, Index n) {
  double worst = 0;
  for (Index i = 0; i < n; ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(fd[i]), 1.0});
    worst = std::max(worst, std::abs(analytic[i] - fd[i]) / denom);
  }
  return worst;
}

}  // namespace vsa
