#pragma once

#include "rlmpc/system_model.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <limits>
#include <vector>

namespace fixtures {

inline rlmpc::Polytope box(int n, double r) {
  return rlmpc::Polytope::box(-Eigen::VectorXd::Constant(n, r), Eigen::VectorXd::Constant(n, r));
}

inline rlmpc::Polytope interval(double lo, double hi) {
  return rlmpc::Polytope::box(Eigen::VectorXd::Constant(1, lo), Eigen::VectorXd::Constant(1, hi));
}

/// A = [1 1; 0 1], B = [0; 1], |x|_inf <= 10, |u| <= 1, |w|_inf <= w_max.
inline rlmpc::SystemModel double_integrator(double w_max = 0.1) {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 1, 1, 0, 1;
  B << 0, 1;
  rlmpc::Polytope W = w_max > 0 ? box(2, w_max) : rlmpc::Polytope::point(Eigen::VectorXd::Zero(2));
  return rlmpc::SystemModel::make(A, B, box(2, 10.0), box(1, 1.0), W);
}

inline rlmpc::SystemModel scalar_system(double a, double b, double x_max, double u_max, double w_max) {
  Eigen::MatrixXd A(1, 1), B(1, 1);
  A << a;
  B << b;
  rlmpc::Polytope W = w_max > 0 ? interval(-w_max, w_max) : rlmpc::Polytope::point(Eigen::VectorXd::Zero(1));
  return rlmpc::SystemModel::make(A, B, interval(-x_max, x_max), interval(-u_max, u_max), W);
}

/// Lower convex envelope of 1-D data at x by enumerating bracketing pairs.
/// Returns +inf outside [min p, max p].
inline double interp1_oracle(const std::vector<double>& p, const std::vector<double>& c, double x) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < p.size(); ++a) {
    if (std::abs(p[a] - x) <= 1e-12) best = std::min(best, c[a]);
    for (size_t b = 0; b < p.size(); ++b) {
      if (!(p[a] < x && x < p[b])) continue;
      const double t = (x - p[a]) / (p[b] - p[a]);
      best = std::min(best, (1 - t) * c[a] + t * c[b]);
    }
  }
  return best;
}

}  // namespace fixtures
