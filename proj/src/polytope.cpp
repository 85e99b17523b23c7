#include "rlmpc/polytope.hpp"

#include "rlmpc/conic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rlmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

bool lex_less(const MatrixXd& P, int a, int b) {
  for (int r = 0; r < P.rows(); ++r) {
    if (P(r, a) < P(r, b)) return true;
    if (P(r, a) > P(r, b)) return false;
  }
  return false;
}

std::vector<int> lex_sorted_unique(const MatrixXd& P, double tol) {
  std::vector<int> idx(P.cols());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return lex_less(P, a, b); });
  std::vector<int> out;
  for (int i : idx) {
    bool dup = false;
    // near-duplicates need not be adjacent in lexicographic order
    for (auto it = out.rbegin(); it != out.rend(); ++it) {
      if (P(0, i) - P(0, *it) > tol) break;
      if ((P.col(i) - P.col(*it)).lpNorm<Eigen::Infinity>() <= tol) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(i);
  }
  return out;
}

double cross(const MatrixXd& P, int o, int a, int b) {
  return (P(0, a) - P(0, o)) * (P(1, b) - P(1, o)) - (P(1, a) - P(1, o)) * (P(0, b) - P(0, o));
}

std::vector<int> monotone_chain(const MatrixXd& P, const std::vector<int>& sorted, double tol) {
  if (sorted.size() <= 1) return sorted;
  auto pop_needed = [&](const std::vector<int>& h, int p) {
    const int o = h[h.size() - 2], a = h.back();
    return cross(P, o, a, p) <= tol * (P.col(p) - P.col(o)).norm();
  };
  std::vector<int> lower, upper;
  for (int p : sorted) {
    while (lower.size() >= 2 && pop_needed(lower, p)) lower.pop_back();
    lower.push_back(p);
  }
  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
    while (upper.size() >= 2 && pop_needed(upper, *it)) upper.pop_back();
    upper.push_back(*it);
  }
  lower.pop_back();
  upper.pop_back();
  lower.insert(lower.end(), upper.begin(), upper.end());
  if (lower.size() == 2 && lower[0] == lower[1]) lower.pop_back();
  return lower;
}

}  // namespace

bool Halfspaces::contains(const VectorXd& x, double tol) const {
  if (x.size() != H.cols()) throw std::invalid_argument("Halfspaces::contains: dimension mismatch");
  return H.rows() == 0 || ((H * x - h).array() <= tol).all();
}

double hull_membership_residual(const MatrixXd& V, const VectorXd& x) {
  if (V.rows() != x.size()) throw std::invalid_argument("membership: dimension mismatch");
  using namespace conic;
  ConvexProgram p;
  auto lam = p.add_variable("lambda", static_cast<int>(V.cols()));
  auto t = p.add_variable("t", 1);
  p.add_nonnegative(lam);
  p.add_nonnegative(t);
  LinExpr sum;
  for (int i = 0; i < lam.size; ++i) sum += LinExpr::term(lam[i]);
  p.add_equality(sum - 1.0);
  const LinExprVec r = V * as_exprs(lam) - x;
  for (const auto& e : r) {
    p.add_less_equal(e - LinExpr::term(t[0]));
    p.add_less_equal(-e - LinExpr::term(t[0]));
  }
  p.add_objective(LinExpr::term(t[0]));
  SolverSettings s;
  s.backend = Backend::Simplex;
  const auto res = solve(p, s);
  if (!res.optimal()) throw std::runtime_error("membership LP failed: " + std::string(to_string(res.status)));
  return std::max(res.objective, 0.0);
}

std::vector<int> hull_vertex_indices(const MatrixXd& points, double tol) {
  if (points.cols() == 0) throw std::invalid_argument("convex hull of an empty point set");
  if (!points.allFinite()) throw std::invalid_argument("convex hull: non-finite coordinates");
  const int n = static_cast<int>(points.rows());
  std::vector<int> cand = lex_sorted_unique(points, tol);
  if (n == 1) {
    if (cand.size() == 1) return cand;
    return {cand.front(), cand.back()};
  }
  if (n == 2) return monotone_chain(points, cand, tol);

  // membership-LP pruning of the candidate list
  std::vector<int> keep = cand;
  for (size_t k = 0; k < cand.size() && keep.size() > 1; ++k) {
    const int i = cand[k];
    std::vector<int> others;
    others.reserve(keep.size());
    for (int j : keep)
      if (j != i) others.push_back(j);
    MatrixXd O(n, others.size());
    for (size_t c = 0; c < others.size(); ++c) O.col(c) = points.col(others[c]);
    // cheap rejection: outside the bounding box of the others
    const VectorXd lo = O.rowwise().minCoeff(), hi = O.rowwise().maxCoeff();
    if (((points.col(i) - hi).array() > tol).any() || ((lo - points.col(i)).array() > tol).any()) continue;
    if (hull_membership_residual(O, points.col(i)) <= tol) keep = std::move(others);
  }
  return keep;
}

Polytope convex_hull(const MatrixXd& points) {
  const auto idx = hull_vertex_indices(points);
  MatrixXd V(points.rows(), idx.size());
  for (size_t c = 0; c < idx.size(); ++c) V.col(c) = points.col(idx[c]);
  return Polytope(Polytope::Canonical{}, std::move(V));
}

Polytope convex_hull(const std::vector<VectorXd>& points) {
  if (points.empty()) throw std::invalid_argument("convex hull of an empty point set");
  MatrixXd P(points.front().size(), points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != P.rows()) throw std::invalid_argument("convex hull: inconsistent dimensions");
    P.col(i) = points[i];
  }
  return convex_hull(P);
}

Polytope::Polytope(const MatrixXd& points) : Polytope(convex_hull(points)) {}

Polytope Polytope::point(const VectorXd& x) { return Polytope(MatrixXd(x)); }

Polytope Polytope::box(const VectorXd& lo, const VectorXd& hi) {
  if (lo.size() != hi.size() || (lo.array() > hi.array()).any())
    throw std::invalid_argument("box: invalid bounds");
  const int n = static_cast<int>(lo.size());
  MatrixXd P(n, 1 << n);
  for (int k = 0; k < (1 << n); ++k)
    for (int i = 0; i < n; ++i) P(i, k) = (k >> i) & 1 ? hi[i] : lo[i];
  return Polytope(P);
}

bool Polytope::contains(const VectorXd& x, double tol) const {
  if (x.size() != dim()) throw std::invalid_argument("Polytope::contains: dimension mismatch");
  if (((x - upper()).array() > tol).any() || ((lower() - x).array() > tol).any()) return false;
  if (dim() == 1 || num_vertices() == 1) return true;
  return hull_membership_residual(V_, x) <= tol;
}

double Polytope::support(const VectorXd& d) const {
  if (d.size() != dim()) throw std::invalid_argument("support: dimension mismatch");
  return (d.transpose() * V_).maxCoeff();
}

bool Polytope::is_box(double tol) const {
  const int n = dim();
  if (n > 20 || num_vertices() != (1 << n)) return false;
  const VectorXd lo = lower(), hi = upper();
  for (int c = 0; c < num_vertices(); ++c)
    for (int i = 0; i < n; ++i)
      if (std::abs(V_(i, c) - lo[i]) > tol && std::abs(V_(i, c) - hi[i]) > tol) return false;
  return true;
}

double Polytope::area() const {
  if (dim() != 2) throw std::invalid_argument("area: only planar polytopes");
  double a = 0.0;
  const int m = num_vertices();
  for (int i = 0; i < m; ++i) {
    const int j = (i + 1) % m;
    a += V_(0, i) * V_(1, j) - V_(0, j) * V_(1, i);
  }
  return 0.5 * std::abs(a);
}

Polytope affine_image(const Polytope& P, const MatrixXd& A, const VectorXd& b) {
  if (A.cols() != P.dim() || A.rows() != b.size()) throw std::invalid_argument("affine_image: dimension mismatch");
  return Polytope((A * P.vertices()).colwise() + b);
}

Polytope affine_image(const Polytope& P, const MatrixXd& A) {
  return affine_image(P, A, VectorXd::Zero(A.rows()));
}

Polytope minkowski_sum(const Polytope& P, const Polytope& Q) {
  if (P.dim() != Q.dim()) throw std::invalid_argument("minkowski_sum: dimension mismatch");
  MatrixXd S(P.dim(), P.num_vertices() * Q.num_vertices());
  int c = 0;
  for (int i = 0; i < P.num_vertices(); ++i)
    for (int j = 0; j < Q.num_vertices(); ++j) S.col(c++) = P.vertices().col(i) + Q.vertices().col(j);
  return Polytope(S);
}

namespace {

double segment_distance(const VectorXd& a, const VectorXd& b, const VectorXd& x) {
  const VectorXd e = b - a;
  const double L = e.squaredNorm();
  const double t = L > 0.0 ? std::clamp((x - a).dot(e) / L, 0.0, 1.0) : 0.0;
  return (a + t * e - x).norm();
}

double planar_distance(const MatrixXd& V, const VectorXd& x) {
  const int m = static_cast<int>(V.cols());
  if (m == 1) return (V.col(0) - x).norm();
  if (m == 2) return segment_distance(V.col(0), V.col(1), x);
  bool inside = true;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    const int j = (i + 1) % m;
    const double cr = (V(0, j) - V(0, i)) * (x[1] - V(1, i)) - (V(1, j) - V(1, i)) * (x[0] - V(0, i));
    if (cr < 0.0) inside = false;
    best = std::min(best, segment_distance(V.col(i), V.col(j), x));
  }
  return inside ? 0.0 : best;
}

}  // namespace

double set_distance(const Polytope& P, const VectorXd& x) {
  if (x.size() != P.dim()) throw std::invalid_argument("set_distance: dimension mismatch");
  if (P.dim() == 1) return std::max({P.lower()[0] - x[0], x[0] - P.upper()[0], 0.0});
  if (P.dim() == 2) return planar_distance(P.vertices(), x);
  if (P.contains(x)) return 0.0;
  using namespace conic;
  ConvexProgram p;
  auto mu = p.add_variable("mu", P.num_vertices());
  auto t = p.add_variable("t", 1);
  p.add_nonnegative(mu);
  LinExpr sum;
  for (int i = 0; i < mu.size; ++i) sum += LinExpr::term(mu[i]);
  p.add_equality(sum - 1.0);
  p.add_second_order_cone(P.vertices() * as_exprs(mu) - x, LinExpr::term(t[0]));
  p.add_objective(LinExpr::term(t[0]));
  const auto r = solve(p);
  if (!r.optimal()) throw std::runtime_error("set_distance: solver returned " + std::string(to_string(r.status)));
  return std::max(r.objective, 0.0);
}

double set_distance_inf(const Polytope& P, const VectorXd& x) {
  if (x.size() != P.dim()) throw std::invalid_argument("set_distance_inf: dimension mismatch");
  if (P.dim() == 1) return std::max({P.lower()[0] - x[0], x[0] - P.upper()[0], 0.0});
  return hull_membership_residual(P.vertices(), x);
}

Halfspaces to_halfspaces(const Polytope& P) {
  const int n = P.dim();
  const MatrixXd& V = P.vertices();
  Halfspaces hs;
  auto axis_box = [&]() {
    hs.H.resize(2 * n, n);
    hs.h.resize(2 * n);
    hs.H << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
    hs.h << P.upper(), -P.lower();
  };
  if (n == 1 || P.num_vertices() == 1 || P.is_box()) {
    axis_box();
    return hs;
  }
  if (n != 2) throw std::invalid_argument("to_halfspaces: unsupported dimension");
  const int m = P.num_vertices();
  if (m == 2) {
    const Eigen::Vector2d e = (V.col(1) - V.col(0)).normalized();
    const Eigen::Vector2d nrm(e[1], -e[0]);
    hs.H.resize(4, 2);
    hs.h.resize(4);
    hs.H << e.transpose(), -e.transpose(), nrm.transpose(), -nrm.transpose();
    hs.h << e.dot(V.col(1)), -e.dot(V.col(0)), nrm.dot(V.col(0)), -nrm.dot(V.col(0));
    return hs;
  }
  hs.H.resize(m, 2);
  hs.h.resize(m);
  for (int i = 0; i < m; ++i) {
    const int j = (i + 1) % m;
    const Eigen::Vector2d e = V.col(j) - V.col(i);
    const Eigen::Vector2d nrm = Eigen::Vector2d(e[1], -e[0]).normalized();
    hs.H.row(i) = nrm.transpose();
    hs.h[i] = nrm.dot(V.col(i));
  }
  return hs;
}

bool same_vertex_set(const Polytope& P, const Polytope& Q, double tol) {
  if (P.dim() != Q.dim() || P.num_vertices() != Q.num_vertices()) return false;
  for (int i = 0; i < P.num_vertices(); ++i) {
    bool found = false;
    for (int j = 0; j < Q.num_vertices() && !found; ++j)
      found = (P.vertices().col(i) - Q.vertices().col(j)).lpNorm<Eigen::Infinity>() <= tol;
    if (!found) return false;
  }
  return true;
}

}  // namespace rlmpc
