#pragma once

#include <Eigen/Core>

#include <vector>

namespace rlmpc {

/// H-representation  { x : H x <= h }.
struct Halfspaces {
  Eigen::MatrixXd H;
  Eigen::VectorXd h;

  int count() const { return static_cast<int>(H.rows()); }
  bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const;
};

/// Vertex-represented convex polytope. Vertices are stored as columns in
/// canonical order: lexicographic, and counterclockwise from the
/// lexicographically smallest vertex in 2-D.
class Polytope {
 public:
  /// Convex hull of the given points (columns).
  explicit Polytope(const Eigen::MatrixXd& points);

  static Polytope point(const Eigen::VectorXd& x);
  static Polytope box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

  int dim() const { return static_cast<int>(V_.rows()); }
  int num_vertices() const { return static_cast<int>(V_.cols()); }
  const Eigen::MatrixXd& vertices() const { return V_; }
  Eigen::VectorXd vertex(int i) const { return V_.col(i); }

  /// LP membership: exists lambda in the simplex with ||V lambda - x||_inf <= tol.
  bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const;
  double support(const Eigen::VectorXd& d) const;
  Eigen::VectorXd lower() const { return V_.rowwise().minCoeff(); }
  Eigen::VectorXd upper() const { return V_.rowwise().maxCoeff(); }
  bool is_box(double tol = 1e-12) const;
  /// Planar area (2-D only; 0 for degenerate polygons).
  double area() const;

 private:
  struct Canonical {};
  Polytope(Canonical, Eigen::MatrixXd V) : V_(std::move(V)) {}
  friend Polytope convex_hull(const Eigen::MatrixXd& points);

  Eigen::MatrixXd V_;
};

/// Indices of the input columns forming the canonical hull vertex list.
std::vector<int> hull_vertex_indices(const Eigen::MatrixXd& points, double tol = 1e-9);
Polytope convex_hull(const Eigen::MatrixXd& points);
Polytope convex_hull(const std::vector<Eigen::VectorXd>& points);

Polytope affine_image(const Polytope& P, const Eigen::MatrixXd& A, const Eigen::VectorXd& b);
Polytope affine_image(const Polytope& P, const Eigen::MatrixXd& A);
Polytope minkowski_sum(const Polytope& P, const Polytope& Q);

/// Euclidean distance inf_{d in P} ||x - d||_2.
double set_distance(const Polytope& P, const Eigen::VectorXd& x);
/// Same with the infinity norm.
double set_distance_inf(const Polytope& P, const Eigen::VectorXd& x);

/// Supported for dim 1, dim 2 (including segments and points) and axis-aligned boxes.
Halfspaces to_halfspaces(const Polytope& P);

bool same_vertex_set(const Polytope& P, const Polytope& Q, double tol = 1e-9);

/// Membership of x in conv(columns of V) with an infinity-norm slack;
/// returns the minimal slack (0 if inside).
double hull_membership_residual(const Eigen::MatrixXd& V, const Eigen::VectorXd& x);

}  // namespace rlmpc
