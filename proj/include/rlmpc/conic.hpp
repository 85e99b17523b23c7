#pragma once

#include <Eigen/Core>

#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace rlmpc::conic {

/// Contiguous block of decision variables inside a ConvexProgram.
struct Variable {
  int offset = 0;
  int size = 0;
  int operator[](int i) const { return offset + i; }
};

/// Affine expression  sum_i c_i z_{idx_i} + constant.
class LinExpr {
 public:
  LinExpr() = default;
  LinExpr(double constant) : constant_(constant) {}  // NOLINT: implicit by design

  static LinExpr term(int index, double coeff = 1.0);

  void add_term(int index, double coeff);
  void add_constant(double c) { constant_ += c; }

  const std::vector<std::pair<int, double>>& terms() const { return terms_; }
  double constant() const { return constant_; }

  double evaluate(const Eigen::VectorXd& z) const;

  LinExpr& operator+=(const LinExpr& other);
  LinExpr& operator-=(const LinExpr& other);
  LinExpr& operator*=(double s);

  friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
  friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
  friend LinExpr operator*(double s, LinExpr a) { return a *= s; }
  friend LinExpr operator*(LinExpr a, double s) { return a *= s; }
  friend LinExpr operator-(LinExpr a) { return a *= -1.0; }

 private:
  std::vector<std::pair<int, double>> terms_;
  double constant_ = 0.0;
};

using LinExprVec = std::vector<LinExpr>;

LinExprVec as_exprs(const Variable& v);
LinExprVec constant_exprs(const Eigen::VectorXd& c);
LinExprVec operator*(const Eigen::MatrixXd& M, const LinExprVec& x);
LinExprVec operator+(const LinExprVec& a, const LinExprVec& b);
LinExprVec operator-(const LinExprVec& a, const LinExprVec& b);
LinExprVec operator+(const LinExprVec& a, const Eigen::VectorXd& b);
LinExprVec operator-(const LinExprVec& a, const Eigen::VectorXd& b);
LinExprVec operator*(double s, const LinExprVec& a);

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

const char* to_string(SolveStatus s);

enum class Backend {
  Automatic,      ///< simplex for small pure LPs, interior point otherwise
  InteriorPoint,  ///< homogeneous self-dual embedding with NT scaling
  Simplex,        ///< dense two-phase revised simplex (LP only)
};

struct SolverSettings {
  double feasibility_tol = 1e-7;
  double gap_tol = 1e-7;
  int max_iterations = 150;
  Backend backend = Backend::Automatic;
  /// Pure LPs with at most this many rows go to the simplex under Automatic.
  int simplex_max_rows = 64;
};

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd primal;  // empty unless Optimal
  double objective = 0.0;
  double solve_seconds = 0.0;
  int iterations = 0;
  Backend backend_used = Backend::Automatic;

  bool optimal() const { return status == SolveStatus::Optimal; }
  Eigen::VectorXd value(const Variable& v) const;
  double value(const LinExpr& e) const { return e.evaluate(primal); }
  Eigen::VectorXd value(const LinExprVec& e) const;
};

/// Builder for   min  c'z + c0 + sum_k w_k ||F_k z + f_k||^2
///               s.t. equality rows, <= 0 rows, ||body|| <= bound.
class ConvexProgram {
 public:
  Variable add_variable(const std::string& name, int size);

  void add_objective(const LinExpr& e);
  /// weight * ||residual||_2^2, weight > 0.
  void add_squared_norm_objective(const LinExprVec& residual, double weight = 1.0);

  void add_equality(const LinExpr& e);  // e == 0
  void add_equalities(const LinExprVec& es);
  void add_less_equal(const LinExpr& e);  // e <= 0
  void add_less_equal(const LinExprVec& es);
  void add_nonnegative(const Variable& v);
  void add_second_order_cone(const LinExprVec& body, const LinExpr& bound);

  int num_variables() const { return num_vars_; }
  int num_equalities() const { return static_cast<int>(eqs_.size()); }
  int num_inequalities() const { return static_cast<int>(ineqs_.size()); }
  int num_cones() const { return static_cast<int>(socs_.size()); }
  bool is_lp() const { return socs_.empty() && quads_.empty(); }

  const std::vector<std::pair<std::string, Variable>>& variables() const { return vars_; }
  const LinExpr& linear_objective() const { return objective_; }
  const std::vector<LinExpr>& equalities() const { return eqs_; }
  const std::vector<LinExpr>& inequalities() const { return ineqs_; }

  struct Cone {
    LinExprVec body;
    LinExpr bound;
  };
  struct Quadratic {
    LinExprVec residual;
    double weight;
  };
  const std::vector<Cone>& cones() const { return socs_; }
  const std::vector<Quadratic>& quadratics() const { return quads_; }

  double objective_value(const Eigen::VectorXd& z) const;
  /// Largest constraint violation of z (equalities, inequalities, cones).
  double max_violation(const Eigen::VectorXd& z) const;

  /// Human-readable dump for failure triage.
  std::string to_text() const;

 private:
  void check(const LinExpr& e) const;

  int num_vars_ = 0;
  std::vector<std::pair<std::string, Variable>> vars_;
  LinExpr objective_;
  std::vector<Quadratic> quads_;
  std::vector<LinExpr> eqs_;
  std::vector<LinExpr> ineqs_;
  std::vector<Cone> socs_;
};

/// Reentrant: no shared mutable state between calls.
SolveResult solve(const ConvexProgram& prog, const SolverSettings& settings = {});

// ---- backend entry points on standard conic form ----

/// min c'x  s.t.  A x = b,  G x + s = h,  s in R+^{num_lp} x SOC(dims...).
struct ConicForm {
  Eigen::VectorXd c;
  int n = 0;
  int p = 0;
  int m = 0;
  std::vector<std::tuple<int, int, double>> A;  // (row, col, value)
  Eigen::VectorXd b;
  std::vector<std::tuple<int, int, double>> G;
  Eigen::VectorXd h;
  int num_lp = 0;
  std::vector<int> soc_dims;
};

struct BackendResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd x;
  int iterations = 0;
};

BackendResult solve_interior_point(const ConicForm& f, const SolverSettings& s);
BackendResult solve_simplex(const ConicForm& f, const SolverSettings& s);
/// Constraint rows the simplex would carry (bound rows excluded); -1 if not an LP.
int simplex_row_count(const ConicForm& f);

}  // namespace rlmpc::conic
