#include "rlmpc/bootstrap.hpp"

#include "rlmpc/polytope.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace rlmpc {

using conic::ConvexProgram;
using conic::LinExpr;
using conic::LinExprVec;
using conic::Variable;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Column-major n x m matrix of affine expressions.
struct ExprMatrix {
  int rows = 0, cols = 0;
  std::vector<LinExpr> e;

  ExprMatrix(int r, int c) : rows(r), cols(c), e(r * c) {}
  LinExpr& operator()(int i, int j) { return e[j * rows + i]; }
  const LinExpr& operator()(int i, int j) const { return e[j * rows + i]; }
};

ExprMatrix constant(const MatrixXd& C) {
  ExprMatrix out(static_cast<int>(C.rows()), static_cast<int>(C.cols()));
  for (int j = 0; j < C.cols(); ++j)
    for (int i = 0; i < C.rows(); ++i) out(i, j) = LinExpr(C(i, j));
  return out;
}

// d x n gain stored row-major in a variable.
ExprMatrix gain(const Variable& v, int d, int n) {
  ExprMatrix out(d, n);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < n; ++c) out(r, c) = LinExpr::term(v[r * n + c]);
  return out;
}

ExprMatrix mul(const MatrixXd& A, const ExprMatrix& E) {
  ExprMatrix out(static_cast<int>(A.rows()), E.cols);
  for (int j = 0; j < E.cols; ++j)
    for (int i = 0; i < A.rows(); ++i)
      for (int m = 0; m < A.cols(); ++m)
        if (A(i, m) != 0.0) out(i, j) += A(i, m) * E(m, j);
  return out;
}

ExprMatrix add(ExprMatrix a, const ExprMatrix& b) {
  for (size_t i = 0; i < a.e.size(); ++i) a.e[i] += b.e[i];
  return a;
}

// row' E v
LinExpr row_times(const Eigen::RowVectorXd& row, const ExprMatrix& E, const VectorXd& v) {
  LinExpr out;
  for (int i = 0; i < E.rows; ++i) {
    if (row[i] == 0.0) continue;
    for (int j = 0; j < E.cols; ++j)
      if (v[j] != 0.0) out += (row[i] * v[j]) * E(i, j);
  }
  return out;
}

// H x(k) <= h for every disturbance sequence:
//   H_r xbar + sum_s t_{s,r} <= h_r,  t_{s,r} >= H_r E_s v  for every vertex v of W.
void robust_rows(ConvexProgram& P, const Halfspaces& Hs, const LinExprVec& nominal, const std::vector<ExprMatrix>& E,
                 const Polytope& W, const std::string& tag) {
  for (int r = 0; r < Hs.count(); ++r) {
    LinExpr lhs(-Hs.h[r]);
    for (size_t c = 0; c < nominal.size(); ++c)
      if (Hs.H(r, c) != 0.0) lhs += Hs.H(r, c) * nominal[c];
    const Eigen::RowVectorXd row = Hs.H.row(r);
    for (size_t s = 0; s < E.size(); ++s) {
      const Variable t = P.add_variable(tag + "_t", 1);
      for (int i = 0; i < W.num_vertices(); ++i)
        P.add_less_equal(row_times(row, E[s], W.vertex(i)) - LinExpr::term(t[0]));
      lhs += LinExpr::term(t[0]);
    }
    P.add_less_equal(lhs);
  }
}

MatrixXd value_of(const conic::SolveResult& res, const ExprMatrix& E) {
  MatrixXd out(E.rows, E.cols);
  for (int j = 0; j < E.cols; ++j)
    for (int i = 0; i < E.rows; ++i) out(i, j) = res.value(E(i, j));
  return out;
}

}  // namespace

std::optional<BootstrapPlan> solve_bootstrap(const SystemModel& sys, const StageCost& cost, const TerminalPair& tp,
                                             const VectorXd& x0, int T, const conic::SolverSettings& settings) {
  if (T < 1) throw std::invalid_argument("solve_bootstrap: horizon must be at least 1");
  const int n = sys.n(), d = sys.d();
  if (!sys.X_h.contains(x0, 1e-9)) return std::nullopt;
  const Halfspaces O_h = to_halfspaces(tp.O);

  ConvexProgram P;
  std::vector<Variable> g(T);
  std::vector<std::vector<Variable>> Mv(T);
  for (int k = 0; k < T; ++k) {
    g[k] = P.add_variable("g_" + std::to_string(k), d);
    for (int s = 0; s < k; ++s) Mv[k].push_back(P.add_variable("M_" + std::to_string(k) + "_" + std::to_string(s), d * n));
  }

  // E[k][s] for s < k; E[s+1][s] = I, E[k+1][s] = A E[k][s] + B M[k][s].
  std::vector<std::vector<ExprMatrix>> E(T + 1);
  LinExprVec xbar = conic::constant_exprs(x0);
  std::vector<LinExprVec> xs{xbar};
  LinExpr objective;
  for (int k = 0; k < T; ++k) {
    const LinExprVec uk = conic::as_exprs(g[k]);
    // input constraints for all disturbance sequences
    std::vector<ExprMatrix> Mk;
    for (int s = 0; s < k; ++s) Mk.push_back(gain(Mv[k][s], d, n));
    robust_rows(P, sys.U_h, uk, Mk, sys.W, "tu");
    objective += LinExpr::term(stage_cost_epigraph(cost, tp, P, xbar, uk)[0]);

    for (int s = 0; s < k; ++s) E[k + 1].push_back(add(mul(sys.A, E[k][s]), mul(sys.B, Mk[s])));
    E[k + 1].push_back(constant(MatrixXd::Identity(n, n)));
    xbar = sys.A * xbar + sys.B * uk;
    xs.push_back(xbar);
    robust_rows(P, k + 1 == T ? O_h : sys.X_h, xbar, E[k + 1], sys.W, "tx");
  }
  P.add_objective(objective);
  const auto res = conic::solve(P, settings);
  if (!res.optimal()) return std::nullopt;

  BootstrapPlan plan;
  plan.horizon = T;
  plan.x0 = x0;
  plan.cost = res.objective;
  plan.nominal_states.resize(n, T + 1);
  plan.nominal_inputs.resize(d, T);
  plan.g.resize(T);
  plan.M.resize(T);
  plan.E.resize(T + 1);
  for (int k = 0; k <= T; ++k) {
    plan.nominal_states.col(k) = res.value(xs[k]);
    for (const auto& Eks : E[k]) plan.E[k].push_back(value_of(res, Eks));
  }
  for (int k = 0; k < T; ++k) {
    plan.g[k] = res.value(g[k]);
    plan.nominal_inputs.col(k) = plan.g[k];
    for (const auto& m : Mv[k]) plan.M[k].push_back(value_of(res, gain(m, d, n)));
  }
  return plan;
}

VectorXd bootstrap_input(const BootstrapPlan& plan, const TerminalPair& tp, int t, const std::vector<VectorXd>& w,
                         const VectorXd& x_t) {
  if (t >= plan.horizon) return tp.K * x_t;
  if (static_cast<int>(w.size()) < t) throw std::invalid_argument("bootstrap_input: history shorter than t");
  VectorXd u = plan.g[t];
  for (int s = 0; s < t; ++s) u += plan.M[t][s] * w[s];
  return u;
}

ScenarioTree bootstrap_layers(const SystemModel& sys, const BootstrapPlan& plan, int iteration) {
  const int n = sys.n();
  if (n > 2) throw std::invalid_argument("bootstrap_layers: only scalar and planar systems are supported");
  ScenarioTree tr;
  tr.horizon = plan.horizon;
  tr.branching = sys.l();
  tr.time = 0;
  tr.iteration = iteration;
  tr.layered = true;
  const MatrixXd& Wv = sys.W.vertices();

  for (int k = 0; k <= plan.horizon; ++k) {
    // Directions in the interior of every normal cone of the Minkowski sum.
    std::vector<VectorXd> dirs;
    if (n == 1) {
      dirs = {VectorXd::Constant(1, 1.0), VectorXd::Constant(1, -1.0)};
    } else {
      std::vector<double> angles;
      for (const auto& Eks : plan.E[k]) {
        const Polytope img = affine_image(sys.W, Eks);
        const int m = img.num_vertices();
        if (m < 2) continue;
        for (int i = 0; i < m; ++i) {
          const VectorXd e = img.vertex((i + 1) % m) - img.vertex(i);
          angles.push_back(std::atan2(-e[0], e[1]));  // outer normal of a counterclockwise edge
          if (m == 2) angles.push_back(std::atan2(e[0], -e[1]));
        }
      }
      std::sort(angles.begin(), angles.end());
      angles.erase(std::unique(angles.begin(), angles.end(), [](double a, double b) { return b - a < 1e-12; }),
                   angles.end());
      if (angles.empty()) angles.push_back(0.0);
      for (size_t i = 0; i < angles.size(); ++i) {
        const double a = angles[i];
        const double b = i + 1 < angles.size() ? angles[i + 1] : angles[0] + 2.0 * std::numbers::pi;
        const double mid = angles.size() == 1 ? a + std::numbers::pi / 2 : 0.5 * (a + b);
        dirs.push_back(Eigen::Vector2d(std::cos(mid), std::sin(mid)));
        if (angles.size() == 1) dirs.push_back(Eigen::Vector2d(-std::cos(mid), -std::sin(mid)));
      }
    }

    std::vector<VectorXd> seen;
    for (const auto& c : dirs) {
      VectorXd x = plan.nominal_states.col(k);
      VectorXd u = k < plan.horizon ? VectorXd(plan.g[k]) : VectorXd();
      for (int s = 0; s < k; ++s) {
        int best = 0;
        double bv = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < Wv.cols(); ++i) {
          const double v = c.dot(plan.E[k][s] * Wv.col(i));
          if (v > bv + 1e-12) {
            bv = v;
            best = i;
          }
        }
        x += plan.E[k][s] * Wv.col(best);
        if (k < plan.horizon) u += plan.M[k][s] * Wv.col(best);
      }
      bool dup = false;
      for (const auto& y : seen) dup = dup || (y - x).lpNorm<Eigen::Infinity>() <= 1e-12;
      if (dup) continue;
      seen.push_back(x);
      tr.nodes.push_back({x, u, k, -1, -1});
    }
  }
  return tr;
}

double max_feasible_scale(const SystemModel& sys, const StageCost& cost, const TerminalPair& tp, const VectorXd& x0,
                          int horizon) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 20; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (solve_bootstrap(sys, cost, tp, mid * x0, horizon)) lo = mid;
    else hi = mid;
  }
  return lo;
}

}  // namespace rlmpc
