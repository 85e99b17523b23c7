#include "rlmpc/system_model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rlmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

SystemModel SystemModel::make(MatrixXd A, MatrixXd B, Polytope X, Polytope U, Polytope W) {
  const auto n = A.rows();
  if (A.cols() != n) throw std::invalid_argument("A must be square");
  if (B.rows() != n) throw std::invalid_argument("B must have as many rows as A");
  if (X.dim() != n) throw std::invalid_argument("X dimension does not match the state dimension");
  if (W.dim() != n) throw std::invalid_argument("W dimension does not match the state dimension");
  if (U.dim() != B.cols()) throw std::invalid_argument("U dimension does not match the input dimension");
  SystemModel sys{std::move(A), std::move(B), std::move(X), std::move(U), std::move(W), {}, {}};
  sys.X_h = to_halfspaces(sys.X);
  sys.U_h = to_halfspaces(sys.U);
  return sys;
}

std::vector<std::string> check_assumptions(const SystemModel& sys) {
  std::vector<std::string> out;
  if (!sys.W.contains(VectorXd::Zero(sys.n()), 1e-12))
    out.push_back("disturbance set W does not contain the origin");
  if (!sys.X.contains(VectorXd::Zero(sys.n()), 1e-12))
    out.push_back("state constraint set X does not contain the origin");
  if (!sys.U.contains(VectorXd::Zero(sys.d()), 1e-12))
    out.push_back("input constraint set U does not contain the origin");
  return out;
}

TerminalPair TerminalPair::make(Polytope O, MatrixXd K) {
  if (K.cols() != O.dim()) throw std::invalid_argument("K columns must match the dimension of O");
  Polytope KO = affine_image(O, K);
  return TerminalPair{std::move(O), std::move(K), std::move(KO)};
}

TerminalPairReport verify_terminal_pair(const SystemModel& sys, const TerminalPair& tp, double tol) {
  TerminalPairReport rep;
  if (tp.O.dim() != sys.n() || tp.K.rows() != sys.d() || tp.K.cols() != sys.n()) {
    rep.ok = false;
    rep.violation = "terminal pair dimensions do not match the system";
    return rep;
  }
  const MatrixXd AK = sys.A + sys.B * tp.K;
  for (int i = 0; i < tp.O.num_vertices(); ++i) {
    const VectorXd v = tp.O.vertex(i);
    for (int k = 0; k < sys.l(); ++k) {
      const VectorXd succ = AK * v + sys.W.vertex(k);
      const double ex = tp.O.num_vertices() == 1 ? (succ - tp.O.vertex(0)).lpNorm<Eigen::Infinity>()
                                                 : set_distance_inf(tp.O, succ);
      if (ex > tol) {
        std::ostringstream os;
        os << "successor of O vertex " << i << " under W vertex " << k << " leaves O by " << ex;
        rep = {false, os.str(), i, k, ex};
        return rep;
      }
    }
  }
  for (int i = 0; i < tp.O.num_vertices(); ++i) {
    const VectorXd u = tp.K * tp.O.vertex(i);
    const double ex = set_distance_inf(sys.U, u);
    if (ex > tol) {
      std::ostringstream os;
      os << "K maps O vertex " << i << " outside U by " << ex;
      rep = {false, os.str(), i, -1, ex};
      return rep;
    }
    const double ex_x = set_distance_inf(sys.X, tp.O.vertex(i));
    if (ex_x > tol) {
      std::ostringstream os;
      os << "O vertex " << i << " lies outside X by " << ex_x;
      rep = {false, os.str(), i, -1, ex_x};
      return rep;
    }
  }
  return rep;
}

MatrixXd dare_gain(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R, double rel_tol,
                   int max_iter) {
  MatrixXd P = Q;
  for (int it = 0; it < max_iter; ++it) {
    const MatrixXd S = R + B.transpose() * P * B;
    const MatrixXd BtPA = B.transpose() * P * A;
    const MatrixXd Pn = Q + A.transpose() * P * A - BtPA.transpose() * S.ldlt().solve(BtPA);
    const double change = (Pn - P).norm() / std::max(P.norm(), 1e-300);
    P = 0.5 * (Pn + Pn.transpose());
    if (!P.allFinite()) throw std::runtime_error("Riccati recursion diverged");
    if (change < rel_tol) {
      const MatrixXd S2 = R + B.transpose() * P * B;
      return -S2.ldlt().solve(B.transpose() * P * A);
    }
  }
  throw std::runtime_error("Riccati recursion did not reach a fixed point");
}

TerminalPair synthesize_terminal_pair(const SystemModel& sys, double alpha, int max_s, MrpiInfo* info) {
  const int n = sys.n();
  const MatrixXd K = dare_gain(sys.A, sys.B, MatrixXd::Identity(n, n), MatrixXd::Identity(sys.d(), sys.d()));
  const MatrixXd AK = sys.A + sys.B * K;
  const Polytope aW = affine_image(sys.W, alpha * MatrixXd::Identity(n, n));

  MatrixXd Ps = AK;
  int s = 0;
  for (int k = 1; k <= max_s; ++k) {
    bool inside = true;
    for (int i = 0; i < sys.l() && inside; ++i) inside = aW.contains(Ps * sys.W.vertex(i), 1e-12);
    if (inside) {
      s = k;
      break;
    }
    Ps = AK * Ps;
  }
  if (s == 0) throw std::runtime_error("mRPI approximation: no s <= max_s satisfies the contraction test");

  Polytope F = sys.W;
  MatrixXd Pi = MatrixXd::Identity(n, n);
  for (int i = 1; i < s; ++i) {
    Pi = AK * Pi;
    F = minkowski_sum(F, affine_image(sys.W, Pi));
  }
  Polytope O = affine_image(F, MatrixXd::Identity(n, n) / (1.0 - alpha));
  if (info) *info = {s, alpha};
  return TerminalPair::make(std::move(O), K);
}

const char* to_string(NormMode m) { return m == NormMode::Euclidean ? "euclidean" : "polyhedral-inf"; }

double stage_cost_value(const StageCost& cost, const TerminalPair& tp, const VectorXd& x, const VectorXd& u) {
  auto dist = [&](const Polytope& P, const VectorXd& v) {
    return cost.mode == NormMode::Euclidean ? set_distance(P, v) : set_distance_inf(P, v);
  };
  double h = cost.q * dist(tp.O, x);
  if (cost.r != 0.0) h += cost.r * dist(tp.KO, u);
  return h;
}

namespace {

using conic::ConvexProgram;
using conic::LinExpr;
using conic::LinExprVec;

// Returns an expression t with t >= dist(v, P) enforced.
LinExpr distance_epigraph(ConvexProgram& prog, NormMode mode, const Polytope& P, const LinExprVec& v,
                          const std::string& tag) {
  auto t = prog.add_variable(tag + "_dist", 1);
  const LinExpr T = LinExpr::term(t[0]);
  if (P.dim() == 1) {
    prog.add_less_equal(v[0] - P.upper()[0] - T);
    prog.add_less_equal(P.lower()[0] - v[0] - T);
    prog.add_less_equal(-T);
    return T;
  }
  LinExprVec diff;
  if (P.num_vertices() == 1) {
    diff = v - P.vertex(0);
  } else {
    auto mu = prog.add_variable(tag + "_mu", P.num_vertices());
    prog.add_nonnegative(mu);
    LinExpr sum;
    for (int i = 0; i < mu.size; ++i) sum += LinExpr::term(mu[i]);
    prog.add_equality(sum - 1.0);
    diff = v - P.vertices() * conic::as_exprs(mu);
  }
  if (mode == NormMode::Euclidean) {
    prog.add_second_order_cone(diff, T);
  } else {
    for (const auto& e : diff) {
      prog.add_less_equal(e - T);
      prog.add_less_equal(-e - T);
    }
  }
  return T;
}

}  // namespace

conic::Variable stage_cost_epigraph(const StageCost& cost, const TerminalPair& tp, ConvexProgram& prog,
                                    const LinExprVec& x, const LinExprVec& u) {
  if (static_cast<int>(x.size()) != tp.O.dim() || static_cast<int>(u.size()) != tp.KO.dim())
    throw std::invalid_argument("stage_cost_epigraph: dimension mismatch");
  LinExpr bound = cost.q * distance_epigraph(prog, cost.mode, tp.O, x, "hx");
  if (cost.r != 0.0) bound += cost.r * distance_epigraph(prog, cost.mode, tp.KO, u, "hu");
  auto h = prog.add_variable("h", 1);
  prog.add_less_equal(bound - LinExpr::term(h[0]));
  return h;
}

}  // namespace rlmpc
