#pragma once

#include "rlmpc/conic.hpp"
#include "rlmpc/polytope.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace rlmpc {

/// x+ = A x + B u + w,  x in X, u in U, w in W.
struct SystemModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Polytope X;
  Polytope U;
  Polytope W;
  Halfspaces X_h;
  Halfspaces U_h;

  /// Checks dimensions and precomputes the H-representations of X and U.
  static SystemModel make(Eigen::MatrixXd A, Eigen::MatrixXd B, Polytope X, Polytope U, Polytope W);

  int n() const { return static_cast<int>(A.rows()); }
  int d() const { return static_cast<int>(B.cols()); }
  int l() const { return W.num_vertices(); }

  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& w) const {
    return A * x + B * u + w;
  }
};

/// Structural checks: W contains the origin, X and U contain the origin.
/// Returns one message per violated assumption (empty when valid).
std::vector<std::string> check_assumptions(const SystemModel& sys);

struct TerminalPair {
  Polytope O;
  Eigen::MatrixXd K;
  Polytope KO;  // image of O under K

  static TerminalPair make(Polytope O, Eigen::MatrixXd K);
};

struct TerminalPairReport {
  bool ok = true;
  std::string violation;  // first violation, human readable
  int o_vertex = -1;      // offending vertex of O (-1 if not applicable)
  int w_vertex = -1;      // offending vertex of W
  double worst_excess = 0.0;
};

/// Robust positive invariance of O under A+BK for every W vertex, KO in U and O in X.
TerminalPairReport verify_terminal_pair(const SystemModel& sys, const TerminalPair& tp, double tol = 1e-6);

/// Riccati fixed point with weights (Q, R); returns K with u = K x.
Eigen::MatrixXd dare_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                          const Eigen::MatrixXd& R, double rel_tol = 1e-10, int max_iter = 200000);

struct MrpiInfo {
  int s = 0;
  double alpha = 0.05;
};

/// Riccati K (unit weights) and the outer mRPI approximation for A+BK.
TerminalPair synthesize_terminal_pair(const SystemModel& sys, double alpha = 0.05, int max_s = 50,
                                      MrpiInfo* info = nullptr);

enum class NormMode { Euclidean, PolyhedralInf };

const char* to_string(NormMode m);

struct StageCost {
  double q = 10.0;
  double r = 1.0;
  NormMode mode = NormMode::Euclidean;
};

/// h(x,u) = q |x|_O + r |u|_KO.
double stage_cost_value(const StageCost& cost, const TerminalPair& tp, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u);

/// Adds auxiliary variables and cone (or LP) rows to `prog` and returns a scalar
/// variable that upper-bounds h(x,u) and is tight at the optimum.
conic::Variable stage_cost_epigraph(const StageCost& cost, const TerminalPair& tp, conic::ConvexProgram& prog,
                                    const conic::LinExprVec& x, const conic::LinExprVec& u);

}  // namespace rlmpc
