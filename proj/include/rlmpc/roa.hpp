#pragma once

#include "rlmpc/lmpc.hpp"
#include "rlmpc/polytope.hpp"

#include <Eigen/Core>

#include <vector>

namespace rlmpc {

struct RoaQuery {
  Eigen::VectorXd d;     // unit direction
  Eigen::MatrixXd perp;  // n x (n-1), orthonormal, orthogonal to d
  int N_t = 0;

  /// Normalizes d and completes it to an orthonormal basis.
  static RoaQuery make(const Eigen::VectorXd& d, int N_t);
};

struct RoaQueryResult {
  int direction = 0;  // index into the direction list
  RoaQuery query;
  conic::SolveStatus status = conic::SolveStatus::Infeasible;
  Eigen::VectorXd x0;

  bool ok() const { return status == conic::SolveStatus::Optimal; }
};

/// min d'x0 s.t. perp'x0 = 0 and the FTOCP constraints with N_t = q.N_t.
RoaQueryResult extreme_initial_state(const SystemModel& sys, const PreparedSafeSet& ss_prev, const StageCost& cost,
                                     const TerminalPair& tp, const RoaQuery& q, int N,
                                     const conic::SolverSettings& settings = {});

struct RoaApproximation {
  Polytope hull = Polytope::point(Eigen::VectorXd::Zero(1));
  std::vector<RoaQueryResult> queries;  // ordered by (direction, N_t)
};

/// k unit vectors at angles 2 pi i / k (planar systems only).
std::vector<Eigen::VectorXd> uniform_directions(int k);

/// Every direction with every N_t in {1..N}; hull of the feasible optima.
/// Throws EmptyApproximation when all queries are infeasible.
RoaApproximation approximate_roa(const SystemModel& sys, const PreparedSafeSet& ss_prev, const StageCost& cost,
                                 const TerminalPair& tp, const std::vector<Eigen::VectorXd>& directions, int N,
                                 int jobs = 1);

/// d^j = (-1)^j e_1 with N_t = N; throws AllInfeasible when the query is infeasible.
Eigen::VectorXd select_initial_condition(const SystemModel& sys, const PreparedSafeSet& ss_prev,
                                         const StageCost& cost, const TerminalPair& tp, int j, int N);

}  // namespace rlmpc
