#include "rlmpc/roa.hpp"

#include "rlmpc/errors.hpp"
#include "rlmpc/parallel.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>

namespace rlmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

RoaQuery RoaQuery::make(const VectorXd& d, int N_t) {
  const double nd = d.norm();
  if (!(nd > 0.0)) throw std::invalid_argument("RoaQuery: direction must be nonzero");
  RoaQuery q;
  q.d = d / nd;
  q.N_t = N_t;
  const int n = static_cast<int>(d.size());
  Eigen::HouseholderQR<MatrixXd> qr(q.d);
  const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, n);
  q.perp = Q.rightCols(n - 1);
  return q;
}

RoaQueryResult extreme_initial_state(const SystemModel& sys, const PreparedSafeSet& ss_prev, const StageCost& cost,
                                     const TerminalPair& tp, const RoaQuery& q, int N,
                                     const conic::SolverSettings& settings) {
  if (q.d.size() != sys.n()) throw std::invalid_argument("extreme_initial_state: direction dimension mismatch");
  FtocpOptions opt;
  opt.free_x0 = FreeInitialState{q.d, q.perp};
  const FtocpProgram fp = build_ftocp(sys, ss_prev, cost, tp, VectorXd(), N, q.N_t, opt);
  const FtocpSolution sol = solve_ftocp(sys, ss_prev, fp, settings);
  RoaQueryResult out;
  out.query = q;
  out.status = sol.status;
  if (sol.ok()) out.x0 = sol.node_states.col(0);
  return out;
}

std::vector<VectorXd> uniform_directions(int k) {
  std::vector<VectorXd> out;
  for (int i = 0; i < k; ++i) {
    const double a = 2.0 * std::numbers::pi * i / k;
    out.push_back(Eigen::Vector2d(std::cos(a), std::sin(a)));
  }
  return out;
}

RoaApproximation approximate_roa(const SystemModel& sys, const PreparedSafeSet& ss_prev, const StageCost& cost,
                                 const TerminalPair& tp, const std::vector<VectorXd>& directions, int N, int jobs) {
  if (directions.empty()) throw std::invalid_argument("approximate_roa: empty direction set");
  const int per = N;
  RoaApproximation out;
  out.queries.resize(directions.size() * per);
  parallel_for(static_cast<int>(out.queries.size()), jobs, [&](int idx) {
    const int di = idx / per, N_t = 1 + idx % per;
    out.queries[idx] = extreme_initial_state(sys, ss_prev, cost, tp, RoaQuery::make(directions[di], N_t), N);
    out.queries[idx].direction = di;
  });
  std::vector<VectorXd> pts;
  for (const auto& q : out.queries)
    if (q.ok()) pts.push_back(q.x0);
  if (pts.empty()) throw EmptyApproximation("approximate_roa: every extreme-state query was infeasible");
  out.hull = convex_hull(pts);
  return out;
}

VectorXd select_initial_condition(const SystemModel& sys, const PreparedSafeSet& ss_prev, const StageCost& cost,
                                  const TerminalPair& tp, int j, int N) {
  VectorXd d = VectorXd::Zero(sys.n());
  d[0] = (j % 2 == 0) ? 1.0 : -1.0;
  const auto r = extreme_initial_state(sys, ss_prev, cost, tp, RoaQuery::make(d, N), N);
  if (!r.ok()) {
    std::ostringstream os;
    os << "initial-condition query for iteration " << j << " is infeasible";
    throw AllInfeasible(os.str());
  }
  return r.x0;
}

}  // namespace rlmpc
