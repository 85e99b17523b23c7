#include "rlmpc/lmpc.hpp"

#include "rlmpc/errors.hpp"
#include "rlmpc/parallel.hpp"
#include "rlmpc/polytope.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <sstream>
#include <string>

namespace rlmpc {

using conic::ConvexProgram;
using conic::LinExpr;
using conic::LinExprVec;
using conic::Variable;
using Eigen::MatrixXd;
using Eigen::VectorXd;

PreparedSafeSet::PreparedSafeSet(SafeSetData ss) : ss_(std::make_shared<const SafeSetData>(std::move(ss))) {
  tail_ = lifted_vertex_columns(*ss_);
  leaf_ = hull_vertex_indices(ss_->X);
  std::sort(leaf_.begin(), leaf_.end());
  term_ = cost_support_columns(*ss_);
}

VectorXd ColumnWeights::dense(int columns) const {
  VectorXd v = VectorXd::Zero(columns);
  for (size_t i = 0; i < index.size(); ++i) v[index[i]] = value[i];
  return v;
}

namespace {

std::string name_of(const char* base, int a, int b = -1) {
  std::string s = base;
  s += '_' + std::to_string(a);
  if (b >= 0) s += '_' + std::to_string(b);
  return s;
}

// lambda >= 0, 1'lambda = 1, X_S lambda = x and optionally U_S lambda = u.
Variable add_lambda(ConvexProgram& P, const std::string& name, const SafeSetData& ss, const std::vector<int>& cols,
                    const LinExprVec& x, const LinExprVec* u) {
  const Variable lam = P.add_variable(name, static_cast<int>(cols.size()));
  P.add_nonnegative(lam);
  LinExpr sum(-1.0);
  for (int i = 0; i < lam.size; ++i) sum.add_term(lam[i], 1.0);
  P.add_equality(sum);
  auto rows = [&](const MatrixXd& V, const LinExprVec& target) {
    for (int r = 0; r < V.rows(); ++r) {
      LinExpr e = -target[r];
      for (int i = 0; i < lam.size; ++i) {
        const double v = V(r, cols[i]);
        if (v != 0.0) e.add_term(lam[i], v);
      }
      P.add_equality(e);
    }
  };
  rows(ss.X, x);
  if (u) rows(ss.U, *u);
  return lam;
}

void add_membership(ConvexProgram& P, const Halfspaces& Hs, const LinExprVec& x) {
  for (int r = 0; r < Hs.count(); ++r) {
    LinExpr e(-Hs.h[r]);
    for (int c = 0; c < Hs.H.cols(); ++c)
      if (Hs.H(r, c) != 0.0) e += Hs.H(r, c) * x[c];
    P.add_less_equal(e);
  }
}

void add_equal(ConvexProgram& P, const LinExprVec& a, const LinExprVec& b) {
  for (size_t i = 0; i < a.size(); ++i) P.add_equality(a[i] - b[i]);
}

// Path digits of node p at depth k (first disturbance first).
std::vector<int> path_digits(int p, int k, int l) {
  std::vector<int> out(k);
  for (int s = k - 1; s >= 0; --s) {
    out[s] = p % l;
    p /= l;
  }
  return out;
}

ColumnWeights to_weights(const VectorXd& lam, const std::vector<int>& cols) {
  ColumnWeights w;
  for (int i = 0; i < lam.size(); ++i) {
    if (lam[i] > 1e-12) {
      w.index.push_back(cols[i]);
      w.value.push_back(lam[i]);
    }
  }
  return w;
}

}  // namespace

FtocpProgram build_ftocp(const SystemModel& sys, const PreparedSafeSet& prep, const StageCost& cost,
                         const TerminalPair& tp, const VectorXd& x_t, int N, int N_t, const FtocpOptions& opt) {
  if (N < 1) throw std::invalid_argument("build_ftocp: horizon must be at least 1");
  if (N_t < 0 || N_t > N) throw std::invalid_argument("build_ftocp: N_t outside {0..N}");
  const SafeSetData& ss = prep.data();
  const int n = sys.n(), d = sys.d(), l = sys.l();
  if (ss.n() != n || ss.d() != d) throw std::invalid_argument("build_ftocp: safe set dimension mismatch");
  if (!opt.free_x0 && x_t.size() != n) throw std::invalid_argument("build_ftocp: state dimension mismatch");

  FtocpProgram fp;
  fp.N = N;
  fp.N_t = N_t;
  fp.l = l;
  ConvexProgram& P = fp.program;

  LinExprVec root;
  if (opt.free_x0) {
    fp.x0 = P.add_variable("x0", n);
    root = conic::as_exprs(fp.x0);
    for (int c = 0; c < opt.free_x0->perp.cols(); ++c) {
      LinExpr e;
      for (int i = 0; i < n; ++i) e += opt.free_x0->perp(i, c) * root[i];
      P.add_equality(e);
    }
  } else {
    fp.x_t = x_t;
    root = conic::constant_exprs(x_t);
  }

  fp.g.resize(N_t);
  fp.M.resize(N_t);
  for (int k = 0; k < N_t; ++k) {
    fp.g[k] = P.add_variable(name_of("g", k), d);
    for (int s = 0; s < k; ++s) fp.M[k].push_back(P.add_variable(name_of("M", k, s), d * n));
  }

  const int nodes = tree_size(l, N);
  fp.node_x.resize(nodes);
  fp.node_u.resize(nodes);
  fp.node_lambda.resize(nodes);
  fp.node_lambda_cols.resize(nodes);
  std::vector<LinExprVec> xe(nodes), ue(nodes);
  for (int k = 0; k <= N; ++k) {
    const int off = tree_offset(l, k);
    const int count = tree_offset(l, k + 1) - off;
    for (int p = 0; p < count; ++p) {
      const int i = off + p;
      if (k == 0) {
        xe[i] = root;
      } else {
        const int parent = tree_offset(l, k - 1) + p / l;
        fp.node_x[i] = P.add_variable(name_of("x", i), n);
        xe[i] = conic::as_exprs(fp.node_x[i]);
        add_equal(P, xe[i], sys.A * xe[parent] + sys.B * ue[parent] + VectorXd(sys.W.vertex(p % l)));
      }
      if (k == N) {
        fp.node_lambda_cols[i] = prep.leaf_columns();
        fp.node_lambda[i] = add_lambda(P, name_of("lam", i), ss, prep.leaf_columns(), xe[i], nullptr);
        continue;
      }
      fp.node_u[i] = P.add_variable(name_of("u", i), d);
      ue[i] = conic::as_exprs(fp.node_u[i]);
      if (k < N_t) {
        LinExprVec pi = conic::as_exprs(fp.g[k]);
        const auto digits = path_digits(p, k, l);
        for (int s = 0; s < k; ++s) {
          const VectorXd w = sys.W.vertex(digits[s]);
          for (int r = 0; r < d; ++r)
            for (int c = 0; c < n; ++c)
              if (w[c] != 0.0) pi[r].add_term(fp.M[k][s][r * n + c], w[c]);
        }
        add_equal(P, ue[i], pi);
        add_membership(P, sys.U_h, ue[i]);
        if (k > 0 || opt.free_x0) add_membership(P, sys.X_h, xe[i]);
      } else {
        fp.node_lambda_cols[i] = prep.tail_columns();
        fp.node_lambda[i] = add_lambda(P, name_of("lam", i), ss, prep.tail_columns(), xe[i], &ue[i]);
      }
    }
  }

  // Nominal chain (w = 0) carrying the cost.
  fp.nom_x.resize(N + 1);
  fp.nom_u.resize(N);
  fp.nom_lambda.resize(N);
  LinExprVec xk = root;
  LinExpr objective;
  for (int k = 0; k < N; ++k) {
    LinExprVec uk;
    if (k < N_t) {
      uk = conic::as_exprs(fp.g[k]);
      fp.nom_u[k] = fp.g[k];
    } else if (k == 0) {
      uk = ue[0];
      fp.nom_u[0] = fp.node_u[0];
      fp.nom_lambda[0] = fp.node_lambda[0];
    } else {
      fp.nom_u[k] = P.add_variable(name_of("ubar", k), d);
      uk = conic::as_exprs(fp.nom_u[k]);
      fp.nom_lambda[k] = add_lambda(P, name_of("lambar", k), ss, prep.tail_columns(), xk, &uk);
    }
    if (!opt.free_x0) {
      fp.stage_h.push_back(stage_cost_epigraph(cost, tp, P, xk, uk));
      objective += LinExpr::term(fp.stage_h.back()[0]);
    }
    fp.nom_x[k + 1] = P.add_variable(name_of("xbar", k + 1), n);
    const LinExprVec next = conic::as_exprs(fp.nom_x[k + 1]);
    add_equal(P, next, sys.A * xk + sys.B * uk);
    xk = next;
  }
  fp.term_lambda = add_lambda(P, "lam_term", ss, prep.terminal_columns(), xk, nullptr);
  if (opt.free_x0) {
    for (int i = 0; i < n; ++i) objective += opt.free_x0->d[i] * root[i];
  } else {
    const auto& tc = prep.terminal_columns();
    for (size_t i = 0; i < tc.size(); ++i)
      if (ss.J[tc[i]] != 0.0) objective.add_term((*fp.term_lambda)[static_cast<int>(i)], ss.J[tc[i]]);
  }
  P.add_objective(objective);
  return fp;
}

FtocpSolution solve_ftocp(const SystemModel& sys, const PreparedSafeSet& prep, const FtocpProgram& fp,
                          const conic::SolverSettings& settings) {
  FtocpSolution sol;
  sol.N = fp.N;
  sol.N_t = fp.N_t;
  sol.l = fp.l;
  const auto res = conic::solve(fp.program, settings);
  sol.status = res.status;
  sol.solve_seconds = res.solve_seconds;
  if (res.status == conic::SolveStatus::NumericalFailure) {
    std::ostringstream os;
    os << "FTOCP (N = " << fp.N << ", N_t = " << fp.N_t << ") solver failure";
    throw SolverFailure(os.str(), fp.program.to_text());
  }
  if (!res.optimal()) return sol;

  const SafeSetData& ss = prep.data();
  const int n = sys.n(), d = sys.d();
  const int nodes = static_cast<int>(fp.node_x.size());
  sol.cost = res.objective;

  sol.g.resize(fp.N_t);
  sol.M.resize(fp.N_t);
  for (int k = 0; k < fp.N_t; ++k) {
    sol.g[k] = res.value(fp.g[k]);
    for (const auto& Mv : fp.M[k]) {
      const VectorXd m = res.value(Mv);
      MatrixXd Mk(d, n);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < n; ++c) Mk(r, c) = m[r * n + c];
      sol.M[k].push_back(Mk);
    }
  }

  const VectorXd x0 = fp.x0.size > 0 ? VectorXd(res.value(fp.x0)) : fp.x_t;
  sol.node_states.resize(n, nodes);
  sol.node_inputs = MatrixXd::Zero(d, nodes);
  sol.node_lambda.resize(nodes);
  sol.node_states.col(0) = x0;
  for (int i = 0; i < nodes; ++i) {
    if (i > 0) sol.node_states.col(i) = res.value(fp.node_x[i]);
    if (fp.node_u[i].size > 0) sol.node_inputs.col(i) = res.value(fp.node_u[i]);
    if (fp.node_lambda[i]) sol.node_lambda[i] = to_weights(res.value(*fp.node_lambda[i]), fp.node_lambda_cols[i]);
  }

  sol.nominal_states.resize(n, fp.N + 1);
  sol.nominal_inputs.resize(d, fp.N);
  sol.nominal_lambda.resize(fp.N);
  sol.nominal_states.col(0) = x0;
  for (int k = 0; k < fp.N; ++k) {
    sol.nominal_inputs.col(k) = res.value(fp.nom_u[k]);
    sol.nominal_states.col(k + 1) = res.value(fp.nom_x[k + 1]);
    if (fp.nom_lambda[k]) sol.nominal_lambda[k] = to_weights(res.value(*fp.nom_lambda[k]), prep.tail_columns());
  }
  sol.terminal_lambda = to_weights(res.value(*fp.term_lambda), prep.terminal_columns());
  for (size_t i = 0; i < sol.terminal_lambda.index.size(); ++i)
    sol.terminal_cost += ss.J[sol.terminal_lambda.index[i]] * sol.terminal_lambda.value[i];
  for (const auto& h : fp.stage_h) sol.stage_costs.push_back(res.value(h)[0]);
  return sol;
}

NStepPolicy make_policy(const SystemModel& sys, const FtocpSolution& sol, const VectorXd& x_t, int time) {
  NStepPolicy pol;
  pol.N = sol.N;
  pol.N_t = sol.N_t;
  pol.time = time;
  pol.x_t = x_t;
  pol.M = sol.M;
  pol.g = sol.g;
  pol.node_inputs = sol.node_inputs;
  pol.nominal_inputs = sol.nominal_inputs;
  pol.nominal_states = sol.nominal_states;
  pol.node_lambda = sol.node_lambda;
  pol.W_vertices = sys.W.vertices();
  pol.W_is_box = sys.W.is_box();
  return pol;
}

StepResult lmpc_step(const SystemModel& sys, const PreparedSafeSet& ss_prev, const StageCost& cost,
                     const TerminalPair& tp, const VectorXd& x_t, int N, const StepOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<FtocpSolution> sols(N + 1);
  parallel_for(N + 1, opt.jobs, [&](int N_t) {
    const FtocpProgram fp = build_ftocp(sys, ss_prev, cost, tp, x_t, N, N_t);
    sols[N_t] = solve_ftocp(sys, ss_prev, fp, opt.solver);
  });

  StepResult out;
  int best = -1;
  for (int N_t = 0; N_t <= N; ++N_t) {
    out.instance_status.push_back(sols[N_t].status);
    out.instance_cost.push_back(sols[N_t].ok() ? sols[N_t].cost : std::numeric_limits<double>::infinity());
  }
  double best_cost = std::numeric_limits<double>::infinity();
  for (double c : out.instance_cost) best_cost = std::min(best_cost, c);
  if (!std::isfinite(best_cost)) {
    std::ostringstream os;
    os << "every FTOCP instance is infeasible at x = (" << x_t.transpose() << ")";
    throw AllInfeasible(os.str());
  }
  const double tie = 1e-9 * (1.0 + std::abs(best_cost));
  for (int N_t = 0; N_t <= N && best < 0; ++N_t)
    if (out.instance_cost[N_t] <= best_cost + tie) best = N_t;

  out.N_t = best;
  out.cost = sols[best].cost;
  out.solution = std::move(sols[best]);
  out.policy = make_policy(sys, out.solution, x_t, 0);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

StepResult lmpc_step(const SystemModel& sys, const SafeSetData& ss_prev, const StageCost& cost,
                     const TerminalPair& tp, const VectorXd& x_t, int N, const StepOptions& opt) {
  return lmpc_step(sys, PreparedSafeSet(ss_prev), cost, tp, x_t, N, opt);
}

VectorXd disturbance_weights(const MatrixXd& V, bool is_box, const VectorXd& w) {
  const int l = static_cast<int>(V.cols());
  if (l == 1) return VectorXd::Ones(1);
  if (is_box) {
    const VectorXd lo = V.rowwise().minCoeff(), hi = V.rowwise().maxCoeff();
    VectorXd mu = VectorXd::Ones(l);
    for (int c = 0; c < V.rows(); ++c) {
      if (hi[c] - lo[c] <= 0.0) continue;
      const double t = std::clamp((w[c] - lo[c]) / (hi[c] - lo[c]), 0.0, 1.0);
      for (int v = 0; v < l; ++v) mu[v] *= (V(c, v) >= 0.5 * (lo[c] + hi[c])) ? t : 1.0 - t;
    }
    return mu;
  }
  SafeSetData tmp;
  tmp.X = V;
  tmp.U = MatrixXd::Zero(1, l);
  tmp.J = VectorXd::Zero(l);
  const QueryResult q = q_evaluate(tmp, w, 1e-9);
  if (!q.ok()) throw std::invalid_argument("disturbance outside W");
  return q.lambda;
}

VectorXd evaluate_policy(const NStepPolicy& pol, int k, const std::vector<VectorXd>& w_history) {
  if (k < 0 || k >= pol.N) throw std::invalid_argument("evaluate_policy: k outside {0..N-1}");
  if (static_cast<int>(w_history.size()) != k) throw std::invalid_argument("evaluate_policy: history length must equal k");
  if (k < pol.N_t) {
    VectorXd u = pol.g[k];
    for (int s = 0; s < k; ++s) u += pol.M[k][s] * w_history[s];
    return u;
  }
  bool zero = true;
  for (const auto& w : w_history) zero = zero && w.isZero(0.0);
  if (zero) return pol.nominal_inputs.col(k);

  const int l = pol.branching();
  std::vector<VectorXd> mu;
  for (const auto& w : w_history) mu.push_back(disturbance_weights(pol.W_vertices, pol.W_is_box, w));
  const int off = tree_offset(l, k);
  const int count = tree_offset(l, k + 1) - off;
  VectorXd u = VectorXd::Zero(pol.node_inputs.rows());
  for (int p = 0; p < count; ++p) {
    double weight = 1.0;
    int rest = p;
    for (int s = k - 1; s >= 0 && weight != 0.0; --s) {
      weight *= mu[s][rest % l];
      rest /= l;
    }
    if (weight != 0.0) u += weight * pol.node_inputs.col(off + p);
  }
  return u;
}

ScenarioTree record_scenario_tree(const SystemModel& sys, const NStepPolicy& pol, int iteration) {
  ScenarioTree tr;
  tr.horizon = pol.N;
  tr.branching = sys.l();
  tr.time = pol.time;
  tr.iteration = iteration;
  const int l = sys.l();
  const int nodes = tree_size(l, pol.N);
  tr.nodes.resize(nodes);
  for (int k = 0; k <= pol.N; ++k) {
    const int off = tree_offset(l, k);
    for (int p = 0; p < tree_offset(l, k + 1) - off; ++p) {
      const int i = off + p;
      ScenarioNode& nd = tr.nodes[i];
      nd.depth = k;
      if (k == 0) {
        nd.state = pol.x_t;
      } else {
        nd.parent = tree_offset(l, k - 1) + p / l;
        nd.w_index = p % l;
        const ScenarioNode& pa = tr.nodes[nd.parent];
        nd.state = sys.step(pa.state, pa.input, sys.W.vertex(nd.w_index));
      }
      if (k < pol.N) nd.input = pol.node_inputs.col(i);
    }
  }
  return tr;
}

}  // namespace rlmpc
