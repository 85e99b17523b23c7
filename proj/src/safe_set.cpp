#include "rlmpc/safe_set.hpp"

#include "rlmpc/parallel.hpp"
#include "rlmpc/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rlmpc {

using conic::ConvexProgram;
using conic::LinExpr;
using Eigen::MatrixXd;
using Eigen::VectorXd;

int tree_offset(int l, int k) {
  int off = 0, p = 1;
  for (int i = 0; i < k; ++i) {
    off += p;
    p *= l;
  }
  return off;
}

int tree_size(int l, int N) { return tree_offset(l, N + 1); }

std::vector<int> ScenarioTree::depth_nodes(int k) const {
  std::vector<int> out;
  if (!layered) {
    const int off = tree_offset(branching, k);
    const int cnt = tree_offset(branching, k + 1) - off;
    out.resize(cnt);
    std::iota(out.begin(), out.end(), off);
    return out;
  }
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
    if (nodes[i].depth == k) out.push_back(i);
  return out;
}

std::vector<int> tree_path(const ScenarioTree& tree, int node) {
  std::vector<int> path;
  for (int v = node; v >= 0 && tree.nodes[v].parent >= 0; v = tree.nodes[v].parent) path.push_back(tree.nodes[v].w_index);
  std::reverse(path.begin(), path.end());
  return path;
}

void validate_tree(const SystemModel& sys, const ScenarioTree& tree, double tol) {
  auto fail = [&](const std::string& msg) {
    std::ostringstream os;
    os << "scenario tree (iteration " << tree.iteration << ", t = " << tree.time << "): " << msg;
    throw TreeValidationError(os.str());
  };
  if (tree.nodes.empty()) fail("no nodes");
  if (!tree.layered) {
    const int l = tree.branching;
    if (l != sys.l()) fail("branching factor differs from the number of W vertices");
    if (static_cast<int>(tree.nodes.size()) != tree_size(l, tree.horizon)) fail("node count is not 1 + l + ... + l^N");
    for (int k = 0; k <= tree.horizon; ++k) {
      const int off = tree_offset(l, k);
      for (int p = 0; p < tree_offset(l, k + 1) - off; ++p) {
        const ScenarioNode& nd = tree.nodes[off + p];
        if (nd.depth != k) fail("node depth does not match its position");
        if (k == 0) {
          if (nd.parent != -1) fail("root has a parent");
          continue;
        }
        const int parent = tree_offset(l, k - 1) + p / l;
        if (nd.parent != parent || nd.w_index != p % l) fail("parent link does not match the path layout");
        const ScenarioNode& pa = tree.nodes[parent];
        const VectorXd succ = sys.step(pa.state, pa.input, sys.W.vertex(nd.w_index));
        const double err = (succ - nd.state).lpNorm<Eigen::Infinity>();
        if (err > 1e-9 * (1.0 + succ.lpNorm<Eigen::Infinity>())) {
          std::ostringstream os;
          os << "node " << off + p << " violates the dynamics by " << err;
          fail(os.str());
        }
      }
    }
  }
  for (int i = 0; i < static_cast<int>(tree.nodes.size()); ++i) {
    const ScenarioNode& nd = tree.nodes[i];
    if (nd.state.size() != sys.n() || (nd.depth < tree.horizon && nd.input.size() != sys.d()))
      fail("node dimension mismatch");
    if (!sys.X_h.contains(nd.state, tol)) {
      std::ostringstream os;
      os << "node " << i << " state outside X";
      fail(os.str());
    }
    if (nd.depth < tree.horizon && !sys.U_h.contains(nd.input, tol)) {
      std::ostringstream os;
      os << "node " << i << " input outside U";
      fail(os.str());
    }
  }
}

namespace {

// min c.lambda over the simplex with ||V lambda - x||_inf <= relax (equality when relax = 0).
QueryResult interpolation_lp(const MatrixXd& V, const VectorXd& c, const VectorXd& x, double relax) {
  QueryResult out;
  const int C = static_cast<int>(V.cols());
  if (C == 0) return out;
  ConvexProgram prog;
  auto lam = prog.add_variable("lambda", C);
  prog.add_nonnegative(lam);
  LinExpr sum(-1.0), obj;
  for (int i = 0; i < C; ++i) {
    sum.add_term(lam[i], 1.0);
    if (c[i] != 0.0) obj.add_term(lam[i], c[i]);
  }
  prog.add_equality(sum);
  prog.add_objective(obj);
  for (int r = 0; r < V.rows(); ++r) {
    LinExpr row(-x[r]);
    for (int i = 0; i < C; ++i)
      if (V(r, i) != 0.0) row.add_term(lam[i], V(r, i));
    if (relax > 0.0) {
      prog.add_less_equal(row - relax);
      prog.add_less_equal(-row - relax);
    } else {
      prog.add_equality(row);
    }
  }
  conic::SolverSettings st;
  st.backend = conic::Backend::Simplex;
  const auto res = conic::solve(prog, st);
  out.status = res.status;
  if (res.optimal()) {
    out.lambda = res.value(lam);
    out.value = c.dot(out.lambda);
  }
  return out;
}

}  // namespace

SafeSetData init_safe_set(const TerminalPair& tp) {
  SafeSetData ss;
  ss.X = tp.O.vertices();
  ss.U = tp.K * ss.X;
  ss.J = VectorXd::Zero(ss.X.cols());
  ss.iteration = 0;
  ss.tags.assign(ss.X.cols(), ColumnTag{0, -1, 0, {}});
  return ss;
}

QueryResult q_evaluate(const SafeSetData& ss, const VectorXd& x, double relax_tol) {
  if (x.size() != ss.n()) throw std::invalid_argument("q_evaluate: dimension mismatch");
  QueryResult q = interpolation_lp(ss.X, ss.J, x, 0.0);
  if (!q.ok() && relax_tol > 0.0 && q.status == conic::SolveStatus::Infeasible)
    q = interpolation_lp(ss.X, ss.J, x, relax_tol);
  if (q.status == conic::SolveStatus::NumericalFailure)
    throw SolverFailure("q_evaluate: solver failure", "");
  return q;
}

VectorXd safe_policy(const SafeSetData& ss, const VectorXd& x, QueryResult& query) {
  query = q_evaluate(ss, x);
  if (!query.ok()) {
    std::ostringstream os;
    os << "state (" << x.transpose() << ") is outside CS^" << ss.iteration;
    throw NotInSafeSet(os.str());
  }
  return ss.U * query.lambda;
}

VectorXd safe_policy(const SafeSetData& ss, const VectorXd& x) {
  QueryResult q;
  return safe_policy(ss, x, q);
}

std::vector<double> compute_cost_to_go(const SystemModel& sys, const ScenarioTree& tree, const SafeSetData& ss_prev,
                                       const StageCost& cost, const TerminalPair& tp, int jobs) {
  std::vector<double> J(tree.nodes.size(), 0.0);
  const int N = tree.horizon;

  const auto leaves = tree.depth_nodes(N);
  parallel_for(static_cast<int>(leaves.size()), jobs, [&](int i) {
    const auto& nd = tree.nodes[leaves[i]];
    const QueryResult q = q_evaluate(ss_prev, nd.state, 1e-6);
    if (!q.ok()) {
      std::ostringstream os;
      os << "leaf " << leaves[i] << " of the tree at t = " << tree.time << " lies outside CS^" << ss_prev.iteration;
      throw TreeValidationError(os.str());
    }
    J[leaves[i]] = q.value;
  });

  for (int k = N - 1; k >= 0; --k) {
    const auto next = tree.depth_nodes(k + 1);
    MatrixXd Vn(sys.n(), next.size());
    VectorXd Jn(next.size());
    for (int r = 0; r < static_cast<int>(next.size()); ++r) {
      Vn.col(r) = tree.nodes[next[r]].state;
      Jn[r] = J[next[r]];
    }
    const auto layer = tree.depth_nodes(k);
    parallel_for(static_cast<int>(layer.size()), jobs, [&](int i) {
      const auto& nd = tree.nodes[layer[i]];
      // Nominal successor; inside the hull of the next layer since 0 is in W.
      const VectorXd succ = sys.A * nd.state + sys.B * nd.input;
      QueryResult q = interpolation_lp(Vn, Jn, succ, 0.0);
      if (!q.ok()) q = interpolation_lp(Vn, Jn, succ, 1e-6);
      if (!q.ok()) {
        std::ostringstream os;
        os << "nominal successor of node " << layer[i] << " (t = " << tree.time
           << ") is not covered by the next layer of the tree";
        throw TreeValidationError(os.str());
      }
      J[layer[i]] = stage_cost_value(cost, tp, nd.state, nd.input) + q.value;
    });
  }
  return J;
}

SafeSetData extend_safe_set(const SafeSetData& ss_prev, const std::vector<ScenarioTree>& trees,
                            const SystemModel& sys, const StageCost& cost, const TerminalPair& tp, int jobs) {
  SafeSetData out = ss_prev;
  if (trees.empty()) return out;
  int added = 0;
  for (const auto& tr : trees) {
    validate_tree(sys, tr);
    for (const auto& nd : tr.nodes) added += nd.depth < tr.horizon;
  }
  const int C0 = ss_prev.columns();
  out.X.conservativeResize(sys.n(), C0 + added);
  out.U.conservativeResize(sys.d(), C0 + added);
  out.J.conservativeResize(C0 + added);
  int c = C0;
  int iteration = ss_prev.iteration;
  for (const auto& tr : trees) {
    const auto J = compute_cost_to_go(sys, tr, ss_prev, cost, tp, jobs);
    for (int i = 0; i < static_cast<int>(tr.nodes.size()); ++i) {
      const auto& nd = tr.nodes[i];
      if (nd.depth >= tr.horizon) continue;
      out.X.col(c) = nd.state;
      out.U.col(c) = nd.input;
      out.J[c] = std::max(0.0, J[i]);
      out.tags.push_back({tr.iteration, tr.time, nd.depth, tr.layered ? std::vector<int>{} : tree_path(tr, i)});
      ++c;
    }
    iteration = std::max(iteration, tr.iteration);
  }
  out.iteration = iteration;
  return out;
}

std::vector<int> cost_support_columns(const SafeSetData& ss) {
  const int C = ss.columns();
  std::vector<char> keep(C, 1);
  for (int i = 0; i < C; ++i) {
    std::vector<int> others;
    for (int k = 0; k < C; ++k)
      if (k != i && keep[k]) others.push_back(k);
    if (others.empty()) continue;
    MatrixXd V(ss.n(), others.size());
    VectorXd c(others.size());
    for (int k = 0; k < static_cast<int>(others.size()); ++k) {
      V.col(k) = ss.X.col(others[k]);
      c[k] = ss.J[others[k]];
    }
    const QueryResult q = interpolation_lp(V, c, ss.X.col(i), 0.0);
    if (q.ok() && q.value <= ss.J[i] + 1e-9) keep[i] = 0;
  }
  std::vector<int> out;
  for (int i = 0; i < C; ++i)
    if (keep[i]) out.push_back(i);
  return out;
}

SafeSetData select_columns(const SafeSetData& ss, const std::vector<int>& cols) {
  SafeSetData out;
  out.iteration = ss.iteration;
  out.X.resize(ss.n(), cols.size());
  out.U.resize(ss.d(), cols.size());
  out.J.resize(cols.size());
  for (int k = 0; k < static_cast<int>(cols.size()); ++k) {
    out.X.col(k) = ss.X.col(cols[k]);
    out.U.col(k) = ss.U.col(cols[k]);
    out.J[k] = ss.J[cols[k]];
    if (cols[k] < static_cast<int>(ss.tags.size())) out.tags.push_back(ss.tags[cols[k]]);
  }
  return out;
}

SafeSetData prune_columns(const SafeSetData& ss) { return select_columns(ss, cost_support_columns(ss)); }

std::vector<int> lifted_vertex_columns(const SafeSetData& ss) {
  MatrixXd P(ss.n() + ss.d(), ss.columns());
  P << ss.X, ss.U;
  auto idx = hull_vertex_indices(P);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace rlmpc
