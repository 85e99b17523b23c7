#pragma once

#include "rlmpc/conic.hpp"
#include "rlmpc/errors.hpp"
#include "rlmpc/system_model.hpp"

#include <Eigen/Core>

#include <vector>

namespace rlmpc {

struct ScenarioNode {
  Eigen::VectorXd state;
  Eigen::VectorXd input;
  int depth = 0;
  int parent = -1;   // -1 for the root and for layered trees
  int w_index = -1;  // disturbance vertex on the incoming edge
};

/// Vertices of the k-step robust reachable sets predicted at time t of
/// iteration j, with the policy inputs evaluated at each vertex.
///
/// A full tree stores every disturbance-vertex path: the node at depth k with
/// path p (base-l digits, first disturbance most significant) sits at index
/// offset(k) + p with offset(k) = 1 + l + ... + l^{k-1}.
/// A layered tree only stores, per depth, points whose convex hull contains
/// the reachable set at that depth; parent links are absent.
struct ScenarioTree {
  std::vector<ScenarioNode> nodes;
  int horizon = 0;    // N
  int branching = 1;  // l
  int time = 0;       // root time t
  int iteration = 0;  // j
  bool layered = false;

  /// Node indices at depth k, in storage order.
  std::vector<int> depth_nodes(int k) const;
  int leaf_count() const { return static_cast<int>(depth_nodes(horizon).size()); }
};

/// 1 + l + ... + l^{k-1}.
int tree_offset(int l, int k);
/// Number of nodes of a full tree with branching l and depth N.
int tree_size(int l, int N);
/// Disturbance-vertex indices along the path of a full-tree node, root first.
std::vector<int> tree_path(const ScenarioTree& tree, int node);

/// Checks dynamics (full trees), branching and X/U membership; throws TreeValidationError.
void validate_tree(const SystemModel& sys, const ScenarioTree& tree, double membership_tol = 1e-6);

struct ColumnTag {
  int iteration = 0;
  int time = -1;  // -1 for columns coming from O
  int depth = 0;
  std::vector<int> path;
};

/// Columns of X^j, U^j and J^j; CS^j is the convex hull of the X columns.
struct SafeSetData {
  Eigen::MatrixXd X;
  Eigen::MatrixXd U;
  Eigen::VectorXd J;
  int iteration = 0;
  std::vector<ColumnTag> tags;

  int columns() const { return static_cast<int>(X.cols()); }
  int n() const { return static_cast<int>(X.rows()); }
  int d() const { return static_cast<int>(U.rows()); }
};

struct QueryResult {
  conic::SolveStatus status = conic::SolveStatus::Infeasible;
  double value = 0.0;
  Eigen::VectorXd lambda;

  bool ok() const { return status == conic::SolveStatus::Optimal; }
};

/// CS^0 = O with inputs K v and zero costs.
SafeSetData init_safe_set(const TerminalPair& tp);

/// Q^j(x) = min J.lambda  s.t.  X lambda = x, lambda >= 0, 1'lambda = 1.
/// With relax_tol > 0 the equality is relaxed to ||X lambda - x||_inf <= relax_tol
/// when the exact program is infeasible.
QueryResult q_evaluate(const SafeSetData& ss, const Eigen::VectorXd& x, double relax_tol = 0.0);

/// kappa(x) = U lambda* ; throws NotInSafeSet when x is outside CS^j.
Eigen::VectorXd safe_policy(const SafeSetData& ss, const Eigen::VectorXd& x);
/// Same, also returning the query so callers can reuse Q and lambda.
Eigen::VectorXd safe_policy(const SafeSetData& ss, const Eigen::VectorXd& x, QueryResult& query);

/// Backward cost-to-go pass over one tree; returns one value per node
/// (leaves get Q^{j-1}, interior nodes the interpolation LP over the next layer).
std::vector<double> compute_cost_to_go(const SystemModel& sys, const ScenarioTree& tree, const SafeSetData& ss_prev,
                                       const StageCost& cost, const TerminalPair& tp, int jobs = 1);

/// Appends every node of depth < N of each tree to the previous columns.
SafeSetData extend_safe_set(const SafeSetData& ss_prev, const std::vector<ScenarioTree>& trees,
                            const SystemModel& sys, const StageCost& cost, const TerminalPair& tp, int jobs = 1);

/// Drops columns whose (x, J) is matched or beaten by a convex combination of
/// the remaining columns. Q^j and CS^j are unchanged.
SafeSetData prune_columns(const SafeSetData& ss);

/// Columns that are vertices of conv{(X_i, U_i)}; enough for every constraint
/// of the form (x, u) = (X, U) lambda.
std::vector<int> lifted_vertex_columns(const SafeSetData& ss);

/// Columns kept by prune_columns; enough to evaluate Q^j exactly.
std::vector<int> cost_support_columns(const SafeSetData& ss);

/// Restriction to a subset of columns (in the given order).
SafeSetData select_columns(const SafeSetData& ss, const std::vector<int>& cols);

}  // namespace rlmpc
