#pragma once

#include "rlmpc/conic.hpp"
#include "rlmpc/safe_set.hpp"
#include "rlmpc/system_model.hpp"

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <vector>

namespace rlmpc {

/// CS^{j-1} data plus the column subsets used inside the FTOCP:
///  - tail: vertices of conv{(X_i, U_i)}; any (x, u) = (X, U) lambda is reachable with these alone
///  - leaf: vertices of conv{X_i}
///  - term: columns kept by pruning; Q^{j-1} is exact over them
/// Building it costs a few LPs per column, so it is done once per safe set.
class PreparedSafeSet {
 public:
  explicit PreparedSafeSet(SafeSetData ss);

  const SafeSetData& data() const { return *ss_; }
  const std::vector<int>& tail_columns() const { return tail_; }
  const std::vector<int>& leaf_columns() const { return leaf_; }
  const std::vector<int>& terminal_columns() const { return term_; }

 private:
  std::shared_ptr<const SafeSetData> ss_;
  std::vector<int> tail_, leaf_, term_;
};

/// Sparse convex weights over columns of X^{j-1} (full column indexing).
struct ColumnWeights {
  std::vector<int> index;
  std::vector<double> value;

  Eigen::VectorXd dense(int columns) const;
};

/// Free initial state: minimize d'x0 subject to perp' x0 = 0 in place of the LMPC cost.
struct FreeInitialState {
  Eigen::VectorXd d;
  Eigen::MatrixXd perp;  // n x (n-1), columns orthogonal to d
};

struct FtocpOptions {
  std::optional<FreeInitialState> free_x0;
};

/// Program and variable map of one FTOCP instance.
struct FtocpProgram {
  conic::ConvexProgram program;
  int N = 0;
  int N_t = 0;
  int l = 1;
  Eigen::VectorXd x_t;                              // fixed initial state
  conic::Variable x0;                               // only with a free initial state
  std::vector<conic::Variable> node_x, node_u;      // per tree node (node_u empty at leaves)
  std::vector<std::optional<conic::Variable>> node_lambda;
  std::vector<std::vector<int>> node_lambda_cols;   // column subset for each lambda
  std::vector<std::vector<conic::Variable>> M;      // M[k][s], s < k < N_t, row-major d x n
  std::vector<conic::Variable> g;                   // k < N_t
  std::vector<conic::Variable> nom_x, nom_u;        // nominal chain
  std::vector<std::optional<conic::Variable>> nom_lambda;
  std::optional<conic::Variable> term_lambda;
  std::vector<conic::Variable> stage_h;
};

struct FtocpSolution {
  conic::SolveStatus status = conic::SolveStatus::Infeasible;
  int N = 0;
  int N_t = 0;
  int l = 1;
  double cost = 0.0;  // C^LMPC (or direction'x0 for ROA queries)
  double terminal_cost = 0.0;
  std::vector<double> stage_costs;
  std::vector<std::vector<Eigen::MatrixXd>> M;
  std::vector<Eigen::VectorXd> g;
  Eigen::MatrixXd node_states;  // n x nodes
  Eigen::MatrixXd node_inputs;  // d x nodes (zero columns at leaves)
  std::vector<ColumnWeights> node_lambda;
  Eigen::MatrixXd nominal_states;  // n x (N+1)
  Eigen::MatrixXd nominal_inputs;  // d x N
  std::vector<ColumnWeights> nominal_lambda;
  ColumnWeights terminal_lambda;
  double solve_seconds = 0.0;

  bool ok() const { return status == conic::SolveStatus::Optimal; }
};

FtocpProgram build_ftocp(const SystemModel& sys, const PreparedSafeSet& ss_prev, const StageCost& cost,
                         const TerminalPair& tp, const Eigen::VectorXd& x_t, int N, int N_t,
                         const FtocpOptions& opt = {});

/// Throws SolverFailure (with the program dump) on NumericalFailure.
FtocpSolution solve_ftocp(const SystemModel& sys, const PreparedSafeSet& ss_prev, const FtocpProgram& fp,
                          const conic::SolverSettings& settings = {});

/// pi^{j,*}_{k|t} in evaluable form.
struct NStepPolicy {
  int N = 0;
  int N_t = 0;
  int time = 0;
  Eigen::VectorXd x_t;
  std::vector<std::vector<Eigen::MatrixXd>> M;
  std::vector<Eigen::VectorXd> g;
  Eigen::MatrixXd node_inputs;     // d x nodes, full-tree layout
  Eigen::MatrixXd nominal_inputs;  // d x N
  Eigen::MatrixXd nominal_states;  // n x (N+1)
  std::vector<ColumnWeights> node_lambda;
  Eigen::MatrixXd W_vertices;
  bool W_is_box = false;

  int branching() const { return static_cast<int>(W_vertices.cols()); }
  /// Input applied now: pi_{t|t}(x_t).
  Eigen::VectorXd first_input() const { return node_inputs.col(0); }
};

NStepPolicy make_policy(const SystemModel& sys, const FtocpSolution& sol, const Eigen::VectorXd& x_t, int time);

struct StepOptions {
  int jobs = 1;
  conic::SolverSettings solver;
};

struct StepResult {
  NStepPolicy policy;
  FtocpSolution solution;
  double cost = 0.0;  // J^LMPC_{t -> t+N}(x_t)
  int N_t = 0;
  std::vector<conic::SolveStatus> instance_status;  // indexed by N_t
  std::vector<double> instance_cost;
  double wall_seconds = 0.0;
};

/// Solves every N_t in {0..N}, returns the cheapest (ties go to the smaller N_t).
/// Throws AllInfeasible when no instance is feasible.
StepResult lmpc_step(const SystemModel& sys, const PreparedSafeSet& ss_prev, const StageCost& cost,
                     const TerminalPair& tp, const Eigen::VectorXd& x_t, int N, const StepOptions& opt = {});
StepResult lmpc_step(const SystemModel& sys, const SafeSetData& ss_prev, const StageCost& cost,
                     const TerminalPair& tp, const Eigen::VectorXd& x_t, int N, const StepOptions& opt = {});

/// Convex weights of w over the vertices of W (multilinear for boxes, LP otherwise).
Eigen::VectorXd disturbance_weights(const Eigen::MatrixXd& W_vertices, bool is_box, const Eigen::VectorXd& w);

/// pi_{k|t} at a realized history w_0..w_{k-1}.
Eigen::VectorXd evaluate_policy(const NStepPolicy& pol, int k, const std::vector<Eigen::VectorXd>& w_history);

/// Scenario tree of the policy from x_t (states forward-simulated from the stored inputs).
ScenarioTree record_scenario_tree(const SystemModel& sys, const NStepPolicy& pol, int iteration);

}  // namespace rlmpc
