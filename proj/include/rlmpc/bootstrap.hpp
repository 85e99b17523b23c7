#pragma once

#include "rlmpc/conic.hpp"
#include "rlmpc/safe_set.hpp"
#include "rlmpc/system_model.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace rlmpc {

/// Iteration-0 controller: one robust disturbance-feedback program over a long
/// horizon, u_k = g_k + sum_{s<k} M_ks w_s, with every state in X, every input
/// in U and the final state in O for all disturbance sequences.
struct BootstrapPlan {
  int horizon = 0;
  Eigen::VectorXd x0;
  std::vector<Eigen::VectorXd> g;
  std::vector<std::vector<Eigen::MatrixXd>> M;
  std::vector<std::vector<Eigen::MatrixXd>> E;  // E[k][s]: effect of w_s on x_k
  Eigen::MatrixXd nominal_states;  // n x (horizon+1)
  Eigen::MatrixXd nominal_inputs;  // d x horizon
  double cost = 0.0;               // nominal cost sum_k h(xbar_k, g_k)
};

/// Returns nullopt when x0 cannot be steered robustly to O within the horizon.
std::optional<BootstrapPlan> solve_bootstrap(const SystemModel& sys, const StageCost& cost, const TerminalPair& tp,
                                             const Eigen::VectorXd& x0, int horizon,
                                             const conic::SolverSettings& settings = {});

/// Input at time t given the realized disturbances w_0..w_{t-1}; K x past the horizon.
Eigen::VectorXd bootstrap_input(const BootstrapPlan& plan, const TerminalPair& tp, int t,
                                const std::vector<Eigen::VectorXd>& w_history, const Eigen::VectorXd& x_t);

/// Layered scenario tree: depth k holds the vertices of the k-step robust
/// reachable set with the plan's input at each vertex (planar and scalar systems).
ScenarioTree bootstrap_layers(const SystemModel& sys, const BootstrapPlan& plan, int iteration = 0);

/// Largest s in [0, 1] (bisection, 20 steps) such that s x0 admits a bootstrap plan.
double max_feasible_scale(const SystemModel& sys, const StageCost& cost, const TerminalPair& tp,
                          const Eigen::VectorXd& x0, int horizon);

}  // namespace rlmpc
