#pragma once

#include "rlmpc/bootstrap.hpp"
#include "rlmpc/lmpc.hpp"
#include "rlmpc/safe_set.hpp"
#include "rlmpc/system_model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace rlmpc {

/// Generator for run `stream` of experiment `seed`; streams are independent.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

/// Uniform sample of P: componentwise for boxes, rejection from the bounding box otherwise.
/// Throws std::runtime_error when `max_tries` candidates are all rejected.
Eigen::VectorXd sample_uniform(const Polytope& P, std::mt19937_64& rng, int max_tries = 100000);

inline Eigen::VectorXd sample_disturbance(const Polytope& W, std::mt19937_64& rng, int max_tries = 100000) {
  return sample_uniform(W, rng, max_tries);
}

class DisturbanceSampler {
 public:
  DisturbanceSampler(Polytope W, std::uint64_t seed, std::uint64_t stream = 0, double scale = 1.0)
      : W_(std::move(W)), rng_(make_rng(seed, stream)), scale_(scale) {}

  Eigen::VectorXd operator()() { return scale_ * sample_disturbance(W_, rng_); }

 private:
  Polytope W_;
  std::mt19937_64 rng_;
  double scale_;
};

/// Uniform point of CS = conv(columns). Falls back to Dirichlet(1) weights over
/// the hull vertices when CS is too thin for rejection sampling.
Eigen::VectorXd sample_safe_set_point(const Polytope& cs_hull, std::mt19937_64& rng);

enum class RolloutMode { Noisy, CertaintyEquivalent };

const char* to_string(RolloutMode m);

/// Closed-loop trajectory x_0..x_T. The input applied at t = T is stored as
/// well so that the iteration cost sum_{t=0}^{T} h(x_t, u_t) can be recomputed.
struct Rollout {
  Eigen::MatrixXd states;        // n x (T+1)
  Eigen::MatrixXd inputs;        // d x (T+1)
  Eigen::MatrixXd disturbances;  // n x T (n x (T+1) after a safe-set exit)
  std::vector<double> stage_costs;
  std::vector<double> values;  // J^LMPC_t (or Q^j(x_t) for the safe policy)
  std::vector<double> distance_to_O;
  std::vector<double> eval_seconds;
  std::vector<int> split;  // chosen N_t per step (-1 when not applicable)
  std::uint64_t seed = 0;
  RolloutMode mode = RolloutMode::Noisy;
  bool left_safe_set = false;  // safe-policy rollouts only

  int T() const { return static_cast<int>(states.cols()) - 1; }
  double cost() const;
};

/// Number of steps with x_t outside X or u_t outside U (tolerance `tol`).
int constraint_violations(const SystemModel& sys, const Rollout& r, double tol = 1e-6);

/// Smallest L with V_{t+1} - V_t + h_t <= L |w_t| over the steps with w_t != 0
/// (0 when no step has a disturbance).
double fitted_lyapunov_gain(const Rollout& r);

struct IterationRecord {
  int iteration = 0;
  Rollout rollout;
  std::vector<ScenarioTree> trees;
  SafeSetData safe_set;  // CS^j and Q^j built from this iteration
  double cost = 0.0;     // J^j_{0 -> T^j}(x_0)
  bool bootstrap = false;
};

struct RunOptions {
  int N = 3;
  int T_max = 50;
  double eps_stop = 1e-3;
  RolloutMode mode = RolloutMode::Noisy;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double disturbance_scale = 1.0;
  int jobs = 1;
  bool record_trees = true;
  conic::SolverSettings solver;
};

/// Receding-horizon LMPC run from x0 with ss_prev = CS^{j-1}. AllInfeasible at
/// t = 0 propagates (x0 outside C^j); at t > 0 it becomes InvariantViolation.
IterationRecord run_iteration(const SystemModel& sys, const PreparedSafeSet& ss_prev, const StageCost& cost,
                              const TerminalPair& tp, const Eigen::VectorXd& x0, int iteration,
                              const RunOptions& opt);

/// Closed loop under the safe policy built from `ss`. Stops early (with
/// left_safe_set set) if the state leaves CS.
Rollout run_safe_policy(const SystemModel& sys, const SafeSetData& ss, const StageCost& cost, const TerminalPair& tp,
                        const Eigen::VectorXd& x0, const RunOptions& opt);

/// Iteration-0 run: robust disturbance-feedback plan over `horizon` steps,
/// applied causally; the record's safe set is CS^0 built from the plan's
/// reachable-set vertices together with O. Throws BootstrapFailure.
IterationRecord run_bootstrap(const SystemModel& sys, const StageCost& cost, const TerminalPair& tp,
                              const Eigen::VectorXd& x0, int horizon, const RunOptions& opt);

enum class Schedule { FixedInitialState, Enlargement };

const char* to_string(Schedule s);

struct LoopOptions {
  Schedule schedule = Schedule::FixedInitialState;
  Eigen::VectorXd x0;  // fixed-x0 schedule only
  int iterations = 5;
  int bootstrap_horizon = 20;
  bool prune = false;
  RunOptions run;
  std::function<void(const IterationRecord&)> on_iteration;
};

/// Fixed-x0: records j = 0..iterations-1, j = 0 being the bootstrap.
/// Enlargement: CS^0 = O, records j = 1..iterations, x0 from
/// select_initial_condition over CS^{j-1}. Iteration j uses seed stream j.
std::vector<IterationRecord> run_learning_loop(const SystemModel& sys, const StageCost& cost, const TerminalPair& tp,
                                               const LoopOptions& opt);

enum class PolicyKind { Lmpc, SafePolicy };

const char* to_string(PolicyKind k);

struct MonteCarloOptions {
  PolicyKind kind = PolicyKind::Lmpc;
  int runs = 100;
  std::uint64_t seed = 0;
  std::optional<Eigen::VectorXd> x0;  // otherwise sampled from CS per run
  RunOptions run;                     // seed/stream are overridden per run
  int jobs = 1;
};

struct MonteCarloSummary {
  PolicyKind kind = PolicyKind::Lmpc;
  int runs = 0;
  std::vector<Rollout> rollouts;
  int constraint_violations = 0;
  int safe_set_exits = 0;
  int infeasible_events = 0;  // AllInfeasible after t = 0
  double mean_cost = 0.0;
  double mean_step_seconds = 0.0;
  int total_steps = 0;
};

/// Run r uses stream r for both its initial state and its disturbances, so
/// the two policy kinds see identical samples for the same seed.
MonteCarloSummary monte_carlo(const SystemModel& sys, const PreparedSafeSet& ss, const StageCost& cost,
                              const TerminalPair& tp, const MonteCarloOptions& opt);

}  // namespace rlmpc
