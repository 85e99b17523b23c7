#include "rlmpc/simulation.hpp"

#include "rlmpc/errors.hpp"
#include "rlmpc/parallel.hpp"
#include "rlmpc/roa.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace rlmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

MatrixXd stack(const std::vector<VectorXd>& cols, int rows) {
  MatrixXd M(rows, static_cast<int>(cols.size()));
  for (size_t i = 0; i < cols.size(); ++i) M.col(static_cast<int>(i)) = cols[i];
  return M;
}

// Accumulates a trajectory and converts it to a Rollout at the end.
struct Trace {
  std::vector<VectorXd> x, u, w;
  Rollout r;

  void step(const VectorXd& xt, const VectorXd& ut, double h, double value, double dist, double secs, int split) {
    x.push_back(xt);
    u.push_back(ut);
    r.stage_costs.push_back(h);
    r.values.push_back(value);
    r.distance_to_O.push_back(dist);
    r.eval_seconds.push_back(secs);
    r.split.push_back(split);
  }

  Rollout finish(int n, int d) {
    r.states = stack(x, n);
    r.inputs = stack(u, d);
    r.disturbances = stack(w, n);
    return std::move(r);
  }
};

VectorXd next_disturbance(const RunOptions& opt, DisturbanceSampler& sampler, int n) {
  if (opt.mode == RolloutMode::CertaintyEquivalent) return VectorXd::Zero(n);
  return sampler();
}

}  // namespace

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

VectorXd sample_uniform(const Polytope& W, std::mt19937_64& rng, int max_tries) {
  const VectorXd lo = W.lower(), hi = W.upper();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] {
    VectorXd w(W.dim());
    for (int i = 0; i < W.dim(); ++i) w[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
    return w;
  };
  if (W.num_vertices() == 1) return W.vertex(0);
  if (W.is_box()) return draw();
  for (int k = 0; k < max_tries; ++k) {
    VectorXd w = draw();
    if (W.contains(w, 0.0)) return w;
  }
  throw std::runtime_error("sample_disturbance: rejection budget exhausted");
}

VectorXd sample_safe_set_point(const Polytope& cs_hull, std::mt19937_64& rng) {
  try {
    return sample_uniform(cs_hull, rng, 10000);
  } catch (const std::runtime_error&) {
    std::exponential_distribution<double> e(1.0);
    VectorXd lambda(cs_hull.num_vertices());
    for (int i = 0; i < lambda.size(); ++i) lambda[i] = e(rng);
    return cs_hull.vertices() * (lambda / lambda.sum());
  }
}

const char* to_string(RolloutMode m) { return m == RolloutMode::Noisy ? "noisy" : "certainty-equivalent"; }

const char* to_string(Schedule s) { return s == Schedule::FixedInitialState ? "fixed-x0" : "enlargement"; }

const char* to_string(PolicyKind k) { return k == PolicyKind::Lmpc ? "lmpc" : "safe"; }

double Rollout::cost() const {
  double s = 0.0;
  for (double h : stage_costs) s += h;
  return s;
}

int constraint_violations(const SystemModel& sys, const Rollout& r, double tol) {
  int count = 0;
  for (int t = 0; t < r.states.cols(); ++t) {
    bool bad = !sys.X_h.contains(r.states.col(t), tol);
    if (t < r.inputs.cols()) bad = bad || !sys.U_h.contains(r.inputs.col(t), tol);
    count += bad;
  }
  return count;
}

double fitted_lyapunov_gain(const Rollout& r) {
  double L = 0.0;
  for (int t = 0; t + 1 < static_cast<int>(r.values.size()) && t < r.disturbances.cols(); ++t) {
    const double wn = r.disturbances.col(t).norm();
    if (wn == 0.0) continue;
    L = std::max(L, (r.values[t + 1] - r.values[t] + r.stage_costs[t]) / wn);
  }
  return L;
}

IterationRecord run_iteration(const SystemModel& sys, const PreparedSafeSet& ss_prev, const StageCost& cost,
                              const TerminalPair& tp, const VectorXd& x0, int iteration, const RunOptions& opt) {
  IterationRecord rec;
  rec.iteration = iteration;
  Trace tr;
  tr.r.seed = opt.seed;
  tr.r.mode = opt.mode;
  DisturbanceSampler sampler(sys.W, opt.seed, opt.stream, opt.disturbance_scale);
  const StepOptions so{opt.jobs, opt.solver};

  VectorXd x = x0;
  for (int t = 0;; ++t) {
    const auto t0 = Clock::now();
    StepResult sr;
    try {
      sr = lmpc_step(sys, ss_prev, cost, tp, x, opt.N, so);
    } catch (const AllInfeasible& e) {
      if (t == 0) throw;
      std::ostringstream os;
      os << "iteration " << iteration << ": every FTOCP instance infeasible at t = " << t << ", x = ("
         << x.transpose() << "), seed " << opt.seed << ", stream " << opt.stream << "; trajectory:";
      for (const auto& xs : tr.x) os << " (" << xs.transpose() << ")";
      throw InvariantViolation(os.str());
    }
    const double secs = seconds_since(t0);
    const VectorXd u = sr.policy.first_input();
    const double dist = set_distance(tp.O, x);
    tr.step(x, u, stage_cost_value(cost, tp, x, u), sr.cost, dist, secs, sr.N_t);
    if (opt.record_trees) {
      sr.policy.time = t;
      rec.trees.push_back(record_scenario_tree(sys, sr.policy, iteration));
    }
    if (dist <= opt.eps_stop || t >= opt.T_max) break;
    const VectorXd w = next_disturbance(opt, sampler, sys.n());
    tr.w.push_back(w);
    x = sys.step(x, u, w);
  }
  rec.rollout = tr.finish(sys.n(), sys.d());
  rec.cost = rec.rollout.cost();
  return rec;
}

Rollout run_safe_policy(const SystemModel& sys, const SafeSetData& ss, const StageCost& cost, const TerminalPair& tp,
                        const VectorXd& x0, const RunOptions& opt) {
  Trace tr;
  tr.r.seed = opt.seed;
  tr.r.mode = opt.mode;
  DisturbanceSampler sampler(sys.W, opt.seed, opt.stream, opt.disturbance_scale);

  VectorXd x = x0;
  for (int t = 0;; ++t) {
    const auto t0 = Clock::now();
    const QueryResult q = q_evaluate(ss, x, 1e-6);
    const double secs = seconds_since(t0);
    if (!q.ok()) {
      tr.r.left_safe_set = true;
      if (t == 0) throw NotInSafeSet("run_safe_policy: x0 is outside the safe set");
      break;  // the last disturbance is kept; it is the one that left CS

    }
    const VectorXd u = ss.U * q.lambda;
    const double dist = set_distance(tp.O, x);
    tr.step(x, u, stage_cost_value(cost, tp, x, u), q.value, dist, secs, -1);
    if (dist <= opt.eps_stop || t >= opt.T_max) break;
    const VectorXd w = next_disturbance(opt, sampler, sys.n());
    tr.w.push_back(w);
    x = sys.step(x, u, w);
  }
  return tr.finish(sys.n(), sys.d());
}

IterationRecord run_bootstrap(const SystemModel& sys, const StageCost& cost, const TerminalPair& tp,
                              const VectorXd& x0, int horizon, const RunOptions& opt) {
  const auto plan = solve_bootstrap(sys, cost, tp, x0, horizon, opt.solver);
  if (!plan) {
    const double s = max_feasible_scale(sys, cost, tp, x0, horizon);
    std::ostringstream os;
    os << "bootstrap: no robust plan steers x0 = (" << x0.transpose() << ") to O in " << horizon
       << " steps; largest feasible multiple is " << s << " x0 (|x0| = " << s * x0.norm() << ")";
    throw BootstrapFailure(os.str());
  }

  IterationRecord rec;
  rec.iteration = 0;
  rec.bootstrap = true;
  rec.trees.push_back(bootstrap_layers(sys, *plan, 0));
  rec.safe_set = extend_safe_set(init_safe_set(tp), rec.trees, sys, cost, tp, opt.jobs);

  Trace tr;
  tr.r.seed = opt.seed;
  tr.r.mode = opt.mode;
  DisturbanceSampler sampler(sys.W, opt.seed, opt.stream, opt.disturbance_scale);
  VectorXd x = x0;
  for (int t = 0;; ++t) {
    const auto t0 = Clock::now();
    const VectorXd u = bootstrap_input(*plan, tp, t, tr.w, x);
    const double secs = seconds_since(t0);
    const QueryResult q = q_evaluate(rec.safe_set, x, 1e-6);
    const double dist = set_distance(tp.O, x);
    tr.step(x, u, stage_cost_value(cost, tp, x, u), q.ok() ? q.value : std::numeric_limits<double>::infinity(), dist,
            secs, std::min(t, horizon));
    if (dist <= opt.eps_stop || t >= opt.T_max) break;
    const VectorXd w = next_disturbance(opt, sampler, sys.n());
    tr.w.push_back(w);
    x = sys.step(x, u, w);
  }
  rec.rollout = tr.finish(sys.n(), sys.d());
  rec.cost = rec.rollout.cost();
  return rec;
}

std::vector<IterationRecord> run_learning_loop(const SystemModel& sys, const StageCost& cost, const TerminalPair& tp,
                                               const LoopOptions& opt) {
  std::vector<IterationRecord> out;
  if (opt.iterations <= 0) return out;
  auto finish = [&](IterationRecord rec) {
    if (opt.prune) rec.safe_set = prune_columns(rec.safe_set);
    if (opt.on_iteration) opt.on_iteration(rec);
    out.push_back(std::move(rec));
  };
  auto run_opts = [&](int j) {
    RunOptions ro = opt.run;
    ro.stream = static_cast<std::uint64_t>(j);
    return ro;
  };

  SafeSetData cs = init_safe_set(tp);
  int first = 1, last = opt.iterations;
  if (opt.schedule == Schedule::FixedInitialState) {
    if (opt.x0.size() != sys.n()) throw std::invalid_argument("run_learning_loop: x0 has the wrong dimension");
    finish(run_bootstrap(sys, cost, tp, opt.x0, opt.bootstrap_horizon, run_opts(0)));
    cs = out.back().safe_set;
    last = opt.iterations - 1;
  }
  for (int j = first; j <= last; ++j) {
    const PreparedSafeSet prep(cs);
    const VectorXd x0 = opt.schedule == Schedule::FixedInitialState
                            ? opt.x0
                            : select_initial_condition(sys, prep, cost, tp, j, opt.run.N);
    IterationRecord rec = run_iteration(sys, prep, cost, tp, x0, j, run_opts(j));
    rec.safe_set = extend_safe_set(cs, rec.trees, sys, cost, tp, opt.run.jobs);
    rec.safe_set.iteration = j;
    finish(std::move(rec));
    cs = out.back().safe_set;
  }
  return out;
}

MonteCarloSummary monte_carlo(const SystemModel& sys, const PreparedSafeSet& ss, const StageCost& cost,
                              const TerminalPair& tp, const MonteCarloOptions& opt) {
  MonteCarloSummary sum;
  sum.kind = opt.kind;
  sum.runs = std::max(opt.runs, 0);
  sum.rollouts.resize(sum.runs);
  std::vector<int> infeasible(sum.runs, 0);
  const Polytope hull = opt.x0 || sum.runs == 0 ? Polytope::point(VectorXd::Zero(sys.n())) : convex_hull(ss.data().X);

  parallel_for(sum.runs, opt.jobs, [&](int r) {
    RunOptions ro = opt.run;
    ro.seed = opt.seed;
    ro.stream = static_cast<std::uint64_t>(r);
    ro.jobs = 1;
    ro.record_trees = false;
    VectorXd x0;
    if (opt.x0) {
      x0 = *opt.x0;
    } else {
      // initial-state stream kept apart from the disturbance stream of the run
      auto rng = make_rng(opt.seed ^ 0x9e3779b97f4a7c15ULL, static_cast<std::uint64_t>(r));
      x0 = sample_safe_set_point(hull, rng);
    }
    if (opt.kind == PolicyKind::SafePolicy) {
      sum.rollouts[r] = run_safe_policy(sys, ss.data(), cost, tp, x0, ro);
      return;
    }
    try {
      sum.rollouts[r] = run_iteration(sys, ss, cost, tp, x0, ss.data().iteration + 1, ro).rollout;
    } catch (const InvariantViolation&) {
      infeasible[r] = 1;
    }
  });

  double total_cost = 0.0, total_secs = 0.0;
  int counted = 0;
  for (int r = 0; r < sum.runs; ++r) {
    const Rollout& ro = sum.rollouts[r];
    sum.infeasible_events += infeasible[r];
    if (infeasible[r]) continue;
    sum.constraint_violations += constraint_violations(sys, ro);
    sum.safe_set_exits += ro.left_safe_set;
    total_cost += ro.cost();
    ++counted;
    for (double s : ro.eval_seconds) total_secs += s;
    sum.total_steps += static_cast<int>(ro.eval_seconds.size());
  }
  if (counted > 0) sum.mean_cost = total_cost / counted;
  if (sum.total_steps > 0) sum.mean_step_seconds = total_secs / sum.total_steps;
  return sum;
}

}  // namespace rlmpc
