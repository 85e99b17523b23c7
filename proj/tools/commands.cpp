#include "commands.hpp"

#include "rlmpc/errors.hpp"
#include "rlmpc/parallel.hpp"
#include "rlmpc/roa.hpp"
#include "rlmpc/serialization.hpp"
#include "rlmpc/simulation.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace rlmpc::cli {

namespace fs = std::filesystem;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

std::string iter_dir(int j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%03d", j);
  return buf;
}

std::optional<BenchmarkConfig> load(const Common& f, std::ostream& err) {
  try {
    BenchmarkConfig cfg = load_config(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (f.out) cfg.output_dir = *f.out;
    return cfg;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return std::nullopt;
  }
}

int jobs_of(const Common& f) { return f.jobs ? std::max(1, *f.jobs) : default_jobs(); }

// Terminal pair that passed verification, or nullopt after reporting why not.
std::optional<TerminalPair> checked_terminal_pair(const BenchmarkConfig& cfg, std::ostream& err) {
  const auto problems = check_assumptions(cfg.system);
  for (const auto& p : problems) err << "violation: " << p << '\n';
  if (!problems.empty()) return std::nullopt;
  std::optional<TerminalPair> tp;
  try {
    tp = resolve_terminal_pair(cfg);
  } catch (const std::exception& e) {
    err << "violation: terminal pair synthesis failed: " << e.what() << '\n';
    return std::nullopt;
  }
  const auto rep = verify_terminal_pair(cfg.system, *tp);
  if (!rep.ok) {
    err << "violation: terminal pair check failed: " << rep.violation << '\n';
    return std::nullopt;
  }
  return tp;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error(p.string() + ": cannot write");
  return os;
}

void write_q_grid(const fs::path& path, const SafeSetData& ss, int grid, int jobs) {
  if (ss.n() != 2) return;
  const VectorXd lo = ss.X.rowwise().minCoeff(), hi = ss.X.rowwise().maxCoeff();
  const int total = grid * grid;
  std::vector<std::optional<double>> q(total);
  parallel_for(total, jobs, [&](int idx) {
    const int a = idx % grid, b = idx / grid;
    const VectorXd x = lo + (hi - lo).cwiseProduct(Eigen::Vector2d(double(a) / (grid - 1), double(b) / (grid - 1)));
    const auto r = q_evaluate(ss, x);
    if (r.ok()) q[idx] = r.value;
  });
  auto os = open_out(path);
  CsvWriter w(os);
  w.row({"x1", "x2", "Q"});
  for (int idx = 0; idx < total; ++idx) {
    const int a = idx % grid, b = idx / grid;
    const VectorXd x = lo + (hi - lo).cwiseProduct(Eigen::Vector2d(double(a) / (grid - 1), double(b) / (grid - 1)));
    w.row({format_double(x[0]), format_double(x[1]), q[idx] ? format_double(*q[idx]) : ""});
  }
}

bool solver_self_check() {
  conic::ConvexProgram p;
  const auto x = p.add_variable("x", 2);
  p.add_less_equal(conic::LinExpr(1.0) - conic::LinExpr::term(x[0]) - conic::LinExpr::term(x[1]));
  p.add_nonnegative(x);
  p.add_objective(conic::LinExpr::term(x[0]) + 2.0 * conic::LinExpr::term(x[1]));
  const auto r = conic::solve(p);
  return r.optimal() && std::abs(r.objective - 1.0) < 1e-6;
}

std::vector<int> stored_iterations(const fs::path& dir) {
  std::vector<int> its;
  if (!fs::is_directory(dir)) return its;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() != 8 || name.rfind("iter_", 0) != 0) continue;
    if (!std::all_of(name.begin() + 5, name.end(), [](char c) { return std::isdigit(c); })) continue;
    if (fs::exists(e.path() / "safe_set.json")) its.push_back(std::stoi(name.substr(5)));
  }
  std::sort(its.begin(), its.end());
  return its;
}

std::optional<SafeSetData> load_artifact(const fs::path& dir, int j, const std::string& fingerprint,
                                         std::ostream& err) {
  const fs::path p = dir / iter_dir(j) / "safe_set.json";
  if (!fs::exists(p)) {
    err << "error: missing safe-set artifact " << p.string() << '\n';
    return std::nullopt;
  }
  try {
    std::string fp;
    SafeSetData ss = safe_set_from_json(read_json_file(p), &fp);
    if (fp != fingerprint) {
      err << "error: " << p.string() << " was produced for a different model (fingerprint " << fp << ", expected "
          << fingerprint << ")\n";
      return std::nullopt;
    }
    return ss;
  } catch (const ConfigError& e) {
    err << "error: " << p.string() << ": " << e.what() << '\n';
    return std::nullopt;
  }
}

}  // namespace

int cmd_verify(const Common& f, std::ostream& out, std::ostream& err) {
  const auto cfg = load(f, err);
  if (!cfg) return kUsage;
  MrpiInfo info;
  const auto tp = checked_terminal_pair(*cfg, err);
  if (!tp) return kFailure;
  if (!cfg->terminal) resolve_terminal_pair(*cfg, &info);
  out << "ok: " << cfg->name << ": n = " << cfg->system.n() << ", d = " << cfg->system.d()
      << ", W vertices = " << cfg->system.l() << ", O vertices = " << tp->O.num_vertices();
  if (!cfg->terminal) out << " (synthesized, s = " << info.s << ", alpha = " << info.alpha << ")";
  out << "\nK = " << tp->K.format(Eigen::IOFormat(Eigen::FullPrecision, 0, ", ", "; ", "", "", "[", "]"))
      << "\nfingerprint " << model_fingerprint(cfg->system, *tp, cfg->cost) << '\n';
  return kOk;
}

int cmd_learn(const LearnFlags& f, std::ostream& out, std::ostream& err) {
  const auto cfg = load(f, err);
  if (!cfg) return kUsage;
  if (f.dry_run) {
    out << to_json(*cfg).dump(2) << '\n';
    const bool ok = solver_self_check();
    out << "solver: " << (ok ? "interior-point and simplex backends available" : "self-check FAILED") << '\n';
    return ok ? kOk : kFailure;
  }
  const auto tp = checked_terminal_pair(*cfg, err);
  if (!tp) return kFailure;
  const int jobs = jobs_of(f);
  const fs::path dir = cfg->output_dir;
  const std::string fp = model_fingerprint(cfg->system, *tp, cfg->cost);
  fs::create_directories(dir);
  write_json_file(dir / "config.json", to_json(*cfg));

  auto write_safe_set = [&](int j, const SafeSetData& ss) {
    fs::create_directories(dir / iter_dir(j));
    write_json_file(dir / iter_dir(j) / "safe_set.json", to_json(ss, fp));
    write_q_grid(dir / iter_dir(j) / "q_grid.csv", ss, cfg->q_grid, jobs);
  };
  if (cfg->schedule == Schedule::Enlargement || cfg->iterations == 0) write_safe_set(0, init_safe_set(*tp));

  LoopOptions lo;
  lo.schedule = cfg->schedule;
  lo.x0 = cfg->x0;
  lo.iterations = cfg->iterations;
  lo.bootstrap_horizon = cfg->bootstrap_horizon;
  lo.prune = cfg->prune;
  lo.run.N = cfg->N;
  lo.run.T_max = cfg->T_max;
  lo.run.eps_stop = cfg->eps_stop;
  lo.run.mode = cfg->mode;
  lo.run.seed = cfg->seed;
  lo.run.jobs = jobs;
  lo.on_iteration = [&](const IterationRecord& rec) {
    write_safe_set(rec.iteration, rec.safe_set);
    auto os = open_out(dir / iter_dir(rec.iteration) / "rollout.csv");
    write_rollout_csv(os, rec.rollout);
    out << "iteration " << rec.iteration << (rec.bootstrap ? " (bootstrap)" : "") << ": T = " << rec.rollout.T()
        << ", cost = " << format_double(rec.cost) << ", columns = " << rec.safe_set.columns() << std::endl;
  };

  std::vector<IterationRecord> recs;
  try {
    recs = run_learning_loop(cfg->system, cfg->cost, *tp, lo);
  } catch (const BootstrapFailure& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const InvariantViolation& e) {
    err << "error: invariant violation: " << e.what() << '\n';
    return kFailure;
  } catch (const AllInfeasible& e) {
    err << "error: initial state outside the region of attraction: " << e.what() << '\n';
    return kFailure;
  } catch (const SolverFailure& e) {
    err << "error: solver failure: " << e.what() << '\n';
    return kFailure;
  }

  auto os = open_out(dir / "summary.csv");
  CsvWriter w(os);
  std::vector<std::string> header{"iteration", "bootstrap", "T", "cost", "columns"};
  for (int i = 0; i < cfg->system.n(); ++i) header.push_back("x0_" + std::to_string(i + 1));
  w.row(header);
  json table = json::array();
  for (const auto& r : recs) {
    std::vector<std::string> row{std::to_string(r.iteration), r.bootstrap ? "1" : "0", std::to_string(r.rollout.T()),
                                 format_double(r.cost), std::to_string(r.safe_set.columns())};
    for (int i = 0; i < cfg->system.n(); ++i) row.push_back(format_double(r.rollout.states(i, 0)));
    w.row(row);
    table.push_back({{"iteration", r.iteration},
                     {"bootstrap", r.bootstrap},
                     {"T", r.rollout.T()},
                     {"cost", r.cost},
                     {"columns", r.safe_set.columns()},
                     {"x0", vector_to_json(r.rollout.states.col(0))}});
  }
  write_json_file(dir / "summary.json", json{{"name", cfg->name},
                                             {"schedule", to_string(cfg->schedule)},
                                             {"fingerprint", fp},
                                             {"iterations", std::move(table)}});
  return kOk;
}

int cmd_montecarlo(const MonteCarloFlags& f, std::ostream& out, std::ostream& err) {
  auto cfg = load(f, err);
  if (!cfg) return kUsage;
  if (f.runs) cfg->runs = std::max(0, *f.runs);
  if (f.policy) cfg->policy = *f.policy == "safe" ? PolicyKind::SafePolicy : PolicyKind::Lmpc;
  const auto tp = checked_terminal_pair(*cfg, err);
  if (!tp) return kFailure;
  const fs::path dir = cfg->output_dir;
  const std::string fp = model_fingerprint(cfg->system, *tp, cfg->cost);
  int j = 0;
  if (f.iteration) {
    j = *f.iteration;
  } else {
    const auto its = stored_iterations(dir);
    if (its.empty()) {
      err << "error: missing safe-set artifact: no iter_*/safe_set.json under " << dir.string()
          << " (run `learn` first)\n";
      return kFailure;
    }
    j = its.back();
  }
  const auto ss = load_artifact(dir, j, fp, err);
  if (!ss) return kFailure;

  MonteCarloOptions mo;
  mo.kind = cfg->policy;
  mo.runs = cfg->runs;
  mo.seed = cfg->seed;
  mo.jobs = jobs_of(f);
  mo.run.N = cfg->N;
  mo.run.T_max = cfg->T_max;
  mo.run.eps_stop = cfg->eps_stop;
  mo.run.mode = RolloutMode::Noisy;
  mo.run.disturbance_scale = cfg->disturbance_scale;
  MonteCarloSummary sum;
  try {
    sum = monte_carlo(cfg->system, PreparedSafeSet(*ss), cfg->cost, *tp, mo);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }

  const fs::path mdir = dir / ("montecarlo_" + std::string(to_string(cfg->policy)) + "_" + iter_dir(j));
  fs::create_directories(mdir);
  const int n = cfg->system.n(), d = cfg->system.d();
  {
    auto os = open_out(mdir / "runs.csv");
    CsvWriter w(os);
    std::vector<std::string> header{"run", "T", "cost", "violations", "left_safe_set", "infeasible"};
    for (int i = 0; i < n; ++i) header.push_back("x0_" + std::to_string(i + 1));
    w.row(header);
    for (int r = 0; r < sum.runs; ++r) {
      const Rollout& ro = sum.rollouts[r];
      if (ro.states.cols() == 0) {
        std::vector<std::string> row{std::to_string(r), "", "", "", "", "1"};
        row.resize(header.size());
        w.row(row);
        continue;
      }
      std::vector<std::string> row{std::to_string(r), std::to_string(ro.T()), format_double(ro.cost()),
                                   std::to_string(constraint_violations(cfg->system, ro)),
                                   ro.left_safe_set ? "1" : "0", "0"};
      for (int i = 0; i < n; ++i) row.push_back(format_double(ro.states(i, 0)));
      w.row(row);
    }
  }
  {
    auto os = open_out(mdir / "trajectories.csv");
    CsvWriter w(os);
    w.row(rollout_csv_header(n, d, "run"));
    for (int r = 0; r < sum.runs; ++r) append_rollout_rows(w, sum.rollouts[r], n, d, std::to_string(r));
  }
  write_json_file(mdir / "summary.json", json{{"policy", to_string(sum.kind)},
                                              {"iteration", j},
                                              {"runs", sum.runs},
                                              {"seed", cfg->seed},
                                              {"disturbance_scale", cfg->disturbance_scale},
                                              {"constraint_violations", sum.constraint_violations},
                                              {"safe_set_exits", sum.safe_set_exits},
                                              {"infeasible_events", sum.infeasible_events},
                                              {"mean_cost", sum.mean_cost},
                                              {"total_steps", sum.total_steps}});
  // wall-clock data is kept apart so the files above stay byte-identical across runs
  write_json_file(mdir / "timing.json",
                  json{{"mean_step_seconds", sum.mean_step_seconds}, {"total_steps", sum.total_steps}});

  out << to_string(sum.kind) << " Monte Carlo over CS^" << j << ": runs = " << sum.runs
      << ", violations = " << sum.constraint_violations << ", safe-set exits = " << sum.safe_set_exits
      << ", infeasible events = " << sum.infeasible_events << ", mean cost = " << format_double(sum.mean_cost)
      << ", mean step time = " << sum.mean_step_seconds << " s\n";
  const bool clean = sum.constraint_violations == 0 && sum.safe_set_exits == 0 && sum.infeasible_events == 0;
  return clean ? kOk : kFailure;
}

int cmd_roa(const RoaFlags& f, std::ostream& out, std::ostream& err) {
  auto cfg = load(f, err);
  if (!cfg) return kUsage;
  if (f.directions) cfg->directions = *f.directions;
  const auto tp = checked_terminal_pair(*cfg, err);
  if (!tp) return kFailure;
  const int n = cfg->system.n();
  if (n > 2) {
    err << "error: region-of-attraction directions are only generated for scalar and planar systems\n";
    return kFailure;
  }
  if (cfg->directions < (n == 1 ? 1 : 2)) {
    err << "error: --directions must be at least 2\n";
    return kUsage;
  }
  const fs::path dir = cfg->output_dir;
  const std::string fp = model_fingerprint(cfg->system, *tp, cfg->cost);
  const auto its = stored_iterations(dir);
  if (its.empty()) {
    err << "error: missing safe-set artifact: no iter_*/safe_set.json under " << dir.string()
        << " (run `learn` first)\n";
    return kFailure;
  }
  std::vector<VectorXd> dirs;
  if (n == 1) dirs = {VectorXd::Constant(1, 1.0), VectorXd::Constant(1, -1.0)};
  else dirs = uniform_directions(cfg->directions);

  auto os = open_out(dir / "roa_hulls.csv");
  CsvWriter w(os);
  std::vector<std::string> header{"iteration", "vertex"};
  for (int i = 0; i < n; ++i) header.push_back("x" + std::to_string(i + 1));
  w.row(header);
  for (int j : its) {
    const auto ss = load_artifact(dir, j, fp, err);
    if (!ss) return kFailure;
    RoaApproximation roa;
    try {
      roa = approximate_roa(cfg->system, PreparedSafeSet(*ss), cfg->cost, *tp, dirs, cfg->N, jobs_of(f));
    } catch (const EmptyApproximation& e) {
      err << "error: iteration " << j << ": " << e.what() << '\n';
      return kFailure;
    }
    write_json_file(dir / iter_dir(j) / "roa.json", to_json(roa));
    for (int v = 0; v < roa.hull.num_vertices(); ++v) {
      std::vector<std::string> row{std::to_string(j), std::to_string(v)};
      for (int i = 0; i < n; ++i) row.push_back(format_double(roa.hull.vertex(v)[i]));
      w.row(row);
    }
    out << "iteration " << j << ": hull vertices = " << roa.hull.num_vertices();
    if (n == 2) out << ", area = " << format_double(roa.hull.area());
    out << '\n';
  }
  return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust learning MPC: learn, evaluate and verify"};
  app.require_subcommand(1);

  auto common = [](CLI::App* c, Common& f) {
    c->add_option("--config", f.config, "benchmark configuration (JSON)")->required()->check(CLI::ExistingFile);
    c->add_option("--seed", f.seed, "override the configured seed");
    c->add_option("--jobs", f.jobs, "worker threads (default: available parallelism)")->check(CLI::PositiveNumber);
    c->add_option("--out", f.out, "override the output directory");
  };

  Common verify;
  LearnFlags learn;
  MonteCarloFlags mc;
  RoaFlags roa;
  auto* cv = app.add_subcommand("verify", "check the model assumptions and the terminal pair");
  common(cv, verify);
  auto* cl = app.add_subcommand("learn", "run the iterative learning loop and write per-iteration artifacts");
  common(cl, learn);
  cl->add_flag("--dry-run", learn.dry_run, "echo the configuration and check the solver only");
  auto* cm = app.add_subcommand("montecarlo", "closed-loop Monte Carlo over a stored safe set");
  common(cm, mc);
  cm->add_option("--runs", mc.runs, "number of runs")->check(CLI::NonNegativeNumber);
  cm->add_option("--policy", mc.policy, "lmpc or safe")->check(CLI::IsMember({"lmpc", "safe"}));
  cm->add_option("--iteration", mc.iteration, "safe-set iteration to load (default: latest)");
  auto* cr = app.add_subcommand("roa", "inner approximation of the region of attraction for every stored iteration");
  common(cr, roa);
  cr->add_option("--directions", roa.directions, "number of uniformly spaced directions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  try {
    if (*cv) return cmd_verify(verify, out, err);
    if (*cl) return cmd_learn(learn, out, err);
    if (*cm) return cmd_montecarlo(mc, out, err);
    return cmd_roa(roa, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace rlmpc::cli
