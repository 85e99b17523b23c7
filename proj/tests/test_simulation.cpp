#include "rlmpc/errors.hpp"
#include "rlmpc/roa.hpp"
#include "rlmpc/simulation.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <set>

using namespace rlmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

TEST(SampleDisturbance, PointSetGivesZero) {
  auto rng = make_rng(1, 0);
  const Polytope W = Polytope::point(VectorXd::Zero(2));
  for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_disturbance(W, rng), VectorXd::Zero(2));
}

TEST(SampleDisturbance, BoxMeanWithinThreeSigma) {
  const Polytope W = fixtures::box(2, 0.1);
  auto rng = make_rng(7, 3);
  const int n = 100000;
  VectorXd mean = VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) {
    const VectorXd w = sample_disturbance(W, rng);
    ASSERT_LE(w.lpNorm<Eigen::Infinity>(), 0.1);
    mean += w;
  }
  mean /= n;
  const double sigma = 0.2 / std::sqrt(12.0) / std::sqrt(static_cast<double>(n));
  EXPECT_LE(mean.lpNorm<Eigen::Infinity>(), 3 * sigma);
}

TEST(SampleDisturbance, TriangleByRejection) {
  MatrixXd V(2, 3);
  V << 0, 1, 0, 0, 0, 1;
  const Polytope W(V);
  auto rng = make_rng(11, 0);
  const int n = 40000;
  VectorXd mean = VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) {
    const VectorXd w = sample_disturbance(W, rng);
    ASSERT_TRUE(W.contains(w, 1e-12));
    mean += w;
  }
  mean /= n;
  // centroid of the triangle; per-coordinate std is sqrt(1/18)
  const double sigma = std::sqrt(1.0 / 18.0) / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(mean[0], 1.0 / 3.0, 4 * sigma);
  EXPECT_NEAR(mean[1], 1.0 / 3.0, 4 * sigma);
}

TEST(SampleDisturbance, SameSeedSameStream) {
  const Polytope W = fixtures::box(2, 0.1);
  DisturbanceSampler a(W, 42, 5), b(W, 42, 5), c(W, 42, 6);
  bool differs = false;
  for (int i = 0; i < 50; ++i) {
    const VectorXd wa = a(), wb = b(), wc = c();
    EXPECT_EQ(wa, wb);
    differs = differs || wa != wc;
  }
  EXPECT_TRUE(differs);
}

TEST(SampleSafeSetPoint, InsideHull) {
  MatrixXd V(2, 4);
  V << 0, 2, 2, 1, 0, 0, 1, 3;
  const Polytope cs = convex_hull(V);
  auto rng = make_rng(3, 0);
  VectorXd mean = VectorXd::Zero(2);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const VectorXd x = sample_safe_set_point(cs, rng);
    ASSERT_TRUE(cs.contains(x, 1e-12));
    mean += x / n;
  }
  // area-weighted centroid of the quadrilateral split into two triangles
  const Eigen::Vector2d c1 = (V.col(0) + V.col(1) + V.col(2)) / 3, c2 = (V.col(0) + V.col(2) + V.col(3)) / 3;
  const double a1 = 1.0, a2 = 2.5;
  EXPECT_LE((mean - (a1 * c1 + a2 * c2) / (a1 + a2)).norm(), 0.02);
}

struct Simulation : ::testing::Test {
  static void SetUpTestSuite() {
    sys = new SystemModel(fixtures::double_integrator());
    tp = new TerminalPair(synthesize_terminal_pair(*sys));
    boot = new IterationRecord(run_bootstrap(*sys, StageCost{}, *tp, Eigen::Vector2d(2.5, 0.0), 12, ce()));
    prep = new PreparedSafeSet(boot->safe_set);
  }
  static void TearDownTestSuite() {
    delete prep;
    delete boot;
    delete tp;
    delete sys;
  }
  static RunOptions ce() {
    RunOptions o;
    o.mode = RolloutMode::CertaintyEquivalent;
    return o;
  }
  static SystemModel* sys;
  static TerminalPair* tp;
  static IterationRecord* boot;
  static PreparedSafeSet* prep;
};
SystemModel* Simulation::sys = nullptr;
TerminalPair* Simulation::tp = nullptr;
IterationRecord* Simulation::boot = nullptr;
PreparedSafeSet* Simulation::prep = nullptr;

TEST_F(Simulation, StartInsideTerminalSet) {
  const auto rec = run_iteration(*sys, *prep, StageCost{}, *tp, VectorXd::Zero(2), 1, ce());
  EXPECT_EQ(rec.rollout.T(), 0);
  EXPECT_EQ(rec.trees.size(), 1u);
  EXPECT_NEAR(rec.cost, 0.0, 1e-7);
}

TEST_F(Simulation, BootstrapLayersMatchEnumeratedSequences) {
  const auto plan = solve_bootstrap(*sys, StageCost{}, *tp, Eigen::Vector2d(1.5, 0.0), 5);
  ASSERT_TRUE(plan);
  const auto tree = bootstrap_layers(*sys, *plan);
  validate_tree(*sys, tree);
  const MatrixXd Wv = sys->W.vertices();
  for (int k = 0; k <= 5; ++k) {
    // every vertex sequence, propagated through the plan's feedback
    std::vector<VectorXd> pts;
    int count = 1;
    for (int s = 0; s < k; ++s) count *= 4;
    for (int code = 0; code < count; ++code) {
      VectorXd x = plan->x0;
      std::vector<VectorXd> w;
      int c = code;
      for (int t = 0; t < k; ++t) {
        w.push_back(Wv.col(c % 4));
        c /= 4;
        VectorXd u = plan->g[t];
        for (int s = 0; s < t; ++s) u += plan->M[t][s] * w[s];
        x = sys->A * x + sys->B * u + w.back();
      }
      pts.push_back(x);
    }
    MatrixXd P(2, pts.size());
    for (size_t i = 0; i < pts.size(); ++i) P.col(i) = pts[i];
    const auto hull = hull_vertex_indices(P);
    const auto layer = tree.depth_nodes(k);
    EXPECT_EQ(layer.size(), hull.size()) << "layer " << k;
    for (int h : hull) {
      double best = 1e9;
      for (int i : layer) best = std::min(best, (tree.nodes[i].state - P.col(h)).norm());
      EXPECT_LE(best, 1e-9) << "layer " << k;
    }
  }
}

TEST_F(Simulation, BootstrapSafeSetContainsStart) {
  EXPECT_TRUE(boot->bootstrap);
  EXPECT_EQ(boot->trees.size(), 1u);
  const auto q = q_evaluate(boot->safe_set, Eigen::Vector2d(2.5, 0.0));
  ASSERT_TRUE(q.ok());
  // Q^0 bounds the robust cost of the plan, which bounds the nominal cost
  EXPECT_GE(q.value + 1e-6, boot->cost);
}

TEST_F(Simulation, BootstrapUnreachableStateReportsScale) {
  try {
    run_bootstrap(*sys, StageCost{}, *tp, Eigen::Vector2d(9.0, 9.0), 8, ce());
    FAIL() << "expected BootstrapFailure";
  } catch (const BootstrapFailure& e) {
    EXPECT_NE(std::string(e.what()).find("largest feasible multiple"), std::string::npos);
  }
}

TEST_F(Simulation, CertaintyEquivalentCostBoundedByQ) {
  for (const VectorXd& x0 : {VectorXd(Eigen::Vector2d(2.5, 0.0)), VectorXd(Eigen::Vector2d(1.0, -0.5)),
                             VectorXd(Eigen::Vector2d(-0.3, 0.4))}) {
    const auto q = q_evaluate(boot->safe_set, x0);
    ASSERT_TRUE(q.ok());
    const auto rec = run_iteration(*sys, *prep, StageCost{}, *tp, x0, 1, ce());
    EXPECT_LE(rec.cost, q.value + 1e-4 * (1 + q.value));
    EXPECT_EQ(static_cast<int>(rec.trees.size()), rec.rollout.T() + 1);
    EXPECT_TRUE(rec.rollout.disturbances.isZero(0.0));
    for (int t = 0; t < rec.rollout.T(); ++t)
      EXPECT_EQ(rec.rollout.states.col(t + 1),
                VectorXd(sys->A * rec.rollout.states.col(t) + sys->B * rec.rollout.inputs.col(t)));
  }
}

TEST_F(Simulation, NoisyRunsRespectConstraints) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunOptions o;
    o.seed = seed;
    o.T_max = 15;
    const auto rec = run_iteration(*sys, *prep, StageCost{}, *tp, Eigen::Vector2d(2.5, 0.0), 1, o);
    EXPECT_EQ(constraint_violations(*sys, rec.rollout), 0);
    const Rollout& r = rec.rollout;
    for (int t = 0; t < r.T(); ++t) {
      EXPECT_LE(r.disturbances.col(t).lpNorm<Eigen::Infinity>(), 0.1);
      EXPECT_LE((r.states.col(t + 1) - sys->A * r.states.col(t) - sys->B * r.inputs.col(t) - r.disturbances.col(t))
                    .norm(),
                1e-12);
    }
  }
}

TEST_F(Simulation, SameSeedSameRollout) {
  RunOptions o;
  o.seed = 9;
  o.T_max = 6;
  const auto a = run_iteration(*sys, *prep, StageCost{}, *tp, Eigen::Vector2d(2.0, 0.0), 1, o);
  const auto b = run_iteration(*sys, *prep, StageCost{}, *tp, Eigen::Vector2d(2.0, 0.0), 1, o);
  EXPECT_EQ(a.rollout.states, b.rollout.states);
  EXPECT_EQ(a.rollout.inputs, b.rollout.inputs);
}

TEST_F(Simulation, ZeroIterationsGiveNoRecords) {
  LoopOptions lo;
  lo.iterations = 0;
  lo.x0 = Eigen::Vector2d(2.0, 0.0);
  EXPECT_TRUE(run_learning_loop(*sys, StageCost{}, *tp, lo).empty());
}

TEST_F(Simulation, FixedInitialStateLoop) {
  LoopOptions lo;
  lo.iterations = 3;
  lo.x0 = Eigen::Vector2d(2.5, 0.0);
  lo.bootstrap_horizon = 12;
  lo.run = ce();
  int callbacks = 0;
  lo.on_iteration = [&](const IterationRecord&) { ++callbacks; };
  const auto recs = run_learning_loop(*sys, StageCost{}, *tp, lo);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(callbacks, 3);
  EXPECT_TRUE(recs[0].bootstrap);
  for (size_t j = 1; j < recs.size(); ++j) {
    EXPECT_EQ(recs[j].iteration, static_cast<int>(j));
    EXPECT_LE(recs[j].cost, recs[j - 1].cost + 1e-6);
    const auto& prev = recs[j - 1].safe_set;
    ASSERT_GE(recs[j].safe_set.columns(), prev.columns());
    EXPECT_EQ(recs[j].safe_set.X.leftCols(prev.columns()), prev.X);
  }
}

TEST_F(Simulation, EnlargementLoopGrowsSafeSet) {
  LoopOptions lo;
  lo.schedule = Schedule::Enlargement;
  lo.iterations = 2;
  lo.run.seed = 4;
  lo.run.T_max = 25;
  const auto recs = run_learning_loop(*sys, StageCost{}, *tp, lo);
  ASSERT_EQ(recs.size(), 2u);
  double area = tp->O.area();
  for (const auto& r : recs) {
    EXPECT_FALSE(r.bootstrap);
    const double a = convex_hull(r.safe_set.X).area();
    EXPECT_GE(a, area - 1e-9);
    area = a;
  }
  EXPECT_GT(recs[0].rollout.states(0, 0), 0.56);   // d^1 = -e1 pushes x0 to the right
  EXPECT_LT(recs[1].rollout.states(0, 0), -0.56);  // d^2 = +e1 to the left
}

TEST_F(Simulation, MonteCarloZeroRunsIsEmpty) {
  MonteCarloOptions mo;
  mo.runs = 0;
  const auto s = monte_carlo(*sys, *prep, StageCost{}, *tp, mo);
  EXPECT_EQ(s.runs, 0);
  EXPECT_TRUE(s.rollouts.empty());
  EXPECT_EQ(s.mean_cost, 0.0);
  EXPECT_EQ(s.total_steps, 0);
}

TEST_F(Simulation, MonteCarloSafePolicyStaysInSafeSet) {
  MonteCarloOptions mo;
  mo.kind = PolicyKind::SafePolicy;
  mo.runs = 40;
  mo.seed = 5;
  mo.jobs = 2;
  const auto s = monte_carlo(*sys, *prep, StageCost{}, *tp, mo);
  EXPECT_EQ(s.safe_set_exits, 0);
  EXPECT_EQ(s.constraint_violations, 0);
  EXPECT_GT(s.total_steps, 40);
}

TEST_F(Simulation, MonteCarloPairsInitialStates) {
  MonteCarloOptions mo;
  mo.runs = 3;
  mo.seed = 8;
  mo.run.T_max = 4;
  const auto lm = monte_carlo(*sys, *prep, StageCost{}, *tp, mo);
  mo.kind = PolicyKind::SafePolicy;
  const auto sp = monte_carlo(*sys, *prep, StageCost{}, *tp, mo);
  for (int r = 0; r < 3; ++r) {
    EXPECT_EQ(lm.rollouts[r].states.col(0), sp.rollouts[r].states.col(0));
    const int T = std::min(lm.rollouts[r].T(), sp.rollouts[r].T());
    if (T > 0) EXPECT_EQ(lm.rollouts[r].disturbances.col(0), sp.rollouts[r].disturbances.col(0));
  }
  EXPECT_EQ(lm.infeasible_events, 0);
}

TEST(LyapunovGain, FitsWorstRatio) {
  Rollout r;
  r.values = {10, 8, 7};
  r.stage_costs = {1, 1, 0};
  r.disturbances = MatrixXd(1, 2);
  r.disturbances << 0.5, 0.0;
  // (8 - 10 + 1) / 0.5 = -2, second step has no disturbance
  EXPECT_DOUBLE_EQ(fitted_lyapunov_gain(r), 0.0);
  r.values = {10, 10, 7};
  EXPECT_DOUBLE_EQ(fitted_lyapunov_gain(r), 2.0);
}

}  // namespace
