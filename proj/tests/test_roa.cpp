#include "rlmpc/roa.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

using namespace rlmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// x+ = 2x + u + w with |u|_inf <= 1, |w|_inf <= 0.1, K = -2 I so that O = W.
// One step with feedback: 2x + g must be 0, so C = {|x|_inf <= 1/2}.
struct Deadbeat {
  SystemModel sys = SystemModel::make(2 * MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2), fixtures::box(2, 10),
                                      fixtures::box(2, 1), fixtures::box(2, 0.1));
  TerminalPair tp = TerminalPair::make(fixtures::box(2, 0.1), -2 * MatrixXd::Identity(2, 2));
  PreparedSafeSet prep{init_safe_set(tp)};
  double box_radius() const { return (1.0 + 0.1 - 0.1) / 2.0; }  // interval oracle: |2 x_i| <= u_max + o_max - w_max
};

}  // namespace

TEST(RoaQuery, OrthonormalComplement) {
  const auto q = RoaQuery::make(Eigen::Vector3d(1, 2, 2), 1);
  EXPECT_NEAR(q.d.norm(), 1.0, 1e-12);
  EXPECT_LT((q.perp.transpose() * q.d).norm(), 1e-12);
  EXPECT_LT((q.perp.transpose() * q.perp - MatrixXd::Identity(2, 2)).norm(), 1e-12);
  EXPECT_THROW(RoaQuery::make(VectorXd::Zero(2), 0), std::invalid_argument);
}

TEST(ExtremeInitialState, BoxOracle) {
  Deadbeat p;
  ASSERT_TRUE(verify_terminal_pair(p.sys, p.tp).ok);
  const double r = p.box_radius();
  const auto a = extreme_initial_state(p.sys, p.prep, StageCost{}, p.tp, RoaQuery::make(Eigen::Vector2d(1, 0), 1), 1);
  ASSERT_TRUE(a.ok());
  EXPECT_LT((a.x0 - Eigen::Vector2d(-r, 0)).norm(), 1e-6);
  const auto b = extreme_initial_state(p.sys, p.prep, StageCost{}, p.tp, RoaQuery::make(Eigen::Vector2d(1, 1), 1), 1);
  ASSERT_TRUE(b.ok());
  EXPECT_LT((b.x0 - Eigen::Vector2d(-r, -r)).norm(), 1e-6);
  // Without feedback the state has to start in O itself.
  const auto c = extreme_initial_state(p.sys, p.prep, StageCost{}, p.tp, RoaQuery::make(Eigen::Vector2d(-1, 0), 0), 1);
  ASSERT_TRUE(c.ok());
  EXPECT_LT((c.x0 - Eigen::Vector2d(0.1, 0)).norm(), 1e-6);
}

TEST(ExtremeInitialState, TightStateConstraintsAreInfeasible) {
  Deadbeat p;
  p.sys = SystemModel::make(p.sys.A, p.sys.B, fixtures::box(2, 0.05), p.sys.U, p.sys.W);
  const auto r = extreme_initial_state(p.sys, p.prep, StageCost{}, p.tp, RoaQuery::make(Eigen::Vector2d(1, 0), 2), 2);
  EXPECT_EQ(r.status, conic::SolveStatus::Infeasible);
}

TEST(ExtremeInitialState, LineConstraintHolds) {
  const auto sys = fixtures::double_integrator();
  const auto tp = synthesize_terminal_pair(sys);
  const PreparedSafeSet prep(init_safe_set(tp));
  for (int N_t = 0; N_t <= 3; ++N_t) {
    const auto r = extreme_initial_state(sys, prep, StageCost{}, tp, RoaQuery::make(Eigen::Vector2d(1, 0), N_t), 3);
    ASSERT_TRUE(r.ok());
    EXPECT_NEAR(r.x0[1], 0.0, 1e-9);
    EXPECT_LT(r.x0[0], 0.0);
  }
}

TEST(ApproximateRoa, TwoDirectionsGiveASegment) {
  Deadbeat p;
  const auto roa = approximate_roa(p.sys, p.prep, StageCost{}, p.tp, {Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0)}, 1);
  ASSERT_EQ(roa.hull.num_vertices(), 2);
  EXPECT_NEAR(roa.hull.vertex(0)[0], -p.box_radius(), 1e-6);
  EXPECT_NEAR(roa.hull.vertex(1)[0], p.box_radius(), 1e-6);
  EXPECT_NEAR(roa.hull.vertex(0)[1], 0.0, 1e-9);
  ASSERT_EQ(roa.queries.size(), 2u);
  EXPECT_EQ(roa.queries[1].direction, 1);
}

TEST(ApproximateRoa, SixteenDirectionsAreFeasible) {
  const auto sys = fixtures::double_integrator();
  const auto tp = synthesize_terminal_pair(sys);
  const PreparedSafeSet prep(init_safe_set(tp));
  const auto roa = approximate_roa(sys, prep, StageCost{}, tp, uniform_directions(16), 3);
  EXPECT_EQ(roa.queries.size(), 48u);
  EXPECT_GE(roa.hull.num_vertices(), 4);
  for (int i = 0; i < roa.hull.num_vertices(); ++i)
    EXPECT_NO_THROW(lmpc_step(sys, prep, StageCost{}, tp, roa.hull.vertex(i), 3)) << roa.hull.vertex(i).transpose();
  // O lies inside the approximation
  for (int i = 0; i < tp.O.num_vertices(); ++i) EXPECT_TRUE(roa.hull.contains(tp.O.vertex(i), 1e-6));
}

TEST(ApproximateRoa, AllInfeasibleThrows) {
  // X misses the query line x_2 = 0 entirely.
  Deadbeat p;
  p.sys = SystemModel::make(p.sys.A, p.sys.B, Polytope::box(Eigen::Vector2d(-1, 4), Eigen::Vector2d(1, 6)), p.sys.U,
                            p.sys.W);
  EXPECT_THROW(approximate_roa(p.sys, p.prep, StageCost{}, p.tp, {Eigen::Vector2d(1, 0)}, 2, 1), EmptyApproximation);
}

TEST(SelectInitialCondition, AlternatingDirection) {
  Deadbeat p;
  const VectorXd x0 = select_initial_condition(p.sys, p.prep, StageCost{}, p.tp, 0, 1);
  const VectorXd x1 = select_initial_condition(p.sys, p.prep, StageCost{}, p.tp, 1, 1);
  EXPECT_LT((x0 - Eigen::Vector2d(-p.box_radius(), 0)).norm(), 1e-6);
  EXPECT_LT((x1 - Eigen::Vector2d(p.box_radius(), 0)).norm(), 1e-6);
}

TEST(SelectInitialCondition, DisturbanceFreeOneStepHandSolve) {
  // x+ = 3x + u, |u| <= 1.2, W = O = {0}: farthest x with 3x + u = 0 is |x| = 0.4.
  const auto sys = fixtures::scalar_system(3.0, 1.0, 10, 1.2, 0.0);
  const auto tp = TerminalPair::make(Polytope::point(VectorXd::Zero(1)), MatrixXd::Constant(1, 1, -3.0));
  const PreparedSafeSet prep(init_safe_set(tp));
  EXPECT_NEAR(select_initial_condition(sys, prep, StageCost{}, tp, 0, 1)[0], -0.4, 1e-6);
  EXPECT_NEAR(select_initial_condition(sys, prep, StageCost{}, tp, 1, 1)[0], 0.4, 1e-6);
}

TEST(SelectInitialCondition, TerminalSetStartIsFeasibleBoundary) {
  const auto sys = fixtures::double_integrator();
  const auto tp = synthesize_terminal_pair(sys);
  const PreparedSafeSet prep(init_safe_set(tp));
  const VectorXd x0 = select_initial_condition(sys, prep, StageCost{}, tp, 0, 3);
  EXPECT_NEAR(x0[1], 0.0, 1e-9);
  EXPECT_LT(x0[0], tp.O.lower()[0]);  // strictly beyond O along -e1
  EXPECT_NO_THROW(lmpc_step(sys, prep, StageCost{}, tp, x0, 3));
  EXPECT_THROW(lmpc_step(sys, prep, StageCost{}, tp, Eigen::Vector2d(x0[0] - 1e-3, 0), 3), AllInfeasible);
}
