#include "rlmpc/serialization.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <sstream>

using namespace rlmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const char* kConfig = R"({
  "name": "di",
  "system": {
    "A": [[1, 1], [0, 1]],
    "B": [[0], [1]],
    "X": {"box": {"lower": [-10, -10], "upper": [10, 10]}},
    "U": {"box": {"lower": [-1], "upper": [1]}},
    "W": {"box": {"lower": [-0.1, -0.1], "upper": [0.1, 0.1]}}
  },
  "learning": {"x0": [5.656, 0]}
})";

TEST(Json, PolytopeRoundTrip) {
  MatrixXd V(2, 3);
  V << 0, 1, 0, 0, 0, 1;
  const Polytope P(V);
  const Polytope Q = polytope_from_json(nlohmann::json::parse(to_json(P).dump()));
  EXPECT_TRUE(same_vertex_set(P, Q, 0.0));
  EXPECT_THROW(polytope_from_json(nlohmann::json::parse(R"({"box": {"lower": [1], "upper": [0]}})")), ConfigError);
  EXPECT_THROW(polytope_from_json(nlohmann::json::parse(R"({"vertices": [[0, 0], [1]]})")), ConfigError);
}

TEST(Json, SafeSetRoundTripIsExact) {
  SafeSetData ss;
  ss.X = MatrixXd::Random(2, 5);
  ss.U = MatrixXd::Random(1, 5);
  ss.J = VectorXd::Random(5).cwiseAbs();
  ss.iteration = 3;
  for (int i = 0; i < 5; ++i) ss.tags.push_back({i, i - 1, i % 3, {i, 1}});
  std::string fp;
  const auto back = safe_set_from_json(nlohmann::json::parse(to_json(ss, "abc").dump()), &fp);
  EXPECT_EQ(fp, "abc");
  EXPECT_EQ(back.X, ss.X);
  EXPECT_EQ(back.U, ss.U);
  EXPECT_EQ(back.J, ss.J);
  EXPECT_EQ(back.iteration, 3);
  ASSERT_EQ(back.tags.size(), 5u);
  EXPECT_EQ(back.tags[4].path, (std::vector<int>{4, 1}));
  auto broken = to_json(ss, "abc");
  broken["columns"] = 6;
  EXPECT_THROW(safe_set_from_json(broken), ConfigError);
}

TEST(Csv, QuotesOnlyWhenNeeded) {
  std::ostringstream os;
  CsvWriter w(os);
  w.row({"a", "b,c", "say \"hi\"", ""});
  w.row({"line\nbreak"});
  EXPECT_EQ(os.str(), "a,\"b,c\",\"say \"\"hi\"\"\",\r\n\"line\nbreak\"\r\n");
}

TEST(Csv, DoublesRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 179.32067378047316, 1e300}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(5.0), "5");
}

TEST(Csv, RolloutRows) {
  Rollout r;
  r.states = MatrixXd::Zero(2, 2);
  r.inputs = MatrixXd::Ones(1, 2);
  r.disturbances = MatrixXd::Constant(2, 1, 0.5);
  r.stage_costs = {1, 0};
  r.values = {2, 0};
  r.distance_to_O = {0.1, 0};
  r.split = {3, 0};
  std::ostringstream os;
  write_rollout_csv(os, r);
  EXPECT_EQ(os.str(),
            "t,x1,x2,u1,w1,w2,h,J,dist_O,N_t\r\n"
            "0,0,0,1,0.5,0.5,1,2,0.1,3\r\n"
            "1,0,0,1,,,0,0,0,0\r\n");
}

TEST(Fingerprint, StableAndSensitive) {
  const auto sys = fixtures::double_integrator();
  const auto tp = synthesize_terminal_pair(sys);
  const std::string a = model_fingerprint(sys, tp, StageCost{});
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(a, model_fingerprint(sys, tp, StageCost{}));
  EXPECT_NE(a, model_fingerprint(sys, tp, StageCost{10, 2}));
  EXPECT_NE(a, model_fingerprint(fixtures::double_integrator(0.2), tp, StageCost{}));
}

TEST(Config, Defaults) {
  const auto cfg = parse_config(kConfig);
  EXPECT_EQ(cfg.name, "di");
  EXPECT_EQ(cfg.N, 3);
  EXPECT_EQ(cfg.T_max, 50);
  EXPECT_EQ(cfg.iterations, 5);
  EXPECT_EQ(cfg.cost.q, 10.0);
  EXPECT_EQ(cfg.cost.r, 1.0);
  EXPECT_EQ(cfg.schedule, Schedule::FixedInitialState);
  EXPECT_EQ(cfg.x0, Eigen::Vector2d(5.656, 0));
  EXPECT_FALSE(cfg.terminal);
  EXPECT_EQ(cfg.system.l(), 4);
}

TEST(Config, EchoParsesBack) {
  const auto cfg = parse_config(kConfig);
  const auto again = parse_config(to_json(cfg).dump(2));
  EXPECT_EQ(to_json(again), to_json(cfg));
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(Config, SyntaxErrorHasLineAndColumn) {
  const std::string msg = error_of("{\n  \"name\": \"x\",\n  \"system\": [1, 2,]\n}");
  EXPECT_EQ(msg.rfind("cfg.json:3:", 0), 0u) << msg;
}

TEST(Config, UnknownKeyIsLocated) {
  std::string text = kConfig;
  text.replace(text.find("\"learning\""), 10, "\"lerning\"");
  const std::string msg = error_of(text);
  EXPECT_NE(msg.find("cfg.json:10:3:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("/lerning"), std::string::npos) << msg;
  EXPECT_NE(msg.find("unknown key"), std::string::npos) << msg;
}

TEST(Config, SemanticErrors) {
  std::string bad_b = kConfig;
  bad_b.replace(bad_b.find("[[0], [1]]"), 10, "[[0], [1], [2]]");
  EXPECT_NE(error_of(bad_b).find("/system"), std::string::npos);

  std::string bad_norm = kConfig;
  bad_norm.replace(bad_norm.find("\"learning\""), 0, "\"cost\": {\"norm\": \"l1\"},\n  ");
  const std::string msg = error_of(bad_norm);
  EXPECT_NE(msg.find("/cost/norm"), std::string::npos) << msg;
  EXPECT_NE(msg.find("euclidean"), std::string::npos) << msg;

  std::string no_x0 = kConfig;
  no_x0.replace(no_x0.find("\"x0\": [5.656, 0]"), 16, "\"iterations\": 2");
  EXPECT_NE(error_of(no_x0).find("needs \"x0\""), std::string::npos);

  std::string neg = kConfig;
  neg.replace(neg.find("\"learning\""), 0, "\"horizon\": 0,\n  ");
  EXPECT_NE(error_of(neg).find("at least 1"), std::string::npos);
}

TEST(Config, ExplicitTerminalPair) {
  std::string text = kConfig;
  text.replace(text.find("\"learning\""), 0,
               "\"terminal\": {\"O\": {\"box\": {\"lower\": [-0.5, -0.3], \"upper\": [0.5, 0.3]}}, \"K\": [[-0.4, "
               "-1.2]]},\n  ");
  const auto cfg = parse_config(text);
  ASSERT_TRUE(cfg.terminal);
  EXPECT_EQ(cfg.terminal->K(0, 1), -1.2);
  EXPECT_EQ(resolve_terminal_pair(cfg).O.num_vertices(), 4);
}

}  // namespace
