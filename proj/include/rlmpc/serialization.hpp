#pragma once

#include "rlmpc/roa.hpp"
#include "rlmpc/safe_set.hpp"
#include "rlmpc/simulation.hpp"
#include "rlmpc/system_model.hpp"

#include <json.hpp>

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rlmpc {

/// Malformed configuration or artifact; the message carries source:line:col when known.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Eigen and polytope encodings: matrices as row lists, point sets as lists of points.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& M);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
nlohmann::json points_to_json(const Eigen::MatrixXd& columns);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);
Eigen::MatrixXd points_from_json(const nlohmann::json& j, int dim);

nlohmann::json to_json(const Polytope& P);
/// Accepts {"vertices": [[...], ...]} or {"box": {"lower": [...], "upper": [...]}}.
Polytope polytope_from_json(const nlohmann::json& j);

/// FNV-1a (64 bit) of the canonical JSON of (A, B, X, U, W, O, K, cost), as 16 hex digits.
std::string model_fingerprint(const SystemModel& sys, const TerminalPair& tp, const StageCost& cost);

nlohmann::json to_json(const SafeSetData& ss, const std::string& fingerprint);
SafeSetData safe_set_from_json(const nlohmann::json& j, std::string* fingerprint = nullptr);

nlohmann::json to_json(const RoaApproximation& roa);

struct BenchmarkConfig {
  explicit BenchmarkConfig(SystemModel sys) : system(std::move(sys)) {}

  SystemModel system;
  std::string name = "benchmark";
  std::optional<TerminalPair> terminal;  // synthesized when absent
  double alpha = 0.05;
  int max_s = 50;
  StageCost cost;
  int N = 3;
  int T_max = 50;
  double eps_stop = 1e-3;
  Schedule schedule = Schedule::FixedInitialState;
  int iterations = 5;
  Eigen::VectorXd x0;
  int bootstrap_horizon = 20;
  RolloutMode mode = RolloutMode::CertaintyEquivalent;
  bool prune = false;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int runs = 100;
  PolicyKind policy = PolicyKind::Lmpc;
  double disturbance_scale = 1.0;
  int directions = 16;
  int q_grid = 41;  // Q samples per axis in the learn output
};

/// Strict parser: unknown keys and wrong types are errors reported as
/// "source:line:col: message".
BenchmarkConfig parse_config(std::string_view text, std::string_view source = "<config>");
BenchmarkConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const BenchmarkConfig& cfg);

TerminalPair resolve_terminal_pair(const BenchmarkConfig& cfg, MrpiInfo* info = nullptr);

/// Shortest decimal text that round-trips the double.
std::string format_double(double v);

/// RFC 4180 writer: CRLF records, fields quoted when they contain a comma,
/// quote, CR or LF.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& os_;
};

/// Header plus one record per time step: t, x*, u*, w*, h, J, dist_O, N_t.
void write_rollout_csv(std::ostream& os, const Rollout& r, const std::string& prefix_name = {},
                       const std::string& prefix_value = {});
std::vector<std::string> rollout_csv_header(int n, int d, const std::string& prefix_name = {});
void append_rollout_rows(CsvWriter& w, const Rollout& r, int n, int d, const std::string& prefix_value = {});

/// Writes JSON with two-space indentation and a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace rlmpc
