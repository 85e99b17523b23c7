#include "rlmpc/serialization.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rlmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

json matrix_to_json(const MatrixXd& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json points_to_json(const MatrixXd& columns) {
  json a = json::array();
  for (int j = 0; j < columns.cols(); ++j) a.push_back(vector_to_json(columns.col(j)));
  return a;
}

VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("expected an array of numbers");
  VectorXd v(static_cast<int>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("expected an array of numbers");
    v[static_cast<int>(i)] = j[i].get<double>();
  }
  return v;
}

MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("expected a non-empty list of rows");
  const VectorXd first = vector_from_json(j[0]);
  MatrixXd M(static_cast<int>(j.size()), first.size());
  for (size_t i = 0; i < j.size(); ++i) {
    const VectorXd r = vector_from_json(j[i]);
    if (r.size() != M.cols()) throw ConfigError("rows have different lengths");
    M.row(static_cast<int>(i)) = r.transpose();
  }
  return M;
}

MatrixXd points_from_json(const json& j, int dim) {
  if (!j.is_array()) throw ConfigError("expected a list of points");
  MatrixXd P(dim, static_cast<int>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    const VectorXd p = vector_from_json(j[i]);
    if (p.size() != dim) throw ConfigError("point has dimension " + std::to_string(p.size()) + ", expected " +
                                           std::to_string(dim));
    P.col(static_cast<int>(i)) = p;
  }
  return P;
}

json to_json(const Polytope& P) { return json{{"vertices", points_to_json(P.vertices())}}; }

Polytope polytope_from_json(const json& j) {
  if (!j.is_object() || j.size() != 1) throw ConfigError("polytope must have exactly one of \"vertices\" or \"box\"");
  if (j.contains("vertices")) {
    const json& v = j["vertices"];
    if (!v.is_array() || v.empty()) throw ConfigError("\"vertices\" must be a non-empty list of points");
    return Polytope(points_from_json(v, static_cast<int>(vector_from_json(v[0]).size())));
  }
  if (j.contains("box")) {
    const json& b = j["box"];
    if (!b.is_object() || !b.contains("lower") || !b.contains("upper") || b.size() != 2)
      throw ConfigError("\"box\" needs exactly \"lower\" and \"upper\"");
    const VectorXd lo = vector_from_json(b["lower"]), hi = vector_from_json(b["upper"]);
    if (lo.size() != hi.size() || lo.size() == 0) throw ConfigError("box bounds have different lengths");
    if ((hi - lo).minCoeff() < 0) throw ConfigError("box has lower > upper");
    return Polytope::box(lo, hi);
  }
  throw ConfigError("polytope must have exactly one of \"vertices\" or \"box\"");
}

std::string model_fingerprint(const SystemModel& sys, const TerminalPair& tp, const StageCost& cost) {
  const json canon = {{"A", matrix_to_json(sys.A)},
                      {"B", matrix_to_json(sys.B)},
                      {"X", points_to_json(sys.X.vertices())},
                      {"U", points_to_json(sys.U.vertices())},
                      {"W", points_to_json(sys.W.vertices())},
                      {"O", points_to_json(tp.O.vertices())},
                      {"K", matrix_to_json(tp.K)},
                      {"cost", {{"q", cost.q}, {"r", cost.r}, {"norm", to_string(cost.mode)}}}};
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const SafeSetData& ss, const std::string& fingerprint) {
  json tags = json::array();
  for (const auto& t : ss.tags) tags.push_back(json::array({t.iteration, t.time, t.depth, t.path}));
  return json{{"format", "rlmpc-safe-set"},
              {"version", 1},
              {"fingerprint", fingerprint},
              {"iteration", ss.iteration},
              {"n", ss.n()},
              {"d", ss.d()},
              {"columns", ss.columns()},
              {"X", points_to_json(ss.X)},
              {"U", points_to_json(ss.U)},
              {"J", vector_to_json(ss.J)},
              {"tags", std::move(tags)}};
}

SafeSetData safe_set_from_json(const json& j, std::string* fingerprint) {
  try {
    if (j.value("format", "") != "rlmpc-safe-set") throw ConfigError("not a safe-set artifact");
    if (j.at("version").get<int>() != 1) throw ConfigError("unsupported safe-set artifact version");
    SafeSetData ss;
    const int n = j.at("n").get<int>(), d = j.at("d").get<int>(), C = j.at("columns").get<int>();
    ss.iteration = j.at("iteration").get<int>();
    ss.X = points_from_json(j.at("X"), n);
    ss.U = points_from_json(j.at("U"), d);
    ss.J = vector_from_json(j.at("J"));
    if (ss.X.cols() != C || ss.U.cols() != C || ss.J.size() != C)
      throw ConfigError("column count does not match X, U and J");
    for (const auto& t : j.at("tags")) {
      ColumnTag tag;
      tag.iteration = t.at(0).get<int>();
      tag.time = t.at(1).get<int>();
      tag.depth = t.at(2).get<int>();
      tag.path = t.at(3).get<std::vector<int>>();
      ss.tags.push_back(std::move(tag));
    }
    if (static_cast<int>(ss.tags.size()) != C) throw ConfigError("tag count does not match the column count");
    if (fingerprint) *fingerprint = j.at("fingerprint").get<std::string>();
    return ss;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed safe-set artifact: ") + e.what());
  }
}

json to_json(const RoaApproximation& roa) {
  json q = json::array();
  for (const auto& r : roa.queries)
    q.push_back({{"direction", r.direction},
                 {"d", vector_to_json(r.query.d)},
                 {"N_t", r.query.N_t},
                 {"status", conic::to_string(r.status)},
                 {"x0", r.ok() ? vector_to_json(r.x0) : json(nullptr)}});
  return json{{"hull", points_to_json(roa.hull.vertices())}, {"queries", std::move(q)}};
}

namespace {

// Byte offset of the key named by a JSON pointer, found by scanning for each
// quoted key in turn (array indices are skipped).
size_t locate(std::string_view text, const json::json_pointer& ptr) {
  size_t pos = 0, found = std::string_view::npos;
  std::string s = ptr.to_string();
  std::stringstream ss(s);
  std::string tok;
  std::getline(ss, tok, '/');
  while (std::getline(ss, tok, '/')) {
    if (!tok.empty() && std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(c); })) continue;
    const size_t p = text.find("\"" + tok + "\"", pos);
    if (p == std::string_view::npos) break;
    found = pos = p;
  }
  return found;
}

std::string position(std::string_view text, size_t offset) {
  int line = 1, col = 1;
  for (size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

struct Parser {
  std::string_view text;
  std::string source;

  [[noreturn]] void fail(const json::json_pointer& p, const std::string& msg) const {
    const size_t off = locate(text, p);
    std::string where = source;
    if (off != std::string_view::npos) where += ":" + position(text, off);
    throw ConfigError(where + ": " + (p.empty() ? std::string("/") : p.to_string()) + ": " + msg);
  }

  void keys(const json& j, const json::json_pointer& p, std::initializer_list<const char*> allowed) const {
    if (!j.is_object()) fail(p, "expected an object");
    for (const auto& [k, v] : j.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) fail(p / k, "unknown key");
    }
  }

  template <class F>
  auto guard(const json::json_pointer& p, F&& f) const {
    try {
      return f();
    } catch (const ConfigError& e) {
      fail(p, e.what());
    } catch (const std::invalid_argument& e) {
      fail(p, e.what());
    } catch (const json::exception& e) {
      fail(p, e.what());
    }
  }

  double number(const json& j, const json::json_pointer& p) const {
    if (!j.is_number()) fail(p, "expected a number");
    return j.get<double>();
  }

  long long integer(const json& j, const json::json_pointer& p, long long lo) const {
    if (!j.is_number_integer()) fail(p, "expected an integer");
    const long long v = j.get<long long>();
    if (v < lo) fail(p, "must be at least " + std::to_string(lo));
    return v;
  }

  bool boolean(const json& j, const json::json_pointer& p) const {
    if (!j.is_boolean()) fail(p, "expected true or false");
    return j.get<bool>();
  }

  std::string choice(const json& j, const json::json_pointer& p, std::initializer_list<const char*> options) const {
    if (!j.is_string()) fail(p, "expected a string");
    const std::string s = j.get<std::string>();
    std::string list;
    for (const char* o : options) {
      if (s == o) return s;
      list += std::string(list.empty() ? "" : ", ") + o;
    }
    fail(p, "expected one of " + list);
  }
};

}  // namespace

BenchmarkConfig parse_config(std::string_view text, std::string_view source) {
  Parser P{text, std::string(source)};
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const size_t off = e.byte > 0 ? e.byte - 1 : 0;
    std::string msg = e.what();
    throw ConfigError(P.source + ":" + position(text, off) + ": " + msg);
  }
  using ptr = json::json_pointer;
  const ptr top;
  P.keys(root, top, {"name", "system", "terminal", "cost", "horizon", "T_max", "eps_stop", "learning", "seed",
                     "output_dir", "montecarlo", "roa"});
  if (!root.contains("system")) P.fail(top, "missing \"system\"");

  const json& js = root["system"];
  const ptr ps = top / "system";
  P.keys(js, ps, {"A", "B", "X", "U", "W"});
  for (const char* k : {"A", "B", "X", "U", "W"})
    if (!js.contains(k)) P.fail(ps, std::string("missing \"") + k + "\"");
  const MatrixXd A = P.guard(ps / "A", [&] { return matrix_from_json(js["A"]); });
  const MatrixXd B = P.guard(ps / "B", [&] { return matrix_from_json(js["B"]); });
  const Polytope X = P.guard(ps / "X", [&] { return polytope_from_json(js["X"]); });
  const Polytope U = P.guard(ps / "U", [&] { return polytope_from_json(js["U"]); });
  const Polytope W = P.guard(ps / "W", [&] { return polytope_from_json(js["W"]); });
  BenchmarkConfig cfg(P.guard(ps, [&] { return SystemModel::make(A, B, X, U, W); }));
  const int n = cfg.system.n();

  if (root.contains("name")) {
    if (!root["name"].is_string()) P.fail(top / "name", "expected a string");
    cfg.name = root["name"].get<std::string>();
  }
  if (root.contains("terminal")) {
    const json& jt = root["terminal"];
    const ptr pt = top / "terminal";
    P.keys(jt, pt, {"O", "K", "alpha", "max_s"});
    if (jt.contains("O") != jt.contains("K")) P.fail(pt, "\"O\" and \"K\" must be given together");
    if (jt.contains("O")) {
      Polytope O = P.guard(pt / "O", [&] { return polytope_from_json(jt["O"]); });
      MatrixXd K = P.guard(pt / "K", [&] { return matrix_from_json(jt["K"]); });
      if (O.dim() != n) P.fail(pt / "O", "dimension does not match the state dimension");
      if (K.rows() != cfg.system.d() || K.cols() != n) P.fail(pt / "K", "must be d x n");
      cfg.terminal = TerminalPair::make(std::move(O), std::move(K));
    }
    if (jt.contains("alpha")) {
      cfg.alpha = P.number(jt["alpha"], pt / "alpha");
      if (!(cfg.alpha > 0 && cfg.alpha < 1)) P.fail(pt / "alpha", "must lie in (0, 1)");
    }
    if (jt.contains("max_s")) cfg.max_s = static_cast<int>(P.integer(jt["max_s"], pt / "max_s", 1));
  }
  if (root.contains("cost")) {
    const json& jc = root["cost"];
    const ptr pc = top / "cost";
    P.keys(jc, pc, {"q", "r", "norm"});
    if (jc.contains("q")) cfg.cost.q = P.number(jc["q"], pc / "q");
    if (jc.contains("r")) cfg.cost.r = P.number(jc["r"], pc / "r");
    if (cfg.cost.q <= 0 || cfg.cost.r < 0) P.fail(pc, "need q > 0 and r >= 0");
    if (jc.contains("norm"))
      cfg.cost.mode = P.choice(jc["norm"], pc / "norm", {"euclidean", "polyhedral-inf"}) == "euclidean"
                          ? NormMode::Euclidean
                          : NormMode::PolyhedralInf;
  }
  if (root.contains("horizon")) cfg.N = static_cast<int>(P.integer(root["horizon"], top / "horizon", 1));
  if (root.contains("T_max")) cfg.T_max = static_cast<int>(P.integer(root["T_max"], top / "T_max", 0));
  if (root.contains("eps_stop")) {
    cfg.eps_stop = P.number(root["eps_stop"], top / "eps_stop");
    if (cfg.eps_stop < 0) P.fail(top / "eps_stop", "must be non-negative");
  }
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) P.fail(top / "seed", "expected an unsigned integer");
    cfg.seed = root["seed"].get<std::uint64_t>();
  }
  if (root.contains("output_dir")) {
    if (!root["output_dir"].is_string()) P.fail(top / "output_dir", "expected a string");
    cfg.output_dir = root["output_dir"].get<std::string>();
  }
  if (root.contains("learning")) {
    const json& jl = root["learning"];
    const ptr pl = top / "learning";
    P.keys(jl, pl, {"schedule", "iterations", "x0", "bootstrap_horizon", "mode", "prune", "q_grid"});
    if (jl.contains("schedule"))
      cfg.schedule = P.choice(jl["schedule"], pl / "schedule", {"fixed-x0", "enlargement"}) == "fixed-x0"
                         ? Schedule::FixedInitialState
                         : Schedule::Enlargement;
    if (jl.contains("iterations")) cfg.iterations = static_cast<int>(P.integer(jl["iterations"], pl / "iterations", 0));
    if (jl.contains("x0")) {
      cfg.x0 = P.guard(pl / "x0", [&] { return vector_from_json(jl["x0"]); });
      if (cfg.x0.size() != n) P.fail(pl / "x0", "dimension does not match the state dimension");
    }
    if (jl.contains("bootstrap_horizon"))
      cfg.bootstrap_horizon = static_cast<int>(P.integer(jl["bootstrap_horizon"], pl / "bootstrap_horizon", 1));
    if (jl.contains("mode"))
      cfg.mode = P.choice(jl["mode"], pl / "mode", {"certainty-equivalent", "noisy"}) == "noisy"
                     ? RolloutMode::Noisy
                     : RolloutMode::CertaintyEquivalent;
    if (jl.contains("prune")) cfg.prune = P.boolean(jl["prune"], pl / "prune");
    if (jl.contains("q_grid")) cfg.q_grid = static_cast<int>(P.integer(jl["q_grid"], pl / "q_grid", 2));
  }
  if (cfg.schedule == Schedule::FixedInitialState && cfg.x0.size() == 0)
    P.fail(top / "learning", "the fixed-x0 schedule needs \"x0\"");
  if (root.contains("montecarlo")) {
    const json& jm = root["montecarlo"];
    const ptr pm = top / "montecarlo";
    P.keys(jm, pm, {"runs", "policy", "disturbance_scale"});
    if (jm.contains("runs")) cfg.runs = static_cast<int>(P.integer(jm["runs"], pm / "runs", 0));
    if (jm.contains("policy"))
      cfg.policy = P.choice(jm["policy"], pm / "policy", {"lmpc", "safe"}) == "lmpc" ? PolicyKind::Lmpc
                                                                                   : PolicyKind::SafePolicy;
    if (jm.contains("disturbance_scale")) {
      cfg.disturbance_scale = P.number(jm["disturbance_scale"], pm / "disturbance_scale");
      if (cfg.disturbance_scale < 0) P.fail(pm / "disturbance_scale", "must be non-negative");
    }
  }
  if (root.contains("roa")) {
    const json& jr = root["roa"];
    const ptr pr = top / "roa";
    P.keys(jr, pr, {"directions"});
    if (jr.contains("directions"))
      cfg.directions = static_cast<int>(P.integer(jr["directions"], pr / "directions", 1));
  }
  return cfg;
}

BenchmarkConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

json to_json(const BenchmarkConfig& cfg) {
  json terminal = {{"alpha", cfg.alpha}, {"max_s", cfg.max_s}};
  if (cfg.terminal) {
    terminal["O"] = to_json(cfg.terminal->O);
    terminal["K"] = matrix_to_json(cfg.terminal->K);
  }
  json learning = {{"schedule", to_string(cfg.schedule)},
                   {"iterations", cfg.iterations},
                   {"bootstrap_horizon", cfg.bootstrap_horizon},
                   {"mode", to_string(cfg.mode)},
                   {"prune", cfg.prune},
                   {"q_grid", cfg.q_grid}};
  if (cfg.x0.size() > 0) learning["x0"] = vector_to_json(cfg.x0);
  return json{{"name", cfg.name},
              {"system",
               {{"A", matrix_to_json(cfg.system.A)},
                {"B", matrix_to_json(cfg.system.B)},
                {"X", to_json(cfg.system.X)},
                {"U", to_json(cfg.system.U)},
                {"W", to_json(cfg.system.W)}}},
              {"terminal", std::move(terminal)},
              {"cost", {{"q", cfg.cost.q}, {"r", cfg.cost.r}, {"norm", to_string(cfg.cost.mode)}}},
              {"horizon", cfg.N},
              {"T_max", cfg.T_max},
              {"eps_stop", cfg.eps_stop},
              {"learning", std::move(learning)},
              {"seed", cfg.seed},
              {"output_dir", cfg.output_dir},
              {"montecarlo",
               {{"runs", cfg.runs}, {"policy", to_string(cfg.policy)}, {"disturbance_scale", cfg.disturbance_scale}}},
              {"roa", {{"directions", cfg.directions}}}};
}

TerminalPair resolve_terminal_pair(const BenchmarkConfig& cfg, MrpiInfo* info) {
  if (cfg.terminal) return *cfg.terminal;
  return synthesize_terminal_pair(cfg.system, cfg.alpha, cfg.max_s, info);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) os_ << ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\r\n") == std::string::npos) {
      os_ << f;
      continue;
    }
    os_ << '"';
    for (char c : f) {
      if (c == '"') os_ << '"';
      os_ << c;
    }
    os_ << '"';
  }
  os_ << "\r\n";
}

std::vector<std::string> rollout_csv_header(int n, int d, const std::string& prefix_name) {
  std::vector<std::string> h;
  if (!prefix_name.empty()) h.push_back(prefix_name);
  h.push_back("t");
  for (int i = 0; i < n; ++i) h.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < d; ++i) h.push_back("u" + std::to_string(i + 1));
  for (int i = 0; i < n; ++i) h.push_back("w" + std::to_string(i + 1));
  for (const char* s : {"h", "J", "dist_O", "N_t"}) h.push_back(s);
  return h;
}

void append_rollout_rows(CsvWriter& w, const Rollout& r, int n, int d, const std::string& prefix_value) {
  for (int t = 0; t < r.states.cols(); ++t) {
    std::vector<std::string> f;
    if (!prefix_value.empty()) f.push_back(prefix_value);
    f.push_back(std::to_string(t));
    for (int i = 0; i < n; ++i) f.push_back(format_double(r.states(i, t)));
    for (int i = 0; i < d; ++i) f.push_back(t < r.inputs.cols() ? format_double(r.inputs(i, t)) : "");
    for (int i = 0; i < n; ++i) f.push_back(t < r.disturbances.cols() ? format_double(r.disturbances(i, t)) : "");
    const auto at = [&](const std::vector<double>& v) { return t < static_cast<int>(v.size()) ? format_double(v[t]) : ""; };
    f.push_back(at(r.stage_costs));
    f.push_back(at(r.values));
    f.push_back(at(r.distance_to_O));
    f.push_back(t < static_cast<int>(r.split.size()) ? std::to_string(r.split[t]) : "");
    w.row(f);
  }
}

void write_rollout_csv(std::ostream& os, const Rollout& r, const std::string& prefix_name,
                       const std::string& prefix_value) {
  CsvWriter w(os);
  const int n = static_cast<int>(r.states.rows()), d = static_cast<int>(r.inputs.rows());
  w.row(rollout_csv_header(n, d, prefix_name));
  append_rollout_rows(w, r, n, d, prefix_value);
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  out << j.dump(2) << '\n';
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ":" + position(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
  }
}

}  // namespace rlmpc
