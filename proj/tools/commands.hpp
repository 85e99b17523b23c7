#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace rlmpc::cli {

// Exit codes shared by every command.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;  // violated check, solver failure, missing artifact
inline constexpr int kUsage = 2;    // bad flags or unparsable config

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;
};

struct LearnFlags : Common {
  bool dry_run = false;
};

struct MonteCarloFlags : Common {
  std::optional<int> runs;
  std::optional<std::string> policy;  // "lmpc" | "safe"
  std::optional<int> iteration;       // safe-set artifact to load; latest by default
};

struct RoaFlags : Common {
  std::optional<int> directions;
};

int cmd_verify(const Common& f, std::ostream& out, std::ostream& err);
int cmd_learn(const LearnFlags& f, std::ostream& out, std::ostream& err);
int cmd_montecarlo(const MonteCarloFlags& f, std::ostream& out, std::ostream& err);
int cmd_roa(const RoaFlags& f, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to the subcommand.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rlmpc::cli
