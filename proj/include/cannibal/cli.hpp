#ifndef CANNIBAL_CLI_HPP
#define CANNIBAL_CLI_HPP

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cannibal::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct SynthOptions {
  std::filesystem::path scenario;
  std::filesystem::path out;
  bool force = false;
};

struct RunOptions {
  std::filesystem::path data;
  std::filesystem::path totals;
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::filesystem::path> actuals;
  std::optional<unsigned long long> seed;
  bool svg = false;
  bool force = false;
};

struct ValidateOptions {
  std::filesystem::path data;
  std::filesystem::path totals;
};

int cmd_synth(const SynthOptions& options, std::ostream& out, std::ostream& err);
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_validate(const ValidateOptions& options, std::ostream& out,
                 std::ostream& err);

/// Parses `args` (without the program name) and dispatches. Returns the
/// process exit code.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

/// Sends log output to stderr at the level named by CF_LOG (default warn).
void configure_logging();

}  // namespace cannibal::cli

#endif  // CANNIBAL_CLI_HPP
