#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dff {

inline constexpr const char* kToolVersion = "1.0.0";

/// Resolved parameters of one CLI invocation, written as manifest.txt next
/// to every output. It carries no timestamps, so equal manifests imply
/// byte-identical outputs.
struct RunManifest {
  std::string subcommand;
  std::vector<std::pair<std::string, std::string>> parameters;  // in resolution order
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;

  std::string format() const;
};

/// Exit codes of run_cli.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

/// Parses `args` (without the program name) and runs the subcommand.
/// Normal output goes to `out`, diagnostics and usage to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dff
