#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace scopelens::cli {

/// Settings shared by every subcommand; `--config` JSON mirrors these keys
/// plus an "options" object of per-command flags (long names without dashes).
/// Flags given on the command line win over the config file.
struct RunConfig {
  std::string net;
  std::string weights;
  std::string dataset;
  std::uint64_t seed = 0;
  std::string out = "scopelens-out";
  int threads = 0;  // 0: SCOPELENS_THREADS, else hardware concurrency
};

/// Runs one command line (args[0] is the program name). Exit codes: 0
/// success, 1 runtime error, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scopelens::cli
