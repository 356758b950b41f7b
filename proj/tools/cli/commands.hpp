#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace ctxda::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kTrainingFailure = 3,
  kCheckpointFailure = 4,
  kAnalysisInputError = 5,
};

/// Command-line values that override the config file.
struct Overrides {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> model;
  std::optional<std::string> encoder;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<int> runs;
};

/// Config file (if any) with overrides applied, validated.
RunConfig resolve_config(const Overrides& o);

struct EvalOptions {
  std::vector<std::filesystem::path> nc;        // one per run
  std::vector<std::filesystem::path> wc;        // one per run
  std::vector<std::filesystem::path> ensemble;  // averaged into an extra row
};

struct AnalyzeOptions {
  std::vector<std::filesystem::path> records;  // one file per run
  bool attention = true;
};

// Each command throws on failure; run() maps exceptions to exit codes.
void cmd_prepare(const RunConfig& cfg, std::ostream& out);
void cmd_synth(const RunConfig& cfg, std::ostream& out);
void cmd_train(const RunConfig& cfg, std::ostream& out);
void cmd_eval(const RunConfig& cfg, const EvalOptions& opts, std::ostream& out);
void cmd_analyze(const RunConfig& cfg, const AnalyzeOptions& opts, std::ostream& out);

/// Full command line (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctxda::cli
