#pragma once

// Experiment runner behind the `toolbandit` executable.
//
//   toolbandit synth   [--instance standard|deceptive] [--T --d --K --sigma ...]
//   toolbandit replay  --trace FILE
//   toolbandit live    --trace FILE --extractor-cmd CMD
//   toolbandit sweep   --alphas 0.01,0.1,1,10 [--trace FILE]
//   toolbandit report  [--out DIR]
//   toolbandit make-trace --trace FILE
//
// Every command is a pure function of its flags and input files. Exit codes:
// 0 ok, 1 run error, 2 usage error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "toolbandit/baselines.hpp"
#include "toolbandit/episode.hpp"
#include "toolbandit/metrics.hpp"
#include "toolbandit/synthetic.hpp"

namespace toolbandit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRunError = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kOutDirEnv = "TOOLBANDIT_OUT_DIR";

enum class Mode { synth, replay, live, sweep, report, make_trace };

struct RunConfig {
  Mode mode = Mode::synth;
  PolicyKind policy;
  double alpha = kDefaultAlpha;
  int s = kDefaultExtraSteps;
  int m = kDefaultMaxPerArm;
  RewardConfig reward;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::filesystem::path trace;
  std::filesystem::path out = "results";
  std::string extractor_cmd;
  std::chrono::milliseconds timeout = std::chrono::milliseconds(120'000);
  std::size_t jobs = 1;

  // synthetic
  std::string instance = "standard";
  SyntheticConfig synth;

  // sweep
  std::vector<double> alphas;

  // make-trace
  ToolTraceConfig tool_trace;

  /// Throws ConfigError on violated invariants.
  void validate() const;

  /// Synthetic instance for one seed, with overrides applied.
  SyntheticConfig synthetic_for(std::uint64_t seed) const;
};

struct SynthSeedSummary {
  std::uint64_t seed = 0;
  double avg_f1 = 0.0;
  double opt_rate = 0.0;
  double regret = 0.0;
  double theta_error = 0.0;
};

struct StreamSeedSummary {
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  std::size_t aborted = 0;
  MultisetMetrics macro;
  double final_running_f1 = 0.0;
};

/// Runs one synthetic seed and writes its curve and episode files under cfg.out.
SynthSeedSummary synth_seed(const RunConfig& cfg, std::uint64_t seed, bool write_files = true);

int cmd_synth(const RunConfig& cfg, std::ostream& log);
int cmd_replay(const RunConfig& cfg, std::ostream& log);
int cmd_live(const RunConfig& cfg, std::ostream& log);
int cmd_sweep(const RunConfig& cfg, std::ostream& log);
int cmd_report(const RunConfig& cfg, std::ostream& log);
int cmd_make_trace(const RunConfig& cfg, std::ostream& log);

/// Parses argv and dispatches. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace toolbandit::cli
