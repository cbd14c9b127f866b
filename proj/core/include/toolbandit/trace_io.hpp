#pragma once

// File formats.
//
// Trace files are JSON lines. Line 1 is a header
//   {"type":"header","format_version":1,"d":4,"action_vocabulary":[...],
//    "embeddings":{"name":[...]}, "recording_policy":"..."}
// followed by one record per (task, step):
//   {"task_id":"t1","step":1,"context":[...],"candidates":[...],
//    "ground_truth":[...],"prior_action":null}
// Records of an episode are contiguous with steps 1, 2, ...; ground_truth and
// candidates are required on the first record and optional afterwards.
// Context values are written with 9 significant digits.
//
// Checkpoints are a little-endian binary blob with exact doubles and a trailing
// FNV-1a checksum.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "toolbandit/baselines.hpp"
#include "toolbandit/context_source.hpp"
#include "toolbandit/episode.hpp"

namespace toolbandit {

inline constexpr int kTraceFormatVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TraceHeader {
  int format_version = kTraceFormatVersion;
  std::size_t dimension = 0;
  std::vector<ActionId> vocabulary;
  std::map<ActionId, std::vector<double>> embeddings;  // optional warm-start priors
  std::string recording_policy;

  friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

struct RecordedStep {
  ContextVector context;
  std::optional<ActionId> prior_action;

  friend bool operator==(const RecordedStep&, const RecordedStep&) = default;
};

struct Trace {
  TraceHeader header;
  std::vector<Episode> episodes;
  std::map<std::string, std::vector<RecordedStep>> steps;  // keyed by Episode::key()

  friend bool operator==(const Trace&, const Trace&) = default;
};

/// Parses and validates a trace. Errors name the 1-based line and the field.
Trace parse_trace(std::istream& in);
Trace load_trace(const std::filesystem::path& path);

void write_trace(const Trace& trace, std::ostream& out);
void save_trace(const Trace& trace, const std::filesystem::path& path);

/// Rounds to 9 significant digits, the precision used for stored contexts.
double round_significant9(double v);

/// Policy with one arm per vocabulary entry, warm-started from header
/// embeddings when present (zero prior otherwise).
BanditPolicy policy_from_header(const TraceHeader& header, double alpha);

/// Serves recorded contexts by (episode key, step). Steps beyond the recording
/// throw ContextUnavailable: a replay cannot extend a trajectory.
class ReplayContextSource : public ContextSource {
 public:
  explicit ReplayContextSource(const Trace& trace);

  std::size_t dimension() const override { return dimension_; }
  ContextVector next_context(const Episode& episode, int step) override;

 private:
  std::size_t dimension_;
  const std::map<std::string, std::vector<RecordedStep>>* steps_;
};

// Checkpoints ----------------------------------------------------------------

using Bytes = std::vector<std::uint8_t>;

Bytes checkpoint_policy(const BanditPolicy& policy);
BanditPolicy restore_policy(const Bytes& blob);

/// Full agent: kind, linear statistics, UCB1 counters and generator state.
Bytes checkpoint_agent(const Agent& agent);
Agent restore_agent(const Bytes& blob);

void write_bytes(const Bytes& blob, const std::filesystem::path& path);
Bytes read_bytes(const std::filesystem::path& path);

// Results --------------------------------------------------------------------

struct RunLabel {
  std::string policy;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::string reward_mode = "step";
};

/// One JSON line per episode: {episode_index, task_id, P, R, F1, steps, rewards,
/// policy, alpha, seed, terminated_by, aborted}.
void write_episode_records(const StreamResult& result, const RunLabel& label, std::ostream& out);

/// CSV "index,running_avg_f1".
void write_f1_curve(const StreamResult& result, std::ostream& out);

}  // namespace toolbandit
