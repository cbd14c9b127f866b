#pragma once

// Episode state machine for sequential tool selection.
//
// Per episode: budget = |G| + s steps; every step the agent picks from the valid
// set, receives 1 if the pick matches an unmatched ground-truth occurrence, and
// an action leaves the valid set once picked m times. The episode ends when the
// budget is spent or no valid action remains.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toolbandit/baselines.hpp"
#include "toolbandit/context_source.hpp"
#include "toolbandit/metrics.hpp"
#include "toolbandit/types.hpp"

namespace toolbandit {

inline constexpr int kDefaultExtraSteps = 3;
inline constexpr int kDefaultMaxPerArm = 3;

enum class RewardMode { step, final, both };

RewardMode parse_reward_mode(std::string_view text);
std::string_view to_string(RewardMode mode);

/// `final` and `both` replay each selected step's context at episode end with
/// reward final_weight * terminal signal (episode F1 by default).
struct RewardConfig {
  RewardMode mode = RewardMode::step;
  double final_weight = 1.0;

  bool updates_per_step() const { return mode != RewardMode::final; }
  bool updates_at_end() const { return mode != RewardMode::step; }
};

struct StepRecord {
  int step = 0;
  ActionId action;
  double reward = 0.0;  // learning signal delivered at this step (match bit unless overridden)
  int matched = 0;      // 1 iff the pick consumed a ground-truth occurrence
  std::uint64_t context_digest = 0;
  std::map<ActionId, double> scores;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct EpisodeState {
  ActionSet valid;
  std::map<ActionId, int> remaining;  // unmatched ground truth, action -> count
  int step = 1;
  int budget = 0;
  std::map<ActionId, int> per_arm_counts;
  std::vector<StepRecord> log;
  std::vector<ContextVector> contexts;  // parallel to log

  std::size_t remaining_size() const;
};

/// Throws ConfigError for s < 0, m < 1, or an invalid episode.
EpisodeState begin_episode(const Episode& episode, int extra_steps, int max_per_arm);

/// Binary multiset-matching reward; consumes one occurrence on a hit.
/// Throws ProtocolViolation when `action` is not valid.
int step_reward(EpisodeState& state, const ActionId& action);

/// Counts the selection and drops the action from the valid set at the cap.
void apply_selection(EpisodeState& state, const ActionId& action, int max_per_arm);

enum class Termination { budget, exhausted, aborted };
std::string_view to_string(Termination t);

struct EpisodeResult {
  MultisetMetrics metrics;
  int steps_taken = 0;
  std::vector<ActionId> selected;
  std::vector<double> rewards;
  Termination terminated_by = Termination::budget;
  bool degenerate = false;  // empty ground truth
  double terminal_reward = 0.0;
  std::string abort_reason;
  std::vector<StepRecord> log;

  bool aborted() const { return terminated_by == Termination::aborted; }

  friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

/// Overrides the learning signal of a step (synthetic streams deliver
/// realized linear rewards instead of match bits).
class StepFeedback {
 public:
  virtual ~StepFeedback() = default;
  virtual double reward(const Episode& episode, int step, const ActionId& action, int matched) = 0;
};

using StepObserver = std::function<void(const Episode&, const StepRecord&, const Agent&)>;
using TerminalSignal = std::function<double(const MultisetMetrics&)>;

struct EpisodeOptions {
  RewardConfig reward;
  int extra_steps = kDefaultExtraSteps;
  int max_per_arm = kDefaultMaxPerArm;
  StepFeedback* feedback = nullptr;
  StepObserver on_step;
  TerminalSignal terminal_signal;  // F1 when empty
  bool record_scores = true;
};

/// Runs one episode and applies all policy updates the reward mode calls for.
/// A ContextUnavailable from the source aborts the episode (no end-of-episode
/// updates); other errors propagate.
EpisodeResult run_episode(Agent& agent, const Episode& episode, ContextSource& source, const EpisodeOptions& options);

struct EpisodeRecord {
  std::size_t index = 0;  // position in the processed stream
  std::string task_id;
  EpisodeResult result;

  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

struct StreamResult {
  std::vector<EpisodeRecord> episodes;
  std::vector<double> running_f1;  // over completed (non-aborted) episodes
  std::size_t aborted = 0;
  double f1_sum = 0.0;  // running sum behind running_f1

  /// Macro average over completed episodes; nullopt when there are none.
  std::optional<MultisetMetrics> macro() const;
  double final_running_f1() const { return running_f1.empty() ? 0.0 : running_f1.back(); }

  friend bool operator==(const StreamResult&, const StreamResult&) = default;
};

/// Seeded Fisher-Yates permutation of the episode order.
std::vector<Episode> shuffle_episodes(std::vector<Episode> episodes, std::uint64_t seed);

/// Runs `episodes` in the given order, appending to `into`. Policy state persists.
/// Indices continue from into.episodes.size(), so a stream can be split and resumed.
void run_episodes(Agent& agent, std::span<const Episode> episodes, ContextSource& source,
                  const EpisodeOptions& options, StreamResult& into);

/// Shuffles by `shuffle_seed`, then runs sequentially.
StreamResult run_stream(Agent& agent, std::vector<Episode> episodes, ContextSource& source,
                        const EpisodeOptions& options, std::uint64_t shuffle_seed);

}  // namespace toolbandit
