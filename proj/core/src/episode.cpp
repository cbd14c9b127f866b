#include "toolbandit/episode.hpp"

#include <string>

#include "toolbandit/errors.hpp"
#include "toolbandit/random.hpp"

namespace toolbandit {

void Episode::validate() const {
  if (candidates.empty()) throw ConfigError("episode '" + task_id + "' has an empty candidate set");
  for (const auto& a : ground_truth) {
    if (!candidates.contains(a)) {
      throw ConfigError("episode '" + task_id + "': ground-truth action '" + a.name() + "' is not a candidate");
    }
  }
}

RewardMode parse_reward_mode(std::string_view text) {
  if (text == "step") return RewardMode::step;
  if (text == "final") return RewardMode::final;
  if (text == "both") return RewardMode::both;
  throw ConfigError("unknown reward mode '" + std::string(text) + "' (expected step, final or both)");
}

std::string_view to_string(RewardMode mode) {
  switch (mode) {
    case RewardMode::step:
      return "step";
    case RewardMode::final:
      return "final";
    case RewardMode::both:
      return "both";
  }
  return "step";
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::budget:
      return "budget";
    case Termination::exhausted:
      return "exhausted";
    case Termination::aborted:
      return "aborted";
  }
  return "budget";
}

std::size_t EpisodeState::remaining_size() const {
  std::size_t n = 0;
  for (const auto& [_, c] : remaining) n += static_cast<std::size_t>(c);
  return n;
}

EpisodeState begin_episode(const Episode& episode, int extra_steps, int max_per_arm) {
  if (extra_steps < 0) throw ConfigError("extra steps s must be >= 0");
  if (max_per_arm < 1) throw ConfigError("per-arm cap m must be >= 1");
  episode.validate();
  EpisodeState state;
  state.valid = episode.candidates;
  for (const auto& a : episode.ground_truth) ++state.remaining[a];
  state.budget = static_cast<int>(episode.ground_truth.size()) + extra_steps;
  return state;
}

int step_reward(EpisodeState& state, const ActionId& action) {
  if (!state.valid.contains(action)) {
    throw ProtocolViolation("action '" + action.name() + "' is not in the valid set");
  }
  auto it = state.remaining.find(action);
  if (it == state.remaining.end()) return 0;
  if (--it->second == 0) state.remaining.erase(it);
  return 1;
}

void apply_selection(EpisodeState& state, const ActionId& action, int max_per_arm) {
  if (!state.valid.contains(action)) {
    throw ProtocolViolation("action '" + action.name() + "' is not in the valid set");
  }
  if (++state.per_arm_counts[action] >= max_per_arm) state.valid.erase(action);
}

EpisodeResult run_episode(Agent& agent, const Episode& episode, ContextSource& source, const EpisodeOptions& options) {
  require_dimension(agent.dimension(), source.dimension(), "context source");
  EpisodeState state = begin_episode(episode, options.extra_steps, options.max_per_arm);
  EpisodeResult result;
  result.degenerate = episode.ground_truth.empty();

  while (state.step <= state.budget && !state.valid.empty()) {
    ContextVector ctx;
    try {
      ctx = source.next_context(episode, state.step);
      require_dimension(agent.dimension(), ctx.dimension(), "served context");
    } catch (const ContextUnavailable& e) {
      result.terminated_by = Termination::aborted;
      result.abort_reason = e.what();
      break;
    } catch (const DimensionError& e) {
      result.terminated_by = Termination::aborted;
      result.abort_reason = e.what();
      break;
    }

    StepRecord record;
    record.step = state.step;
    record.context_digest = ctx.digest();
    if (options.record_scores) record.scores = agent.scores(ctx, state.valid);
    record.action = agent.select(ctx, state.valid);
    record.matched = step_reward(state, record.action);
    record.reward = options.feedback != nullptr
                        ? options.feedback->reward(episode, state.step, record.action, record.matched)
                        : static_cast<double>(record.matched);
    apply_selection(state, record.action, options.max_per_arm);
    if (options.reward.updates_per_step()) agent.update(record.action, ctx, record.reward);
    source.on_action(episode, state.step, record.action);
    if (options.on_step) options.on_step(episode, record, agent);

    result.selected.push_back(record.action);
    result.rewards.push_back(record.reward);
    state.contexts.push_back(std::move(ctx));
    state.log.push_back(std::move(record));
    ++state.step;
  }

  result.steps_taken = static_cast<int>(state.log.size());
  result.metrics = multiset_match(result.selected, episode.ground_truth);

  if (!result.aborted()) {
    result.terminated_by =
        state.valid.empty() && result.steps_taken < state.budget ? Termination::exhausted : Termination::budget;
    if (options.reward.updates_at_end()) {
      const double signal = options.terminal_signal ? options.terminal_signal(result.metrics) : result.metrics.f1;
      result.terminal_reward = options.reward.final_weight * signal;
      for (std::size_t i = 0; i < state.log.size(); ++i) {
        agent.update(state.log[i].action, state.contexts[i], result.terminal_reward);
      }
    }
  }
  source.on_episode_end(episode, to_string(result.terminated_by));
  result.log = std::move(state.log);
  return result;
}

std::optional<MultisetMetrics> StreamResult::macro() const {
  std::vector<MultisetMetrics> done;
  for (const auto& r : episodes) {
    if (!r.result.aborted()) done.push_back(r.result.metrics);
  }
  if (done.empty()) return std::nullopt;
  return macro_average(done);
}

std::vector<Episode> shuffle_episodes(std::vector<Episode> episodes, std::uint64_t seed) {
  Rng rng(seed);
  rng.shuffle(episodes);
  return episodes;
}

void run_episodes(Agent& agent, std::span<const Episode> episodes, ContextSource& source,
                  const EpisodeOptions& options, StreamResult& into) {
  for (const auto& episode : episodes) {
    EpisodeRecord record;
    record.index = into.episodes.size();
    record.task_id = episode.task_id;
    record.result = run_episode(agent, episode, source, options);
    if (record.result.aborted()) {
      ++into.aborted;
    } else {
      into.f1_sum += record.result.metrics.f1;
      into.running_f1.push_back(into.f1_sum / static_cast<double>(into.running_f1.size() + 1));
    }
    into.episodes.push_back(std::move(record));
  }
}

StreamResult run_stream(Agent& agent, std::vector<Episode> episodes, ContextSource& source,
                        const EpisodeOptions& options, std::uint64_t shuffle_seed) {
  for (const auto& e : episodes) e.validate();
  const auto order = shuffle_episodes(std::move(episodes), shuffle_seed);
  StreamResult result;
  run_episodes(agent, order, source, options, result);
  return result;
}

}  // namespace toolbandit
