#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "toolbandit/types.hpp"

namespace toolbandit {

/// One task instance of the stream.
struct Episode {
  std::string task_id;
  ActionSet candidates;
  std::vector<ActionId> ground_truth;  // multiset, order irrelevant
  std::string context_key;             // key the ContextSource serves; defaults to task_id

  const std::string& key() const { return context_key.empty() ? task_id : context_key; }

  /// Throws ConfigError when candidates are empty or ground truth leaves the candidate set.
  void validate() const;

  friend bool operator==(const Episode&, const Episode&) = default;
};

/// Provides per-step decision contexts to the episode engine.
///
/// next_context throws ContextUnavailable when the step cannot be served; the
/// engine then aborts the episode and the stream continues.
class ContextSource {
 public:
  virtual ~ContextSource() = default;

  virtual std::size_t dimension() const = 0;

  /// `step` is 1-based.
  virtual ContextVector next_context(const Episode& episode, int step) = 0;

  virtual void on_action(const Episode& /*episode*/, int /*step*/, const ActionId& /*action*/) {}
  virtual void on_episode_end(const Episode& /*episode*/, std::string_view /*reason*/) {}
};

}  // namespace toolbandit
