#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "toolbandit/linear_bandit.hpp"
#include "toolbandit/random.hpp"
#include "toolbandit/types.hpp"

namespace toolbandit {

/// Which selection rule an Agent applies.
///
///  - linucb:          theta^T x + alpha * width
///  - greedy:          linucb with alpha = 0
///  - epsilon_greedy:  uniform over valid with probability epsilon, else greedy
///  - random:          uniform over valid
///  - ucb1:            context-free mean + c * sqrt(2 ln N / n), unpulled arms first.
///                     Stand-in for a non-contextual bandit baseline.
struct PolicyKind {
  enum class Type { linucb, greedy, epsilon_greedy, random, ucb1 };

  Type type = Type::linucb;
  double epsilon = 0.1;
  double ucb1_c = 1.0;

  static PolicyKind linucb() { return {}; }
  static PolicyKind greedy() { return {Type::greedy}; }
  static PolicyKind epsilon_greedy(double epsilon);
  static PolicyKind random() { return {Type::random}; }
  static PolicyKind ucb1(double c = 1.0);

  /// Parses "linucb", "greedy", "random", "epsilon_greedy[:eps]", "ucb1[:c]".
  static PolicyKind parse(std::string_view text);

  /// Round-trips through parse().
  std::string name() const;

  bool uses_linear_statistics() const {
    return type == Type::linucb || type == Type::greedy || type == Type::epsilon_greedy;
  }

  friend bool operator==(const PolicyKind&, const PolicyKind&) = default;
};

struct Ucb1Arm {
  std::uint64_t pulls = 0;
  double mean = 0.0;

  friend bool operator==(const Ucb1Arm&, const Ucb1Arm&) = default;
};

/// A selection policy bound to its state: linear statistics (shared by the
/// linear variants), UCB1 counters, and the generator for stochastic choices.
/// Single writer; callers serialize select/update.
class Agent {
 public:
  Agent(PolicyKind kind, BanditPolicy linear, std::uint64_t seed = 0);

  const PolicyKind& kind() const { return kind_; }
  const BanditPolicy& linear() const { return linear_; }
  BanditPolicy& linear() { return linear_; }
  const std::map<ActionId, Ucb1Arm>& ucb1_arms() const { return ucb1_; }
  std::uint64_t ucb1_total_pulls() const { return ucb1_total_; }
  const Rng& rng() const { return rng_; }
  std::size_t dimension() const { return linear_.dimension(); }

  ActionId select(const ContextVector& ctx, const ActionSet& valid);
  void update(const ActionId& action, const ContextVector& ctx, double reward);

  /// Deterministic per-action scores used for diagnostics. Empty for random.
  std::map<ActionId, double> scores(const ContextVector& ctx, const ActionSet& valid) const;

  /// Restores baseline state from a checkpoint.
  void restore_state(std::map<ActionId, Ucb1Arm> ucb1, std::uint64_t total, Rng rng);

 private:
  ActionId select_ucb1(const ActionSet& valid) const;
  double ucb1_score(const ActionId& id) const;

  PolicyKind kind_;
  BanditPolicy linear_;
  std::map<ActionId, Ucb1Arm> ucb1_;
  std::uint64_t ucb1_total_ = 0;
  Rng rng_;
};

}  // namespace toolbandit
