#pragma once

// Disjoint-arm LinUCB decision layer.
//
// Each arm keeps ridge statistics with an identity prior: A = I + sum x x^T and
// b = prior + sum r x. Only A^{-1} is stored; it is maintained by Sherman-Morrison
// rank-one corrections and symmetrized after every update. The initial b is the
// action's prior embedding, so a fresh arm scores exactly like that embedding.

#include <cstdint>
#include <map>
#include <optional>

#include <Eigen/Dense>

#include "toolbandit/types.hpp"

namespace toolbandit {

inline constexpr double kDefaultAlpha = 0.1;

/// Radicand values in [-kRadicandTolerance, 0) are rounding noise and clamp to 0.
inline constexpr double kRadicandTolerance = 1e-9;

/// Sherman-Morrison denominators at or below this mean A^{-1} is no longer PD.
inline constexpr double kMinDenominator = 1e-12;

class ArmState {
 public:
  /// Warm start: A^{-1} = I, b = prior, zero selections.
  explicit ArmState(const ContextVector& prior);

  /// Rebuilds a state from serialized parts. Validates shapes and finiteness.
  static ArmState from_parts(Eigen::MatrixXd inv_covariance, Eigen::VectorXd reward_vector,
                             std::uint64_t selection_count);

  std::size_t dimension() const { return static_cast<std::size_t>(reward_vector_.size()); }
  const Eigen::MatrixXd& inv_covariance() const { return inv_covariance_; }
  const Eigen::VectorXd& reward_vector() const { return reward_vector_; }
  std::uint64_t selection_count() const { return selection_count_; }

  /// A^{-1} b, cached until the next update.
  const Eigen::VectorXd& theta() const;

  /// A <- A + x x^T, b <- b + r x, via Sherman-Morrison on A^{-1}.
  void update(const Eigen::VectorXd& x, double reward);

 private:
  ArmState() = default;

  Eigen::MatrixXd inv_covariance_;
  Eigen::VectorXd reward_vector_;
  std::uint64_t selection_count_ = 0;
  bool pristine_ = true;  // no update since warm start, so A^{-1} = I
  mutable std::optional<Eigen::VectorXd> theta_cache_;
};

ArmState init_arm(const ContextVector& prior);
const Eigen::VectorXd& theta_estimate(const ArmState& arm);

/// theta^T x.
double score_base(const ArmState& arm, const ContextVector& ctx);

/// theta^T x + alpha * sqrt(x^T A^{-1} x). Throws NumericalError on a radicand
/// below -kRadicandTolerance.
double score_ucb(const ArmState& arm, const ContextVector& ctx, double alpha);

/// x^T A^{-1} x, the squared confidence width before clamping.
double confidence_radicand(const ArmState& arm, const ContextVector& ctx);

class BanditPolicy {
 public:
  explicit BanditPolicy(std::size_t dimension, double alpha = kDefaultAlpha);

  std::size_t dimension() const { return dimension_; }
  double alpha() const { return alpha_; }
  void set_alpha(double alpha);

  /// Off by default. When on, contexts are L2-normalized before scoring and updating.
  bool normalize_contexts() const { return normalize_contexts_; }
  void set_normalize_contexts(bool on) { normalize_contexts_ = on; }

  /// Registers an arm warm-started from `prior`. Duplicate ids are rejected.
  void add_arm(const ActionId& id, const ContextVector& prior);
  void add_arm(const ActionId& id);
  /// Inserts a fully specified state (checkpoint restore).
  void put_arm(const ActionId& id, ArmState state);

  bool has_arm(const ActionId& id) const { return arms_.contains(id); }
  const ArmState& arm(const ActionId& id) const;
  const std::map<ActionId, ArmState>& arms() const { return arms_; }

  double ucb(const ActionId& id, const ContextVector& ctx, double alpha) const;
  double ucb(const ActionId& id, const ContextVector& ctx) const { return ucb(id, ctx, alpha_); }

  /// Argmax of the UCB score over `valid`; ties go to the smallest ActionId.
  /// Throws ArmsExhausted on an empty set.
  ActionId select(const ContextVector& ctx, const ActionSet& valid) const;
  ActionId select(const ContextVector& ctx, const ActionSet& valid, double alpha) const;

  /// Rank-one update of the selected arm only.
  void update(const ActionId& id, const ContextVector& ctx, double reward);

 private:
  ContextVector prepare(const ContextVector& ctx) const;
  ArmState& mutable_arm(const ActionId& id);

  std::size_t dimension_;
  double alpha_;
  bool normalize_contexts_ = false;
  std::map<ActionId, ArmState> arms_;
};

}  // namespace toolbandit
