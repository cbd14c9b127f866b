#include "toolbandit/linear_bandit.hpp"

#include <cmath>
#include <string>

#include "toolbandit/errors.hpp"

namespace toolbandit {

ArmState::ArmState(const ContextVector& prior)
    : inv_covariance_(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(prior.dimension()),
                                                static_cast<Eigen::Index>(prior.dimension()))),
      reward_vector_(prior.values()) {
  if (prior.dimension() == 0) throw DimensionError("arm dimension must be positive");
}

ArmState ArmState::from_parts(Eigen::MatrixXd inv_covariance, Eigen::VectorXd reward_vector,
                              std::uint64_t selection_count) {
  const auto d = reward_vector.size();
  if (d == 0 || inv_covariance.rows() != d || inv_covariance.cols() != d) {
    throw DimensionError("arm state shape mismatch");
  }
  if (!inv_covariance.allFinite() || !reward_vector.allFinite()) {
    throw NumericalError("arm state contains non-finite values");
  }
  ArmState arm;
  arm.inv_covariance_ = std::move(inv_covariance);
  arm.reward_vector_ = std::move(reward_vector);
  arm.selection_count_ = selection_count;
  arm.pristine_ = selection_count == 0 && arm.inv_covariance_.isIdentity(0.0);
  return arm;
}

const Eigen::VectorXd& ArmState::theta() const {
  if (!theta_cache_) {
    if (pristine_) {
      // A^{-1} = I: return b itself so the warm start is exact (signed zeros included).
      theta_cache_ = reward_vector_;
    } else {
      theta_cache_ = inv_covariance_ * reward_vector_;
    }
  }
  return *theta_cache_;
}

void ArmState::update(const Eigen::VectorXd& x, double reward) {
  require_dimension(dimension(), static_cast<std::size_t>(x.size()), "arm update");
  if (!std::isfinite(reward)) throw ConfigError("reward must be finite");

  const Eigen::VectorXd k = inv_covariance_ * x;
  const double denom = 1.0 + x.dot(k);
  if (!(denom > kMinDenominator)) {
    throw NumericalError("Sherman-Morrison denominator " + std::to_string(denom) +
                         " <= 1e-12; inverse covariance lost positive definiteness");
  }
  inv_covariance_.noalias() -= (k * k.transpose()) / denom;
  // Symmetrize in place; the rounding of the correction is not symmetric.
  const Eigen::MatrixXd sym = 0.5 * (inv_covariance_ + inv_covariance_.transpose());
  inv_covariance_ = sym;
  reward_vector_ += reward * x;
  ++selection_count_;
  pristine_ = false;
  theta_cache_.reset();
}

ArmState init_arm(const ContextVector& prior) { return ArmState(prior); }

const Eigen::VectorXd& theta_estimate(const ArmState& arm) { return arm.theta(); }

double score_base(const ArmState& arm, const ContextVector& ctx) {
  require_dimension(arm.dimension(), ctx.dimension(), "score context");
  return arm.theta().dot(ctx.values());
}

double confidence_radicand(const ArmState& arm, const ContextVector& ctx) {
  require_dimension(arm.dimension(), ctx.dimension(), "score context");
  const auto& x = ctx.values();
  return x.dot(arm.inv_covariance() * x);
}

double score_ucb(const ArmState& arm, const ContextVector& ctx, double alpha) {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  const double base = score_base(arm, ctx);
  if (alpha == 0.0) return base;
  double q = confidence_radicand(arm, ctx);
  if (q < -kRadicandTolerance) {
    throw NumericalError("negative confidence radicand " + std::to_string(q) + "; arm statistics are corrupted");
  }
  if (q < 0.0) q = 0.0;
  return base + alpha * std::sqrt(q);
}

BanditPolicy::BanditPolicy(std::size_t dimension, double alpha) : dimension_(dimension), alpha_(alpha) {
  if (dimension == 0) throw DimensionError("policy dimension must be positive");
  set_alpha(alpha);
}

void BanditPolicy::set_alpha(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
  alpha_ = alpha;
}

void BanditPolicy::add_arm(const ActionId& id, const ContextVector& prior) {
  require_dimension(dimension_, prior.dimension(), "arm prior");
  if (arms_.contains(id)) throw ConfigError("duplicate action id '" + id.name() + "'");
  arms_.emplace(id, init_arm(prior));
}

void BanditPolicy::add_arm(const ActionId& id) { add_arm(id, ContextVector::zeros(dimension_)); }

void BanditPolicy::put_arm(const ActionId& id, ArmState state) {
  require_dimension(dimension_, state.dimension(), "arm state");
  arms_.insert_or_assign(id, std::move(state));
}

const ArmState& BanditPolicy::arm(const ActionId& id) const {
  auto it = arms_.find(id);
  if (it == arms_.end()) throw ConfigError("unknown action '" + id.name() + "'");
  return it->second;
}

ArmState& BanditPolicy::mutable_arm(const ActionId& id) {
  auto it = arms_.find(id);
  if (it == arms_.end()) throw ConfigError("unknown action '" + id.name() + "'");
  return it->second;
}

ContextVector BanditPolicy::prepare(const ContextVector& ctx) const {
  require_dimension(dimension_, ctx.dimension(), "context");
  return normalize_contexts_ ? ctx.normalized() : ctx;
}

double BanditPolicy::ucb(const ActionId& id, const ContextVector& ctx, double alpha) const {
  return score_ucb(arm(id), prepare(ctx), alpha);
}

ActionId BanditPolicy::select(const ContextVector& ctx, const ActionSet& valid) const {
  return select(ctx, valid, alpha_);
}

ActionId BanditPolicy::select(const ContextVector& ctx, const ActionSet& valid, double alpha) const {
  if (valid.empty()) throw ArmsExhausted();
  const ContextVector x = prepare(ctx);
  const ActionId* best = nullptr;
  double best_score = 0.0;
  // Ascending iteration + strict comparison keeps the smallest id on ties.
  for (const auto& id : valid) {
    const double s = score_ucb(arm(id), x, alpha);
    if (best == nullptr || s > best_score) {
      best = &id;
      best_score = s;
    }
  }
  return *best;
}

void BanditPolicy::update(const ActionId& id, const ContextVector& ctx, double reward) {
  const ContextVector x = prepare(ctx);
  mutable_arm(id).update(x.values(), reward);
}

}  // namespace toolbandit
