#pragma once

// Synthetic linear-reward streams with known parameters.
//
// Each round draws one context shared by all arms; arm a's expected reward is
// theta*_a^T x and only the chosen arm's noisy reward is revealed. Rounds are
// grouped into fixed-length episodes whose ground truth is the multiset of
// per-round optimal arms, which gives the reward-mode ablation an episode F1.

#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "toolbandit/baselines.hpp"
#include "toolbandit/context_source.hpp"
#include "toolbandit/episode.hpp"
#include "toolbandit/random.hpp"
#include "toolbandit/trace_io.hpp"

namespace toolbandit {

enum class ContextDistribution {
  unit_sphere_uniform,
  gaussian_isotropic,  // N(0, I/d)
  biased_unit_sphere,  // (1, z)/sqrt(2), z uniform on the unit sphere in d-1 dims
};

ContextDistribution parse_context_distribution(std::string_view text);
std::string_view to_string(ContextDistribution dist);

struct SyntheticConfig {
  std::size_t dimension = 8;
  std::size_t num_arms = 10;
  double noise_sigma = 0.1;
  std::size_t horizon = 2000;
  std::size_t episode_length = 1;  // rounds per episode; 1 makes every round its own episode
  ContextDistribution context_dist = ContextDistribution::unit_sphere_uniform;
  std::map<ActionId, Eigen::VectorXd> theta_star;  // unit norm
  std::map<ActionId, Eigen::VectorXd> priors;      // warm-start embeddings; zero when absent
  std::uint64_t seed = 0;

  /// d=8, K=10, sigma=0.1, T=2000, random unit theta* drawn from `seed`.
  static SyntheticConfig standard(std::uint64_t seed);

  /// Arm "arm00" has a dominating prior but a mediocre true parameter;
  /// the last arm is the best on average. Greedy selection locks onto arm00.
  static SyntheticConfig deceptive(std::uint64_t seed);

  /// Replaces theta_star with `num_arms` random unit vectors drawn from `seed`.
  void draw_theta_star();

  std::vector<ActionId> arm_ids() const;

  /// Throws ConfigError on inconsistent fields.
  void validate() const;
};

/// Zero-padded "armNN" ids so lexicographic order equals numeric order.
ActionId synthetic_arm_id(std::size_t index, std::size_t num_arms);

struct SyntheticRound {
  ContextVector context;
  std::map<ActionId, double> expected_rewards;
  std::map<ActionId, double> noise;  // pre-drawn per arm; only the queried arm's is revealed

  double realized_reward(const ActionId& action) const;
};

SyntheticRound generate_round(const SyntheticConfig& cfg, Rng& rng);

/// Argmax of expected rewards, ties to the smallest ActionId.
ActionId optimal_action(const SyntheticRound& round);

/// Prefix sums of expected-reward gaps between the optimal and chosen arm.
std::vector<double> cumulative_regret(std::span<const SyntheticRound> rounds, std::span<const ActionId> chosen);

/// ||theta_hat_a - theta*_a||^2 per arm.
std::map<ActionId, double> per_arm_estimation_error(const BanditPolicy& policy, const SyntheticConfig& cfg);

/// Sum over arms of the per-arm squared error.
double estimation_error(const BanditPolicy& policy, const SyntheticConfig& cfg);

/// Policy over the config's arms, warm-started from cfg.priors.
BanditPolicy make_synthetic_policy(const SyntheticConfig& cfg, double alpha);

/// Pre-generated synthetic stream exposed as episodes, a context source and a
/// realized-reward feedback.
class SyntheticStream : public ContextSource, public StepFeedback {
 public:
  explicit SyntheticStream(const SyntheticConfig& cfg);

  const SyntheticConfig& config() const { return cfg_; }
  const std::vector<Episode>& episodes() const { return episodes_; }
  const std::vector<SyntheticRound>& rounds() const { return rounds_; }
  const SyntheticRound& round(const Episode& episode, int step) const;
  std::size_t round_index(const Episode& episode, int step) const;

  std::size_t dimension() const override { return cfg_.dimension; }
  ContextVector next_context(const Episode& episode, int step) override;
  double reward(const Episode& episode, int step, const ActionId& action, int matched) override;

 private:
  SyntheticConfig cfg_;
  std::vector<SyntheticRound> rounds_;
  std::vector<Episode> episodes_;
  std::map<std::string, std::size_t> first_round_;
};

struct SyntheticRunResult {
  StreamResult stream;
  std::vector<ActionId> chosen;              // per round
  std::vector<ActionId> optimal;             // per round
  std::vector<double> cumulative_regret;     // per round
  std::vector<double> estimation_error;      // per round, after that round's step update
  std::map<ActionId, double> final_arm_error;
  std::map<ActionId, std::uint64_t> pulls;

  double optimal_rate() const;
  double avg_f1() const;
  double regret_at_end() const { return cumulative_regret.empty() ? 0.0 : cumulative_regret.back(); }
  double final_estimation_error() const;
};

/// Runs the whole stream in round order. Episodes use s = 0 and a cap equal to
/// the episode length, so the budget equals the episode length and never binds.
SyntheticRunResult run_synthetic(Agent& agent, const SyntheticConfig& cfg, const RewardConfig& reward);

/// Learnable tool-selection trace: each tool has a latent direction; the
/// context at step t points (noisily) toward the t-th ground-truth tool, and
/// toward a random candidate past the ground truth.
struct ToolTraceConfig {
  std::size_t num_tools = 12;
  std::size_t dimension = 12;
  std::size_t candidates_per_episode = 10;
  std::size_t min_ground_truth = 1;
  std::size_t max_ground_truth = 3;
  double context_noise = 0.2;
  double prior_scale = 0.0;  // embeddings = prior_scale * direction + noise; 0 omits embeddings
  int extra_steps = kDefaultExtraSteps;
  std::size_t num_episodes = 200;
  std::uint64_t seed = 0;
};

Trace make_tool_trace(const ToolTraceConfig& cfg);

}  // namespace toolbandit
