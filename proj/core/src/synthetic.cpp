#include "toolbandit/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "toolbandit/errors.hpp"

namespace toolbandit {

namespace {

Eigen::VectorXd gaussian(std::size_t d, Rng& rng) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  return v;
}

Eigen::VectorXd unit_vector(std::size_t d, Rng& rng) {
  Eigen::VectorXd v = gaussian(d, rng);
  double n = v.norm();
  while (n == 0.0) {
    v = gaussian(d, rng);
    n = v.norm();
  }
  return v / n;
}

std::string padded(const char* prefix, std::size_t index, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, index);
  return buf;
}

int digits(std::size_t n) {
  int w = 1;
  while (n >= 10) {
    n /= 10;
    ++w;
  }
  return w;
}

}  // namespace

ContextDistribution parse_context_distribution(std::string_view text) {
  if (text == "unit_sphere_uniform") return ContextDistribution::unit_sphere_uniform;
  if (text == "gaussian_isotropic") return ContextDistribution::gaussian_isotropic;
  if (text == "biased_unit_sphere") return ContextDistribution::biased_unit_sphere;
  throw ConfigError("unknown context distribution '" + std::string(text) + "'");
}

std::string_view to_string(ContextDistribution dist) {
  switch (dist) {
    case ContextDistribution::unit_sphere_uniform:
      return "unit_sphere_uniform";
    case ContextDistribution::gaussian_isotropic:
      return "gaussian_isotropic";
    case ContextDistribution::biased_unit_sphere:
      return "biased_unit_sphere";
  }
  return "unit_sphere_uniform";
}

ActionId synthetic_arm_id(std::size_t index, std::size_t num_arms) {
  return ActionId(padded("arm", index, std::max(2, digits(num_arms > 0 ? num_arms - 1 : 0))));
}

SyntheticConfig SyntheticConfig::standard(std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.seed = seed;
  cfg.draw_theta_star();
  return cfg;
}

SyntheticConfig SyntheticConfig::deceptive(std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.dimension = 5;
  cfg.num_arms = 5;
  cfg.horizon = 500;
  cfg.context_dist = ContextDistribution::biased_unit_sphere;
  cfg.seed = seed;

  // Coordinate 0 is the constant bias feature; the rest carry the random part.
  Rng rng(derive_seed(seed, 2));
  auto arm_theta = [&](double bias, double spread) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.dimension));
    v[0] = bias;
    v.tail(v.size() - 1) = spread * unit_vector(cfg.dimension - 1, rng);
    return Eigen::VectorXd(v / v.norm());
  };
  const auto ids = cfg.arm_ids();
  // arm00: mediocre true reward (mean ~0.42) but a prior scoring ~1.41.
  cfg.theta_star[ids[0]] = arm_theta(0.6, 0.8);
  Eigen::VectorXd decoy_prior = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.dimension));
  decoy_prior[0] = 2.0;
  cfg.priors[ids[0]] = decoy_prior;
  // Middle arms: low mean, reached first by greedy tie-breaking.
  for (std::size_t a = 1; a + 1 < cfg.num_arms; ++a) cfg.theta_star[ids[a]] = arm_theta(0.1, 0.99);
  // Last arm: best on average (mean ~0.69), largest id so ties never reach it.
  cfg.theta_star[ids.back()] = arm_theta(0.98, 0.2);
  return cfg;
}

void SyntheticConfig::draw_theta_star() {
  theta_star.clear();
  Rng rng(derive_seed(seed, 1));
  for (const auto& id : arm_ids()) theta_star[id] = unit_vector(dimension, rng);
}

std::vector<ActionId> SyntheticConfig::arm_ids() const {
  std::vector<ActionId> ids;
  ids.reserve(num_arms);
  for (std::size_t a = 0; a < num_arms; ++a) ids.push_back(synthetic_arm_id(a, num_arms));
  return ids;
}

void SyntheticConfig::validate() const {
  if (dimension == 0) throw ConfigError("synthetic dimension must be positive");
  if (num_arms == 0) throw ConfigError("synthetic num_arms must be positive");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (episode_length == 0) throw ConfigError("episode_length must be positive");
  if (context_dist == ContextDistribution::biased_unit_sphere && dimension < 2) {
    throw ConfigError("biased_unit_sphere needs dimension >= 2");
  }
  if (theta_star.size() != num_arms) throw ConfigError("theta_star must hold one vector per arm");
  for (const auto& id : arm_ids()) {
    auto it = theta_star.find(id);
    if (it == theta_star.end()) throw ConfigError("theta_star missing arm '" + id.name() + "'");
    if (static_cast<std::size_t>(it->second.size()) != dimension) throw DimensionError("theta_star dimension mismatch");
    if (std::abs(it->second.norm() - 1.0) > 1e-9) throw ConfigError("theta_star['" + id.name() + "'] is not unit norm");
  }
  for (const auto& [id, p] : priors) {
    if (!theta_star.contains(id)) throw ConfigError("prior for unknown arm '" + id.name() + "'");
    if (static_cast<std::size_t>(p.size()) != dimension) throw DimensionError("prior dimension mismatch");
  }
}

double SyntheticRound::realized_reward(const ActionId& action) const {
  auto e = expected_rewards.find(action);
  if (e == expected_rewards.end()) throw ConfigError("unknown arm '" + action.name() + "'");
  return e->second + noise.at(action);
}

SyntheticRound generate_round(const SyntheticConfig& cfg, Rng& rng) {
  Eigen::VectorXd x;
  switch (cfg.context_dist) {
    case ContextDistribution::unit_sphere_uniform:
      x = unit_vector(cfg.dimension, rng);
      break;
    case ContextDistribution::gaussian_isotropic:
      x = gaussian(cfg.dimension, rng) / std::sqrt(static_cast<double>(cfg.dimension));
      break;
    case ContextDistribution::biased_unit_sphere: {
      x.resize(static_cast<Eigen::Index>(cfg.dimension));
      x[0] = 1.0;
      x.tail(x.size() - 1) = unit_vector(cfg.dimension - 1, rng);
      x /= std::sqrt(2.0);
      break;
    }
  }
  SyntheticRound round{ContextVector(std::move(x)), {}, {}};
  for (const auto& [id, theta] : cfg.theta_star) {
    round.expected_rewards[id] = theta.dot(round.context.values());
    round.noise[id] = cfg.noise_sigma * rng.normal();
  }
  return round;
}

ActionId optimal_action(const SyntheticRound& round) {
  if (round.expected_rewards.empty()) throw ConfigError("round has no arms");
  auto best = round.expected_rewards.begin();
  for (auto it = std::next(best); it != round.expected_rewards.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

std::vector<double> cumulative_regret(std::span<const SyntheticRound> rounds, std::span<const ActionId> chosen) {
  if (rounds.size() != chosen.size()) throw ConfigError("cumulative_regret: history length mismatch");
  std::vector<double> out;
  out.reserve(rounds.size());
  double total = 0.0;
  for (std::size_t t = 0; t < rounds.size(); ++t) {
    const auto& r = rounds[t];
    total += r.expected_rewards.at(optimal_action(r)) - r.expected_rewards.at(chosen[t]);
    out.push_back(total);
  }
  return out;
}

std::map<ActionId, double> per_arm_estimation_error(const BanditPolicy& policy, const SyntheticConfig& cfg) {
  std::map<ActionId, double> out;
  for (const auto& [id, theta] : cfg.theta_star) {
    out[id] = (policy.arm(id).theta() - theta).squaredNorm();
  }
  return out;
}

double estimation_error(const BanditPolicy& policy, const SyntheticConfig& cfg) {
  double total = 0.0;
  for (const auto& [id, theta] : cfg.theta_star) total += (policy.arm(id).theta() - theta).squaredNorm();
  return total;
}

BanditPolicy make_synthetic_policy(const SyntheticConfig& cfg, double alpha) {
  cfg.validate();
  BanditPolicy policy(cfg.dimension, alpha);
  for (const auto& id : cfg.arm_ids()) {
    auto it = cfg.priors.find(id);
    if (it != cfg.priors.end()) {
      policy.add_arm(id, ContextVector(it->second));
    } else {
      policy.add_arm(id);
    }
  }
  return policy;
}

SyntheticStream::SyntheticStream(const SyntheticConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(derive_seed(cfg_.seed, 3));
  rounds_.reserve(cfg_.horizon);
  for (std::size_t t = 0; t < cfg_.horizon; ++t) rounds_.push_back(generate_round(cfg_, rng));

  const auto ids = cfg_.arm_ids();
  const ActionSet all(ids.begin(), ids.end());
  const int width = digits(cfg_.horizon / cfg_.episode_length + 1);
  for (std::size_t start = 0, e = 0; start < cfg_.horizon; start += cfg_.episode_length, ++e) {
    Episode episode;
    episode.task_id = padded("synth-", e, width);
    episode.context_key = episode.task_id;
    episode.candidates = all;
    const std::size_t end = std::min(cfg_.horizon, start + cfg_.episode_length);
    for (std::size_t t = start; t < end; ++t) episode.ground_truth.push_back(optimal_action(rounds_[t]));
    first_round_.emplace(episode.task_id, start);
    episodes_.push_back(std::move(episode));
  }
}

std::size_t SyntheticStream::round_index(const Episode& episode, int step) const {
  auto it = first_round_.find(episode.key());
  if (it == first_round_.end()) throw ContextUnavailable("unknown synthetic episode '" + episode.key() + "'");
  const std::size_t t = it->second + static_cast<std::size_t>(step) - 1;
  if (step < 1 || static_cast<std::size_t>(step) > episode.ground_truth.size() || t >= rounds_.size()) {
    throw ContextUnavailable("synthetic episode '" + episode.key() + "' has no step " + std::to_string(step));
  }
  return t;
}

const SyntheticRound& SyntheticStream::round(const Episode& episode, int step) const {
  return rounds_[round_index(episode, step)];
}

ContextVector SyntheticStream::next_context(const Episode& episode, int step) { return round(episode, step).context; }

double SyntheticStream::reward(const Episode& episode, int step, const ActionId& action, int /*matched*/) {
  return round(episode, step).realized_reward(action);
}

double SyntheticRunResult::optimal_rate() const { return toolbandit::optimal_rate(chosen, optimal); }

double SyntheticRunResult::avg_f1() const {
  auto m = stream.macro();
  return m ? m->f1 : 0.0;
}

double SyntheticRunResult::final_estimation_error() const {
  return estimation_error.empty() ? 0.0 : estimation_error.back();
}

SyntheticRunResult run_synthetic(Agent& agent, const SyntheticConfig& cfg, const RewardConfig& reward) {
  SyntheticStream stream(cfg);
  SyntheticRunResult out;
  out.chosen.reserve(cfg.horizon);

  EpisodeOptions options;
  options.reward = reward;
  options.extra_steps = 0;
  options.max_per_arm = static_cast<int>(cfg.episode_length);
  options.feedback = &stream;
  options.record_scores = false;
  double regret = 0.0;
  options.on_step = [&](const Episode& episode, const StepRecord& step, const Agent& a) {
    const auto& round = stream.round(episode, step.step);
    const ActionId best = optimal_action(round);
    regret += round.expected_rewards.at(best) - round.expected_rewards.at(step.action);
    out.chosen.push_back(step.action);
    out.optimal.push_back(best);
    out.cumulative_regret.push_back(regret);
    out.estimation_error.push_back(estimation_error(a.linear(), cfg));
  };

  run_episodes(agent, stream.episodes(), stream, options, out.stream);
  out.final_arm_error = per_arm_estimation_error(agent.linear(), cfg);
  for (const auto& id : cfg.arm_ids()) out.pulls[id] = 0;
  for (const auto& a : out.chosen) ++out.pulls[a];
  return out;
}

Trace make_tool_trace(const ToolTraceConfig& cfg) {
  if (cfg.num_tools == 0 || cfg.dimension == 0) throw ConfigError("tool trace needs tools and a dimension");
  if (cfg.candidates_per_episode == 0 || cfg.candidates_per_episode > cfg.num_tools) {
    throw ConfigError("candidates_per_episode must lie in [1, num_tools]");
  }
  if (cfg.min_ground_truth > cfg.max_ground_truth) throw ConfigError("min_ground_truth > max_ground_truth");
  if (cfg.extra_steps < 0) throw ConfigError("extra_steps must be >= 0");

  Rng rng(derive_seed(cfg.seed, 4));
  Trace trace;
  trace.header.dimension = cfg.dimension;
  trace.header.recording_policy = "synthetic tool generator";
  std::vector<Eigen::VectorXd> directions;
  const int width = std::max(2, digits(cfg.num_tools - 1));
  for (std::size_t i = 0; i < cfg.num_tools; ++i) {
    trace.header.vocabulary.emplace_back(padded("tool", i, width));
    directions.push_back(unit_vector(cfg.dimension, rng));
  }
  if (cfg.prior_scale > 0.0) {
    for (std::size_t i = 0; i < cfg.num_tools; ++i) {
      Eigen::VectorXd e = cfg.prior_scale * directions[i] + 0.1 * gaussian(cfg.dimension, rng) /
                                                                std::sqrt(static_cast<double>(cfg.dimension));
      std::vector<double> v(e.data(), e.data() + e.size());
      for (auto& x : v) x = round_significant9(x);
      trace.header.embeddings.emplace(trace.header.vocabulary[i], std::move(v));
    }
  }

  auto context_toward = [&](std::size_t tool) {
    Eigen::VectorXd noise = gaussian(cfg.dimension, rng) / std::sqrt(static_cast<double>(cfg.dimension));
    Eigen::VectorXd x = directions[tool] + cfg.context_noise * noise;
    x /= x.norm();
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = round_significant9(x[i]);
    return ContextVector(std::move(x));
  };

  const int ep_width = std::max(4, digits(cfg.num_episodes));
  for (std::size_t e = 0; e < cfg.num_episodes; ++e) {
    std::vector<std::size_t> pool(cfg.num_tools);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    rng.shuffle(pool);
    pool.resize(cfg.candidates_per_episode);

    Episode episode;
    episode.task_id = padded("task-", e, ep_width);
    episode.context_key = episode.task_id;
    for (auto i : pool) episode.candidates.insert(trace.header.vocabulary[i]);
    const std::size_t g = cfg.min_ground_truth + rng.index(cfg.max_ground_truth - cfg.min_ground_truth + 1);
    std::vector<std::size_t> gt_tools;
    for (std::size_t k = 0; k < g; ++k) {
      gt_tools.push_back(pool[rng.index(pool.size())]);
      episode.ground_truth.push_back(trace.header.vocabulary[gt_tools.back()]);
    }

    auto& steps = trace.steps[episode.task_id];
    const std::size_t budget = g + static_cast<std::size_t>(cfg.extra_steps);
    for (std::size_t t = 0; t < std::max<std::size_t>(budget, 1); ++t) {
      std::size_t target = 0;
      if (t < g) {
        target = gt_tools[t];
      } else if (!gt_tools.empty()) {
        target = gt_tools[rng.index(gt_tools.size())];
      } else {
        target = pool[rng.index(pool.size())];
      }
      steps.push_back(RecordedStep{context_toward(target), std::nullopt});
    }
    trace.episodes.push_back(std::move(episode));
  }
  return trace;
}

}  // namespace toolbandit
