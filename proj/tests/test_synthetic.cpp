#include <cmath>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "toolbandit/errors.hpp"
#include "toolbandit/synthetic.hpp"

using namespace toolbandit;
using toolbandit::testing::gaussian_vector;
using toolbandit::testing::id;

namespace {

SyntheticRound round_with(std::map<std::string, double> expected) {
  SyntheticRound r{ContextVector{1.0}, {}, {}};
  for (const auto& [k, v] : expected) {
    r.expected_rewards[id(k)] = v;
    r.noise[id(k)] = 0.0;
  }
  return r;
}

SyntheticRunResult run(const SyntheticConfig& cfg, double alpha, RewardMode mode = RewardMode::step,
                       PolicyKind kind = PolicyKind::linucb()) {
  Agent agent(kind, make_synthetic_policy(cfg, alpha), cfg.seed);
  RewardConfig reward;
  reward.mode = mode;
  return run_synthetic(agent, cfg, reward);
}

}  // namespace

TEST(SyntheticConfig, StandardDefaults) {
  const auto cfg = SyntheticConfig::standard(4);
  EXPECT_EQ(cfg.dimension, 8u);
  EXPECT_EQ(cfg.num_arms, 10u);
  EXPECT_EQ(cfg.noise_sigma, 0.1);
  EXPECT_EQ(cfg.horizon, 2000u);
  EXPECT_EQ(cfg.theta_star.size(), 10u);
  for (const auto& [a, t] : cfg.theta_star) EXPECT_NEAR(t.norm(), 1.0, 1e-12);
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.arm_ids().front(), id("arm00"));
  EXPECT_EQ(cfg.arm_ids().back(), id("arm09"));
  EXPECT_EQ(SyntheticConfig::standard(4).theta_star, cfg.theta_star);
  EXPECT_NE(SyntheticConfig::standard(5).theta_star, cfg.theta_star);
}

TEST(SyntheticConfig, ValidationErrors) {
  auto cfg = SyntheticConfig::standard(0);
  cfg.noise_sigma = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SyntheticConfig::standard(0);
  cfg.theta_star.begin()->second *= 2.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SyntheticConfig::standard(0);
  cfg.episode_length = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SyntheticConfig::standard(0);
  cfg.priors[id("arm03")] = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(cfg.validate(), DimensionError);
  cfg = SyntheticConfig::standard(0);
  cfg.num_arms = 11;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ContextDistribution, ParseRoundTrip) {
  for (auto d : {ContextDistribution::unit_sphere_uniform, ContextDistribution::gaussian_isotropic,
                 ContextDistribution::biased_unit_sphere}) {
    EXPECT_EQ(parse_context_distribution(to_string(d)), d);
  }
  EXPECT_THROW(parse_context_distribution("cauchy"), ConfigError);
}

// generate_round -------------------------------------------------------------------

TEST(GenerateRound, NoiselessAlignedRewardIsOne) {
  SyntheticConfig cfg;
  cfg.dimension = 3;
  cfg.num_arms = 1;
  cfg.noise_sigma = 0.0;
  cfg.theta_star[id("arm00")] = Eigen::Vector3d(1, 0, 0);
  Rng rng(1);
  auto round = generate_round(cfg, rng);
  EXPECT_EQ(round.noise.at(id("arm00")), 0.0);
  // Put the context on e_1 and recompute the way generate_round does.
  round.context = ContextVector::basis(3, 0);
  round.expected_rewards[id("arm00")] = cfg.theta_star.at(id("arm00")).dot(round.context.values());
  EXPECT_EQ(round.realized_reward(id("arm00")), 1.0);
}

TEST(GenerateRound, ExpectedRewardsAreDotProducts) {
  const auto cfg = SyntheticConfig::standard(3);
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto round = generate_round(cfg, rng);
    EXPECT_NEAR(round.context.values().norm(), 1.0, 1e-12);
    for (const auto& [a, theta] : cfg.theta_star) {
      EXPECT_EQ(round.expected_rewards.at(a), theta.dot(round.context.values()));
      EXPECT_EQ(round.realized_reward(a), round.expected_rewards.at(a) + round.noise.at(a));
    }
  }
}

TEST(GenerateRound, DeterministicPerSeed) {
  const auto cfg = SyntheticConfig::standard(3);
  Rng a(10), b(10);
  for (int t = 0; t < 20; ++t) {
    const auto ra = generate_round(cfg, a), rb = generate_round(cfg, b);
    EXPECT_EQ(ra.context, rb.context);
    EXPECT_EQ(ra.noise, rb.noise);
  }
}

TEST(GenerateRound, Distributions) {
  auto cfg = SyntheticConfig::standard(0);
  cfg.context_dist = ContextDistribution::biased_unit_sphere;
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto r = generate_round(cfg, rng);
    EXPECT_DOUBLE_EQ(r.context[0], 1.0 / std::sqrt(2.0));
    EXPECT_NEAR(r.context.values().norm(), 1.0, 1e-12);
  }
  cfg.context_dist = ContextDistribution::gaussian_isotropic;
  double sq = 0;
  for (int t = 0; t < 2000; ++t) sq += generate_round(cfg, rng).context.values().squaredNorm();
  EXPECT_NEAR(sq / 2000, 1.0, 0.05);
}

// optimal_action / regret / error -------------------------------------------------------

TEST(OptimalAction, DominanceAndTies) {
  EXPECT_EQ(optimal_action(round_with({{"arm0", 0.9}, {"arm1", 0.1}})), id("arm0"));
  EXPECT_EQ(optimal_action(round_with({{"arm0", 0.1}, {"arm1", 0.9}})), id("arm1"));
  EXPECT_EQ(optimal_action(round_with({{"b", 0.5}, {"a", 0.5}, {"c", 0.2}})), id("a"));
}

TEST(OptimalAction, MatchesExhaustiveScan) {
  auto cfg = SyntheticConfig::standard(8);
  cfg.num_arms = 50;
  cfg.draw_theta_star();
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto round = generate_round(cfg, rng);
    ActionId best = cfg.arm_ids().front();
    for (const auto& a : cfg.arm_ids())
      if (cfg.theta_star.at(a).dot(round.context.values()) > cfg.theta_star.at(best).dot(round.context.values())) best = a;
    EXPECT_EQ(optimal_action(round), best);
  }
}

TEST(CumulativeRegret, Examples) {
  const std::vector<SyntheticRound> one{round_with({{"a", 0.9}, {"b", 0.1}})};
  const auto r = cumulative_regret(one, std::vector<ActionId>{id("b")});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_DOUBLE_EQ(r[0], 0.8);

  const auto cfg = SyntheticConfig::standard(1);
  Rng rng(5);
  std::vector<SyntheticRound> rounds;
  std::vector<ActionId> oracle;
  for (int t = 0; t < 100; ++t) {
    rounds.push_back(generate_round(cfg, rng));
    oracle.push_back(optimal_action(rounds.back()));
  }
  for (double v : cumulative_regret(rounds, oracle)) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(cumulative_regret(rounds, std::vector<ActionId>{}), ConfigError);
}

TEST(CumulativeRegret, MatchesRecomputation) {
  const auto cfg = SyntheticConfig::standard(2);
  Rng rng(6);
  const auto ids = cfg.arm_ids();
  for (int h = 0; h < 100; ++h) {
    std::vector<SyntheticRound> rounds;
    std::vector<ActionId> chosen;
    const std::size_t n = 1 + rng.index(30);
    for (std::size_t t = 0; t < n; ++t) {
      rounds.push_back(generate_round(cfg, rng));
      chosen.push_back(ids[rng.index(ids.size())]);
    }
    const auto got = cumulative_regret(rounds, chosen);
    double total = 0;
    for (std::size_t t = 0; t < n; ++t) {
      double best = -INFINITY;
      for (const auto& [a, th] : cfg.theta_star) best = std::max(best, th.dot(rounds[t].context.values()));
      total += best - cfg.theta_star.at(chosen[t]).dot(rounds[t].context.values());
      ASSERT_NEAR(got[t], total, 1e-12);
      if (t > 0) {
        ASSERT_GE(got[t], got[t - 1]);
      }
    }
  }
}

TEST(EstimationError, ExactRecoveryAndZeroStart) {
  auto cfg = SyntheticConfig::standard(3);
  EXPECT_EQ(estimation_error(make_synthetic_policy(cfg, 1.0), cfg), static_cast<double>(cfg.num_arms));
  for (const auto& [a, t] : cfg.theta_star) cfg.priors[a] = t;
  EXPECT_EQ(estimation_error(make_synthetic_policy(cfg, 1.0), cfg), 0.0);
  for (const auto& [a, e] : per_arm_estimation_error(make_synthetic_policy(cfg, 1.0), cfg)) EXPECT_EQ(e, 0.0);
}

TEST(EstimationError, NoiselessConvergenceMatchesLeastSquares) {
  SyntheticConfig cfg;
  cfg.dimension = 4;
  cfg.num_arms = 2;
  cfg.noise_sigma = 0.0;
  cfg.seed = 12;
  cfg.draw_theta_star();
  const auto r = run(cfg, 1.0);
  EXPECT_LT(r.final_estimation_error(), 0.05);

  // Ridge least squares recomputed from the logged history.
  SyntheticStream stream(cfg);
  std::map<ActionId, std::pair<Eigen::MatrixXd, Eigen::VectorXd>> normal;
  for (const auto& a : cfg.arm_ids()) normal[a] = {Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4)};
  for (std::size_t t = 0; t < r.chosen.size(); ++t) {
    const auto& x = stream.rounds()[t].context.values();
    auto& [A, b] = normal[r.chosen[t]];
    A += x * x.transpose();
    b += stream.rounds()[t].realized_reward(r.chosen[t]) * x;
  }
  Agent agent(PolicyKind::linucb(), make_synthetic_policy(cfg, 1.0), cfg.seed);
  run_synthetic(agent, cfg, RewardConfig{});
  for (const auto& [a, Ab] : normal) {
    const Eigen::VectorXd ls = Ab.first.ldlt().solve(Ab.second);
    EXPECT_LT((agent.linear().arm(a).theta() - ls).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(EstimationError, TrendAcrossCheckpoints) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    std::map<std::size_t, SyntheticRunResult> at;
    for (std::size_t T : {100u, 500u, 2000u}) {
      auto cfg = SyntheticConfig::standard(seed);
      cfg.horizon = T;
      at[T] = run(cfg, 1.0);
    }
    // Shorter horizons are prefixes of the longer stream.
    ASSERT_TRUE(std::equal(at[100].chosen.begin(), at[100].chosen.end(), at[2000].chosen.begin()));
    // Per arm: no growth beyond a 10% band plus 0.002, about the noise floor
    // sigma^2 d^2 / n of the squared error at a few hundred pulls. Averaged
    // over arms: strict decrease.
    auto mean_error = [](const SyntheticRunResult& r, const std::map<ActionId, std::uint64_t>& pulls) {
      double s = 0.0;
      int n = 0;
      for (const auto& [a, k] : pulls) {
        if (k < 20) continue;
        s += r.final_arm_error.at(a);
        ++n;
      }
      return s / n;
    };
    for (const auto& [a, pulls] : at[100].pulls) {
      if (pulls < 20) continue;
      EXPECT_LE(at[500].final_arm_error.at(a), 1.1 * at[100].final_arm_error.at(a) + 0.002) << a;
    }
    for (const auto& [a, pulls] : at[500].pulls) {
      if (pulls < 20) continue;
      EXPECT_LE(at[2000].final_arm_error.at(a), 1.1 * at[500].final_arm_error.at(a) + 0.002) << a;
    }
    ASSERT_GT(std::count_if(at[500].pulls.begin(), at[500].pulls.end(), [](const auto& kv) { return kv.second >= 20; }), 0);
    EXPECT_LT(mean_error(at[500], at[500].pulls), mean_error(at[100], at[500].pulls));
    EXPECT_LT(mean_error(at[2000], at[500].pulls), mean_error(at[500], at[500].pulls));
  }
}

// Stream and runs -------------------------------------------------------------------

TEST(SyntheticStream, EpisodesGroupRounds) {
  auto cfg = SyntheticConfig::standard(1);
  cfg.horizon = 10;
  cfg.episode_length = 3;
  SyntheticStream s(cfg);
  ASSERT_EQ(s.episodes().size(), 4u);
  EXPECT_EQ(s.episodes()[3].ground_truth.size(), 1u);
  EXPECT_EQ(s.episodes()[0].ground_truth[1], optimal_action(s.rounds()[1]));
  EXPECT_EQ(s.next_context(s.episodes()[1], 2), s.rounds()[4].context);
  EXPECT_THROW(s.next_context(s.episodes()[3], 2), ContextUnavailable);
  EXPECT_THROW(s.next_context(s.episodes()[0], 0), ContextUnavailable);
}

TEST(RunSynthetic, DeterministicAndShaped) {
  auto cfg = SyntheticConfig::standard(2);
  cfg.horizon = 300;
  const auto a = run(cfg, 1.0), b = run(cfg, 1.0);
  EXPECT_EQ(a.chosen, b.chosen);
  EXPECT_EQ(a.cumulative_regret, b.cumulative_regret);
  EXPECT_EQ(a.stream, b.stream);
  EXPECT_EQ(a.chosen.size(), 300u);
  EXPECT_EQ(a.estimation_error.size(), 300u);
  EXPECT_EQ(a.stream.episodes.size(), 300u);
  // With one round per episode, F1 and the optimal-selection rate coincide.
  EXPECT_DOUBLE_EQ(a.avg_f1(), a.optimal_rate());
}

TEST(RunSynthetic, OptimalRateWellAboveRandom) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto cfg = SyntheticConfig::standard(seed);
    const auto r = run(cfg, 1.0);
    EXPECT_GE(r.optimal_rate(), 3.0 / static_cast<double>(cfg.num_arms)) << "seed " << seed;
  }
}

TEST(RunSynthetic, StepModeBeatsFinalMode) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto cfg = SyntheticConfig::standard(seed);
    const auto step = run(cfg, 1.0, RewardMode::step);
    const auto fin = run(cfg, 1.0, RewardMode::final);
    EXPECT_GT(step.avg_f1(), fin.avg_f1());
    EXPECT_LT(step.regret_at_end(), fin.regret_at_end());
  }
}

TEST(Deceptive, GreedyLocksOntoDecoy) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto cfg = SyntheticConfig::deceptive(seed);
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.horizon, 500u);
    const auto greedy = run(cfg, 0.0);
    const auto explore = run(cfg, 1.0);
    EXPECT_GT(greedy.pulls.at(id("arm00")), 300u);  // decoy takes a clear majority
    EXPECT_GT(greedy.regret_at_end(), explore.regret_at_end());
  }
}

// Tool traces -----------------------------------------------------------------------

TEST(ToolTrace, StructureAndDeterminism) {
  ToolTraceConfig tc;
  tc.num_episodes = 30;
  tc.seed = 5;
  const Trace t = make_tool_trace(tc);
  EXPECT_EQ(t.header.dimension, tc.dimension);
  EXPECT_EQ(t.header.vocabulary.size(), tc.num_tools);
  EXPECT_TRUE(t.header.embeddings.empty());
  ASSERT_EQ(t.episodes.size(), 30u);
  for (const auto& ep : t.episodes) {
    EXPECT_NO_THROW(ep.validate());
    EXPECT_EQ(ep.candidates.size(), tc.candidates_per_episode);
    EXPECT_GE(ep.ground_truth.size(), tc.min_ground_truth);
    EXPECT_LE(ep.ground_truth.size(), tc.max_ground_truth);
    EXPECT_EQ(t.steps.at(ep.key()).size(), ep.ground_truth.size() + static_cast<std::size_t>(tc.extra_steps));
  }
  EXPECT_EQ(make_tool_trace(tc), t);
  tc.seed = 6;
  EXPECT_NE(make_tool_trace(tc), t);
}

TEST(ToolTrace, PriorScaleAddsEmbeddings) {
  ToolTraceConfig tc;
  tc.num_episodes = 2;
  tc.prior_scale = 0.5;
  const Trace t = make_tool_trace(tc);
  EXPECT_EQ(t.header.embeddings.size(), tc.num_tools);
  tc.candidates_per_episode = tc.num_tools + 1;
  EXPECT_THROW(make_tool_trace(tc), ConfigError);
}
