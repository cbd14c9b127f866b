#include <benchmark/benchmark.h>

#include "toolbandit/episode.hpp"
#include "toolbandit/linear_bandit.hpp"
#include "toolbandit/synthetic.hpp"
#include "toolbandit/trace_io.hpp"

using namespace toolbandit;

namespace {

Eigen::VectorXd gaussian(std::size_t d, Rng& rng) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  return v;
}

void BM_ArmUpdate(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  ArmState arm = init_arm(ContextVector::zeros(d));
  const Eigen::VectorXd x = gaussian(d, rng).normalized();
  for (auto _ : state) {
    arm.update(x, 0.5);
    benchmark::DoNotOptimize(arm.inv_covariance().data());
  }
}
BENCHMARK(BM_ArmUpdate)->Arg(8)->Arg(64)->Arg(256);

void BM_Select(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  Rng rng(2);
  BanditPolicy policy(d, 1.0);
  ActionSet all;
  for (std::size_t a = 0; a < k; ++a) {
    ActionId id(synthetic_arm_id(a, k));
    policy.add_arm(id, ContextVector(gaussian(d, rng)));
    all.insert(id);
  }
  for (int t = 0; t < 50; ++t) policy.update(*all.begin(), ContextVector(gaussian(d, rng)), 1.0);
  const ContextVector x(gaussian(d, rng));
  for (auto _ : state) benchmark::DoNotOptimize(policy.select(x, all));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(k));
}
BENCHMARK(BM_Select)->Args({8, 10})->Args({64, 10})->Args({64, 100})->Args({256, 50});

void BM_SyntheticRun(benchmark::State& state) {
  auto cfg = SyntheticConfig::standard(0);
  cfg.horizon = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    Agent agent(PolicyKind::linucb(), make_synthetic_policy(cfg, 1.0), 0);
    benchmark::DoNotOptimize(run_synthetic(agent, cfg, RewardConfig{}).regret_at_end());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SyntheticRun)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_ReplayEpisode(benchmark::State& state) {
  ToolTraceConfig tc;
  tc.num_episodes = 200;
  const Trace trace = make_tool_trace(tc);
  for (auto _ : state) {
    Agent agent(PolicyKind::linucb(), policy_from_header(trace.header, 1.0), 0);
    ReplayContextSource src(trace);
    benchmark::DoNotOptimize(run_stream(agent, trace.episodes, src, EpisodeOptions{}, 0).final_running_f1());
  }
  state.SetItemsProcessed(state.iterations() * 200);
}
BENCHMARK(BM_ReplayEpisode)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
