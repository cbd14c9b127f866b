#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "toolbandit/cli.hpp"

using namespace toolbandit;
using toolbandit::testing::TempDir;
namespace fs = std::filesystem;

namespace {

const std::string kMock = TOOLBANDIT_MOCK_EXTRACTOR;
const std::string kExe = TOOLBANDIT_EXE;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "toolbandit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  EXPECT_TRUE(in.good()) << p;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

using Row = std::map<std::string, std::string>;

std::vector<Row> read_csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream hs(line);
    std::string h;
    while (std::getline(hs, h, ',')) header.push_back(h);
  }
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string cell;
    Row r;
    for (const auto& h : header) {
      std::getline(ls, cell, ',');
      r[h] = cell;
    }
    rows.push_back(r);
  }
  return rows;
}

Row seed_row(const std::vector<Row>& rows, const std::string& seed) {
  for (const auto& r : rows)
    if (r.at("seed") == seed) return r;
  ADD_FAILURE() << "no row for seed " << seed;
  return {};
}

double col(const Row& r, const std::string& name) { return std::stod(r.at(name)); }

fs::path make_trace(const TempDir& dir, std::size_t episodes, const std::string& name = "trace.jsonl") {
  const auto path = dir / name;
  const auto r = invoke({"make-trace", "--trace", path.string(), "--episodes", std::to_string(episodes), "--seeds", "42"});
  EXPECT_EQ(r.code, 0) << r.err;
  return path;
}

}  // namespace

// synth --------------------------------------------------------------------------------

TEST(CliSynth, DefaultRunWritesCurvesAndSummary) {
  TempDir dir;
  const auto r = invoke({"synth", "--out", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (int s = 0; s < 3; ++s) {
    const auto curve = read_csv(dir / ("synth_seed" + std::to_string(s) + ".csv"));
    EXPECT_EQ(curve.size(), 2000u);
    EXPECT_TRUE(curve.front().contains("cumulative_regret"));
    EXPECT_TRUE(curve.front().contains("estimation_error"));
    EXPECT_EQ(curve.front().at("round"), "1");
    EXPECT_TRUE(fs::exists(dir / ("synth_seed" + std::to_string(s) + "_episodes.jsonl")));
  }
  const auto summary = read_csv(dir / "synth_summary.csv");
  ASSERT_EQ(summary.size(), 5u);  // three seeds, mean, std
  EXPECT_EQ(summary[3].at("seed"), "mean");
  EXPECT_EQ(summary[4].at("seed"), "std");
  EXPECT_EQ(summary[0].at("policy"), "linucb");
  EXPECT_NE(r.out.find("regret@T"), std::string::npos);
}

TEST(CliSynth, GreedyRegretHigherOnDeceptiveInstance) {
  TempDir a, b;
  ASSERT_EQ(invoke({"synth", "--instance", "deceptive", "--alpha", "0", "--out", a.path().string()}).code, 0);
  ASSERT_EQ(invoke({"synth", "--instance", "deceptive", "--alpha", "1", "--out", b.path().string()}).code, 0);
  const auto greedy = read_csv(a / "synth_summary.csv");
  const auto explore = read_csv(b / "synth_summary.csv");
  for (const char* s : {"0", "1", "2", "mean"}) {
    EXPECT_GT(col(seed_row(greedy, s), "regret_at_T"), col(seed_row(explore, s), "regret_at_T")) << s;
  }
}

TEST(CliSynth, StepRewardBeatsFinalReward) {
  TempDir a, b;
  ASSERT_EQ(invoke({"synth", "--alpha", "1", "--reward-mode", "step", "--out", a.path().string()}).code, 0);
  ASSERT_EQ(invoke({"synth", "--alpha", "1", "--reward-mode", "final", "--out", b.path().string()}).code, 0);
  const auto step = seed_row(read_csv(a / "synth_summary.csv"), "mean");
  const auto fin = seed_row(read_csv(b / "synth_summary.csv"), "mean");
  EXPECT_EQ(step.at("reward_mode"), "step");
  EXPECT_EQ(fin.at("reward_mode"), "final");
  EXPECT_GT(col(step, "avg_f1"), col(fin, "avg_f1"));
  EXPECT_LT(col(step, "regret_at_T"), col(fin, "regret_at_T"));
}

TEST(CliSynth, ParallelSeedsMatchSequential) {
  TempDir a, b;
  ASSERT_EQ(invoke({"synth", "--T", "300", "--jobs", "1", "--out", a.path().string()}).code, 0);
  ASSERT_EQ(invoke({"synth", "--T", "300", "--jobs", "3", "--out", b.path().string()}).code, 0);
  for (const char* f : {"synth_summary.csv", "synth_seed0.csv", "synth_seed2_episodes.jsonl"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(CliSynth, OverridesReachTheInstance) {
  TempDir dir;
  ASSERT_EQ(invoke({"synth", "--T", "50", "--d", "3", "--K", "4", "--sigma", "0", "--seeds", "7", "--out",
                 dir.path().string()})
                .code,
            0);
  EXPECT_EQ(read_csv(dir / "synth_seed7.csv").size(), 50u);
  EXPECT_EQ(read_csv(dir / "synth_summary.csv").size(), 3u);
}

// replay / live ------------------------------------------------------------------------------

TEST(CliReplay, TenEpisodeTraceIsDeterministic) {
  TempDir dir, a, b;
  const auto trace = make_trace(dir, 10);
  ASSERT_EQ(invoke({"replay", "--trace", trace.string(), "--out", a.path().string()}).code, 0);
  ASSERT_EQ(invoke({"replay", "--trace", trace.string(), "--out", b.path().string()}).code, 0);
  for (const char* f : {"replay_summary.csv", "replay_seed0_episodes.jsonl", "replay_seed1_curve.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto summary = read_csv(a / "replay_summary.csv");
  EXPECT_EQ(summary.size(), 5u);
  EXPECT_EQ(seed_row(summary, "0").at("episodes"), "10");
  EXPECT_EQ(seed_row(summary, "0").at("aborted"), "0");
}

TEST(CliReplay, LinUcbBeatsRandomOnLearnableTrace) {
  TempDir dir, a, b;
  const auto trace = make_trace(dir, 200);
  ASSERT_EQ(invoke({"replay", "--trace", trace.string(), "--policy", "random", "--out", a.path().string()}).code, 0);
  ASSERT_EQ(invoke({"replay", "--trace", trace.string(), "--policy", "linucb", "--alpha", "1", "--out", b.path().string()})
                .code,
            0);
  const auto random = read_csv(a / "replay_summary.csv");
  const auto linucb = read_csv(b / "replay_summary.csv");
  for (const char* s : {"0", "1", "2"}) {
    EXPECT_GT(col(seed_row(linucb, s), "final_running_f1"), col(seed_row(random, s), "final_running_f1")) << s;
  }
}

TEST(CliLive, MockExtractorRunMatchesReplay) {
  TempDir dir, a, b;
  const auto trace = make_trace(dir, 10);
  ASSERT_EQ(invoke({"replay", "--trace", trace.string(), "--out", a.path().string()}).code, 0);
  const auto live = invoke({"live", "--trace", trace.string(), "--extractor-cmd", kMock + " --trace " + trace.string(),
                         "--timeout", "10", "--jobs", "3", "--out", b.path().string()});
  ASSERT_EQ(live.code, 0) << live.err;
  for (int s = 0; s < 3; ++s) {
    const std::string tag = "_seed" + std::to_string(s);
    EXPECT_EQ(slurp(a / ("replay" + tag + "_episodes.jsonl")), slurp(b / ("live" + tag + "_episodes.jsonl")));
    EXPECT_EQ(slurp(a / ("replay" + tag + "_curve.csv")), slurp(b / ("live" + tag + "_curve.csv")));
  }
  EXPECT_EQ(slurp(a / "replay_summary.csv"), slurp(b / "live_summary.csv"));
}

TEST(CliLive, UnknownCandidateIsRunError) {
  TempDir dir;
  const auto trace = make_trace(dir, 5);
  const auto r = invoke({"live", "--trace", trace.string(), "--extractor-cmd", kMock + " --seeded 12 0 x y", "--seeds",
                      "0", "--out", dir.path().string()});
  EXPECT_EQ(r.code, cli::kExitRunError);
  EXPECT_NE(r.err.find("not an extractor action"), std::string::npos) << r.err;
}

TEST(CliLive, ExtractorWithoutHelloIsRunError) {
  TempDir dir;
  const auto trace = make_trace(dir, 5);
  const auto r = invoke({"live", "--trace", trace.string(), "--extractor-cmd", kMock + " --seeded 12 0 x --no-hello",
                      "--timeout", "0.2", "--seeds", "0", "--out", dir.path().string()});
  EXPECT_EQ(r.code, cli::kExitRunError);
  EXPECT_NE(r.err.find("hello"), std::string::npos) << r.err;
}

// sweep ----------------------------------------------------------------------------------------

TEST(CliSweep, InteriorAlphaIsBestOnStandardInstance) {
  TempDir dir;
  const auto r = invoke({"sweep", "--alphas", "0.01,0.1,1,10", "--out", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(dir / "sweep.csv");
  EXPECT_EQ(rows.size(), 4u * 5u);
  std::vector<std::string> best;
  for (const auto& row : rows)
    if (row.at("seed") == "mean" && row.at("best") == "1") best.push_back(row.at("alpha"));
  ASSERT_EQ(best.size(), 1u);
  EXPECT_NE(best[0], "0.01");
  EXPECT_NE(best[0], "10");
}

TEST(CliSweep, SingleSeedIsReproducible) {
  TempDir a, b;
  ASSERT_EQ(invoke({"sweep", "--alphas", "0.1,1", "--seeds", "5", "--T", "400", "--out", a.path().string()}).code, 0);
  ASSERT_EQ(invoke({"sweep", "--alphas", "0.1,1", "--seeds", "5", "--T", "400", "--jobs", "2", "--out",
                 b.path().string()})
                .code,
            0);
  EXPECT_EQ(slurp(a / "sweep.csv"), slurp(b / "sweep.csv"));
}

TEST(CliSweep, ReplaySweepOverTrace) {
  TempDir dir;
  const auto trace = make_trace(dir, 20);
  ASSERT_EQ(invoke({"sweep", "--alphas", "0.1,1", "--trace", trace.string(), "--out", dir.path().string()}).code, 0);
  const auto rows = read_csv(dir / "sweep.csv");
  EXPECT_TRUE(rows.front().contains("final_running_f1"));
}

TEST(CliSweep, NeedsTwoAlphas) {
  TempDir dir;
  EXPECT_EQ(invoke({"sweep", "--out", dir.path().string()}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"sweep", "--alphas", "1", "--out", dir.path().string()}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"sweep", "--alphas", "1,-1", "--out", dir.path().string()}).code, cli::kExitUsage);
  EXPECT_FALSE(fs::exists(dir / "sweep.csv"));
}

// configuration --------------------------------------------------------------------------------

TEST(CliConfig, ConfigFileSetsDefaultsAndFlagsWin) {
  TempDir dir;
  std::ofstream(dir / "run.toml") << "alpha = 0.5\nseeds = [3]\nT = 40\nreward-mode = \"both\"\n";
  ASSERT_EQ(invoke({"synth", "--config", (dir / "run.toml").string(), "--out", (dir / "a").string()}).code, 0);
  auto row = seed_row(read_csv(dir / "a" / "synth_summary.csv"), "3");
  EXPECT_EQ(col(row, "alpha"), 0.5);
  EXPECT_EQ(row.at("reward_mode"), "both");
  EXPECT_EQ(read_csv(dir / "a" / "synth_seed3.csv").size(), 40u);

  ASSERT_EQ(invoke({"synth", "--config", (dir / "run.toml").string(), "--alpha", "2", "--out", (dir / "b").string()}).code,
            0);
  row = seed_row(read_csv(dir / "b" / "synth_summary.csv"), "3");
  EXPECT_EQ(col(row, "alpha"), 2.0);
}

TEST(CliConfig, OutputDirectoryFromEnvironment) {
  TempDir dir;
  ::setenv(cli::kOutDirEnv, dir.path().c_str(), 1);
  const auto r = invoke({"synth", "--T", "20", "--seeds", "0"});
  ::unsetenv(cli::kOutDirEnv);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "synth_summary.csv"));
}

TEST(CliReport, CollectsSummaries) {
  TempDir dir;
  ASSERT_EQ(invoke({"synth", "--T", "50", "--out", dir.path().string()}).code, 0);
  ASSERT_EQ(invoke({"sweep", "--alphas", "0.1,1", "--T", "50", "--out", dir.path().string()}).code, 0);
  const auto r = invoke({"report", "--out", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto md = slurp(dir / "report.md");
  EXPECT_NE(md.find("synth_summary.csv"), std::string::npos);
  EXPECT_NE(md.find("sweep.csv"), std::string::npos);
  EXPECT_NE(md.find("| mean"), std::string::npos);
  EXPECT_EQ(r.out.find(md.substr(0, 20)) != std::string::npos, true);
}

TEST(CliMakeTrace, WritesLoadableTrace) {
  TempDir dir;
  const auto path = dir / "t.jsonl";
  ASSERT_EQ(invoke({"make-trace", "--trace", path.string(), "--episodes", "7", "--d", "5", "--K", "6", "--candidates", "4",
                 "--prior-scale", "0.5"})
                .code,
            0);
  const auto text = slurp(path);
  EXPECT_NE(text.find("\"d\":5"), std::string::npos);
  EXPECT_NE(text.find("embeddings"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n') > 7, true);
}

// exit codes -------------------------------------------------------------------------------------

TEST(CliErrors, UsageAndRunErrorCodes) {
  TempDir dir;
  const std::string out = dir.path().string();
  EXPECT_EQ(invoke({}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"dance"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"synth", "--alpha", "-1", "--out", out}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"synth", "--policy", "oracle", "--out", out}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"synth", "--reward-mode", "sometimes", "--out", out}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"synth", "--m", "0", "--out", out}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"synth", "--instance", "weird", "--out", out}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"replay", "--out", out}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"live", "--trace", "x.jsonl", "--out", out}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"synth", "--config", (dir / "missing.toml").string()}).code, cli::kExitUsage);

  const auto missing = invoke({"replay", "--trace", (dir / "nope.jsonl").string(), "--out", out});
  EXPECT_EQ(missing.code, cli::kExitRunError);
  EXPECT_NE(missing.err.find("nope.jsonl"), std::string::npos);

  std::ofstream(dir / "bad.jsonl") << "{\"type\":\"header\"}\n";
  const auto bad = invoke({"replay", "--trace", (dir / "bad.jsonl").string(), "--out", out});
  EXPECT_EQ(bad.code, cli::kExitRunError);
  EXPECT_NE(bad.err.find("line 1"), std::string::npos) << bad.err;
}

TEST(CliExecutable, ExitCodesThroughTheShell) {
  TempDir dir;
  auto status = [&](const std::string& args) {
    const int raw = std::system((kExe + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status("--help"), 0);
  EXPECT_EQ(status("synth --T 10 --seeds 0 --out " + dir.path().string()), 0);
  EXPECT_EQ(status("sweep --out " + dir.path().string()), 2);
  EXPECT_EQ(status("replay --trace " + (dir / "none.jsonl").string() + " --out " + dir.path().string()), 1);
  EXPECT_TRUE(fs::exists(dir / "synth_summary.csv"));
}
