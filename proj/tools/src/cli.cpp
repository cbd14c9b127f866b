#include "toolbandit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "toolbandit/errors.hpp"
#include "toolbandit/protocol.hpp"
#include "toolbandit/trace_io.hpp"

namespace toolbandit::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string seed_tag(std::uint64_t seed) { return "seed" + std::to_string(seed); }

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure
// by index so errors are as deterministic as the results.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= n) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(jobs, n); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

MeanStd stats(const std::vector<double>& values) {
  std::vector<double> finite;
  for (double v : values)
    if (!std::isnan(v)) finite.push_back(v);
  if (finite.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  return mean_std(finite);
}

std::string label_prefix(const RunConfig& cfg, double alpha) {
  return cfg.policy.name() + "," + num(alpha) + "," + std::string(to_string(cfg.reward.mode));
}

EpisodeOptions episode_options(const RunConfig& cfg) {
  EpisodeOptions options;
  options.reward = cfg.reward;
  options.extra_steps = cfg.s;
  options.max_per_arm = cfg.m;
  return options;
}

StreamSeedSummary summarize(const StreamResult& result, std::uint64_t seed) {
  StreamSeedSummary s;
  s.seed = seed;
  s.episodes = result.episodes.size();
  s.aborted = result.aborted;
  if (auto macro = result.macro()) {
    s.macro = *macro;
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.macro.precision = s.macro.recall = s.macro.f1 = nan;
  }
  s.final_running_f1 = result.running_f1.empty() ? std::numeric_limits<double>::quiet_NaN() : result.final_running_f1();
  return s;
}

void write_stream_files(const RunConfig& cfg, const std::string& prefix, std::uint64_t seed, double alpha,
                        const StreamResult& result) {
  RunLabel label{cfg.policy.name(), alpha, seed, std::string(to_string(cfg.reward.mode))};
  auto episodes = open_out(cfg.out / (prefix + "_" + seed_tag(seed) + "_episodes.jsonl"));
  write_episode_records(result, label, episodes);
  auto curve = open_out(cfg.out / (prefix + "_" + seed_tag(seed) + "_curve.csv"));
  write_f1_curve(result, curve);
}

void write_stream_summary(const RunConfig& cfg, const fs::path& path, const std::vector<StreamSeedSummary>& rows) {
  auto out = open_out(path);
  out << "policy,alpha,reward_mode,seed,episodes,aborted,precision,recall,f1,final_running_f1\n";
  std::vector<double> ep, ab, p, r, f, run;
  const std::string prefix = label_prefix(cfg, cfg.alpha);
  for (const auto& row : rows) {
    out << prefix << ',' << row.seed << ',' << row.episodes << ',' << row.aborted << ',' << num(row.macro.precision)
        << ',' << num(row.macro.recall) << ',' << num(row.macro.f1) << ',' << num(row.final_running_f1) << '\n';
    ep.push_back(static_cast<double>(row.episodes));
    ab.push_back(static_cast<double>(row.aborted));
    p.push_back(row.macro.precision);
    r.push_back(row.macro.recall);
    f.push_back(row.macro.f1);
    run.push_back(row.final_running_f1);
  }
  const std::vector<std::vector<double>*> cols{&ep, &ab, &p, &r, &f, &run};
  for (const char* which : {"mean", "std"}) {
    out << prefix << ',' << which;
    for (auto* c : cols) {
      const MeanStd ms = stats(*c);
      out << ',' << num(which[0] == 'm' ? ms.mean : ms.stddev);
    }
    out << '\n';
  }
}

void log_stream_summary(std::ostream& log, const char* what, const std::vector<StreamSeedSummary>& rows) {
  for (const auto& row : rows) {
    log << what << ' ' << seed_tag(row.seed) << ": episodes=" << row.episodes << " aborted=" << row.aborted
        << " F1=" << num(row.macro.f1) << " running_F1=" << num(row.final_running_f1) << '\n';
  }
}

StreamResult replay_once(const RunConfig& cfg, const Trace& trace, double alpha, std::uint64_t seed) {
  Agent agent(cfg.policy, policy_from_header(trace.header, alpha), seed);
  ReplayContextSource source(trace);
  return run_stream(agent, trace.episodes, source, episode_options(cfg), seed);
}

}  // namespace

void RunConfig::validate() const {
  if (seeds.empty()) throw ConfigError("--seeds must list at least one seed");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("--alpha must be a finite value >= 0");
  if (s < 0) throw ConfigError("--s must be >= 0");
  if (m < 1) throw ConfigError("--m must be >= 1");
  if (!std::isfinite(reward.final_weight)) throw ConfigError("--final-weight must be finite");
  if (instance != "standard" && instance != "deceptive") throw ConfigError("--instance must be standard or deceptive");
  switch (mode) {
    case Mode::synth:
      synthetic_for(seeds.front()).validate();
      break;
    case Mode::replay:
      if (trace.empty()) throw ConfigError("replay needs --trace");
      break;
    case Mode::live:
      if (trace.empty()) throw ConfigError("live needs --trace (episodes and ground truth)");
      if (extractor_cmd.empty()) throw ConfigError("live needs --extractor-cmd");
      break;
    case Mode::sweep:
      if (alphas.size() < 2) throw ConfigError("sweep needs at least two values in --alphas");
      for (double a : alphas)
        if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("--alphas values must be finite and >= 0");
      if (trace.empty()) synthetic_for(seeds.front()).validate();
      break;
    case Mode::report:
      break;
    case Mode::make_trace:
      if (trace.empty()) throw ConfigError("make-trace needs --trace (output path)");
      break;
  }
}

SyntheticConfig RunConfig::synthetic_for(std::uint64_t seed) const {
  if (instance == "deceptive") {
    SyntheticConfig c = SyntheticConfig::deceptive(seed);
    c.noise_sigma = synth.noise_sigma;
    c.horizon = synth.horizon;
    c.episode_length = synth.episode_length;
    return c;
  }
  SyntheticConfig c = synth;
  c.seed = seed;
  c.draw_theta_star();
  return c;
}

SynthSeedSummary synth_seed(const RunConfig& cfg, std::uint64_t seed, bool write_files) {
  const SyntheticConfig sc = cfg.synthetic_for(seed);
  sc.validate();
  Agent agent(cfg.policy, make_synthetic_policy(sc, cfg.alpha), seed);
  const SyntheticRunResult r = run_synthetic(agent, sc, cfg.reward);

  if (write_files) {
    auto curve = open_out(cfg.out / ("synth_" + seed_tag(seed) + ".csv"));
    curve << "round,cumulative_regret,estimation_error,optimal_rate\n";
    std::size_t hits = 0;
    for (std::size_t t = 0; t < r.chosen.size(); ++t) {
      if (r.chosen[t] == r.optimal[t]) ++hits;
      curve << t + 1 << ',' << num(r.cumulative_regret[t]) << ',' << num(r.estimation_error[t]) << ','
            << num(static_cast<double>(hits) / static_cast<double>(t + 1)) << '\n';
    }
    RunLabel label{cfg.policy.name(), cfg.alpha, seed, std::string(to_string(cfg.reward.mode))};
    auto episodes = open_out(cfg.out / ("synth_" + seed_tag(seed) + "_episodes.jsonl"));
    write_episode_records(r.stream, label, episodes);
  }
  return {seed, r.avg_f1(), r.optimal_rate(), r.regret_at_end(), r.final_estimation_error()};
}

int cmd_synth(const RunConfig& cfg, std::ostream& log) {
  std::vector<SynthSeedSummary> rows(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) { rows[i] = synth_seed(cfg, cfg.seeds[i]); });

  auto out = open_out(cfg.out / "synth_summary.csv");
  out << "policy,alpha,reward_mode,seed,avg_f1,opt_rate,regret_at_T,theta_error\n";
  const std::string prefix = label_prefix(cfg, cfg.alpha);
  std::vector<double> f, o, g, e;
  for (const auto& row : rows) {
    out << prefix << ',' << row.seed << ',' << num(row.avg_f1) << ',' << num(row.opt_rate) << ',' << num(row.regret)
        << ',' << num(row.theta_error) << '\n';
    f.push_back(row.avg_f1);
    o.push_back(row.opt_rate);
    g.push_back(row.regret);
    e.push_back(row.theta_error);
    log << "synth " << seed_tag(row.seed) << ": F1=" << num(row.avg_f1) << " opt=" << num(row.opt_rate)
        << " regret@T=" << num(row.regret) << " theta_err=" << num(row.theta_error) << '\n';
  }
  for (const char* which : {"mean", "std"}) {
    out << prefix << ',' << which;
    for (auto* c : {&f, &o, &g, &e}) {
      const MeanStd ms = stats(*c);
      out << ',' << num(which[0] == 'm' ? ms.mean : ms.stddev);
    }
    out << '\n';
  }
  return kExitOk;
}

int cmd_replay(const RunConfig& cfg, std::ostream& log) {
  const Trace trace = load_trace(cfg.trace);
  std::vector<StreamSeedSummary> rows(cfg.seeds.size());
  std::vector<StreamResult> results(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
    results[i] = replay_once(cfg, trace, cfg.alpha, cfg.seeds[i]);
    rows[i] = summarize(results[i], cfg.seeds[i]);
  });
  for (std::size_t i = 0; i < rows.size(); ++i) write_stream_files(cfg, "replay", cfg.seeds[i], cfg.alpha, results[i]);
  write_stream_summary(cfg, cfg.out / "replay_summary.csv", rows);
  log_stream_summary(log, "replay", rows);
  return kExitOk;
}

int cmd_live(const RunConfig& cfg, std::ostream& log) {
  const Trace trace = load_trace(cfg.trace);
  std::vector<StreamSeedSummary> rows(cfg.seeds.size());
  std::vector<StreamResult> results(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    LiveContextSource source(std::make_unique<SubprocessChannel>(cfg.extractor_cmd), cfg.timeout);
    ActionSet known;
    for (const auto& a : source.hello().actions) known.insert(ActionId(a));
    for (const auto& ep : trace.episodes)
      for (const auto& c : ep.candidates)
        if (!known.contains(c))
          throw ConfigError("trace candidate '" + c.name() + "' is not an extractor action (task " + ep.task_id + ")");
    Agent agent(cfg.policy, policy_from_hello(source.hello(), cfg.alpha), seed);
    results[i] = run_stream(agent, trace.episodes, source, episode_options(cfg), seed);
    rows[i] = summarize(results[i], seed);
  });
  for (std::size_t i = 0; i < rows.size(); ++i) write_stream_files(cfg, "live", cfg.seeds[i], cfg.alpha, results[i]);
  write_stream_summary(cfg, cfg.out / "live_summary.csv", rows);
  log_stream_summary(log, "live", rows);
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  const bool replay = !cfg.trace.empty();
  std::optional<Trace> trace;
  if (replay) trace = load_trace(cfg.trace);

  const std::size_t n_alpha = cfg.alphas.size();
  const std::size_t n_seed = cfg.seeds.size();
  // Per cell: the score the argmax is taken over, then the extra columns.
  std::vector<std::vector<double>> cells(n_alpha * n_seed);
  parallel_for(cells.size(), cfg.jobs, [&](std::size_t k) {
    RunConfig c = cfg;
    c.alpha = cfg.alphas[k / n_seed];
    const std::uint64_t seed = cfg.seeds[k % n_seed];
    if (replay) {
      const auto s = summarize(replay_once(c, *trace, c.alpha, seed), seed);
      cells[k] = {s.final_running_f1, s.macro.f1};
    } else {
      const auto s = synth_seed(c, seed, false);
      cells[k] = {s.avg_f1, s.opt_rate, s.regret, s.theta_error};
    }
  });

  const std::size_t n_cols = cells.front().size();
  std::vector<std::vector<double>> means(n_alpha, std::vector<double>(n_cols));
  std::vector<std::vector<double>> stds(n_alpha, std::vector<double>(n_cols));
  for (std::size_t a = 0; a < n_alpha; ++a) {
    for (std::size_t col = 0; col < n_cols; ++col) {
      std::vector<double> v;
      for (std::size_t si = 0; si < n_seed; ++si) v.push_back(cells[a * n_seed + si][col]);
      const MeanStd ms = stats(v);
      means[a][col] = ms.mean;
      stds[a][col] = ms.stddev;
    }
  }
  std::size_t best = 0;
  for (std::size_t a = 1; a < n_alpha; ++a)
    if (means[a][0] > means[best][0]) best = a;

  auto out = open_out(cfg.out / "sweep.csv");
  out << "policy,reward_mode,alpha,seed,"
      << (replay ? "final_running_f1,f1" : "avg_f1,opt_rate,regret_at_T,theta_error") << ",best\n";
  const std::string head = cfg.policy.name() + "," + std::string(to_string(cfg.reward.mode));
  auto row = [&](std::size_t a, const std::string& seed, const std::vector<double>& values) {
    out << head << ',' << num(cfg.alphas[a]) << ',' << seed;
    for (double v : values) out << ',' << num(v);
    out << ',' << (a == best ? 1 : 0) << '\n';
  };
  for (std::size_t a = 0; a < n_alpha; ++a) {
    for (std::size_t si = 0; si < n_seed; ++si) row(a, std::to_string(cfg.seeds[si]), cells[a * n_seed + si]);
    row(a, "mean", means[a]);
    row(a, "std", stds[a]);
    log << "sweep alpha=" << num(cfg.alphas[a]) << ": " << (replay ? "running_F1=" : "F1=") << num(means[a][0])
        << (a == best ? "  <- best" : "") << '\n';
  }
  return kExitOk;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

int cmd_report(const RunConfig& cfg, std::ostream& log) {
  if (!fs::is_directory(cfg.out)) throw Error("no results directory " + cfg.out.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(cfg.out)) {
    const std::string name = entry.path().filename().string();
    if (name.ends_with("_summary.csv") || name == "sweep.csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no summary files in " + cfg.out.string());

  std::ostringstream md;
  for (const auto& path : files) {
    std::ifstream in(path);
    std::string line;
    if (!std::getline(in, line)) continue;
    const auto header = split_csv(line);
    const auto seed_col = std::find(header.begin(), header.end(), "seed") - header.begin();
    md << "## " << path.filename().string() << "\n\n|";
    for (const auto& h : header) md << ' ' << h << " |";
    md << "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) md << " --- |";
    md << '\n';
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv(line);
      if (seed_col < static_cast<std::ptrdiff_t>(cells.size()) && cells[seed_col] != "mean" && cells[seed_col] != "std")
        continue;
      md << '|';
      for (const auto& c : cells) md << ' ' << c << " |";
      md << '\n';
    }
    md << '\n';
  }
  auto out = open_out(cfg.out / "report.md");
  out << md.str();
  log << md.str();
  return kExitOk;
}

int cmd_make_trace(const RunConfig& cfg, std::ostream& log) {
  ToolTraceConfig tc = cfg.tool_trace;
  tc.seed = cfg.seeds.front();
  tc.extra_steps = cfg.s;
  const Trace trace = make_tool_trace(tc);
  if (cfg.trace.has_parent_path()) fs::create_directories(cfg.trace.parent_path());
  save_trace(trace, cfg.trace);
  log << "wrote " << trace.episodes.size() << " episodes (d=" << trace.header.dimension << ") to "
      << cfg.trace.string() << '\n';
  return kExitOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contextual-bandit tool selection experiments", "toolbandit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option defaults; flags win");

  RunConfig cfg;
  std::string policy = "linucb";
  std::string reward_mode = "step";
  std::string context_dist = "unit_sphere_uniform";
  double timeout_s = 120.0;
  std::size_t d = 0, k = 0;
  double sigma = 0.0;

  app.add_option("--alpha", cfg.alpha, "exploration coefficient")->capture_default_str();
  app.add_option("--policy", policy, "linucb | greedy | epsilon_greedy[:eps] | random | ucb1[:c]")
      ->capture_default_str();
  app.add_option("--s", cfg.s, "extra steps beyond |ground truth|")->capture_default_str();
  app.add_option("--m", cfg.m, "per-action selection cap")->capture_default_str();
  app.add_option("--reward-mode", reward_mode, "step | final | both")->capture_default_str();
  app.add_option("--final-weight", cfg.reward.final_weight, "weight of the episode-end signal")
      ->capture_default_str();
  app.add_option("--seeds", cfg.seeds, "comma-separated seeds")->delimiter(',')->capture_default_str();
  app.add_option("--trace", cfg.trace, "trace file (input; output for make-trace)");
  app.add_option("--out", cfg.out, "output directory")->envname(kOutDirEnv)->capture_default_str();
  app.add_option("--extractor-cmd", cfg.extractor_cmd, "shell command starting the context extractor");
  app.add_option("--timeout", timeout_s, "live context timeout in seconds")->capture_default_str();
  app.add_option("--jobs", cfg.jobs, "parallel seed workers (0: one per core)")->capture_default_str();
  app.add_option("--alphas", cfg.alphas, "sweep values, comma-separated")->delimiter(',');

  app.add_option("--instance", cfg.instance, "synthetic instance: standard | deceptive")->capture_default_str();
  app.add_option("--T", cfg.synth.horizon, "synthetic horizon")->capture_default_str();
  auto* d_opt = app.add_option("--d", d, "context dimension (synthetic or generated trace)");
  auto* k_opt = app.add_option("--K", k, "number of arms / tools");
  auto* sigma_opt = app.add_option("--sigma", sigma, "reward noise (synth) or context noise (make-trace)");
  app.add_option("--episode-length", cfg.synth.episode_length, "synthetic rounds per episode")
      ->capture_default_str();
  app.add_option("--context-dist", context_dist, "unit_sphere_uniform | gaussian_isotropic | biased_unit_sphere")
      ->capture_default_str();

  app.add_option("--episodes", cfg.tool_trace.num_episodes, "make-trace: episode count")->capture_default_str();
  app.add_option("--candidates", cfg.tool_trace.candidates_per_episode, "make-trace: candidates per episode")
      ->capture_default_str();
  app.add_option("--prior-scale", cfg.tool_trace.prior_scale, "make-trace: embedding scale (0 omits embeddings)")
      ->capture_default_str();

  struct Sub {
    const char* name;
    const char* help;
    Mode mode;
  };
  const Sub subs[] = {
      {"synth", "synthetic linear-reward stream per seed", Mode::synth},
      {"replay", "sequential run over a recorded trace", Mode::replay},
      {"live", "sequential run with contexts from an extractor process", Mode::live},
      {"sweep", "alpha sweep (synthetic, or replay with --trace)", Mode::sweep},
      {"report", "collect summaries under --out into report.md", Mode::report},
      {"make-trace", "write a learnable synthetic tool-selection trace to --trace", Mode::make_trace},
  };
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->fallthrough();
    sub->callback([&cfg, mode = s.mode] { cfg.mode = mode; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "toolbandit 0.1.0\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    cfg.policy = PolicyKind::parse(policy);
    cfg.reward.mode = parse_reward_mode(reward_mode);
    cfg.synth.context_dist = parse_context_distribution(context_dist);
    if (!(timeout_s > 0.0)) throw ConfigError("--timeout must be positive");
    cfg.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(timeout_s * 1000.0));
    if (cfg.jobs == 0) cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
    if (d_opt->count() > 0) cfg.synth.dimension = cfg.tool_trace.dimension = d;
    if (k_opt->count() > 0) cfg.synth.num_arms = cfg.tool_trace.num_tools = k;
    if (sigma_opt->count() > 0) {
      if (!(sigma >= 0.0)) throw ConfigError("--sigma must be >= 0");
      cfg.synth.noise_sigma = cfg.tool_trace.context_noise = sigma;
    }
    cfg.validate();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    switch (cfg.mode) {
      case Mode::synth:
        return cmd_synth(cfg, out);
      case Mode::replay:
        return cmd_replay(cfg, out);
      case Mode::live:
        return cmd_live(cfg, out);
      case Mode::sweep:
        return cmd_sweep(cfg, out);
      case Mode::report:
        return cmd_report(cfg, out);
      case Mode::make_trace:
        return cmd_make_trace(cfg, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRunError;
  }
  return kExitRunError;
}

}  // namespace toolbandit::cli
