#include "toolbandit/trace_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "toolbandit/errors.hpp"

namespace toolbandit {

using nlohmann::json;

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& field, const std::string& what) {
  throw FormatError("line " + std::to_string(line) + ", field '" + field + "': " + what);
}

const json& require(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) fail(line, field, "missing");
  return *it;
}

std::vector<double> read_vector(const json& v, std::size_t line, const std::string& field) {
  if (!v.is_array()) fail(line, field, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) fail(line, field, "expected an array of numbers");
    const double d = x.get<double>();
    if (!std::isfinite(d)) fail(line, field, "non-finite value");
    out.push_back(d);
  }
  return out;
}

std::vector<ActionId> read_actions(const json& v, std::size_t line, const std::string& field) {
  if (!v.is_array()) fail(line, field, "expected an array of action names");
  std::vector<ActionId> out;
  for (const auto& x : v) {
    if (!x.is_string()) fail(line, field, "expected an array of action names");
    out.emplace_back(x.get<std::string>());
  }
  return out;
}

int read_int(const json& v, std::size_t line, const std::string& field) {
  if (!v.is_number_integer()) fail(line, field, "expected an integer");
  return v.get<int>();
}

json rounded_array(const ContextVector& c) {
  json arr = json::array();
  for (std::size_t i = 0; i < c.dimension(); ++i) arr.push_back(round_significant9(c[i]));
  return arr;
}

json names(const auto& actions) {
  json arr = json::array();
  for (const auto& a : actions) arr.push_back(a.name());
  return arr;
}

}  // namespace

double round_significant9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

Trace parse_trace(std::istream& in) {
  Trace trace;
  std::string text;
  std::size_t line_no = 0;
  bool have_header = false;
  std::set<ActionId> vocab;
  std::set<std::string> seen_tasks;
  Episode* current = nullptr;
  std::vector<RecordedStep>* current_steps = nullptr;

  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(line_no, "<record>", std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) fail(line_no, "<record>", "expected a JSON object");

    if (!have_header) {
      const auto& type = require(obj, "type", line_no);
      if (type != "header") fail(line_no, "type", "first record must be the header");
      trace.header.format_version = read_int(require(obj, "format_version", line_no), line_no, "format_version");
      if (trace.header.format_version != kTraceFormatVersion) {
        fail(line_no, "format_version", "unsupported version " + std::to_string(trace.header.format_version));
      }
      const int d = read_int(require(obj, "d", line_no), line_no, "d");
      if (d <= 0) fail(line_no, "d", "must be positive");
      trace.header.dimension = static_cast<std::size_t>(d);
      trace.header.vocabulary = read_actions(require(obj, "action_vocabulary", line_no), line_no, "action_vocabulary");
      for (const auto& a : trace.header.vocabulary) {
        if (!vocab.insert(a).second) fail(line_no, "action_vocabulary", "duplicate action '" + a.name() + "'");
      }
      if (auto it = obj.find("embeddings"); it != obj.end() && !it->is_null()) {
        if (!it->is_object()) fail(line_no, "embeddings", "expected an object");
        for (const auto& [name, vec] : it->items()) {
          ActionId id(name);
          if (!vocab.contains(id)) fail(line_no, "embeddings", "unknown action '" + name + "'");
          auto values = read_vector(vec, line_no, "embeddings." + name);
          if (values.size() != trace.header.dimension) {
            fail(line_no, "embeddings." + name,
                 "expected " + std::to_string(d) + " values, got " + std::to_string(values.size()));
          }
          trace.header.embeddings.emplace(id, std::move(values));
        }
      }
      if (auto it = obj.find("recording_policy"); it != obj.end() && it->is_string()) {
        trace.header.recording_policy = it->get<std::string>();
      }
      have_header = true;
      continue;
    }

    const auto& task_json = require(obj, "task_id", line_no);
    if (!task_json.is_string()) fail(line_no, "task_id", "expected a string");
    const std::string task_id = task_json.get<std::string>();
    const int step = read_int(require(obj, "step", line_no), line_no, "step");

    if (current == nullptr || current->task_id != task_id) {
      if (seen_tasks.contains(task_id)) fail(line_no, "task_id", "records of task '" + task_id + "' are not contiguous");
      if (step != 1) fail(line_no, "step", "episode must start at step 1, got " + std::to_string(step));
      seen_tasks.insert(task_id);
      Episode episode;
      episode.task_id = task_id;
      episode.context_key = task_id;
      auto cands = read_actions(require(obj, "candidates", line_no), line_no, "candidates");
      if (cands.empty()) fail(line_no, "candidates", "empty candidate set");
      for (const auto& a : cands) {
        if (!vocab.contains(a)) fail(line_no, "candidates", "unknown action '" + a.name() + "'");
        episode.candidates.insert(a);
      }
      const auto& gt_json = require(obj, "ground_truth", line_no);
      episode.ground_truth = read_actions(gt_json, line_no, "ground_truth");
      for (const auto& a : episode.ground_truth) {
        if (!episode.candidates.contains(a)) fail(line_no, "ground_truth", "action '" + a.name() + "' is not a candidate");
      }
      trace.episodes.push_back(std::move(episode));
      current = &trace.episodes.back();
      current_steps = &trace.steps[task_id];
    } else {
      const int expected = static_cast<int>(current_steps->size()) + 1;
      if (step != expected) {
        fail(line_no, "step", "expected step " + std::to_string(expected) + ", got " + std::to_string(step));
      }
      if (auto it = obj.find("candidates"); it != obj.end() && !it->is_null()) {
        auto cands = read_actions(*it, line_no, "candidates");
        if (ActionSet(cands.begin(), cands.end()) != current->candidates) {
          fail(line_no, "candidates", "differs from the episode's first record");
        }
      }
      if (auto it = obj.find("ground_truth"); it != obj.end() && !it->is_null()) {
        if (read_actions(*it, line_no, "ground_truth") != current->ground_truth) {
          fail(line_no, "ground_truth", "differs from the episode's first record");
        }
      }
    }

    auto values = read_vector(require(obj, "context", line_no), line_no, "context");
    if (values.size() != trace.header.dimension) {
      fail(line_no, "context",
           "expected " + std::to_string(trace.header.dimension) + " values, got " + std::to_string(values.size()));
    }
    RecordedStep rec{ContextVector(std::span<const double>(values)), std::nullopt};
    if (auto it = obj.find("prior_action"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) fail(line_no, "prior_action", "expected a string or null");
      ActionId a(it->get<std::string>());
      if (!vocab.contains(a)) fail(line_no, "prior_action", "unknown action '" + a.name() + "'");
      rec.prior_action = a;
    }
    current_steps->push_back(std::move(rec));
  }
  if (!have_header) fail(line_no + 1, "type", "missing header record");
  return trace;
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open trace file '" + path.string() + "'");
  try {
    return parse_trace(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_trace(const Trace& trace, std::ostream& out) {
  json header = {{"type", "header"},
                 {"format_version", trace.header.format_version},
                 {"d", trace.header.dimension},
                 {"action_vocabulary", names(trace.header.vocabulary)}};
  if (!trace.header.embeddings.empty()) {
    json emb = json::object();
    for (const auto& [id, values] : trace.header.embeddings) {
      json arr = json::array();
      for (double v : values) arr.push_back(round_significant9(v));
      emb[id.name()] = std::move(arr);
    }
    header["embeddings"] = std::move(emb);
  }
  if (!trace.header.recording_policy.empty()) header["recording_policy"] = trace.header.recording_policy;
  out << header.dump() << '\n';

  for (const auto& episode : trace.episodes) {
    auto it = trace.steps.find(episode.key());
    if (it == trace.steps.end() || it->second.empty()) {
      throw FormatError("episode '" + episode.task_id + "' has no recorded steps");
    }
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      const auto& rec = it->second[i];
      json line = {{"task_id", episode.task_id}, {"step", i + 1}, {"context", rounded_array(rec.context)}};
      if (i == 0) {
        line["candidates"] = names(episode.candidates);
        line["ground_truth"] = names(episode.ground_truth);
      }
      line["prior_action"] = rec.prior_action ? json(rec.prior_action->name()) : json(nullptr);
      out << line.dump() << '\n';
    }
  }
}

void save_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write trace file '" + path.string() + "'");
  write_trace(trace, out);
}

BanditPolicy policy_from_header(const TraceHeader& header, double alpha) {
  BanditPolicy policy(header.dimension, alpha);
  for (const auto& a : header.vocabulary) {
    auto it = header.embeddings.find(a);
    if (it != header.embeddings.end()) {
      policy.add_arm(a, ContextVector(std::span<const double>(it->second)));
    } else {
      policy.add_arm(a);
    }
  }
  return policy;
}

ReplayContextSource::ReplayContextSource(const Trace& trace)
    : dimension_(trace.header.dimension), steps_(&trace.steps) {}

ContextVector ReplayContextSource::next_context(const Episode& episode, int step) {
  auto it = steps_->find(episode.key());
  if (it == steps_->end()) throw ContextUnavailable("no recorded contexts for '" + episode.key() + "'");
  if (step < 1 || static_cast<std::size_t>(step) > it->second.size()) {
    throw ContextUnavailable("replay of '" + episode.key() + "' has " + std::to_string(it->second.size()) +
                             " recorded steps; step " + std::to_string(step) + " requested");
  }
  return it->second[static_cast<std::size_t>(step) - 1].context;
}

// Checkpoints ----------------------------------------------------------------

namespace {

constexpr char kPolicyMagic[8] = {'T', 'B', 'P', 'O', 'L', 'I', 'C', 'Y'};
constexpr char kAgentMagic[8] = {'T', 'B', 'A', 'G', 'E', 'N', 'T', '1'};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  Bytes finish() {
    u64(fnv1a(out_.data(), out_.size()));
    return std::move(out_);
  }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(const Bytes& blob) : data_(blob) {
    if (blob.size() < 8) throw FormatError("checkpoint truncated");
    end_ = blob.size() - 8;
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(blob[end_ + static_cast<std::size_t>(i)]) << (8 * i);
    if (stored != fnv1a(blob.data(), end_)) throw FormatError("checkpoint checksum mismatch (truncated or corrupt)");
  }
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw FormatError("checkpoint truncated");
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void magic(const char (&expected)[8]) {
    need(8);
    for (char c : expected) {
      if (static_cast<char>(data_[pos_++]) != c) throw FormatError("not a checkpoint of the expected kind");
    }
  }
  void done() const {
    if (pos_ != end_) throw FormatError("checkpoint has trailing bytes");
  }

 private:
  const Bytes& data_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

void write_policy(Writer& w, const BanditPolicy& policy) {
  w.raw(kPolicyMagic, 8);
  w.u32(kCheckpointVersion);
  w.u64(policy.dimension());
  w.f64(policy.alpha());
  w.u8(policy.normalize_contexts() ? 1 : 0);
  w.u64(policy.arms().size());
  const auto d = static_cast<Eigen::Index>(policy.dimension());
  for (const auto& [id, arm] : policy.arms()) {
    w.str(id.name());
    w.u64(arm.selection_count());
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) w.f64(arm.inv_covariance()(r, c));
    }
    for (Eigen::Index i = 0; i < d; ++i) w.f64(arm.reward_vector()[i]);
  }
}

BanditPolicy read_policy(Reader& r) {
  r.magic(kPolicyMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t dim = r.u64();
  if (dim == 0 || dim > 1u << 16) throw FormatError("checkpoint dimension out of range");
  const double alpha = r.f64();
  const bool normalize = r.u8() != 0;
  const std::uint64_t narms = r.u64();
  BanditPolicy policy(dim, alpha);
  policy.set_normalize_contexts(normalize);
  const auto d = static_cast<Eigen::Index>(dim);
  for (std::uint64_t a = 0; a < narms; ++a) {
    ActionId id(r.str());
    const std::uint64_t count = r.u64();
    r.need(static_cast<std::size_t>(d * d + d) * 8);
    Eigen::MatrixXd inv(d, d);
    for (Eigen::Index row = 0; row < d; ++row) {
      for (Eigen::Index c = 0; c < d; ++c) inv(row, c) = r.f64();
    }
    Eigen::VectorXd b(d);
    for (Eigen::Index i = 0; i < d; ++i) b[i] = r.f64();
    if (policy.has_arm(id)) throw FormatError("checkpoint lists action '" + id.name() + "' twice");
    policy.put_arm(id, ArmState::from_parts(std::move(inv), std::move(b), count));
  }
  return policy;
}

}  // namespace

Bytes checkpoint_policy(const BanditPolicy& policy) {
  Writer w;
  write_policy(w, policy);
  return w.finish();
}

BanditPolicy restore_policy(const Bytes& blob) {
  Reader r(blob);
  BanditPolicy policy = read_policy(r);
  r.done();
  return policy;
}

Bytes checkpoint_agent(const Agent& agent) {
  Writer w;
  w.raw(kAgentMagic, 8);
  w.u32(kCheckpointVersion);
  w.str(agent.kind().name());
  write_policy(w, agent.linear());
  w.u64(agent.ucb1_total_pulls());
  w.u64(agent.ucb1_arms().size());
  for (const auto& [id, arm] : agent.ucb1_arms()) {
    w.str(id.name());
    w.u64(arm.pulls);
    w.f64(arm.mean);
  }
  w.str(agent.rng().serialize());
  return w.finish();
}

Agent restore_agent(const Bytes& blob) {
  Reader r(blob);
  r.magic(kAgentMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw FormatError("checkpoint version " + std::to_string(version) + " is not supported");
  PolicyKind kind;
  try {
    kind = PolicyKind::parse(r.str());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint policy kind: ") + e.what());
  }
  BanditPolicy policy = read_policy(r);
  const std::uint64_t total = r.u64();
  const std::uint64_t n = r.u64();
  std::map<ActionId, Ucb1Arm> ucb1;
  for (std::uint64_t i = 0; i < n; ++i) {
    ActionId id(r.str());
    Ucb1Arm arm;
    arm.pulls = r.u64();
    arm.mean = r.f64();
    ucb1.emplace(std::move(id), arm);
  }
  Rng rng = Rng::deserialize(r.str());
  r.done();
  Agent agent(kind, std::move(policy));
  agent.restore_state(std::move(ucb1), total, std::move(rng));
  return agent;
}

void write_bytes(const Bytes& blob, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
}

Bytes read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Results --------------------------------------------------------------------

void write_episode_records(const StreamResult& result, const RunLabel& label, std::ostream& out) {
  for (const auto& rec : result.episodes) {
    const auto& r = rec.result;
    json line = {{"episode_index", rec.index},
                 {"task_id", rec.task_id},
                 {"P", r.metrics.precision},
                 {"R", r.metrics.recall},
                 {"F1", r.metrics.f1},
                 {"steps", r.steps_taken},
                 {"rewards", r.rewards},
                 {"selected", names(r.selected)},
                 {"policy", label.policy},
                 {"alpha", label.alpha},
                 {"seed", label.seed},
                 {"reward_mode", label.reward_mode},
                 {"terminated_by", std::string(to_string(r.terminated_by))},
                 {"aborted", r.aborted()}};
    if (r.aborted()) line["abort_reason"] = r.abort_reason;
    if (r.degenerate) line["degenerate"] = true;
    out << line.dump() << '\n';
  }
}

void write_f1_curve(const StreamResult& result, std::ostream& out) {
  out << "index,running_avg_f1\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < result.running_f1.size(); ++i) out << i << ',' << result.running_f1[i] << '\n';
}

}  // namespace toolbandit
