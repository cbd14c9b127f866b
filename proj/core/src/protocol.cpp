#include "toolbandit/protocol.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "toolbandit/errors.hpp"
#include "toolbandit/random.hpp"

namespace toolbandit::protocol {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

const json& field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end()) throw FormatError(std::string("protocol message missing field '") + name + "'");
  return *it;
}

std::string get_string(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_string()) throw FormatError(std::string("protocol field '") + name + "' must be a string");
  return v.get<std::string>();
}

int get_int(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_number_integer()) throw FormatError(std::string("protocol field '") + name + "' must be an integer");
  return v.get<int>();
}

std::vector<double> get_vector(const json& v, const std::string& name) {
  if (!v.is_array()) throw FormatError("protocol field '" + name + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw FormatError("protocol field '" + name + "' must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

std::string encode(const Message& message) {
  json j = std::visit(
      overloaded{
          [](const Hello& m) {
            json emb = json::object();
            for (const auto& [k, v] : m.embeddings) emb[k] = v;
            return json{{"type", "hello"},
                        {"format_version", m.format_version},
                        {"d", m.d},
                        {"actions", m.actions},
                        {"embeddings", std::move(emb)}};
          },
          [](const ContextRequest& m) {
            return json{{"type", "context_request"}, {"task_id", m.task_id}, {"step", m.step}};
          },
          [](const ContextResponse& m) {
            return json{{"type", "context_response"},
                        {"task_id", m.task_id},
                        {"step", m.step},
                        {"context", m.context},
                        {"thought_text", m.thought_text}};
          },
          [](const ActionTaken& m) {
            return json{{"type", "action_taken"},
                        {"task_id", m.task_id},
                        {"step", m.step},
                        {"action", m.action},
                        {"observation_text", m.observation_text}};
          },
          [](const EndEpisode& m) {
            return json{{"type", "end_episode"}, {"task_id", m.task_id}, {"reason", m.reason}};
          },
          [](const ErrorMessage& m) {
            json e{{"type", "error"}, {"message", m.message}};
            if (m.task_id) e["task_id"] = *m.task_id;
            if (m.step) e["step"] = *m.step;
            return e;
          },
      },
      message);
  return j.dump();
}

Message decode(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("protocol line is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("protocol line is not a JSON object");
  const std::string type = get_string(j, "type");
  if (type == "hello") {
    Hello m;
    m.format_version = get_int(j, "format_version");
    const int d = get_int(j, "d");
    if (d <= 0) throw FormatError("hello.d must be positive");
    m.d = static_cast<std::size_t>(d);
    const auto& actions = field(j, "actions");
    if (!actions.is_array()) throw FormatError("hello.actions must be an array");
    for (const auto& a : actions) {
      if (!a.is_string()) throw FormatError("hello.actions must hold strings");
      m.actions.push_back(a.get<std::string>());
    }
    if (auto it = j.find("embeddings"); it != j.end() && !it->is_null()) {
      if (!it->is_object()) throw FormatError("hello.embeddings must be an object");
      for (const auto& [k, v] : it->items()) m.embeddings.emplace(k, get_vector(v, "embeddings." + k));
    }
    return m;
  }
  if (type == "context_request") return ContextRequest{get_string(j, "task_id"), get_int(j, "step")};
  if (type == "context_response") {
    ContextResponse m{get_string(j, "task_id"), get_int(j, "step"), get_vector(field(j, "context"), "context"), ""};
    if (auto it = j.find("thought_text"); it != j.end() && it->is_string()) m.thought_text = it->get<std::string>();
    return m;
  }
  if (type == "action_taken") {
    ActionTaken m{get_string(j, "task_id"), get_int(j, "step"), get_string(j, "action"), ""};
    if (auto it = j.find("observation_text"); it != j.end() && it->is_string()) m.observation_text = it->get<std::string>();
    return m;
  }
  if (type == "end_episode") return EndEpisode{get_string(j, "task_id"), get_string(j, "reason")};
  if (type == "error") {
    ErrorMessage m{get_string(j, "message"), std::nullopt, std::nullopt};
    if (auto it = j.find("task_id"); it != j.end() && it->is_string()) m.task_id = it->get<std::string>();
    if (auto it = j.find("step"); it != j.end() && it->is_number_integer()) m.step = it->get<int>();
    return m;
  }
  throw FormatError("unknown protocol message type '" + type + "'");
}

std::string_view type_name(const Message& message) {
  return std::visit(overloaded{
                        [](const Hello&) { return std::string_view("hello"); },
                        [](const ContextRequest&) { return std::string_view("context_request"); },
                        [](const ContextResponse&) { return std::string_view("context_response"); },
                        [](const ActionTaken&) { return std::string_view("action_taken"); },
                        [](const EndEpisode&) { return std::string_view("end_episode"); },
                        [](const ErrorMessage&) { return std::string_view("error"); },
                    },
                    message);
}

}  // namespace toolbandit::protocol

namespace toolbandit {

// SubprocessChannel ----------------------------------------------------------

SubprocessChannel::SubprocessChannel(const std::string& command) {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw ConfigError(std::string("pipe: ") + std::strerror(errno));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw ConfigError(std::string("pipe: ") + std::strerror(errno));
  }
  const pid_t pid = fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    throw ConfigError(std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  fcntl(from_child_, F_SETFD, FD_CLOEXEC);
}

SubprocessChannel::~SubprocessChannel() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    // Closing stdin asks the child to exit; give it a moment before killing.
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, nullptr, WNOHANG) == pid_) return;
      usleep(10'000);
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
  }
}

void SubprocessChannel::send(std::string_view line) {
  std::string data(line);
  data.push_back('\n');
  // Ignore SIGPIPE for the write; a dead child surfaces as EPIPE.
  struct sigaction ignore {};
  struct sigaction previous {};
  ignore.sa_handler = SIG_IGN;
  sigaction(SIGPIPE, &ignore, &previous);
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = write(to_child_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      sigaction(SIGPIPE, &previous, nullptr);
      throw ContextUnavailable(std::string("extractor write failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
  sigaction(SIGPIPE, &previous, nullptr);
}

std::optional<std::string> SubprocessChannel::receive(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (eof_) return std::nullopt;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ContextUnavailable(std::string("poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) return std::nullopt;
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ContextUnavailable(std::string("extractor read failed: ") + std::strerror(errno));
    }
    if (n == 0) {
      eof_ = true;
      continue;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

// InProcessChannel -----------------------------------------------------------

InProcessChannel::InProcessChannel(std::vector<std::string> greeting, Handler handler) : handler_(std::move(handler)) {
  for (auto& g : greeting) inbox_.push_back(std::move(g));
}

void InProcessChannel::send(std::string_view line) {
  sent_.emplace_back(line);
  for (auto& reply : handler_(line)) inbox_.push_back(std::move(reply));
}

std::optional<std::string> InProcessChannel::receive(std::chrono::milliseconds /*timeout*/) {
  if (inbox_.empty()) return std::nullopt;
  std::string line = std::move(inbox_.front());
  inbox_.pop_front();
  return line;
}

// MockExtractor --------------------------------------------------------------

MockExtractor MockExtractor::from_trace(const Trace& trace) {
  MockExtractor mock;
  mock.hello_.d = trace.header.dimension;
  for (const auto& a : trace.header.vocabulary) mock.hello_.actions.push_back(a.name());
  for (const auto& [id, v] : trace.header.embeddings) mock.hello_.embeddings.emplace(id.name(), v);
  for (const auto& e : trace.episodes) mock.task_to_key_.emplace(e.task_id, e.key());
  mock.trace_ = trace;
  return mock;
}

MockExtractor MockExtractor::seeded(std::size_t d, std::vector<ActionId> actions, std::uint64_t seed) {
  MockExtractor mock;
  mock.hello_.d = d;
  for (const auto& a : actions) mock.hello_.actions.push_back(a.name());
  mock.seed_ = seed;
  return mock;
}

protocol::Hello MockExtractor::hello() const { return hello_; }

std::optional<std::vector<double>> MockExtractor::context_for(const std::string& task_id, int step) const {
  if (trace_) {
    auto it = trace_->steps.find(task_id);
    if (it == trace_->steps.end()) {
      auto key = task_to_key_.find(task_id);
      if (key != task_to_key_.end()) it = trace_->steps.find(key->second);
    }
    if (it == trace_->steps.end() || step < 1 || static_cast<std::size_t>(step) > it->second.size()) return std::nullopt;
    return it->second[static_cast<std::size_t>(step) - 1].context.to_std();
  }
  std::uint64_t h = seed_;
  for (char c : task_id) h = derive_seed(h, static_cast<std::uint8_t>(c));
  Rng rng(derive_seed(h, static_cast<std::uint64_t>(step)));
  std::vector<double> v(hello_.d);
  for (auto& x : v) x = round_significant9(rng.normal());
  return v;
}

std::vector<std::string> MockExtractor::handle(std::string_view line) {
  protocol::Message msg;
  try {
    msg = protocol::decode(line);
  } catch (const FormatError& e) {
    return {protocol::encode(protocol::ErrorMessage{e.what(), std::nullopt, std::nullopt})};
  }
  if (const auto* req = std::get_if<protocol::ContextRequest>(&msg)) {
    ++requests_;
    auto ctx = context_for(req->task_id, req->step);
    if (!ctx) {
      return {protocol::encode(protocol::ErrorMessage{
          "no context for task '" + req->task_id + "' step " + std::to_string(req->step), req->task_id, req->step})};
    }
    return {protocol::encode(protocol::ContextResponse{req->task_id, req->step, std::move(*ctx), "mock thought"})};
  }
  return {};
}

std::unique_ptr<InProcessChannel> MockExtractor::channel() const {
  auto shared = std::make_shared<MockExtractor>(*this);
  return std::make_unique<InProcessChannel>(std::vector<std::string>{protocol::encode(shared->hello())},
                                            [shared](std::string_view line) { return shared->handle(line); });
}

// LiveContextSource ----------------------------------------------------------

LiveContextSource::LiveContextSource(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout)
    : channel_(std::move(channel)), timeout_(timeout) {
  auto line = channel_->receive(timeout_);
  if (!line) throw ConfigError("extractor did not send a hello message");
  protocol::Message msg;
  try {
    msg = protocol::decode(*line);
  } catch (const FormatError& e) {
    throw ConfigError(std::string("malformed hello: ") + e.what());
  }
  auto* hello = std::get_if<protocol::Hello>(&msg);
  if (hello == nullptr) {
    throw ConfigError("expected hello, got " + std::string(protocol::type_name(msg)));
  }
  if (hello->format_version != protocol::kFormatVersion) {
    throw ConfigError("extractor protocol version " + std::to_string(hello->format_version) + " is not supported");
  }
  for (const auto& [name, v] : hello->embeddings) {
    if (v.size() != hello->d) throw ConfigError("hello embedding for '" + name + "' has the wrong dimension");
  }
  hello_ = std::move(*hello);
}

ContextVector LiveContextSource::next_context(const Episode& episode, int step) {
  channel_->send(protocol::encode(protocol::ContextRequest{episode.key(), step}));
  ++requests_;
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  while (true) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    auto line = left.count() > 0 ? channel_->receive(left) : std::nullopt;
    if (!line) {
      stale_.emplace_back(episode.key(), step);
      throw ContextUnavailable("extractor timed out on '" + episode.key() + "' step " + std::to_string(step));
    }
    protocol::Message msg;
    try {
      msg = protocol::decode(*line);
    } catch (const FormatError& e) {
      throw ContextUnavailable(std::string("malformed extractor reply: ") + e.what());
    }
    if (auto* err = std::get_if<protocol::ErrorMessage>(&msg)) {
      throw ContextUnavailable("extractor error: " + err->message);
    }
    auto* resp = std::get_if<protocol::ContextResponse>(&msg);
    if (resp == nullptr) {
      throw ContextUnavailable("lockstep violation: expected context_response, got " +
                               std::string(protocol::type_name(msg)));
    }
    if (resp->task_id != episode.key() || resp->step != step) {
      auto late = std::find(stale_.begin(), stale_.end(), std::pair{resp->task_id, resp->step});
      if (late != stale_.end()) {
        stale_.erase(late);
        continue;
      }
      throw ContextUnavailable("lockstep violation: response for '" + resp->task_id + "' step " +
                               std::to_string(resp->step) + " while awaiting '" + episode.key() + "' step " +
                               std::to_string(step));
    }
    if (resp->context.size() != hello_.d) {
      throw ContextUnavailable("extractor context has dimension " + std::to_string(resp->context.size()) +
                               ", hello declared " + std::to_string(hello_.d));
    }
    for (double v : resp->context) {
      if (!std::isfinite(v)) throw ContextUnavailable("extractor context has non-finite entries");
    }
    ++responses_;
    return ContextVector(std::span<const double>(resp->context));
  }
}

void LiveContextSource::on_action(const Episode& episode, int step, const ActionId& action) {
  try {
    channel_->send(protocol::encode(protocol::ActionTaken{episode.key(), step, action.name(), ""}));
  } catch (const ContextUnavailable&) {
    // Reported by the next context request.
  }
}

void LiveContextSource::on_episode_end(const Episode& episode, std::string_view reason) {
  try {
    channel_->send(protocol::encode(protocol::EndEpisode{episode.key(), std::string(reason)}));
  } catch (const ContextUnavailable&) {
    // Reported by the next context request.
  }
}

BanditPolicy policy_from_hello(const protocol::Hello& hello, double alpha) {
  BanditPolicy policy(hello.d, alpha);
  for (const auto& name : hello.actions) {
    ActionId id(name);
    auto it = hello.embeddings.find(name);
    if (it != hello.embeddings.end()) {
      policy.add_arm(id, ContextVector(std::span<const double>(it->second)));
    } else {
      policy.add_arm(id);
    }
  }
  return policy;
}

}  // namespace toolbandit
