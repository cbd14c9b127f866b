#pragma once

// Live context protocol.
//
// Newline-delimited JSON objects, UTF-8, one message per line, keys in sorted
// order (compact encoding). Every object carries "type":
//
//   hello             {format_version, d, actions, embeddings}
//   context_request   {task_id, step}
//   context_response  {task_id, step, context, thought_text}
//   action_taken      {task_id, step, action, observation_text}
//   end_episode       {task_id, reason}
//   error             {message, task_id?, step?}
//
// The client sends context_request and must receive exactly one
// context_response (or error) for the same task_id/step before the next request.

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "toolbandit/context_source.hpp"
#include "toolbandit/trace_io.hpp"

namespace toolbandit::protocol {

inline constexpr int kFormatVersion = 1;

struct Hello {
  int format_version = kFormatVersion;
  std::size_t d = 0;
  std::vector<std::string> actions;
  std::map<std::string, std::vector<double>> embeddings;
  friend bool operator==(const Hello&, const Hello&) = default;
};

struct ContextRequest {
  std::string task_id;
  int step = 0;
  friend bool operator==(const ContextRequest&, const ContextRequest&) = default;
};

struct ContextResponse {
  std::string task_id;
  int step = 0;
  std::vector<double> context;
  std::string thought_text;
  friend bool operator==(const ContextResponse&, const ContextResponse&) = default;
};

struct ActionTaken {
  std::string task_id;
  int step = 0;
  std::string action;
  std::string observation_text;
  friend bool operator==(const ActionTaken&, const ActionTaken&) = default;
};

struct EndEpisode {
  std::string task_id;
  std::string reason;
  friend bool operator==(const EndEpisode&, const EndEpisode&) = default;
};

struct ErrorMessage {
  std::string message;
  std::optional<std::string> task_id;
  std::optional<int> step;
  friend bool operator==(const ErrorMessage&, const ErrorMessage&) = default;
};

using Message = std::variant<Hello, ContextRequest, ContextResponse, ActionTaken, EndEpisode, ErrorMessage>;

/// Single line, no trailing newline.
std::string encode(const Message& message);

/// Throws FormatError on malformed lines, unknown types or missing fields.
Message decode(std::string_view line);

std::string_view type_name(const Message& message);

}  // namespace toolbandit::protocol

namespace toolbandit {

/// Bidirectional line transport.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  /// Sends one line; the newline is appended by the channel.
  virtual void send(std::string_view line) = 0;
  /// Next line without its newline, or nullopt on timeout or end of stream.
  virtual std::optional<std::string> receive(std::chrono::milliseconds timeout) = 0;
};

/// Child process launched through /bin/sh -c; its stdin/stdout carry the
/// protocol, stderr is inherited.
class SubprocessChannel : public LineChannel {
 public:
  explicit SubprocessChannel(const std::string& command);
  ~SubprocessChannel() override;

  SubprocessChannel(const SubprocessChannel&) = delete;
  SubprocessChannel& operator=(const SubprocessChannel&) = delete;

  void send(std::string_view line) override;
  std::optional<std::string> receive(std::chrono::milliseconds timeout) override;

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  bool eof_ = false;
};

/// In-process peer: every sent line is handed to `handler`, whose reply lines
/// are queued for receive(). Never blocks.
class InProcessChannel : public LineChannel {
 public:
  using Handler = std::function<std::vector<std::string>(std::string_view)>;

  InProcessChannel(std::vector<std::string> greeting, Handler handler);

  void send(std::string_view line) override;
  std::optional<std::string> receive(std::chrono::milliseconds timeout) override;

  const std::vector<std::string>& sent() const { return sent_; }

 private:
  Handler handler_;
  std::deque<std::string> inbox_;
  std::vector<std::string> sent_;
};

/// Deterministic stand-in for the hidden-state extractor. Contexts are either
/// served from a recorded trace or generated from a hash of (seed, task, step),
/// so responses never depend on the actions taken.
class MockExtractor {
 public:
  static MockExtractor from_trace(const Trace& trace);
  static MockExtractor seeded(std::size_t d, std::vector<ActionId> actions, std::uint64_t seed);

  protocol::Hello hello() const;
  /// Replies to one incoming line (zero or one reply lines).
  std::vector<std::string> handle(std::string_view line);

  std::size_t requests_served() const { return requests_; }

  /// Channel wired to a fresh copy of this mock, greeting already queued.
  std::unique_ptr<InProcessChannel> channel() const;

 private:
  MockExtractor() = default;
  std::optional<std::vector<double>> context_for(const std::string& task_id, int step) const;

  protocol::Hello hello_;
  std::optional<Trace> trace_;
  std::map<std::string, std::string> task_to_key_;
  std::uint64_t seed_ = 0;
  std::size_t requests_ = 0;
};

inline constexpr std::chrono::milliseconds kDefaultLiveTimeout{120'000};

/// Context source backed by a live extractor. Reads the hello on construction
/// (ConfigError if none arrives or it is malformed). Timeouts, error replies
/// and lockstep violations surface as ContextUnavailable.
class LiveContextSource : public ContextSource {
 public:
  explicit LiveContextSource(std::unique_ptr<LineChannel> channel,
                             std::chrono::milliseconds timeout = kDefaultLiveTimeout);

  const protocol::Hello& hello() const { return hello_; }
  std::size_t dimension() const override { return hello_.d; }

  ContextVector next_context(const Episode& episode, int step) override;
  void on_action(const Episode& episode, int step, const ActionId& action) override;
  void on_episode_end(const Episode& episode, std::string_view reason) override;

  std::size_t requests() const { return requests_; }
  std::size_t responses() const { return responses_; }

 private:
  std::unique_ptr<LineChannel> channel_;
  std::chrono::milliseconds timeout_;
  protocol::Hello hello_;
  std::size_t requests_ = 0;
  std::size_t responses_ = 0;
  std::vector<std::pair<std::string, int>> stale_;  // requests that timed out
};

/// Policy with one arm per hello action, warm-started from hello embeddings.
BanditPolicy policy_from_hello(const protocol::Hello& hello, double alpha);

}  // namespace toolbandit
