#include "toolbandit/baselines.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "toolbandit/errors.hpp"

namespace toolbandit {

namespace {

double parse_param(std::string_view text, std::string_view what) {
  std::string s(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw ConfigError("invalid " + std::string(what) + " parameter '" + s + "'");
  return v;
}

const ActionId& nth(const ActionSet& set, std::size_t n) {
  auto it = set.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(n));
  return *it;
}

std::string format_param(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

PolicyKind PolicyKind::epsilon_greedy(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
  PolicyKind k{Type::epsilon_greedy};
  k.epsilon = epsilon;
  return k;
}

PolicyKind PolicyKind::ucb1(double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("ucb1 c must be finite and >= 0");
  PolicyKind k{Type::ucb1};
  k.ucb1_c = c;
  return k;
}

PolicyKind PolicyKind::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  const std::string_view param = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  auto no_param = [&](PolicyKind k) {
    if (colon != std::string_view::npos) throw ConfigError("policy '" + std::string(head) + "' takes no parameter");
    return k;
  };
  if (head == "linucb") return no_param(linucb());
  if (head == "greedy") return no_param(greedy());
  if (head == "random") return no_param(random());
  if (head == "epsilon_greedy") return epsilon_greedy(param.empty() ? 0.1 : parse_param(param, "epsilon"));
  if (head == "ucb1") return ucb1(param.empty() ? 1.0 : parse_param(param, "ucb1"));
  throw ConfigError("unknown policy '" + std::string(text) +
                    "' (expected linucb, greedy, epsilon_greedy[:eps], random, ucb1[:c])");
}

std::string PolicyKind::name() const {
  switch (type) {
    case Type::linucb:
      return "linucb";
    case Type::greedy:
      return "greedy";
    case Type::epsilon_greedy:
      return "epsilon_greedy:" + format_param(epsilon);
    case Type::random:
      return "random";
    case Type::ucb1:
      return "ucb1:" + format_param(ucb1_c);
  }
  return "unknown";
}

Agent::Agent(PolicyKind kind, BanditPolicy linear, std::uint64_t seed)
    : kind_(kind), linear_(std::move(linear)), rng_(seed) {}

ActionId Agent::select(const ContextVector& ctx, const ActionSet& valid) {
  if (valid.empty()) throw ArmsExhausted();
  switch (kind_.type) {
    case PolicyKind::Type::linucb:
      return linear_.select(ctx, valid);
    case PolicyKind::Type::greedy:
      return linear_.select(ctx, valid, 0.0);
    case PolicyKind::Type::epsilon_greedy: {
      // One uniform draw per call regardless of outcome keeps the stream aligned.
      const double u = rng_.uniform();
      if (u < kind_.epsilon) return nth(valid, rng_.index(valid.size()));
      return linear_.select(ctx, valid, 0.0);
    }
    case PolicyKind::Type::random:
      return nth(valid, rng_.index(valid.size()));
    case PolicyKind::Type::ucb1:
      return select_ucb1(valid);
  }
  throw ConfigError("unhandled policy kind");
}

double Agent::ucb1_score(const ActionId& id) const {
  auto it = ucb1_.find(id);
  if (it == ucb1_.end() || it->second.pulls == 0) return std::numeric_limits<double>::infinity();
  const auto n = static_cast<double>(it->second.pulls);
  const auto total = static_cast<double>(ucb1_total_);
  return it->second.mean + kind_.ucb1_c * std::sqrt(2.0 * std::log(total) / n);
}

ActionId Agent::select_ucb1(const ActionSet& valid) const {
  const ActionId* best = nullptr;
  double best_score = 0.0;
  for (const auto& id : valid) {
    const double s = ucb1_score(id);
    if (best == nullptr || s > best_score) {
      best = &id;
      best_score = s;
    }
  }
  return *best;
}

void Agent::update(const ActionId& action, const ContextVector& ctx, double reward) {
  if (!linear_.has_arm(action)) throw ConfigError("unknown action '" + action.name() + "'");
  require_dimension(linear_.dimension(), ctx.dimension(), "context");
  if (!std::isfinite(reward)) throw ConfigError("reward must be finite");
  switch (kind_.type) {
    case PolicyKind::Type::linucb:
    case PolicyKind::Type::greedy:
    case PolicyKind::Type::epsilon_greedy:
      linear_.update(action, ctx, reward);
      return;
    case PolicyKind::Type::random:
      return;
    case PolicyKind::Type::ucb1: {
      auto& arm = ucb1_[action];
      ++arm.pulls;
      arm.mean += (reward - arm.mean) / static_cast<double>(arm.pulls);
      ++ucb1_total_;
      return;
    }
  }
}

std::map<ActionId, double> Agent::scores(const ContextVector& ctx, const ActionSet& valid) const {
  std::map<ActionId, double> out;
  switch (kind_.type) {
    case PolicyKind::Type::linucb:
      for (const auto& id : valid) out.emplace(id, linear_.ucb(id, ctx));
      break;
    case PolicyKind::Type::greedy:
    case PolicyKind::Type::epsilon_greedy:
      for (const auto& id : valid) out.emplace(id, linear_.ucb(id, ctx, 0.0));
      break;
    case PolicyKind::Type::ucb1:
      for (const auto& id : valid) out.emplace(id, ucb1_score(id));
      break;
    case PolicyKind::Type::random:
      break;
  }
  return out;
}

void Agent::restore_state(std::map<ActionId, Ucb1Arm> ucb1, std::uint64_t total, Rng rng) {
  ucb1_ = std::move(ucb1);
  ucb1_total_ = total;
  rng_ = std::move(rng);
}

}  // namespace toolbandit
