#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace toolbandit {

/// Opaque key identifying one candidate action (tool). Ordered lexicographically;
/// that order is the deterministic tie-break everywhere in the library.
class ActionId {
 public:
  ActionId() = default;
  explicit ActionId(std::string name) : name_(std::move(name)) {}
  explicit ActionId(const char* name) : name_(name) {}

  const std::string& name() const { return name_; }

  friend auto operator<=>(const ActionId&, const ActionId&) = default;
  friend bool operator==(const ActionId&, const ActionId&) = default;

  friend std::ostream& operator<<(std::ostream& os, const ActionId& id) { return os << id.name_; }

 private:
  std::string name_;
};

using ActionSet = std::set<ActionId>;

/// Finite real vector used as a decision context (hidden state, synthetic
/// feature, or replayed vector). Construction rejects NaN/Inf entries.
class ContextVector {
 public:
  ContextVector() = default;
  explicit ContextVector(Eigen::VectorXd values);
  explicit ContextVector(std::span<const double> values);
  ContextVector(std::initializer_list<double> values);

  static ContextVector zeros(std::size_t dimension);
  static ContextVector basis(std::size_t dimension, std::size_t index);

  const Eigen::VectorXd& values() const { return values_; }
  std::size_t dimension() const { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

  std::vector<double> to_std() const;
  ContextVector normalized() const;

  /// FNV-1a over the raw IEEE-754 bytes.
  std::uint64_t digest() const;

  friend bool operator==(const ContextVector& a, const ContextVector& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  Eigen::VectorXd values_;
};

/// Throws DimensionError when `actual != expected`.
void require_dimension(std::size_t expected, std::size_t actual, const char* what);

}  // namespace toolbandit

template <>
struct std::hash<toolbandit::ActionId> {
  std::size_t operator()(const toolbandit::ActionId& id) const noexcept {
    return std::hash<std::string>{}(id.name());
  }
};
