#include "toolbandit/types.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "toolbandit/errors.hpp"

namespace toolbandit {

namespace {

void require_finite(const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw ConfigError("context entry " + std::to_string(i) + " is not finite");
    }
  }
}

}  // namespace

ContextVector::ContextVector(Eigen::VectorXd values) : values_(std::move(values)) { require_finite(values_); }

ContextVector::ContextVector(std::span<const double> values)
    : values_(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()))) {
  require_finite(values_);
}

ContextVector::ContextVector(std::initializer_list<double> values)
    : ContextVector(std::span<const double>(values.begin(), values.size())) {}

ContextVector ContextVector::zeros(std::size_t dimension) {
  return ContextVector(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension)));
}

ContextVector ContextVector::basis(std::size_t dimension, std::size_t index) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension));
  v[static_cast<Eigen::Index>(index)] = 1.0;
  return ContextVector(std::move(v));
}

std::vector<double> ContextVector::to_std() const { return {values_.data(), values_.data() + values_.size()}; }

ContextVector ContextVector::normalized() const {
  const double n = values_.norm();
  if (n == 0.0) return *this;
  return ContextVector(Eigen::VectorXd(values_ / n));
}

std::uint64_t ContextVector::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values_[i]);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void require_dimension(std::size_t expected, std::size_t actual, const char* what) {
  if (expected != actual) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) + ", got " +
                         std::to_string(actual));
  }
}

}  // namespace toolbandit
