#include "toolbandit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "toolbandit/errors.hpp"

namespace toolbandit {

MultisetMetrics multiset_match(std::span<const ActionId> predicted, std::span<const ActionId> ground_truth) {
  MultisetMetrics m;
  m.predicted_size = predicted.size();
  m.gt_size = ground_truth.size();

  std::map<ActionId, std::size_t> gt_counts;
  for (const auto& a : ground_truth) ++gt_counts[a];
  for (const auto& a : predicted) {
    auto it = gt_counts.find(a);
    if (it != gt_counts.end() && it->second > 0) {
      --it->second;
      ++m.matched;
    }
  }

  if (m.gt_size == 0) {
    m.precision = m.predicted_size == 0 ? 1.0 : 0.0;
    m.recall = 1.0;
  } else {
    m.precision = m.predicted_size == 0 ? 0.0 : static_cast<double>(m.matched) / static_cast<double>(m.predicted_size);
    m.recall = static_cast<double>(m.matched) / static_cast<double>(m.gt_size);
  }
  const double sum = m.precision + m.recall;
  m.f1 = sum > 0.0 ? 2.0 * m.precision * m.recall / sum : 0.0;
  return m;
}

MultisetMetrics macro_average(std::span<const MultisetMetrics> results) {
  if (results.empty()) throw ConfigError("macro_average of an empty list");
  MultisetMetrics out;
  for (const auto& r : results) {
    out.precision += r.precision;
    out.recall += r.recall;
    out.f1 += r.f1;
    out.matched += r.matched;
    out.predicted_size += r.predicted_size;
    out.gt_size += r.gt_size;
  }
  const auto n = static_cast<double>(results.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  return out;
}

std::vector<double> running_average(std::span<const double> series) {
  std::vector<double> out;
  out.reserve(series.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    out.push_back(sum / static_cast<double>(i + 1));
  }
  return out;
}

double optimal_rate(std::span<const ActionId> chosen, std::span<const ActionId> optimal) {
  if (chosen.size() != optimal.size()) throw ConfigError("optimal_rate: history length mismatch");
  if (chosen.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < chosen.size(); ++i) hits += chosen[i] == optimal[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(chosen.size());
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace toolbandit
