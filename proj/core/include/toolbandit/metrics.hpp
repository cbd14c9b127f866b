#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "toolbandit/types.hpp"

namespace toolbandit {

/// Multiset-matching scores of one episode.
struct MultisetMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t matched = 0;
  std::size_t predicted_size = 0;
  std::size_t gt_size = 0;

  friend bool operator==(const MultisetMetrics&, const MultisetMetrics&) = default;
};

/// matched = sum_a min(count_pred(a), count_gt(a)).
///
/// Degenerate cases: both empty scores 1/1/1; empty prediction against non-empty
/// ground truth scores 0/0/0; non-empty prediction against empty ground truth
/// scores P=0, R=1, F1=0. F1 is 0 whenever P+R is 0.
MultisetMetrics multiset_match(std::span<const ActionId> predicted, std::span<const ActionId> ground_truth);

/// Unweighted mean of P/R/F1; counts are summed. Throws ConfigError on empty input.
MultisetMetrics macro_average(std::span<const MultisetMetrics> results);

/// Element i is the mean of series[0..i].
std::vector<double> running_average(std::span<const double> series);

/// Fraction of rounds where chosen == optimal. Empty history gives 0.
double optimal_rate(std::span<const ActionId> chosen, std::span<const ActionId> optimal);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

}  // namespace toolbandit
