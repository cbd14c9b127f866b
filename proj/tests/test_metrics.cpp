#include <map>
#include <numeric>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "toolbandit/errors.hpp"
#include "toolbandit/metrics.hpp"

using namespace toolbandit;
using toolbandit::testing::id;

namespace {

std::vector<ActionId> ids(std::initializer_list<const char*> names) {
  std::vector<ActionId> out;
  for (const char* n : names) out.emplace_back(n);
  return out;
}

// Independent oracle: greedily strike out one matching gt element per prediction.
std::size_t brute_matches(const std::vector<ActionId>& pred, std::vector<ActionId> gt) {
  std::size_t matched = 0;
  for (const auto& p : pred) {
    for (auto it = gt.begin(); it != gt.end(); ++it) {
      if (*it == p) {
        gt.erase(it);
        ++matched;
        break;
      }
    }
  }
  return matched;
}

std::vector<ActionId> random_multiset(Rng& rng, std::size_t max_size, std::size_t alphabet) {
  std::vector<ActionId> out(rng.index(max_size + 1));
  for (auto& a : out) a = ActionId(std::string(1, static_cast<char>('a' + rng.index(alphabet))));
  return out;
}

}  // namespace

TEST(MultisetMatch, HandComputedExample) {
  const auto m = multiset_match(ids({"a", "a", "b", "c"}), ids({"a", "b", "b"}));
  EXPECT_EQ(m.matched, 2u);
  EXPECT_DOUBLE_EQ(m.precision, 0.5);
  EXPECT_DOUBLE_EQ(m.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.f1, 2 * 0.5 * (2.0 / 3.0) / (0.5 + 2.0 / 3.0));
  EXPECT_NEAR(m.f1, 0.571, 5e-4);
}

TEST(MultisetMatch, IdentityAndDisjoint) {
  const auto same = multiset_match(ids({"x", "y", "y"}), ids({"y", "x", "y"}));
  EXPECT_EQ(same.precision, 1.0);
  EXPECT_EQ(same.recall, 1.0);
  EXPECT_EQ(same.f1, 1.0);
  const auto none = multiset_match(ids({"a", "b"}), ids({"c"}));
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
  EXPECT_EQ(none.matched, 0u);
}

TEST(MultisetMatch, DegenerateConventions) {
  const auto both = multiset_match({}, {});
  EXPECT_EQ(both.precision, 1.0);
  EXPECT_EQ(both.recall, 1.0);
  EXPECT_EQ(both.f1, 1.0);
  const auto no_pred = multiset_match({}, ids({"a"}));
  EXPECT_EQ(no_pred.precision, 0.0);
  EXPECT_EQ(no_pred.recall, 0.0);
  EXPECT_EQ(no_pred.f1, 0.0);
  const auto no_gt = multiset_match(ids({"a"}), {});
  EXPECT_EQ(no_gt.precision, 0.0);
  EXPECT_EQ(no_gt.recall, 1.0);
  EXPECT_EQ(no_gt.f1, 0.0);
}

TEST(MultisetMatch, MatchesBruteForceOracle) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto pred = random_multiset(rng, 6, 4);
    const auto gt = random_multiset(rng, 6, 4);
    const auto m = multiset_match(pred, gt);
    const std::size_t k = brute_matches(pred, gt);
    ASSERT_EQ(m.matched, k);
    ASSERT_EQ(m.predicted_size, pred.size());
    ASSERT_EQ(m.gt_size, gt.size());
    if (pred.empty() || gt.empty()) continue;
    const double p = static_cast<double>(k) / static_cast<double>(pred.size());
    const double r = static_cast<double>(k) / static_cast<double>(gt.size());
    ASSERT_EQ(m.precision, p);
    ASSERT_EQ(m.recall, r);
    ASSERT_EQ(m.f1, p + r == 0 ? 0.0 : 2 * p * r / (p + r));
  }
}

TEST(MultisetMatch, Invariants) {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const auto pred = random_multiset(rng, 5, 3);
    const auto gt = random_multiset(rng, 5, 3);
    const auto m = multiset_match(pred, gt);
    for (double v : {m.precision, m.recall, m.f1}) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
    ASSERT_LE(m.f1, std::max(m.precision, m.recall) + 1e-15);
    if (!pred.empty() && !gt.empty()) {
      ASSERT_EQ(m.f1 == 0.0, m.matched == 0);
      const auto swapped = multiset_match(gt, pred);
      ASSERT_EQ(m.precision, swapped.recall);
      ASSERT_EQ(m.recall, swapped.precision);
    }
  }
}

TEST(MacroAverage, SingleAndPair) {
  const auto one = multiset_match(ids({"a", "b"}), ids({"a"}));
  EXPECT_EQ(macro_average(std::vector{one}), one);
  MultisetMetrics full{1, 1, 1, 1, 1, 1};
  MultisetMetrics zero{0, 0, 0, 0, 1, 1};
  EXPECT_EQ(macro_average(std::vector{full, zero}).f1, 0.5);
  EXPECT_THROW(macro_average(std::vector<MultisetMetrics>{}), ConfigError);
}

TEST(MacroAverage, MatchesRecomputation) {
  Rng rng(99);
  for (int batch = 0; batch < 100; ++batch) {
    std::vector<MultisetMetrics> ms(1 + rng.index(20));
    double p = 0, r = 0, f = 0;
    std::size_t matched = 0;
    for (auto& m : ms) {
      m = multiset_match(random_multiset(rng, 4, 3), random_multiset(rng, 4, 3));
      p += m.precision;
      r += m.recall;
      f += m.f1;
      matched += m.matched;
    }
    const auto avg = macro_average(ms);
    const double n = static_cast<double>(ms.size());
    ASSERT_NEAR(avg.precision, p / n, 1e-15);
    ASSERT_NEAR(avg.recall, r / n, 1e-15);
    ASSERT_NEAR(avg.f1, f / n, 1e-15);
    ASSERT_EQ(avg.matched, matched);
  }
}

TEST(RunningAverage, Examples) {
  const auto r = running_average(std::vector<double>{1, 0, 1});
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0], 1.0);
  EXPECT_EQ(r[1], 0.5);
  EXPECT_DOUBLE_EQ(r[2], 2.0 / 3.0);
  const std::vector<double> c(10, 0.375);
  EXPECT_EQ(running_average(c), c);
  EXPECT_TRUE(running_average(std::vector<double>{}).empty());
}

TEST(RunningAverage, MatchesPrefixSumOracle) {
  Rng rng(1);
  std::vector<double> s(500);
  for (auto& v : s) v = rng.uniform();
  const auto r = running_average(s);
  std::vector<double> prefix(s.size());
  std::partial_sum(s.begin(), s.end(), prefix.begin());
  for (std::size_t i = 0; i < s.size(); ++i) ASSERT_NEAR(r[i], prefix[i] / static_cast<double>(i + 1), 1e-12);
}

TEST(RunningAverage, AppendThenTruncateInvariant) {
  Rng rng(2);
  std::vector<double> s(40);
  for (auto& v : s) v = rng.uniform();
  const auto base = running_average(s);
  auto longer = s;
  longer.push_back(0.9);
  longer.push_back(0.1);
  auto r = running_average(longer);
  r.resize(s.size());
  EXPECT_EQ(r, base);
}

TEST(OptimalRate, Examples) {
  const auto h = ids({"a", "b", "a", "c"});
  EXPECT_EQ(optimal_rate(h, h), 1.0);
  EXPECT_EQ(optimal_rate(h, ids({"b", "a", "b", "a"})), 0.0);
  EXPECT_EQ(optimal_rate(std::vector<ActionId>{}, std::vector<ActionId>{}), 0.0);
  EXPECT_THROW(optimal_rate(h, ids({"a"})), ConfigError);
}

TEST(OptimalRate, MatchesCounting) {
  Rng rng(3);
  std::vector<ActionId> chosen(300), optimal(300);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    chosen[i] = ActionId(std::to_string(rng.index(3)));
    optimal[i] = ActionId(std::to_string(rng.index(3)));
    hits += chosen[i] == optimal[i];
  }
  EXPECT_EQ(optimal_rate(chosen, optimal), static_cast<double>(hits) / 300.0);
}

TEST(MeanStd, SampleStatistics) {
  const auto ms = mean_std(std::vector<double>{1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(ms.mean, 2.5);
  EXPECT_DOUBLE_EQ(ms.stddev, std::sqrt(5.0 / 3.0));
  EXPECT_EQ(mean_std(std::vector<double>{7}).stddev, 0.0);
}
