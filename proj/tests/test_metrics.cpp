#include <cmath>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

#include "rdw/metrics.hpp"
#include "rdw/random.hpp"

using namespace rdw;
using namespace rdw::metrics;

namespace {

// Mann-Whitney pair count: a positive outranking a negative scores 2, a tie scores 1.
double pair_auc(const std::vector<double>& s, const std::vector<int>& y) {
  std::uint64_t twice = 0, p = 0, n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    (y[i] ? p : n) += 1;
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      twice += s[i] > s[j] ? 2 : (s[i] == s[j] ? 1 : 0);
    }
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(p) * static_cast<double>(n));
}

}  // namespace

TEST(Confusion, CountsAndRatios) {
  const std::vector<double> s{0.9, 0.8, 0.4, 0.5, 0.1, 0.7};
  const std::vector<int> y{1, 0, 1, 1, 0, 0};
  const auto c = confusion<int>(s, y);
  EXPECT_EQ(c.tp, 2u);  // 0.9, 0.5
  EXPECT_EQ(c.fp, 2u);  // 0.8, 0.7
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.tn, 1u);
  EXPECT_DOUBLE_EQ(*c.precision(), 0.5);
  EXPECT_DOUBLE_EQ(*c.recall(), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*c.accuracy(), 0.5);
  EXPECT_NEAR(*c.f1(), 2 * 0.5 * (2.0 / 3.0) / (0.5 + 2.0 / 3.0), 1e-15);
}

TEST(Confusion, UndefinedRatiosAreEmpty) {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<int> y{0, 0};
  const auto c = confusion<int>(s, y);
  EXPECT_FALSE(c.precision().has_value());
  EXPECT_FALSE(c.recall().has_value());
  EXPECT_FALSE(c.f1().has_value());
  EXPECT_DOUBLE_EQ(*c.accuracy(), 1.0);
}

TEST(Confusion, InputValidation) {
  EXPECT_THROW(confusion<int>(std::vector<double>{0.1}, std::vector<int>{}), Error);
  EXPECT_THROW(confusion<int>(std::vector<double>{0.1}, std::vector<int>{2}), Error);
}

TEST(RocAuc, PerfectInvertedAndTied) {
  const std::vector<int> y{1, 1, 0, 0};
  EXPECT_EQ(roc_auc<int>(std::vector<double>{0.9, 0.8, 0.2, 0.1}, y).auc, 1.0);
  EXPECT_EQ(roc_auc<int>(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y).auc, 0.0);
  EXPECT_EQ(roc_auc<int>(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y).auc, 0.5);
}

TEST(RocAuc, CurveRunsCornerToCorner) {
  const std::vector<double> s{0.3, 0.7, 0.7, 0.2, 0.9};
  const std::vector<int> y{0, 1, 0, 1, 1};
  const auto r = roc_auc<int>(s, y);
  ASSERT_EQ(r.points.size(), 5u);  // origin + 4 distinct scores
  EXPECT_EQ(r.points.front().fpr, 0.0);
  EXPECT_EQ(r.points.front().tpr, 0.0);
  EXPECT_TRUE(std::isinf(r.points.front().threshold));
  EXPECT_EQ(r.points.back().fpr, 1.0);
  EXPECT_EQ(r.points.back().tpr, 1.0);
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    EXPECT_GE(r.points[i].fpr, r.points[i - 1].fpr);
    EXPECT_GE(r.points[i].tpr, r.points[i - 1].tpr);
    EXPECT_LT(r.points[i].threshold, r.points[i - 1].threshold);
  }
  // trapezoids over the returned points give the same area
  double area = 0.0;
  for (std::size_t i = 1; i < r.points.size(); ++i)
    area += (r.points[i].fpr - r.points[i - 1].fpr) * (r.points[i].tpr + r.points[i - 1].tpr) / 2.0;
  EXPECT_NEAR(area, r.auc, 1e-15);
  EXPECT_EQ(r.auc, pair_auc(s, y));
}

TEST(RocAuc, SingleClassThrows) {
  try {
    roc_auc<int>(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1});
    FAIL() << "expected single_class";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::single_class);
  }
}

TEST(RocAuc, MatchesPairCountOnRandomTiedInputs) {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(8)) / 8.0;
      y[i] = rng.coin();
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_EQ(roc_auc<int>(s, y).auc, pair_auc(s, y)) << "trial " << trial;
  }
}

TEST(RocAuc, InvariantUnderMonotoneTransform) {
  Rng rng(5);
  std::vector<double> s(50), t(50);
  std::vector<int> y(50);
  for (std::size_t i = 0; i < 50; ++i) {
    s[i] = rng.uniform();
    t[i] = std::exp(3.0 * s[i]) - 7.0;
    y[i] = i % 3 == 0;
  }
  EXPECT_EQ(roc_auc<int>(s, y).auc, roc_auc<int>(t, y).auc);
}

TEST(Anova, HandFixture) {
  const auto a = anova_one_way({{1, 2, 3}, {2, 3, 4}});
  EXPECT_NEAR(*a.f, 1.5, 1e-12);
  EXPECT_EQ(a.df_between, 1u);
  EXPECT_EQ(a.df_within, 4u);
  EXPECT_NEAR(a.ss_between, 1.5, 1e-12);
  EXPECT_NEAR(a.ss_within, 4.0, 1e-12);
  EXPECT_NEAR(*a.eta_p_sq, 1.5 / 5.5, 1e-12);
}

TEST(Anova, ThreeGroupFixture) {
  // means 2, 5, 8; grand 5; SSB = 3*(9+0+9) = 54; SSW = 3*2 = 6; F = 27 / 1 = 27
  const auto a = anova_one_way({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
  EXPECT_NEAR(*a.f, 27.0, 1e-12);
  EXPECT_NEAR(*a.eta_p_sq, 0.9, 1e-12);
}

TEST(Anova, DegenerateVariance) {
  const auto same = anova_one_way({{2, 2}, {2, 2}});
  EXPECT_FALSE(same.f.has_value());
  EXPECT_FALSE(same.eta_p_sq.has_value());
  const auto sep = anova_one_way({{1, 1}, {3, 3}});
  EXPECT_TRUE(std::isinf(*sep.f));
  EXPECT_DOUBLE_EQ(*sep.eta_p_sq, 1.0);
}

TEST(Anova, RejectsTinyGroups) {
  EXPECT_THROW(anova_one_way({{1, 2}}), Error);
  EXPECT_THROW(anova_one_way({{1}, {2, 3}}), Error);
}

TEST(Anova, EffectSizeBoundedOnRandomGroups) {
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::vector<double>> g(2 + rng.below(4));
    for (auto& grp : g) {
      grp.resize(2 + rng.below(10));
      for (auto& x : grp) x = rng.uniform(-10.0, 10.0) + static_cast<double>(rng.below(3));
    }
    const auto a = anova_one_way(g);
    ASSERT_TRUE(a.eta_p_sq.has_value());
    EXPECT_GE(*a.eta_p_sq, 0.0);
    EXPECT_LE(*a.eta_p_sq, 1.0);
    EXPECT_GE(*a.f, 0.0);
  }
}
