#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "rdw/error.hpp"

namespace rdw::metrics {

/// Confusion counts. Ratios with a zero denominator are std::nullopt.
struct Confusion {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }

  std::optional<double> precision() const { return ratio(tp, tp + fp); }
  std::optional<double> recall() const { return ratio(tp, tp + fn); }
  std::optional<double> accuracy() const { return ratio(tp + tn, total()); }
  std::optional<double> f1() const {
    const auto p = precision(), r = recall();
    if (!p || !r || *p + *r == 0.0) return std::nullopt;
    return 2.0 * *p * *r / (*p + *r);
  }

 private:
  static std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  }
};

template <class Label>
void check_scored(std::span<const double> scores, std::span<const Label> labels) {
  require(scores.size() == labels.size(), "scores and labels differ in length");
  require(!scores.empty(), "no samples to score");
  for (auto l : labels) require(l == 0 || l == 1, "labels must be binary");
}

/// A sample is predicted positive iff score >= threshold.
template <class Label>
Confusion confusion(std::span<const double> scores, std::span<const Label> labels,
                    double threshold = 0.5) {
  check_scored(scores, labels);
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool pos = labels[i] == 1;
    if (pred && pos) ++c.tp;
    else if (pred) ++c.fp;
    else if (pos) ++c.fn;
    else ++c.tn;
  }
  return c;
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
  double auc = 0.0;
};

/// Threshold sweep over distinct scores; tied scores form one diagonal step.
///
/// The area is accumulated in integer units of 1/(2PN) so it equals the
/// Mann-Whitney statistic (ties count 1/2) exactly.
template <class Label>
RocCurve roc_auc(std::span<const double> scores, std::span<const Label> labels) {
  check_scored(scores, labels);
  std::uint64_t npos = 0;
  for (auto l : labels) npos += (l == 1);
  const std::uint64_t nneg = labels.size() - npos;
  if (npos == 0 || nneg == 0)
    fail(ErrorKind::single_class, "roc_auc needs both classes present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::uint64_t tp = 0, fp = 0;
  unsigned __int128 area2 = 0;  // twice the area, times P*N
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    std::uint64_t dtp = 0, dfp = 0;
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] == 1) ++dtp;
      else ++dfp;
      ++i;
    }
    area2 += static_cast<unsigned __int128>(dfp) * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(nneg),
                          static_cast<double>(tp) / static_cast<double>(npos), s});
  }
  roc.auc = static_cast<double>(area2) /
            (2.0 * static_cast<double>(npos) * static_cast<double>(nneg));
  return roc;
}

struct Anova {
  /// nullopt when total variance is zero; +inf when only the within-group variance is zero.
  std::optional<double> f;
  std::size_t df_between = 0;
  std::size_t df_within = 0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  std::optional<double> eta_p_sq;
};

/// Classic one-way between/within decomposition.
inline Anova anova_one_way(const std::vector<std::vector<double>>& groups) {
  require(groups.size() >= 2, "anova needs at least two groups");
  std::size_t n = 0;
  double sum = 0.0;
  for (const auto& g : groups) {
    require(g.size() >= 2, "anova needs at least two samples per group");
    n += g.size();
    for (double x : g) sum += x;
  }
  const double grand = sum / static_cast<double>(n);

  Anova a;
  for (const auto& g : groups) {
    double gs = 0.0;
    for (double x : g) gs += x;
    const double gm = gs / static_cast<double>(g.size());
    a.ss_between += static_cast<double>(g.size()) * (gm - grand) * (gm - grand);
    for (double x : g) a.ss_within += (x - gm) * (x - gm);
  }
  a.df_between = groups.size() - 1;
  a.df_within = n - groups.size();

  const double ss_total = a.ss_between + a.ss_within;
  if (ss_total == 0.0) return a;
  a.eta_p_sq = a.ss_between / ss_total;
  if (a.ss_within == 0.0) {
    a.f = std::numeric_limits<double>::infinity();
  } else {
    a.f = (a.ss_between / static_cast<double>(a.df_between)) /
          (a.ss_within / static_cast<double>(a.df_within));
  }
  return a;
}

}  // namespace rdw::metrics
