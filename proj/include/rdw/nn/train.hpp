#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "rdw/kinematics.hpp"
#include "rdw/labeling.hpp"
#include "rdw/metrics.hpp"
#include "rdw/nn/adam.hpp"
#include "rdw/nn/layers.hpp"
#include "rdw/nn/saccadenet.hpp"
#include "rdw/random.hpp"

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

namespace rdw::nn {

/// Flushes float denormals to zero on this thread while alive. Adam's second moment
/// squares tiny gradients, and denormal arithmetic is several times slower on x86.
class DenormalGuard {
 public:
#if defined(__SSE__)
  DenormalGuard() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }  // FTZ | DAZ
  ~DenormalGuard() { _mm_setcsr(saved_); }
#else
  DenormalGuard() = default;
#endif
  DenormalGuard(const DenormalGuard&) = delete;
  DenormalGuard& operator=(const DenormalGuard&) = delete;

 private:
#if defined(__SSE__)
  unsigned saved_ = 0;
#endif
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::array<double, 3> split{0.8, 0.1, 0.1};  // train, validation, test
  std::uint64_t seed = 42;
  double leaky_slope = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double pos_weight = 1.0;
  bool session_split = false;
  bool head_relu = true;

  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
  typename SaccadeNet<double>::Options net_options() const { return {leaky_slope, head_relu}; }
};

inline void validate(const TrainConfig& c) {
  require(c.epochs >= 1, "train: epochs must be at least 1");
  require(c.batch_size >= 1, "train: batch_size must be at least 1");
  require(c.learning_rate > 0.0, "train: learning_rate must be positive");
  for (double r : c.split) require(r >= 0.0, "train: split ratios must be nonnegative");
  require(std::abs(c.split[0] + c.split[1] + c.split[2] - 1.0) < 1e-9,
          "train: split ratios must sum to 1");
  require(c.split[0] > 0.0, "train: training split must be nonempty");
  require(c.leaky_slope >= 0.0 && c.leaky_slope < 1.0, "train: leaky_slope must lie in [0,1)");
  require(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0, "train: adam_beta1 must lie in [0,1)");
  require(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0, "train: adam_beta2 must lie in [0,1)");
  require(c.adam_eps > 0.0, "train: adam_eps must be positive");
  require(c.pos_weight > 0.0, "train: pos_weight must be positive");
}

struct Split {
  std::vector<std::size_t> train, validation, test;
};

/// Seeded 3-way partition, by window or by whole session.
inline Split split_dataset(const Dataset& ds, const TrainConfig& cfg, Rng& rng) {
  Split s;
  auto cut = [&](std::size_t n) {
    const auto a = static_cast<std::size_t>(std::floor(cfg.split[0] * static_cast<double>(n)));
    const auto b = static_cast<std::size_t>(std::floor((cfg.split[0] + cfg.split[1]) * static_cast<double>(n)));
    return std::pair{a, std::min(b, n)};
  };
  if (!cfg.session_split) {
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span(order));
    const auto [a, b] = cut(order.size());
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(a));
    s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(a), order.begin() + static_cast<std::ptrdiff_t>(b));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(b), order.end());
    return s;
  }
  std::vector<std::uint32_t> ids(ds.sessions.begin(), ds.sessions.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  require(ids.size() >= 3, "train: session_split needs at least three sessions");
  rng.shuffle(std::span(ids));
  const auto [a, b] = cut(ids.size());
  const std::uint32_t max_id = *std::max_element(ids.begin(), ids.end());
  std::vector<int> part(static_cast<std::size_t>(max_id) + 1, 0);
  for (std::size_t i = 0; i < ids.size(); ++i) part[ids[i]] = i < a ? 0 : (i < b ? 1 : 2);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    switch (part[ds.sessions[i]]) {
      case 0: s.train.push_back(i); break;
      case 1: s.validation.push_back(i); break;
      default: s.test.push_back(i); break;
    }
  }
  return s;
}

/// Normalizer fitted on every row of the given windows.
inline Normalizer fit_window_normalizer(const Dataset& ds, std::span<const std::size_t> idx) {
  std::vector<std::span<const double>> rows;
  rows.reserve(idx.size() * kWindowSize);
  for (auto i : idx) {
    const auto w = ds.window(i);
    for (std::size_t r = 0; r < kWindowSize; ++r) rows.push_back(w.subspan(r * kFeatureCount, kFeatureCount));
  }
  return Normalizer::fit_rows(rows);
}

/// Copies window i, normalized, into column col of out.
template <class T>
void load_column(const Dataset& ds, std::size_t i, const Normalizer& norm, Mat<T>& out, Eigen::Index col) {
  const auto w = ds.window(i);
  for (std::size_t k = 0; k < Dataset::kStride; ++k)
    out(static_cast<Eigen::Index>(k), col) = static_cast<T>(norm.apply(k % kFeatureCount, w[k]));
}

/// Probabilities for the selected windows, computed in chunks.
template <class T>
std::vector<double> predict_windows(const SaccadeNet<T>& net, const Normalizer& norm, const Dataset& ds,
                                    std::span<const std::size_t> idx, std::size_t chunk = 512) {
  std::vector<double> out;
  out.reserve(idx.size());
  Mat<T> x;
  for (std::size_t start = 0; start < idx.size(); start += chunk) {
    const std::size_t n = std::min(chunk, idx.size() - start);
    x.resize(static_cast<Eigen::Index>(Dataset::kStride), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) load_column(ds, idx[start + j], norm, x, static_cast<Eigen::Index>(j));
    const Mat<T> p = net.forward(x);
    for (Eigen::Index j = 0; j < p.cols(); ++j) out.push_back(static_cast<double>(p(0, j)));
  }
  return out;
}

/// Mean clamped BCE of probabilities against labels.
inline double mean_bce(std::span<const double> prob, std::span<const std::uint8_t> labels,
                       double pos_weight = 1.0) {
  require(prob.size() == labels.size() && !prob.empty(), "mean_bce: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = std::clamp(prob[i], kBceEps, 1.0 - kBceEps);
    sum -= labels[i] ? pos_weight * std::log(p) : std::log(1.0 - p);
  }
  return sum / static_cast<double>(prob.size());
}

/// dL/dlogit for sigmoid + mean BCE, fused: (p(wy + 1 - y) - wy) / B.
template <class T>
Mat<T> bce_logit_grad(const Mat<T>& prob, std::span<const std::uint8_t> labels, double pos_weight) {
  Mat<T> g(1, prob.cols());
  const double inv_b = 1.0 / static_cast<double>(prob.cols());
  for (Eigen::Index j = 0; j < prob.cols(); ++j) {
    const double y = labels[static_cast<std::size_t>(j)];
    const double p = static_cast<double>(prob(0, j));
    g(0, j) = static_cast<T>((p * (pos_weight * y + 1.0 - y) - pos_weight * y) * inv_b);
  }
  return g;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_precision;
  std::optional<double> val_recall;
  std::optional<double> val_accuracy;
  std::optional<double> val_auc;
};

struct TrainResult {
  SaccadeNet<double> net;
  Normalizer normalizer;
  std::vector<EpochRecord> history;
  Split split;
};

inline std::vector<std::uint8_t> gather_labels(const Dataset& ds, std::span<const std::size_t> idx) {
  std::vector<std::uint8_t> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ds.labels[i]);
  return out;
}

/// Scores a net on a subset: loss, confusion at 0.5, AUC when both classes occur.
template <class T>
EpochRecord evaluate_subset(const SaccadeNet<T>& net, const Normalizer& norm, const Dataset& ds,
                            std::span<const std::size_t> idx, double pos_weight = 1.0) {
  EpochRecord r;
  if (idx.empty()) return r;
  const auto prob = predict_windows(net, norm, ds, idx);
  const auto labels = gather_labels(ds, idx);
  r.val_loss = mean_bce(prob, labels, pos_weight);
  const auto c = metrics::confusion<std::uint8_t>(prob, labels);
  r.val_precision = c.precision();
  r.val_recall = c.recall();
  r.val_accuracy = c.accuracy();
  if (c.tp + c.fn > 0 && c.tn + c.fp > 0) r.val_auc = metrics::roc_auc<std::uint8_t>(prob, labels).auc;
  return r;
}

/// Mini-batch Adam on mean BCE. Training arithmetic runs in T; the result is widened to double.
///
/// Deterministic in (dataset, config): one generator seeded from config.seed drives the
/// split, the weight init and every epoch shuffle, in that order.
template <class T = float>
TrainResult train(const Dataset& ds, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  validate(cfg);
  require(ds.data.size() == ds.size() * Dataset::kStride && ds.sessions.size() == ds.size(),
          "train: dataset arrays are inconsistent");
  if (ds.positives() == 0 || ds.negatives() == 0)
    fail(ErrorKind::single_class, "train: dataset has " + std::to_string(ds.positives()) +
                                      " positive and " + std::to_string(ds.negatives()) +
                                      " negative windows; both classes are required");

  DenormalGuard ftz;
  Rng rng(cfg.seed);
  TrainResult result;
  result.split = split_dataset(ds, cfg, rng);
  require(!result.split.train.empty(), "train: training split is empty");
  result.normalizer = fit_window_normalizer(ds, result.split.train);

  SaccadeNet<T> net(typename SaccadeNet<T>::Options{cfg.leaky_slope, cfg.head_relu});
  net.init(rng);
  auto params = net.parameters();
  auto grads = net.zero_grads();
  auto state = AdamState<T>::like(params);
  const auto adam = cfg.adam();

  std::vector<std::size_t> order = result.split.train;
  typename SaccadeNet<T>::Cache cache;
  Mat<T> x;
  std::vector<std::uint8_t> y;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      x.resize(static_cast<Eigen::Index>(Dataset::kStride), static_cast<Eigen::Index>(n));
      y.resize(n);
      for (std::size_t j = 0; j < n; ++j) {
        load_column(ds, order[start + j], result.normalizer, x, static_cast<Eigen::Index>(j));
        y[j] = ds.labels[order[start + j]];
      }
      const Mat<T> prob = net.forward(x, &cache);
      std::vector<double> p(n);
      for (std::size_t j = 0; j < n; ++j) p[j] = static_cast<double>(prob(0, static_cast<Eigen::Index>(j)));
      loss_sum += mean_bce(p, y, cfg.pos_weight) * static_cast<double>(n);

      for (auto& g : grads) std::fill(g.data.begin(), g.data.end(), T(0));
      net.backward(cache, bce_logit_grad(prob, y, cfg.pos_weight), grads);
      adam_step<T>(params, grads, state, adam);
    }

    EpochRecord rec = evaluate_subset(net, result.normalizer, ds, result.split.validation, cfg.pos_weight);
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.net = net.template cast<double>();
  return result;
}

}  // namespace rdw::nn
