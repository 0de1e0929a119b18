#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdw/nn/saccadenet.hpp"
#include "rdw/nn/train.hpp"
#include "rdw/random.hpp"

namespace rdw::nn {

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t samples_per_layer = 200;
  /// Denominator floor of the relative error. Central differences at h = 1e-5 carry about
  /// 1e-10 of rounding noise, so gradients smaller than the floor are compared absolutely.
  double floor = 1e-5;
  double pos_weight = 1.0;
  /// A perturbation that flips the side of any activation kink is retried with a step
  /// this many times smaller, up to kink_retries times, and skipped if it still flips.
  double kink_shrink = 10.0;
  std::size_t kink_retries = 2;
};

struct TensorCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
  double max_abs_error = 0.0;
  std::size_t kinks_skipped = 0;
};

struct GradCheckResult {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t kinks_skipped = 0;
};

inline double relative_error(double analytic, double numeric, double floor) {
  const double den = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / den;
}

namespace detail {

/// True when every hidden pre-activation keeps the side of zero it has in `base`.
inline bool same_kink_side(const SaccadeNet<double>::Cache& base, const SaccadeNet<double>::Cache& other) {
  auto same = [](const Mat<double>& a, const Mat<double>& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if ((a.data()[i] > 0.0) != (b.data()[i] > 0.0)) return false;
    return true;
  };
  for (std::size_t i = 0; i < base.conv_z.size(); ++i)
    if (!same(base.conv_z[i], other.conv_z[i])) return false;
  for (std::size_t i = 0; i + 1 < base.dense_z.size(); ++i)
    if (!same(base.dense_z[i], other.dense_z[i])) return false;
  return true;
}

}  // namespace detail

/// Analytic backprop vs central differences on a random subsample of every layer.
///
/// Every weight and bias tensor contributes min(size, samples_per_layer) entries, so a
/// layer with fewer parameters than that is checked exhaustively.
inline GradCheckResult gradient_check(SaccadeNet<double> net, const Mat<double>& input,
                                      std::span<const std::uint8_t> labels, Rng& rng,
                                      const GradCheckOptions& opt = {}) {
  require(static_cast<std::size_t>(input.cols()) == labels.size() && !labels.empty(),
          "gradient_check: inputs and labels differ in count");
  require(opt.step > 0.0, "gradient_check: step must be positive");

  typename SaccadeNet<double>::Cache cache;
  const Mat<double> prob = net.forward(input, &cache);
  auto grads = net.zero_grads();
  net.backward(cache, bce_logit_grad(prob, labels, opt.pos_weight), grads);

  auto params = net.parameters();
  const auto names = SaccadeNet<double>::parameter_names();
  GradCheckResult out;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = *params[t];
    TensorCheck tc;
    tc.name = names[t];
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(std::span(idx));
    idx.resize(std::min(idx.size(), opt.samples_per_layer));
    for (auto i : idx) {
      const double saved = p.data[i];
      double h = opt.step;
      std::optional<double> numeric;
      for (std::size_t attempt = 0; attempt <= opt.kink_retries && !numeric; ++attempt, h /= opt.kink_shrink) {
        typename SaccadeNet<double>::Cache cu, cd;
        p.data[i] = saved + h;
        const Mat<double> pu = net.forward(input, &cu);
        p.data[i] = saved - h;
        const Mat<double> pd = net.forward(input, &cd);
        p.data[i] = saved;
        if (!detail::same_kink_side(cache, cu) || !detail::same_kink_side(cache, cd)) continue;
        const auto loss = [&](const Mat<double>& pr) {
          return mean_bce(std::span<const double>(pr.data(), static_cast<std::size_t>(pr.size())), labels,
                          opt.pos_weight);
        };
        numeric = (loss(pu) - loss(pd)) / (2.0 * h);
      }
      if (!numeric) {
        ++tc.kinks_skipped;
        continue;
      }
      const double analytic = grads[t].data[i];
      tc.max_rel_error = std::max(tc.max_rel_error, relative_error(analytic, *numeric, opt.floor));
      tc.max_abs_analytic = std::max(tc.max_abs_analytic, std::abs(analytic));
      tc.max_abs_error = std::max(tc.max_abs_error, std::abs(analytic - *numeric));
      ++tc.checked;
    }
    out.max_rel_error = std::max(out.max_rel_error, tc.max_rel_error);
    out.checked += tc.checked;
    out.kinks_skipped += tc.kinks_skipped;
    out.tensors.push_back(std::move(tc));
  }
  return out;
}

}  // namespace rdw::nn
