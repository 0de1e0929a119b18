#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rdw/nn/tensor.hpp"

namespace rdw::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t step = 0;

  template <class Params>
  static AdamState like(const Params& params) {
    AdamState s;
    for (const auto* p : params) {
      s.m.emplace_back(p->shape);
      s.v.emplace_back(p->shape);
    }
    return s;
  }
};

/// Bias-corrected Adam update of every parameter tensor.
template <class T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads,
               AdamState<T>& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    fail(ErrorKind::shape, "adam_step: parameter, gradient and state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape != grads[i].shape || state.m[i].shape != grads[i].shape ||
        state.v[i].shape != grads[i].shape)
      fail(ErrorKind::shape, "adam_step: shape mismatch between parameter " +
                                 shape_str(params[i]->shape) + " and gradient " +
                                 shape_str(grads[i].shape));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T bc1 = static_cast<T>(1.0 - std::pow(cfg.beta1, t));
  const T bc2 = static_cast<T>(1.0 - std::pow(cfg.beta2, t));
  const T lr = static_cast<T>(cfg.learning_rate), eps = static_cast<T>(cfg.eps);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = as_vector(grads[i]).array();
    auto m = as_vector(state.m[i]).array();
    auto v = as_vector(state.v[i]).array();
    auto p = as_vector(*params[i]).array();
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.square();
    p -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
  }
}

}  // namespace rdw::nn
