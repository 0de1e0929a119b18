#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rdw/kinematics.hpp"
#include "rdw/nn/layers.hpp"
#include "rdw/nn/tensor.hpp"
#include "rdw/random.hpp"

namespace rdw::nn {

/// Four conv1d layers over a (9 channels x 10 features) window, flatten, five dense layers.
///
/// Time steps are channels and features run along the convolved axis, so
/// every conv layer keeps length 10 and the flatten size is 128 * 10.
template <class T>
class SaccadeNet {
 public:
  static constexpr std::size_t kChannelsIn = kWindowSize;  // 9
  static constexpr std::size_t kLength = kFeatureCount;    // 10
  static constexpr std::size_t kInputSize = kChannelsIn * kLength;
  static constexpr std::array<std::size_t, 5> kConvChannels{9, 16, 32, 64, 128};
  static constexpr std::array<std::size_t, 6> kDenseSizes{1280, 1024, 512, 256, 128, 1};
  static constexpr std::size_t kConvLayers = 4;
  static constexpr std::size_t kDenseLayers = 5;

  struct Options {
    double leaky_slope = 0.01;
    bool head_relu = true;  // ReLU on the fourth dense layer; Leaky ReLU when false
  };

  struct Layer {
    Tensor<T> w;
    Tensor<T> b;
  };

  std::array<Layer, kConvLayers> conv;
  std::array<Layer, kDenseLayers> dense;
  Options options;

  explicit SaccadeNet(Options opts = {}) : options(opts) {
    static_assert(kConvChannels.back() * kLength == kDenseSizes.front());
    for (std::size_t i = 0; i < kConvLayers; ++i) {
      conv[i].w = Tensor<T>({kConvChannels[i + 1], kConvChannels[i], kKernel});
      conv[i].b = Tensor<T>({kConvChannels[i + 1]});
    }
    for (std::size_t i = 0; i < kDenseLayers; ++i) {
      dense[i].w = Tensor<T>({kDenseSizes[i + 1], kDenseSizes[i]});
      dense[i].b = Tensor<T>({kDenseSizes[i + 1]});
    }
  }

  /// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  void init(Rng& rng) {
    auto fill = [&](Tensor<T>& w, std::size_t fan_in) {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (auto& x : w.data) x = static_cast<T>(rng.uniform(-bound, bound));
    };
    for (auto& l : conv) {
      fill(l.w, l.w.shape[1] * kKernel);
      std::fill(l.b.data.begin(), l.b.data.end(), T(0));
    }
    for (auto& l : dense) {
      fill(l.w, l.w.shape[1]);
      std::fill(l.b.data.begin(), l.b.data.end(), T(0));
    }
  }

  std::vector<Tensor<T>*> parameters() {
    std::vector<Tensor<T>*> out;
    for (auto& l : conv) { out.push_back(&l.w); out.push_back(&l.b); }
    for (auto& l : dense) { out.push_back(&l.w); out.push_back(&l.b); }
    return out;
  }
  std::vector<const Tensor<T>*> parameters() const {
    std::vector<const Tensor<T>*> out;
    for (auto& l : conv) { out.push_back(&l.w); out.push_back(&l.b); }
    for (auto& l : dense) { out.push_back(&l.w); out.push_back(&l.b); }
    return out;
  }

  static std::vector<std::string> parameter_names() {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < kConvLayers; ++i) {
      out.push_back("conv" + std::to_string(i + 1) + ".weight");
      out.push_back("conv" + std::to_string(i + 1) + ".bias");
    }
    for (std::size_t i = 0; i < kDenseLayers; ++i) {
      out.push_back("fc" + std::to_string(i + 1) + ".weight");
      out.push_back("fc" + std::to_string(i + 1) + ".bias");
    }
    return out;
  }

  static constexpr std::size_t parameter_count() {
    std::size_t n = 0;
    for (std::size_t i = 0; i < kConvLayers; ++i)
      n += kConvChannels[i + 1] * kConvChannels[i] * kKernel + kConvChannels[i + 1];
    for (std::size_t i = 0; i < kDenseLayers; ++i)
      n += kDenseSizes[i + 1] * kDenseSizes[i] + kDenseSizes[i + 1];
    return n;
  }

  Activation dense_activation(std::size_t i) const {
    if (i + 1 == kDenseLayers) return Activation::sigmoid;
    if (i + 2 == kDenseLayers && options.head_relu) return Activation::relu;
    return Activation::leaky_relu;
  }

  template <class U>
  SaccadeNet<U> cast() const {
    SaccadeNet<U> out(typename SaccadeNet<U>::Options{options.leaky_slope, options.head_relu});
    for (std::size_t i = 0; i < kConvLayers; ++i) {
      out.conv[i].w = conv[i].w.template cast<U>();
      out.conv[i].b = conv[i].b.template cast<U>();
    }
    for (std::size_t i = 0; i < kDenseLayers; ++i) {
      out.dense[i].w = dense[i].w.template cast<U>();
      out.dense[i].b = dense[i].b.template cast<U>();
    }
    return out;
  }

  /// Intermediate values kept for backprop.
  struct Cache {
    std::array<Mat<T>, kConvLayers> cols;    // im2col of each conv input
    std::array<Mat<T>, kConvLayers> conv_z;  // conv pre-activations
    std::array<Mat<T>, kDenseLayers> dense_in;
    std::array<Mat<T>, kDenseLayers> dense_z;
    Mat<T> prob;
    std::vector<Shape> shapes;  // per-sample shape after each stage
  };

  /// input: kInputSize x B, column b is window b flattened row-major (time, feature).
  /// Returns 1 x B probabilities.
  Mat<T> forward(const Mat<T>& input, Cache* cache = nullptr) const {
    if (input.rows() != static_cast<Eigen::Index>(kInputSize))
      fail(ErrorKind::shape, "forward: expected " + std::to_string(kInputSize) +
                                 " input rows, got " + std::to_string(input.rows()));
    if (!input.allFinite())
      fail(ErrorKind::invalid_argument, "forward: input window contains non-finite values");
    const Eigen::Index batch = input.cols();
    const auto len = static_cast<Eigen::Index>(kLength);
    const T slope = static_cast<T>(options.leaky_slope);

    Cache local;
    Cache& c = cache ? *cache : local;
    c.shapes.clear();
    c.shapes.push_back({kChannelsIn, kLength});

    Mat<T> x(static_cast<Eigen::Index>(kChannelsIn), len * batch);
    for (Eigen::Index b = 0; b < batch; ++b)
      for (Eigen::Index ch = 0; ch < x.rows(); ++ch)
        for (Eigen::Index l = 0; l < len; ++l) x(ch, b * len + l) = input(ch * len + l, b);

    Mat<T> a;
    for (std::size_t i = 0; i < kConvLayers; ++i) {
      conv1d_batch_forward(conv[i].w, conv[i].b, x, len, c.cols[i], c.conv_z[i]);
      activate(Activation::leaky_relu, slope, c.conv_z[i], a);
      x.swap(a);
      c.shapes.push_back({static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(x.cols() / batch)});
    }

    Mat<T> h(x.rows() * len, batch);
    for (Eigen::Index b = 0; b < batch; ++b)
      for (Eigen::Index ch = 0; ch < x.rows(); ++ch)
        for (Eigen::Index l = 0; l < len; ++l) h(ch * len + l, b) = x(ch, b * len + l);
    c.shapes.push_back({static_cast<std::size_t>(h.rows())});

    for (std::size_t i = 0; i < kDenseLayers; ++i) {
      c.dense_in[i] = h;
      c.dense_z[i].noalias() = as_matrix(dense[i].w) * h;
      c.dense_z[i].colwise() += as_vector(dense[i].b);
      activate(dense_activation(i), slope, c.dense_z[i], h);
      c.shapes.push_back({static_cast<std::size_t>(h.rows())});
    }
    c.prob = h;
    return h;
  }

  /// Gradients for every parameter tensor, in parameters() order.
  std::vector<Tensor<T>> zero_grads() const {
    std::vector<Tensor<T>> g;
    for (const auto* p : parameters()) g.emplace_back(p->shape);
    return g;
  }

  /// Backprop from dL/dlogit (1 x B) of the final layer; accumulates into grads.
  void backward(const Cache& c, const Mat<T>& dlogit, std::vector<Tensor<T>>& grads) const {
    const auto len = static_cast<Eigen::Index>(kLength);
    const T slope = static_cast<T>(options.leaky_slope);
    const Eigen::Index batch = dlogit.cols();
    Mat<T> g = dlogit;
    for (std::size_t k = kDenseLayers; k-- > 0;) {
      auto& gw = grads[2 * (kConvLayers + k)];
      auto& gb = grads[2 * (kConvLayers + k) + 1];
      as_matrix(gw).noalias() += g * c.dense_in[k].transpose();
      as_vector(gb) += g.rowwise().sum();
      Mat<T> gin = as_matrix(dense[k].w).transpose() * g;
      if (k > 0) activation_backward(dense_activation(k - 1), slope, c.dense_z[k - 1], gin);
      g.swap(gin);
    }

    const auto top = static_cast<Eigen::Index>(kConvChannels.back());
    Mat<T> gx(top, len * batch);
    for (Eigen::Index b = 0; b < batch; ++b)
      for (Eigen::Index ch = 0; ch < top; ++ch)
        for (Eigen::Index l = 0; l < len; ++l) gx(ch, b * len + l) = g(ch * len + l, b);

    for (std::size_t k = kConvLayers; k-- > 0;) {
      activation_backward(Activation::leaky_relu, slope, c.conv_z[k], gx);
      Mat<T> gin;
      conv1d_batch_backward(conv[k].w, c.cols[k], gx, len, grads[2 * k], grads[2 * k + 1],
                            k > 0 ? &gin : nullptr);
      if (k > 0) gx.swap(gin);
    }
  }

  double predict(std::span<const double> window) const {
    require(window.size() == kInputSize, "predict: window must hold 90 values");
    Mat<T> in(static_cast<Eigen::Index>(kInputSize), 1);
    for (std::size_t i = 0; i < kInputSize; ++i) in(static_cast<Eigen::Index>(i), 0) = static_cast<T>(window[i]);
    return static_cast<double>(forward(in)(0, 0));
  }

  /// Per-sample shapes through the network, from the (9,10) input to the scalar output.
  std::vector<Shape> shape_chain() const {
    Cache c;
    forward(Mat<T>::Zero(static_cast<Eigen::Index>(kInputSize), 1), &c);
    return c.shapes;
  }
};

}  // namespace rdw::nn
