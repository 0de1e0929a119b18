#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rdw/nn/tensor.hpp"

namespace rdw::nn {

// ---- activations -----------------------------------------------------------

template <class T>
T leaky_relu(T x, T slope) {
  return x < T(0) ? slope * x : x;
}
template <class T>
T leaky_relu_grad(T x, T slope) {
  return x < T(0) ? slope : T(1);
}
template <class T>
T relu(T x) {
  return x < T(0) ? T(0) : x;
}
template <class T>
T relu_grad(T x) {
  return x < T(0) ? T(0) : T(1);
}
template <class T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

enum class Activation { leaky_relu, relu, sigmoid, identity };

/// In-place activation of pre-activations z into a.
template <class T>
void activate(Activation act, T slope, const Mat<T>& z, Mat<T>& a) {
  a.resize(z.rows(), z.cols());
  const T* zp = z.data();
  T* ap = a.data();
  const auto n = z.size();
  switch (act) {
    case Activation::leaky_relu:
      for (Eigen::Index i = 0; i < n; ++i) ap[i] = leaky_relu(zp[i], slope);
      break;
    case Activation::relu:
      for (Eigen::Index i = 0; i < n; ++i) ap[i] = relu(zp[i]);
      break;
    case Activation::sigmoid:
      for (Eigen::Index i = 0; i < n; ++i) ap[i] = sigmoid(zp[i]);
      break;
    case Activation::identity:
      a = z;
      break;
  }
}

/// Multiplies upstream gradient g (w.r.t. activations) by the activation derivative at z.
template <class T>
void activation_backward(Activation act, T slope, const Mat<T>& z, Mat<T>& g) {
  const T* zp = z.data();
  T* gp = g.data();
  const auto n = z.size();
  switch (act) {
    case Activation::leaky_relu:
      for (Eigen::Index i = 0; i < n; ++i) gp[i] *= leaky_relu_grad(zp[i], slope);
      break;
    case Activation::relu:
      for (Eigen::Index i = 0; i < n; ++i) gp[i] *= relu_grad(zp[i]);
      break;
    case Activation::sigmoid:
      for (Eigen::Index i = 0; i < n; ++i) {
        const T s = sigmoid(zp[i]);
        gp[i] *= s * (T(1) - s);
      }
      break;
    case Activation::identity:
      break;
  }
}

// ---- conv1d (kernel 3, stride 1, zero padding 1) ---------------------------
//
// Batched activations use a (channels x length*batch) layout: column
// b*L + l holds position l of sample b.

inline constexpr std::size_t kKernel = 3;

template <class T>
void im2col(const Mat<T>& x, Eigen::Index length, Mat<T>& cols) {
  const Eigen::Index cin = x.rows();
  const Eigen::Index lb = x.cols();
  const Eigen::Index k = static_cast<Eigen::Index>(kKernel);
  cols.setZero(cin * k, lb);
  for (Eigen::Index j = 0; j < lb; ++j) {
    const Eigen::Index l = j % length;
    for (Eigen::Index kk = 0; kk < k; ++kk) {
      const Eigen::Index src = l + kk - 1;
      if (src < 0 || src >= length) continue;
      const Eigen::Index sj = j + kk - 1;
      for (Eigen::Index c = 0; c < cin; ++c) cols(c * k + kk, j) = x(c, sj);
    }
  }
}

template <class T>
void col2im(const Mat<T>& dcols, Eigen::Index cin, Eigen::Index length, Mat<T>& dx) {
  const Eigen::Index lb = dcols.cols();
  const Eigen::Index k = static_cast<Eigen::Index>(kKernel);
  dx.setZero(cin, lb);
  for (Eigen::Index j = 0; j < lb; ++j) {
    const Eigen::Index l = j % length;
    for (Eigen::Index kk = 0; kk < k; ++kk) {
      const Eigen::Index src = l + kk - 1;
      if (src < 0 || src >= length) continue;
      const Eigen::Index sj = j + kk - 1;
      for (Eigen::Index c = 0; c < cin; ++c) dx(c, sj) += dcols(c * k + kk, j);
    }
  }
}

/// z = W * im2col(x) + b, with W viewed as [out, in*3].
template <class T>
void conv1d_batch_forward(const Tensor<T>& w, const Tensor<T>& b, const Mat<T>& x,
                          Eigen::Index length, Mat<T>& cols, Mat<T>& z) {
  const auto cin = static_cast<Eigen::Index>(w.shape[1]);
  if (x.rows() != cin || x.cols() % length != 0)
    fail(ErrorKind::shape, "conv1d: input shape (" + std::to_string(x.rows()) + "," +
                               std::to_string(x.cols()) + ") does not match weights " +
                               shape_str(w.shape));
  im2col(x, length, cols);
  z.noalias() = as_matrix(w) * cols;
  z.colwise() += as_vector(b);
}

/// Accumulates dW, db and writes dx for upstream gradient dz.
template <class T>
void conv1d_batch_backward(const Tensor<T>& w, const Mat<T>& cols, const Mat<T>& dz,
                           Eigen::Index length, Tensor<T>& dw, Tensor<T>& db, Mat<T>* dx) {
  as_matrix(dw).noalias() += dz * cols.transpose();
  as_vector(db) += dz.rowwise().sum();
  if (dx) {
    Mat<T> dcols = as_matrix(w).transpose() * dz;
    col2im(dcols, static_cast<Eigen::Index>(w.shape[1]), length, *dx);
  }
}

/// Single-sample conv1d: input [C_in, L] -> output [C_out, L].
template <class T>
Tensor<T> conv1d_forward(const Tensor<T>& input, const Tensor<T>& w, const Tensor<T>& b) {
  if (w.shape.size() != 3 || w.shape[2] != kKernel || b.shape != Shape{w.shape[0]})
    fail(ErrorKind::shape, "conv1d: weights " + shape_str(w.shape) + " and bias " +
                               shape_str(b.shape) + " are inconsistent");
  if (input.shape.size() != 2 || input.shape[0] != w.shape[1] || input.shape[1] < 1)
    fail(ErrorKind::shape, "conv1d: input " + shape_str(input.shape) +
                               " does not match weights " + shape_str(w.shape));
  const auto len = static_cast<Eigen::Index>(input.shape[1]);
  Mat<T> x = as_matrix(input);
  Mat<T> cols, z;
  conv1d_batch_forward(w, b, x, len, cols, z);
  Tensor<T> out({w.shape[0], input.shape[1]});
  as_matrix(out) = z;
  return out;
}

// ---- loss ------------------------------------------------------------------

inline constexpr double kBceEps = 1e-7;

struct BceResult {
  double loss = 0.0;
  std::vector<double> grad;  // dL/dpred, per sample
};

/// Mean binary cross-entropy on clamped probabilities.
inline BceResult bce_loss(std::span<const double> pred, std::span<const double> target,
                          double pos_weight = 1.0, double eps = kBceEps) {
  require(pred.size() == target.size() && !pred.empty(), "bce_loss: size mismatch");
  BceResult r;
  r.grad.resize(pred.size());
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], eps, 1.0 - eps);
    const double y = target[i];
    r.loss -= pos_weight * y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    const bool clamped = pred[i] < eps || pred[i] > 1.0 - eps;
    r.grad[i] = clamped ? 0.0 : (-pos_weight * y / p + (1.0 - y) / (1.0 - p)) / n;
  }
  r.loss /= n;
  return r;
}

}  // namespace rdw::nn
