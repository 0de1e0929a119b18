#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rdw/error.hpp"

namespace rdw::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

/// Dense row-major tensor.
///
/// Storage is aligned to Eigen's maximum packet alignment. Vectorized kernels on an
/// unaligned map peel a heap-address-dependent prefix, which changes summation order
/// between otherwise identical runs.
template <class T>
struct Tensor {
  Shape shape;
  std::vector<T, Eigen::aligned_allocator<T>> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(numel(shape), T(0)) {}
  Tensor(Shape s, const std::vector<T>& values) : shape(std::move(s)), data(values.begin(), values.end()) {
    if (data.size() != numel(shape))
      fail(ErrorKind::shape, "tensor data length " + std::to_string(data.size()) +
                                 " does not match shape " + shape_str(shape));
  }

  std::size_t size() const { return data.size(); }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Views a [rows, ...] tensor as a row-major rows x (numel/rows) matrix.
template <class T>
Eigen::Map<RowMat<T>> as_matrix(Tensor<T>& t) {
  const auto rows = static_cast<Eigen::Index>(t.shape.at(0));
  return {t.data.data(), rows, static_cast<Eigen::Index>(t.size()) / rows};
}
template <class T>
Eigen::Map<const RowMat<T>> as_matrix(const Tensor<T>& t) {
  const auto rows = static_cast<Eigen::Index>(t.shape.at(0));
  return {t.data.data(), rows, static_cast<Eigen::Index>(t.size()) / rows};
}
template <class T>
Eigen::Map<Vec<T>> as_vector(Tensor<T>& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.size())};
}
template <class T>
Eigen::Map<const Vec<T>> as_vector(const Tensor<T>& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.size())};
}

}  // namespace rdw::nn
