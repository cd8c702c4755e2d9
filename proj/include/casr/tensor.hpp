#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include "casr/error.hpp"
#include "casr/random.hpp"

namespace casr {

using Index = Eigen::Index;

struct Shape4 {
  Index n = 0, c = 0, h = 0, w = 0;

  Index size() const { return n * c * h * w; }
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

inline std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

/// Dense N x C x H x W array, row-major (W fastest).
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatrixMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor() = default;
  explicit Tensor(const Shape4& s) : shape_(s), data_(Array::Zero(s.size())) {}
  Tensor(Index n, Index c, Index h, Index w) : Tensor(Shape4{n, c, h, w}) {}

  static Tensor constant(const Shape4& s, Scalar v) {
    Tensor t(s);
    t.data_.setConstant(v);
    return t;
  }

  const Shape4& shape() const { return shape_; }
  Index n() const { return shape_.n; }
  Index c() const { return shape_.c; }
  Index h() const { return shape_.h; }
  Index w() const { return shape_.w; }
  Index size() const { return data_.size(); }

  Scalar& operator()(Index n, Index c, Index y, Index x) { return data_[offset(n, c, y, x)]; }
  Scalar operator()(Index n, Index c, Index y, Index x) const { return data_[offset(n, c, y, x)]; }

  Array& values() { return data_; }
  const Array& values() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  /// H x W view of one channel plane.
  MatrixMap plane(Index n, Index c) { return MatrixMap(data_.data() + offset(n, c, 0, 0), shape_.h, shape_.w); }
  ConstMatrixMap plane(Index n, Index c) const {
    return ConstMatrixMap(data_.data() + offset(n, c, 0, 0), shape_.h, shape_.w);
  }

  /// C x (H*W) view of one batch item.
  MatrixMap sample(Index n) { return MatrixMap(data_.data() + offset(n, 0, 0, 0), shape_.c, shape_.h * shape_.w); }
  ConstMatrixMap sample(Index n) const {
    return ConstMatrixMap(data_.data() + offset(n, 0, 0, 0), shape_.c, shape_.h * shape_.w);
  }

  bool all_finite() const { return data_.isFinite().all(); }

 private:
  Index offset(Index n, Index c, Index y, Index x) const { return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x; }

  Shape4 shape_;
  Array data_;
};

template <typename Scalar>
Tensor<Scalar> random_tensor(const Shape4& s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<Scalar> t(s);
  for (Index i = 0; i < t.size(); ++i) t.values()[i] = static_cast<Scalar>(uniform_real(rng, lo, hi));
  return t;
}

}  // namespace casr
