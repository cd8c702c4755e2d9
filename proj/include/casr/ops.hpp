#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "casr/tensor.hpp"

namespace casr {

enum class Activation { tanh, relu, sigmoid };

inline Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw ContractError("unknown activation '" + s + "'");
}

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "tanh";
}

template <typename Scalar>
Tensor<Scalar> activation_forward(Activation kind, const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.shape());
  switch (kind) {
    case Activation::tanh: y.values() = x.values().tanh(); break;
    case Activation::relu: y.values() = x.values().max(Scalar(0)); break;
    case Activation::sigmoid:
      y.values() = x.values().unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
      break;
  }
  return y;
}

/// grad_in = grad_out * f'(x), with f' expressed through the forward output y.
template <typename Scalar>
Tensor<Scalar> activation_backward(Activation kind, const Tensor<Scalar>& x, const Tensor<Scalar>& y,
                                   const Tensor<Scalar>& grad_out) {
  require(x.shape() == grad_out.shape() && y.shape() == x.shape(), "activation_backward: shape mismatch");
  Tensor<Scalar> g(x.shape());
  switch (kind) {
    case Activation::tanh: g.values() = grad_out.values() * (Scalar(1) - y.values().square()); break;
    case Activation::relu: g.values() = (x.values() > Scalar(0)).select(grad_out.values(), Scalar(0)); break;
    case Activation::sigmoid: g.values() = grad_out.values() * y.values() * (Scalar(1) - y.values()); break;
  }
  return g;
}

template <typename Scalar>
Tensor<Scalar> activation_backward(Activation kind, const Tensor<Scalar>& x, const Tensor<Scalar>& grad_out) {
  return activation_backward(kind, x, activation_forward(kind, x), grad_out);
}

/// 2x2 non-overlapping mean.
template <typename Scalar>
Tensor<Scalar> avgpool2_forward(const Tensor<Scalar>& x) {
  require(x.h() % 2 == 0 && x.w() % 2 == 0, "avgpool2: H and W must be even, got " + to_string(x.shape()));
  Tensor<Scalar> y(x.n(), x.c(), x.h() / 2, x.w() / 2);
  for (Index n = 0; n < x.n(); ++n)
    for (Index c = 0; c < x.c(); ++c)
      for (Index i = 0; i < y.h(); ++i)
        for (Index j = 0; j < y.w(); ++j)
          y(n, c, i, j) = (x(n, c, 2 * i, 2 * j) + x(n, c, 2 * i, 2 * j + 1) + x(n, c, 2 * i + 1, 2 * j) +
                           x(n, c, 2 * i + 1, 2 * j + 1)) /
                          Scalar(4);
  return y;
}

template <typename Scalar>
Tensor<Scalar> avgpool2_backward(const Shape4& input_shape, const Tensor<Scalar>& grad_out) {
  require(grad_out.shape() == (Shape4{input_shape.n, input_shape.c, input_shape.h / 2, input_shape.w / 2}),
          "avgpool2_backward: shape mismatch");
  Tensor<Scalar> g(input_shape);
  for (Index n = 0; n < g.n(); ++n)
    for (Index c = 0; c < g.c(); ++c)
      for (Index y = 0; y < g.h(); ++y)
        for (Index x = 0; x < g.w(); ++x) g(n, c, y, x) = grad_out(n, c, y / 2, x / 2) / Scalar(4);
  return g;
}

/// Nearest-neighbor 2x upsampling.
template <typename Scalar>
Tensor<Scalar> upsample2_forward(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.n(), x.c(), x.h() * 2, x.w() * 2);
  for (Index n = 0; n < y.n(); ++n)
    for (Index c = 0; c < y.c(); ++c)
      for (Index i = 0; i < y.h(); ++i)
        for (Index j = 0; j < y.w(); ++j) y(n, c, i, j) = x(n, c, i / 2, j / 2);
  return y;
}

template <typename Scalar>
Tensor<Scalar> upsample2_backward(const Tensor<Scalar>& grad_out) {
  require(grad_out.h() % 2 == 0 && grad_out.w() % 2 == 0, "upsample2_backward: odd gradient dims");
  Tensor<Scalar> g(grad_out.n(), grad_out.c(), grad_out.h() / 2, grad_out.w() / 2);
  for (Index n = 0; n < g.n(); ++n)
    for (Index c = 0; c < g.c(); ++c)
      for (Index i = 0; i < g.h(); ++i)
        for (Index j = 0; j < g.w(); ++j)
          g(n, c, i, j) = grad_out(n, c, 2 * i, 2 * j) + grad_out(n, c, 2 * i, 2 * j + 1) +
                          grad_out(n, c, 2 * i + 1, 2 * j) + grad_out(n, c, 2 * i + 1, 2 * j + 1);
  return g;
}

/// Channel concatenation a ++ b.
template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require(a.n() == b.n() && a.h() == b.h() && a.w() == b.w(),
          "concat_channels: spatial mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor<Scalar> y(a.n(), a.c() + b.c(), a.h(), a.w());
  const Index plane = a.h() * a.w();
  for (Index n = 0; n < a.n(); ++n) {
    std::copy_n(a.data() + n * a.c() * plane, a.c() * plane, y.data() + n * y.c() * plane);
    std::copy_n(b.data() + n * b.c() * plane, b.c() * plane, y.data() + (n * y.c() + a.c()) * plane);
  }
  return y;
}

/// Splits a concatenated gradient at channel `boundary`.
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> concat_channels_backward(const Tensor<Scalar>& grad_out, Index boundary) {
  require(boundary >= 0 && boundary <= grad_out.c(), "concat_channels_backward: bad boundary");
  Tensor<Scalar> ga(grad_out.n(), boundary, grad_out.h(), grad_out.w());
  Tensor<Scalar> gb(grad_out.n(), grad_out.c() - boundary, grad_out.h(), grad_out.w());
  const Index plane = grad_out.h() * grad_out.w();
  for (Index n = 0; n < grad_out.n(); ++n) {
    std::copy_n(grad_out.data() + n * grad_out.c() * plane, ga.c() * plane, ga.data() + n * ga.c() * plane);
    std::copy_n(grad_out.data() + (n * grad_out.c() + boundary) * plane, gb.c() * plane,
                gb.data() + n * gb.c() * plane);
  }
  return {std::move(ga), std::move(gb)};
}

}  // namespace casr
