#pragma once

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <vector>

#include "casr/tensor.hpp"

namespace casr {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct ConvGeometry {
  Index in_channels = 0;
  Index out_channels = 0;
  Index kernel_h = 3;
  Index kernel_w = 3;
  Index padding = 1;
  Index stride = 1;

  Index out_h(Index h) const { return (h + 2 * padding - kernel_h) / stride + 1; }
  Index out_w(Index w) const { return (w + 2 * padding - kernel_w) / stride + 1; }
  Index taps() const { return in_channels * kernel_h * kernel_w; }
};

/// Plain convolution (cross-correlation): x_k = b_k + sum_i conv2d(w_ki, y_i).
/// weights is out x (in*kh*kw), each row laid out as w[in][kh][kw].
template <typename Scalar>
struct Conv2DLayer {
  ConvGeometry geom;
  RowMatrix<Scalar> weights;
  Vector<Scalar> bias;

  static constexpr int q_order = 1;

  Conv2DLayer() = default;
  explicit Conv2DLayer(const ConvGeometry& g)
      : geom(g), weights(RowMatrix<Scalar>::Zero(g.out_channels, g.taps())), bias(Vector<Scalar>::Zero(g.out_channels)) {}

  Scalar& w(Index o, Index i, Index r, Index t) { return weights(o, (i * geom.kernel_h + r) * geom.kernel_w + t); }
  Scalar w(Index o, Index i, Index r, Index t) const { return weights(o, (i * geom.kernel_h + r) * geom.kernel_w + t); }
};

/// Self-organized operational layer with generative neurons. Every kernel tap
/// applies the nodal polynomial sum_{q=1..Q} w_q * y^q; the constant Taylor
/// term of all taps is folded into the per-output bias. weights is
/// out x (in*kh*kw*Q), each row laid out as w[in][kh][kw][q].
template <typename Scalar>
struct SelfOnnConv2D {
  ConvGeometry geom;
  int q_order = 1;
  RowMatrix<Scalar> weights;
  Vector<Scalar> bias;

  SelfOnnConv2D() = default;
  SelfOnnConv2D(const ConvGeometry& g, int q)
      : geom(g),
        q_order(q),
        weights(RowMatrix<Scalar>::Zero(g.out_channels, g.taps() * q)),
        bias(Vector<Scalar>::Zero(g.out_channels)) {
    require(q >= 1, "SelfOnnConv2D: q_order must be >= 1");
  }

  /// q is 1-based, matching the polynomial power.
  Scalar& w(Index o, Index i, Index r, Index t, int q) {
    return weights(o, ((i * geom.kernel_h + r) * geom.kernel_w + t) * q_order + (q - 1));
  }
  Scalar w(Index o, Index i, Index r, Index t, int q) const {
    return weights(o, ((i * geom.kernel_h + r) * geom.kernel_w + t) * q_order + (q - 1));
  }
};

/// Gradients of one layer call: parameter gradients plus the input gradient.
template <typename Scalar>
struct LayerGradients {
  RowMatrix<Scalar> weights;
  Vector<Scalar> bias;
  Tensor<Scalar> input;
};

namespace detail {

template <typename Scalar>
void check_input(const ConvGeometry& g, const Tensor<Scalar>& x, const char* who) {
  require(x.c() == g.in_channels, std::string(who) + ": input has " + std::to_string(x.c()) +
                                      " channels, layer expects " + std::to_string(g.in_channels));
  require(g.kernel_h % 2 == 1 && g.kernel_w % 2 == 1, std::string(who) + ": kernel dims must be odd");
  require(g.stride >= 1, std::string(who) + ": stride must be >= 1");
  require(g.out_h(x.h()) >= 1 && g.out_w(x.w()) >= 1, std::string(who) + ": input smaller than kernel");
}

/// Element powers y^1..y^Q of one batch item, stored as Q consecutive C x H x W blocks.
template <typename Scalar>
std::vector<Eigen::Array<Scalar, Eigen::Dynamic, 1>> powers(const Tensor<Scalar>& x, Index n, int q_order) {
  const Index len = x.c() * x.h() * x.w();
  Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> base(x.data() + n * len, len);
  std::vector<Eigen::Array<Scalar, Eigen::Dynamic, 1>> p;
  p.reserve(static_cast<std::size_t>(q_order));
  p.emplace_back(base);
  for (int q = 2; q <= q_order; ++q) p.emplace_back(p.back() * base);
  return p;
}

/// Patch matrix of batch item n for output rows [oy0, oy1): row
/// ((i*kh + r)*kw + t)*Q + (q-1) holds y^q sampled at the (r, t) tap for
/// every output position in the band; padding reads 0. `pw` comes from powers().
template <typename Scalar>
void im2col(const std::vector<Eigen::Array<Scalar, Eigen::Dynamic, 1>>& pw, const Shape4& xs, const ConvGeometry& g,
            int q_order, Index oy0, Index oy1, RowMatrix<Scalar>& col) {
  const Index ow = g.out_w(xs.w);
  col.setZero(g.taps() * q_order, (oy1 - oy0) * ow);
  for (Index i = 0; i < g.in_channels; ++i)
    for (Index r = 0; r < g.kernel_h; ++r)
      for (Index t = 0; t < g.kernel_w; ++t)
        for (int q = 0; q < q_order; ++q) {
          const Index row = ((i * g.kernel_h + r) * g.kernel_w + t) * q_order + q;
          const Scalar* src = pw[static_cast<std::size_t>(q)].data() + i * xs.h * xs.w;
          Scalar* dst = col.row(row).data();
          for (Index oy = oy0; oy < oy1; ++oy) {
            const Index iy = oy * g.stride - g.padding + r;
            if (iy < 0 || iy >= xs.h) continue;
            Scalar* d = dst + (oy - oy0) * ow;
            for (Index ox = 0; ox < ow; ++ox) {
              const Index ix = ox * g.stride - g.padding + t;
              if (ix < 0 || ix >= xs.w) continue;
              d[ox] = src[iy * xs.w + ix];
            }
          }
        }
}

/// Adjoint of im2col over output rows [oy0, oy1), including the chain factor
/// d(y^q)/dy = q * y^(q-1). Accumulates into batch item n of dx.
template <typename Scalar>
void col2im(const RowMatrix<Scalar>& dcol, const std::vector<Eigen::Array<Scalar, Eigen::Dynamic, 1>>& pw,
            const ConvGeometry& g, int q_order, Index oy0, Index oy1, Tensor<Scalar>& dx, Index n) {
  const Index ow = g.out_w(dx.w());
  const Index plane = dx.h() * dx.w();
  Scalar* out = dx.data() + n * dx.c() * plane;
  for (Index i = 0; i < g.in_channels; ++i)
    for (Index r = 0; r < g.kernel_h; ++r)
      for (Index t = 0; t < g.kernel_w; ++t)
        for (int q = 1; q <= q_order; ++q) {
          const Index row = ((i * g.kernel_h + r) * g.kernel_w + t) * q_order + (q - 1);
          const Scalar* src = dcol.row(row).data();
          // q * y^(q-1); the q == 1 factor is exactly one.
          const Scalar* lower = q >= 2 ? pw[static_cast<std::size_t>(q - 2)].data() + i * plane : nullptr;
          const Scalar qs = static_cast<Scalar>(q);
          Scalar* dst = out + i * plane;
          for (Index oy = oy0; oy < oy1; ++oy) {
            const Index iy = oy * g.stride - g.padding + r;
            if (iy < 0 || iy >= dx.h()) continue;
            const Scalar* s = src + (oy - oy0) * ow;
            for (Index ox = 0; ox < ow; ++ox) {
              const Index ix = ox * g.stride - g.padding + t;
              if (ix < 0 || ix >= dx.w()) continue;
              const Index p = iy * dx.w() + ix;
              dst[p] += lower ? s[ox] * qs * lower[p] : s[ox];
            }
          }
        }
}

/// Output rows per im2col band, sized so the patch matrix stays cache-friendly.
inline Index band_rows(const ConvGeometry& g, int q_order, Index out_w) {
  constexpr Index kTargetEntries = 1 << 16;
  const Index per_row = std::max<Index>(1, g.taps() * q_order * out_w);
  return std::max<Index>(1, kTargetEntries / per_row);
}

template <typename Scalar>
Tensor<Scalar> polynomial_conv_forward(const ConvGeometry& g, int q_order, const RowMatrix<Scalar>& weights,
                                       const Vector<Scalar>& bias, const Tensor<Scalar>& x) {
  const Index oh = g.out_h(x.h());
  const Index ow = g.out_w(x.w());
  Tensor<Scalar> out(x.n(), g.out_channels, oh, ow);
  const Index band = band_rows(g, q_order, ow);
  RowMatrix<Scalar> col;
  RowMatrix<Scalar> res;
  for (Index n = 0; n < x.n(); ++n) {
    const auto pw = powers(x, n, q_order);
    auto dst = out.sample(n);
    for (Index oy0 = 0; oy0 < oh; oy0 += band) {
      const Index oy1 = std::min(oh, oy0 + band);
      im2col(pw, x.shape(), g, q_order, oy0, oy1, col);
      res.noalias() = weights * col;
      res.colwise() += bias;
      dst.middleCols(oy0 * ow, (oy1 - oy0) * ow) = res;
    }
  }
  return out;
}

template <typename Scalar>
LayerGradients<Scalar> polynomial_conv_backward(const ConvGeometry& g, int q_order, const RowMatrix<Scalar>& weights,
                                                const Tensor<Scalar>& x, const Tensor<Scalar>& grad_out) {
  const Index oh = g.out_h(x.h());
  const Index ow = g.out_w(x.w());
  const Shape4 expected{x.n(), g.out_channels, oh, ow};
  require(grad_out.shape() == expected,
          "conv backward: grad_out shape " + to_string(grad_out.shape()) + " != " + to_string(expected));
  LayerGradients<Scalar> grads{RowMatrix<Scalar>::Zero(weights.rows(), weights.cols()),
                               Vector<Scalar>::Zero(g.out_channels), Tensor<Scalar>(x.shape())};
  const Index band = band_rows(g, q_order, ow);
  RowMatrix<Scalar> col;
  RowMatrix<Scalar> dcol;
  for (Index n = 0; n < x.n(); ++n) {
    const auto pw = powers(x, n, q_order);
    const auto go = grad_out.sample(n);
    grads.bias += go.rowwise().sum();
    for (Index oy0 = 0; oy0 < oh; oy0 += band) {
      const Index oy1 = std::min(oh, oy0 + band);
      const auto go_band = go.middleCols(oy0 * ow, (oy1 - oy0) * ow);
      im2col(pw, x.shape(), g, q_order, oy0, oy1, col);
      grads.weights.noalias() += go_band * col.transpose();
      dcol.noalias() = weights.transpose() * go_band;
      col2im(dcol, pw, g, q_order, oy0, oy1, grads.input, n);
    }
  }
  return grads;
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Conv2DLayer<Scalar>& layer, const Tensor<Scalar>& x) {
  detail::check_input(layer.geom, x, "conv2d_forward");
  return detail::polynomial_conv_forward(layer.geom, 1, layer.weights, layer.bias, x);
}

template <typename Scalar>
LayerGradients<Scalar> conv2d_backward(const Conv2DLayer<Scalar>& layer, const Tensor<Scalar>& x,
                                       const Tensor<Scalar>& grad_out) {
  detail::check_input(layer.geom, x, "conv2d_backward");
  return detail::polynomial_conv_backward(layer.geom, 1, layer.weights, x, grad_out);
}

template <typename Scalar>
Tensor<Scalar> selfonn_forward(const SelfOnnConv2D<Scalar>& layer, const Tensor<Scalar>& x) {
  detail::check_input(layer.geom, x, "selfonn_forward");
  return detail::polynomial_conv_forward(layer.geom, layer.q_order, layer.weights, layer.bias, x);
}

template <typename Scalar>
LayerGradients<Scalar> selfonn_backward(const SelfOnnConv2D<Scalar>& layer, const Tensor<Scalar>& x,
                                        const Tensor<Scalar>& grad_out) {
  detail::check_input(layer.geom, x, "selfonn_backward");
  return detail::polynomial_conv_backward(layer.geom, layer.q_order, layer.weights, x, grad_out);
}

/// Uniform init in [-s, s] with s = sqrt(1 / (fan_in * Q)), weights then bias.
template <typename Layer>
void init_uniform(Layer& layer, int q_order, std::mt19937_64& rng) {
  const double s = std::sqrt(1.0 / (static_cast<double>(layer.geom.taps()) * q_order));
  for (Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = uniform_real(rng, -s, s);
  for (Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = uniform_real(rng, -s, s);
}

template <typename Scalar>
void init_uniform(Conv2DLayer<Scalar>& layer, std::mt19937_64& rng) {
  init_uniform(layer, 1, rng);
}

template <typename Scalar>
void init_uniform(SelfOnnConv2D<Scalar>& layer, std::mt19937_64& rng) {
  init_uniform(layer, layer.q_order, rng);
}

}  // namespace casr
