#include <cmath>
#include <functional>

#include "casr/error.hpp"
#include "casr/layers.hpp"
#include "casr/ops.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace casr;
using T = Tensor<double>;

namespace {

ConvGeometry geometry(Index in, Index out, Index k) { return {in, out, k, k, k / 2, 1}; }

SelfOnnConv2D<double> random_selfonn(const ConvGeometry& g, int q, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  SelfOnnConv2D<double> layer(g, q);
  for (Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = uniform_real(rng, lo, hi);
  for (Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = uniform_real(rng, lo, hi);
  return layer;
}

Conv2DLayer<double> random_conv(const ConvGeometry& g, std::mt19937_64& rng) {
  Conv2DLayer<double> layer(g);
  for (Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = uniform_real(rng, -1, 1);
  for (Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = uniform_real(rng, -1, 1);
  return layer;
}

// Direct evaluation of the generative-neuron sum with zero padding.
T direct_selfonn(const SelfOnnConv2D<double>& L, const T& x) {
  const auto& g = L.geom;
  T y(x.n(), g.out_channels, g.out_h(x.h()), g.out_w(x.w()));
  for (Index n = 0; n < x.n(); ++n)
    for (Index o = 0; o < g.out_channels; ++o)
      for (Index m = 0; m < y.h(); ++m)
        for (Index k = 0; k < y.w(); ++k) {
          double acc = L.bias[o];
          for (Index i = 0; i < g.in_channels; ++i)
            for (Index r = 0; r < g.kernel_h; ++r)
              for (Index t = 0; t < g.kernel_w; ++t) {
                const Index yy = m * g.stride + r - g.padding, xx = k * g.stride + t - g.padding;
                if (yy < 0 || xx < 0 || yy >= x.h() || xx >= x.w()) continue;
                const double v = x(n, i, yy, xx);
                for (int q = 1; q <= L.q_order; ++q) acc += L.w(o, i, r, t, q) * std::pow(v, q);
              }
          y(n, o, m, k) = acc;
        }
  return y;
}

double weighted_sum(const T& a, const T& w) { return (a.values() * w.values()).sum(); }

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

// Central difference of f with respect to v.
double fd(const std::function<double()>& f, double& v, double eps = 1e-5) {
  const double saved = v;
  v = saved + eps;
  const double up = f();
  v = saved - eps;
  const double down = f();
  v = saved;
  return (up - down) / (2 * eps);
}

}  // namespace

TEST_SUITE("selfonn") {
  TEST_CASE("identity kernel reproduces the input") {
    Conv2DLayer<double> layer(geometry(1, 1, 3));
    layer.w(0, 0, 1, 1) = 1.0;
    std::mt19937_64 rng(1);
    const T x = random_tensor<double>({2, 1, 5, 7}, rng);
    const T y = conv2d_forward(layer, x);
    CHECK(y.shape() == x.shape());
    CHECK((y.values() == x.values()).all());
  }

  TEST_CASE("scalar convolution by hand") {
    Conv2DLayer<double> layer(geometry(1, 1, 1));
    layer.w(0, 0, 0, 0) = 2.0;
    layer.bias[0] = 3.0;
    const T x = T::constant({1, 1, 1, 1}, 5.0);
    CHECK(conv2d_forward(layer, x)(0, 0, 0, 0) == 13.0);
  }

  TEST_CASE("second-order generative neuron by hand") {
    SelfOnnConv2D<double> layer(geometry(1, 1, 1), 2);
    layer.w(0, 0, 0, 0, 1) = 0.5;
    layer.w(0, 0, 0, 0, 2) = 0.25;
    layer.bias[0] = 1.0;
    CHECK(selfonn_forward(layer, T::constant({1, 1, 1, 1}, 2.0))(0, 0, 0, 0) == 3.0);
  }

  TEST_CASE("forward matches direct evaluation") {
    std::mt19937_64 rng(13);
    for (int q : {1, 2, 3, 5, 7})
      for (Index k : {1, 3, 5}) {
        const auto layer = random_selfonn(geometry(3, 4, k), q, rng);
        const T x = random_tensor<double>({2, 3, 6, 9}, rng);
        const T got = selfonn_forward(layer, x);
        const T want = direct_selfonn(layer, x);
        CHECK((got.values() - want.values()).abs().maxCoeff() < 1e-12);
      }
  }

  TEST_CASE("q=1 reduces to plain convolution") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 10; ++t) {
      const auto conv = random_conv(geometry(2, 3, 3), rng);
      SelfOnnConv2D<double> onn(conv.geom, 1);
      onn.weights = conv.weights;
      onn.bias = conv.bias;
      const T x = random_tensor<double>({1, 2, 8, 8}, rng);
      CHECK((selfonn_forward(onn, x).values() == conv2d_forward(conv, x).values()).all());

      const T gout = random_tensor<double>({1, 3, 8, 8}, rng);
      const auto a = selfonn_backward(onn, x, gout);
      const auto b = conv2d_backward(conv, x, gout);
      CHECK((a.weights.array() == b.weights.array()).all());
      CHECK((a.bias.array() == b.bias.array()).all());
      CHECK((a.input.values() == b.input.values()).all());
    }
  }

  TEST_CASE("self-onn backward matches finite differences") {
    std::mt19937_64 rng(21);
    auto layer = random_selfonn(geometry(1, 2, 3), 3, rng);
    T x = random_tensor<double>({1, 1, 4, 4}, rng, 0.5, 1.0);
    const T probe = random_tensor<double>({1, 2, 4, 4}, rng);
    const auto g = selfonn_backward(layer, x, probe);
    auto loss = [&] { return weighted_sum(selfonn_forward(layer, x), probe); };
    double worst = 0.0;
    for (Index i = 0; i < layer.weights.size(); ++i)
      worst = std::max(worst, rel(g.weights.data()[i], fd(loss, layer.weights.data()[i])));
    for (Index i = 0; i < layer.bias.size(); ++i) worst = std::max(worst, rel(g.bias[i], fd(loss, layer.bias[i])));
    for (Index i = 0; i < x.size(); ++i) worst = std::max(worst, rel(g.input.values()[i], fd(loss, x.values()[i])));
    CHECK(worst < 1e-6);
  }

  TEST_CASE("zero upstream gradient gives zero gradients") {
    std::mt19937_64 rng(2);
    const auto layer = random_selfonn(geometry(2, 2, 3), 5, rng);
    const T x = random_tensor<double>({1, 2, 6, 6}, rng);
    const auto g = selfonn_backward(layer, x, T(1, 2, 6, 6));
    CHECK(g.weights.isZero(0));
    CHECK(g.bias.isZero(0));
    CHECK((g.input.values() == 0).all());
  }

  TEST_CASE("shape mismatches are contract violations") {
    std::mt19937_64 rng(2);
    const auto layer = random_selfonn(geometry(2, 2, 3), 2, rng);
    CHECK_THROWS_AS(selfonn_forward(layer, T(1, 3, 6, 6)), ContractError);
    CHECK_THROWS_AS(selfonn_backward(layer, T(1, 2, 6, 6), T(1, 2, 5, 6)), ContractError);
  }

  TEST_CASE("outputs stay finite over the bounded operating range") {
    std::mt19937_64 rng(99);
    for (int q : {1, 3, 5, 7}) {
      const auto layer = random_selfonn(geometry(2, 2, 3), q, rng, -10, 10);
      const T x = random_tensor<double>({1, 2, 6, 6}, rng, -10, 10);
      CHECK(selfonn_forward(layer, x).values().isFinite().all());
      CHECK(selfonn_backward(layer, x, T::constant({1, 2, 6, 6}, 1.0)).input.values().isFinite().all());
    }
  }

  TEST_CASE("activation values") {
    const T z(1, 1, 1, 1);
    CHECK(activation_forward(Activation::tanh, z)(0, 0, 0, 0) == 0.0);
    CHECK(activation_forward(Activation::sigmoid, z)(0, 0, 0, 0) == 0.5);
    CHECK(activation_forward(Activation::relu, T::constant({1, 1, 1, 1}, -1.0))(0, 0, 0, 0) == 0.0);
    CHECK(activation_backward(Activation::tanh, z, T::constant({1, 1, 1, 1}, 3.5))(0, 0, 0, 0) == 3.5);
  }

  TEST_CASE("activation derivatives match finite differences") {
    std::mt19937_64 rng(5);
    for (Activation a : {Activation::tanh, Activation::relu, Activation::sigmoid}) {
      T x = random_tensor<double>({1, 2, 3, 3}, rng, 0.1, 2.0);
      for (Index i = 0; i < x.size(); i += 2) x.values()[i] = -x.values()[i];  // away from the relu kink
      const T probe = random_tensor<double>({1, 2, 3, 3}, rng);
      const T g = activation_backward(a, x, probe);
      auto loss = [&] { return weighted_sum(activation_forward(a, x), probe); };
      double worst = 0.0;
      for (Index i = 0; i < x.size(); ++i) worst = std::max(worst, rel(g.values()[i], fd(loss, x.values()[i])));
      CHECK(worst < 1e-7);
    }
  }

  TEST_CASE("average pooling") {
    const T c = T::constant({1, 2, 4, 6}, 3.0);
    const T p = avgpool2_forward(c);
    CHECK(p.shape() == Shape4{1, 2, 2, 3});
    CHECK((p.values() == 3.0).all());

    T b(1, 1, 2, 2);
    b(0, 0, 0, 0) = 1;
    b(0, 0, 0, 1) = 3;
    b(0, 0, 1, 0) = 5;
    b(0, 0, 1, 1) = 7;
    CHECK(avgpool2_forward(b)(0, 0, 0, 0) == 4.0);

    const T g = avgpool2_backward({1, 2, 4, 6}, T::constant({1, 2, 2, 3}, 1.0));
    CHECK((g.values() == 0.25).all());
    CHECK_THROWS_AS(avgpool2_forward(T(1, 1, 3, 4)), ContractError);
  }

  TEST_CASE("upsampling") {
    const T u = upsample2_forward(T::constant({1, 1, 1, 1}, 7.0));
    CHECK(u.shape() == Shape4{1, 1, 2, 2});
    CHECK((u.values() == 7.0).all());
    CHECK(upsample2_backward(T::constant({1, 1, 2, 2}, 1.0))(0, 0, 0, 0) == 4.0);
    const T c = T::constant({2, 3, 4, 4}, -1.5);
    CHECK((upsample2_forward(avgpool2_forward(c)).values() == c.values()).all());
  }

  TEST_CASE("pool and upsample are adjoint-consistent") {
    std::mt19937_64 rng(8);
    const T x = random_tensor<double>({1, 2, 4, 6}, rng), gy = random_tensor<double>({1, 2, 2, 3}, rng);
    // <pool(x), gy> == <x, pool^T(gy)> and likewise for upsampling.
    CHECK(weighted_sum(avgpool2_forward(x), gy) ==
          doctest::Approx(weighted_sum(x, avgpool2_backward(x.shape(), gy))).epsilon(1e-14));
    CHECK(weighted_sum(upsample2_forward(gy), x) ==
          doctest::Approx(weighted_sum(gy, upsample2_backward(x))).epsilon(1e-14));
  }

  TEST_CASE("channel concatenation") {
    std::mt19937_64 rng(4);
    const T a = random_tensor<double>({2, 2, 3, 3}, rng), b = random_tensor<double>({2, 3, 3, 3}, rng);
    const T c = concat_channels(a, b);
    CHECK(c.shape() == Shape4{2, 5, 3, 3});
    for (Index n = 0; n < 2; ++n) {
      for (Index ch = 0; ch < 2; ++ch) CHECK((c.plane(n, ch).array() == a.plane(n, ch).array()).all());
      for (Index ch = 0; ch < 3; ++ch) CHECK((c.plane(n, ch + 2).array() == b.plane(n, ch).array()).all());
    }
    const auto [ga, gb] = concat_channels_backward(c, 2);
    CHECK((ga.values() == a.values()).all());
    CHECK((gb.values() == b.values()).all());
    CHECK_THROWS_AS(concat_channels(a, T(2, 1, 4, 3)), ContractError);
  }
}
