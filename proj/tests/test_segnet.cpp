#include <cmath>
#include <fstream>
#include <functional>

#include "casr/checkpoint.hpp"
#include "casr/error.hpp"
#include "casr/losses.hpp"
#include "casr/network.hpp"
#include "casr/train.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace casr;
using T = Tensor<double>;

namespace {

// Independent per-layer tally: every 3x3 layer holds in*out*9*q weights plus
// out biases, the head 1x1 maps base channels to one output.
Index tally_parameters(const NetworkConfig& c) {
  auto conv = [](Index in, Index out, Index k, Index q) { return in * out * k * k * q + out; };
  Index total = 0;
  Index in = c.in_channels;
  for (int l = 0; l < c.levels; ++l) {
    const Index w = c.base_channels << l;
    total += conv(in, w, 3, 1) + conv(w, w, 3, 1);
    in = w;
  }
  const Index bw = c.base_channels << c.levels;
  total += conv(in, bw, 3, 1) + conv(bw, bw, 3, 1);
  in = bw;
  for (int l = c.levels - 1; l >= 0; --l) {
    const Index w = c.base_channels << l;
    total += conv(in + w, w, 3, c.q_order) + conv(w, w, 3, c.q_order);
    in = w;
  }
  return total + conv(in, 1, 1, 1);
}

std::vector<double> flatten(const NetworkParams& p) {
  std::vector<double> out;
  p.for_each_parameter([&](const std::string&, const double* d, Index n) { out.insert(out.end(), d, d + n); });
  return out;
}

T target_from(const std::vector<double>& v) {
  T t(1, 1, 1, static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) t.values()[static_cast<Index>(i)] = v[i];
  return t;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

double fd(const std::function<double()>& f, double& v, double eps = 1e-5) {
  const double saved = v;
  v = saved + eps;
  const double up = f();
  v = saved - eps;
  const double down = f();
  v = saved;
  return (up - down) / (2 * eps);
}

std::vector<Sample> constant_samples(int count, double target_value, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  for (int i = 0; i < count; ++i)
    out.push_back({random_tensor<double>({1, 1, 8, 8}, rng, 0.0, 1.0), T::constant({1, 1, 8, 8}, target_value)});
  return out;
}

}  // namespace

TEST_SUITE("segnet") {
  TEST_CASE("parameter count matches an independent tally") {
    for (NetworkConfig cfg : {NetworkConfig{}, NetworkConfig{2, 3, 16, 3}, NetworkConfig{1, 2, 4, 7}}) {
      const NetworkParams p = build_network(cfg, 3);
      CHECK(expected_parameter_count(cfg) == tally_parameters(cfg));
      CHECK(p.parameter_count() == tally_parameters(cfg));
      CHECK(static_cast<Index>(flatten(p).size()) == tally_parameters(cfg));
    }
  }

  TEST_CASE("network construction is seeded") {
    const NetworkConfig cfg;
    CHECK(flatten(build_network(cfg, 5)) == flatten(build_network(cfg, 5)));
    CHECK(flatten(build_network(cfg, 5)) != flatten(build_network(cfg, 6)));
  }

  TEST_CASE("q=1 decoder is an all-convolution network") {
    NetworkConfig cfg;
    cfg.q_order = 1;
    const NetworkParams p = build_network(cfg, 2);
    for (const auto& layer : p.decoder) {
      CHECK(layer.q_order == 1);
      CHECK(layer.weights.cols() == layer.geom.taps());
    }
    // Swapping each Self-ONN layer for a convolution with the same weights
    // leaves the forward pass unchanged.
    std::mt19937_64 rng(4);
    const T x = random_tensor<double>({1, 2, 8, 8}, rng, 0, 1);
    const T y = forward(p, x);
    NetworkParams q = p;
    for (auto& layer : q.decoder) {
      SelfOnnConv2D<double> copy(layer.geom, 1);
      copy.weights = layer.weights;
      copy.bias = layer.bias;
      layer = copy;
    }
    CHECK((forward(q, x).values() == y.values()).all());
  }

  TEST_CASE("forward shape and range") {
    const NetworkParams p = build_network({}, 1);
    std::mt19937_64 rng(6);
    const T y = forward(p, random_tensor<double>({3, 2, 16, 8}, rng, 0, 1));
    CHECK(y.shape() == Shape4{3, 1, 16, 8});
    CHECK((y.values() > 0.0).all());
    CHECK((y.values() < 1.0).all());
    CHECK_THROWS_AS(forward(p, T(1, 2, 12, 8)), ContractError);
    CHECK_THROWS_AS(forward(p, T(1, 3, 8, 8)), ContractError);
  }

  TEST_CASE("network gradients match finite differences") {
    NetworkConfig cfg;
    cfg.base_channels = 2;
    cfg.levels = 2;
    NetworkParams p = build_network(cfg, 9);
    std::mt19937_64 rng(10);
    T x = random_tensor<double>({1, 2, 8, 8}, rng, 0, 1);
    const T probe = random_tensor<double>({1, 1, 8, 8}, rng, 0.5, 1.0);
    ForwardCache cache;
    forward(p, x, cache);
    T gx;
    const NetworkParams g = backward(p, cache, probe, &gx);
    auto loss = [&] { return (forward(p, x).values() * probe.values()).sum(); };

    // Decoder and head parameters sit after every ReLU, so the loss is smooth in
    // them. Many entries have gradients near 1e-9, where round-off in the loss
    // dominates a per-entry ratio, so errors are scaled by the largest gradient.
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t l = 0; l < p.decoder.size(); ++l)
      for (Index i = 0; i < p.decoder[l].weights.size(); i += 7)
        pairs.emplace_back(g.decoder[l].weights.data()[i], fd(loss, p.decoder[l].weights.data()[i]));
    for (Index i = 0; i < p.head.weights.size(); ++i)
      pairs.emplace_back(g.head.weights.data()[i], fd(loss, p.head.weights.data()[i]));
    pairs.emplace_back(g.head.bias[0], fd(loss, p.head.bias[0]));
    double scale = 0.0, worst = 0.0;
    for (const auto& [a, n] : pairs) scale = std::max(scale, std::abs(a));
    for (const auto& [a, n] : pairs) worst = std::max(worst, std::abs(a - n) / scale);
    CHECK(worst < 1e-5);
    CHECK(gx.shape() == x.shape());
  }

  TEST_CASE("bce by hand") {
    CHECK(loss_bce(T::constant({1, 1, 1, 1}, 0.5), T::constant({1, 1, 1, 1}, 1.0)).value ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    const T y = target_from({1, 0, 1, 1, 0});
    CHECK(loss_bce(y, y).value <= 1.2e-7);
    CHECK_THROWS_AS(loss_bce(y, target_from({1, 0})), ContractError);
  }

  TEST_CASE("dice by hand") {
    const T y = target_from({1, 0, 1, 0});
    CHECK(loss_dice(target_from({1, 1, 0, 0}), y).value == doctest::Approx(1.0 - 2.0 / (4.0 + 1e-6)).epsilon(1e-12));
    CHECK(loss_dice(y, y).value < 1e-5);
    CHECK(loss_dice(target_from({0, 0, 0}), target_from({0, 0, 0})).value == 1.0);
  }

  TEST_CASE("compound loss is the mean of its parts") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
      const T p = random_tensor<double>({2, 1, 4, 4}, rng, 0.01, 0.99);
      T y = random_tensor<double>({2, 1, 4, 4}, rng, 0, 1);
      y.values() = (y.values() > 0.5).cast<double>();
      const auto b = loss_bce(p, y), d = loss_dice(p, y), c = loss_compound(p, y);
      CHECK(c.value == doctest::Approx((b.value + d.value) / 2).epsilon(1e-14));
      CHECK(((c.grad.values() - (b.grad.values() + d.grad.values()) / 2).abs() < 1e-15).all());
    }
    const T y = target_from({1, 0, 0, 1});
    CHECK(loss_compound(y, y).value <= 1e-5);
  }

  TEST_CASE("loss gradients match finite differences") {
    std::mt19937_64 rng(17);
    for (LossKind kind : {LossKind::bce, LossKind::dice, LossKind::compound}) {
      T p = random_tensor<double>({2, 1, 3, 3}, rng, 0.05, 0.95);
      T y = random_tensor<double>({2, 1, 3, 3}, rng, 0, 1);
      y.values() = (y.values() > 0.5).cast<double>();
      const T g = compute_loss(kind, p, y).grad;
      auto loss = [&] { return compute_loss(kind, p, y).value; };
      double worst = 0.0;
      for (Index i = 0; i < p.size(); ++i) worst = std::max(worst, rel(g.values()[i], fd(loss, p.values()[i])));
      CHECK(worst < 1e-6);
    }
  }

  TEST_CASE("losses are nonnegative") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 50; ++t) {
      const T p = random_tensor<double>({1, 1, 4, 4}, rng, 0.0, 1.0);
      T y = random_tensor<double>({1, 1, 4, 4}, rng, 0, 1);
      y.values() = (y.values() > 0.3).cast<double>();
      for (LossKind k : {LossKind::bce, LossKind::dice, LossKind::compound}) CHECK(compute_loss(k, p, y).value >= 0.0);
    }
    for (const char* n : {"bce", "dice", "compound"}) CHECK(to_string(parse_loss(n)) == n);
    CHECK_THROWS_AS(parse_loss("focal"), ContractError);
  }

  TEST_CASE("flat validation loss drops then stops") {
    PlateauScheduler s(1e-3, 0.2, 5, 20);
    std::vector<int> drops;
    int stop = -1;
    for (int e = 0; e < 40 && stop < 0; ++e) {
      const auto ev = s.observe(1.0);
      if (ev.dropped) drops.push_back(e);
      if (ev.stop) stop = e;
    }
    CHECK(drops == std::vector<int>{5, 10, 15});
    CHECK(stop == 20);
    CHECK(s.best_epoch() == 0);
    CHECK(s.learning_rate() == doctest::Approx(1e-3 * 0.008).epsilon(1e-12));
  }

  TEST_CASE("improving validation loss never drops") {
    PlateauScheduler s(1e-3, 0.2, 5, 20);
    for (int e = 0; e < 100; ++e) {
      const auto ev = s.observe(1.0 / (e + 1));
      CHECK(ev.improved);
      CHECK(!ev.dropped);
      CHECK(!ev.stop);
    }
    CHECK(s.learning_rate() == 1e-3);
  }

  TEST_CASE("improvement resets both counters") {
    PlateauScheduler s(1.0, 0.5, 3, 6);
    const std::vector<double> seq{5, 6, 6, 6, 6, 4, 7, 7, 7, 7, 7, 7};
    std::vector<int> drops;
    int stop = -1;
    for (std::size_t e = 0; e < seq.size() && stop < 0; ++e) {
      const auto ev = s.observe(seq[e]);
      if (ev.dropped) drops.push_back(static_cast<int>(e));
      if (ev.stop) stop = static_cast<int>(e);
    }
    CHECK(drops == std::vector<int>{3, 8});
    CHECK(stop == 11);
    CHECK(s.best_epoch() == 5);
  }

  TEST_CASE("training runs to max epochs while improving and learns a constant target") {
    NetworkConfig net;
    net.in_channels = 1;
    net.levels = 1;
    net.base_channels = 4;
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.learning_rate = 1e-2;
    cfg.max_epochs = 50;
    cfg.loss = LossKind::dice;
    cfg.seed = 1;
    const auto train_set = constant_samples(4, 1.0, 2), val_set = constant_samples(2, 1.0, 3);
    const TrainResult r = train(build_network(net, 1), train_set, val_set, cfg);
    CHECK(r.history.back().val_loss < 0.05);
    CHECK(evaluate_loss(r.params, train_set, LossKind::dice, 4) < 0.05);
    CHECK(r.history[static_cast<std::size_t>(r.best_epoch)].val_loss ==
          doctest::Approx(evaluate_loss(r.params, val_set, LossKind::dice, cfg.batch_size)).epsilon(1e-12));
  }

  TEST_CASE("training is bit-deterministic") {
    NetworkConfig net;
    net.in_channels = 1;
    net.levels = 1;
    net.base_channels = 2;
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.learning_rate = 5e-3;
    cfg.max_epochs = 4;
    cfg.seed = 9;
    std::mt19937_64 rng(1);
    std::vector<Sample> data;
    for (int i = 0; i < 5; ++i) {
      T y = random_tensor<double>({1, 1, 8, 8}, rng, 0, 1);
      y.values() = (y.values() > 0.6).cast<double>();
      data.push_back({random_tensor<double>({1, 1, 8, 8}, rng, 0, 1), y});
    }
    const std::vector<Sample> tr(data.begin(), data.begin() + 3), va(data.begin() + 3, data.end());
    const auto a = train(build_network(net, 4), tr, va, cfg), b = train(build_network(net, 4), tr, va, cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
      CHECK(a.history[i].train_loss == b.history[i].train_loss);
      CHECK(a.history[i].val_loss == b.history[i].val_loss);
      CHECK(a.history[i].learning_rate == b.history[i].learning_rate);
    }
    CHECK(flatten(a.params) == flatten(b.params));
    CHECK_THROWS_AS(train(build_network(net, 4), {}, va, cfg), ContractError);
  }

  TEST_CASE("adam first step moves each parameter by the learning rate") {
    NetworkConfig net;
    net.levels = 1;
    net.base_channels = 1;
    NetworkParams p = build_network(net, 2);
    const auto before = flatten(p);
    NetworkParams g = p.zeros_like();
    g.for_each_parameter([](const std::string&, double* d, Index n) {
      for (Index i = 0; i < n; ++i) d[i] = (i % 2 ? 0.3 : -2.0);
    });
    AdamState adam(p);
    adam.update(p, g, 0.01);
    const auto after = flatten(p), grads = flatten(g);
    for (std::size_t i = 0; i < before.size(); ++i) {
      // Bias-corrected m/sqrt(v) equals sign(g) on the first step (up to eps).
      const double step = 0.01 * grads[i] / (std::abs(grads[i]) + 1e-8);
      CHECK(after[i] == doctest::Approx(before[i] - step).epsilon(1e-12));
    }
  }

  TEST_CASE("predict and binarize") {
    NetworkConfig net;
    net.in_channels = 2;
    const NetworkParams p = build_network(net, 5);
    std::mt19937_64 rng(2);
    const MultiChannelImage img{{test::random_gray(21, 13, rng), test::random_gray(21, 13, rng)}};
    const FloatImage prob = predict(p, img);
    CHECK(prob.rows() == 21);
    CHECK(prob.cols() == 13);
    CHECK((prob > 0.0).all());
    CHECK((prob < 1.0).all());

    const FloatImage six = FloatImage::Constant(4, 4, 0.6);
    CHECK(binarize(six, 0.5).all());
    CHECK(!binarize(six, 0.7).any());
    CHECK_THROWS_AS(binarize(six, 1.0), ContractError);
    CHECK_THROWS_AS(binarize(six, 0.0), ContractError);

    for (int t = 0; t < 20; ++t) {
      FloatImage m(8, 8);
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = uniform_real(rng, 0, 1);
      const double lo = uniform_real(rng, 0.01, 0.98), hi = uniform_real(rng, lo, 0.99);
      CHECK((binarize(m, hi) <= binarize(m, lo)).all());
    }
  }

  TEST_CASE("checkpoint round trip is exact") {
    test::TempDir dir("ckpt");
    NetworkConfig net;
    net.q_order = 5;
    const NetworkParams p = build_network(net, 12);
    save_checkpoint(to_checkpoint(p, {{"note", "x"}}), dir / "a.casr");
    const Checkpoint c = load_checkpoint(dir / "a.casr");
    CHECK(c.metadata["note"] == "x");
    const NetworkParams q = from_checkpoint(c);
    CHECK(q.cfg.q_order == 5);
    CHECK(flatten(q) == flatten(p));

    std::ofstream(dir / "bad.casr") << "NOTACKPT";
    CHECK_THROWS_AS(load_checkpoint(dir / "bad.casr"), IoError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.casr"), IoError);
  }
}
