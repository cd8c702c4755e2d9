#include "casr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "casr/layers.hpp"
#include "casr/losses.hpp"
#include "casr/network.hpp"
#include "casr/ops.hpp"

namespace casr {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

namespace {

using T = Tensor<double>;

// Scalar probe L = sum(r * y) with fixed weights r, |r| in [0.5, 1], so dL/dy = r
// is never near zero. Finite differences are taken on the output difference
// y(x+h) - y(x-h) elementwise before weighting, which keeps unchanged outputs
// from contributing summation round-off.
struct Probe {
  T weights;
  double operator()(const T& y) const { return (weights.values() * y.values()).sum(); }
  double difference(const T& up, const T& down) const {
    return (weights.values() * (up.values() - down.values())).sum();
  }
};

T signed_tensor(const Shape4& s, std::mt19937_64& rng);

Probe make_probe(const Shape4& s, std::mt19937_64& rng) { return {signed_tensor(s, rng)}; }

// Compares analytic gradients to central differences of the probe for every
// entry of `vars`; `eval` recomputes the op output.
void check_entries(GradCheckResult& r, double* vars, const double* analytic, Index n, const Probe& probe,
                   const std::function<T()>& eval) {
  const double h = kFiniteDifferenceStep;
  for (Index i = 0; i < n; ++i) {
    const double saved = vars[i];
    vars[i] = saved + h;
    const T up = eval();
    vars[i] = saved - h;
    const T down = eval();
    vars[i] = saved;
    const double fd = probe.difference(up, down) / (2.0 * h);
    r.max_rel_error = std::max(r.max_rel_error, relative_error(fd, analytic[i]));
    ++r.checked;
  }
}

// Scalar-objective variant for the losses.
void check_entries(GradCheckResult& r, double* vars, const double* analytic, Index n,
                   const std::function<double()>& loss) {
  for (Index i = 0; i < n; ++i) {
    const double fd = central_difference(loss, vars[i], kFiniteDifferenceStep);
    r.max_rel_error = std::max(r.max_rel_error, relative_error(fd, analytic[i]));
    ++r.checked;
  }
}

// Entries with magnitude in [0.5, 1] and random sign; keeps high powers of the
// input away from zero so weight gradients stay above the round-off floor.
T signed_tensor(const Shape4& s, std::mt19937_64& rng) {
  T t(s);
  for (Index i = 0; i < t.size(); ++i) {
    const double mag = uniform_real(rng, 0.5, 1.0);
    t.values()[i] = uniform_real(rng, 0.0, 1.0) < 0.5 ? -mag : mag;
  }
  return t;
}

template <typename Layer, typename Fwd, typename Bwd>
GradCheckResult check_layer(const std::string& name, Layer layer, const Shape4& in_shape, Fwd fwd, Bwd bwd,
                            std::mt19937_64& rng) {
  GradCheckResult r{name, 0, 0.0, kOpTolerance};
  T x = signed_tensor(in_shape, rng);
  const T y = fwd(layer, x);
  const Probe probe = make_probe(y.shape(), rng);
  const auto g = bwd(layer, x, probe.weights);
  const std::function<T()> eval = [&] { return fwd(layer, x); };
  check_entries(r, layer.weights.data(), g.weights.data(), layer.weights.size(), probe, eval);
  check_entries(r, layer.bias.data(), g.bias.data(), layer.bias.size(), probe, eval);
  check_entries(r, x.data(), g.input.data(), x.size(), probe, eval);
  return r;
}

GradCheckResult check_activation(Activation kind, std::mt19937_64& rng) {
  GradCheckResult r{"activation." + to_string(kind), 0, 0.0, kOpTolerance};
  T x = random_tensor<double>({2, 3, 4, 4}, rng, -2.0, 2.0);
  // Keep relu inputs away from the kink so central differences are valid.
  for (Index i = 0; i < x.size(); ++i)
    if (std::abs(x.values()[i]) < 1e-2) x.values()[i] = 0.5;
  const Probe probe = make_probe(x.shape(), rng);
  const T g = activation_backward(kind, x, probe.weights);
  check_entries(r, x.data(), g.data(), x.size(), probe, [&] { return activation_forward(kind, x); });
  return r;
}

GradCheckResult check_avgpool(std::mt19937_64& rng) {
  GradCheckResult r{"avgpool2", 0, 0.0, kOpTolerance};
  T x = random_tensor<double>({2, 2, 4, 6}, rng);
  const Probe probe = make_probe({2, 2, 2, 3}, rng);
  const T g = avgpool2_backward(x.shape(), probe.weights);
  check_entries(r, x.data(), g.data(), x.size(), probe, [&] { return avgpool2_forward(x); });
  return r;
}

GradCheckResult check_upsample(std::mt19937_64& rng) {
  GradCheckResult r{"upsample2", 0, 0.0, kOpTolerance};
  T x = random_tensor<double>({2, 2, 3, 2}, rng);
  const Probe probe = make_probe({2, 2, 6, 4}, rng);
  const T g = upsample2_backward(probe.weights);
  check_entries(r, x.data(), g.data(), x.size(), probe, [&] { return upsample2_forward(x); });
  return r;
}

GradCheckResult check_concat(std::mt19937_64& rng) {
  GradCheckResult r{"concat_channels", 0, 0.0, kOpTolerance};
  T a = random_tensor<double>({2, 2, 3, 3}, rng);
  T b = random_tensor<double>({2, 3, 3, 3}, rng);
  const Probe probe = make_probe({2, 5, 3, 3}, rng);
  const auto [ga, gb] = concat_channels_backward(probe.weights, a.c());
  const std::function<T()> eval = [&] { return concat_channels(a, b); };
  check_entries(r, a.data(), ga.data(), a.size(), probe, eval);
  check_entries(r, b.data(), gb.data(), b.size(), probe, eval);
  return r;
}

GradCheckResult check_loss(LossKind kind, std::mt19937_64& rng) {
  GradCheckResult r{"loss." + to_string(kind), 0, 0.0, kOpTolerance};
  T pred = random_tensor<double>({2, 1, 4, 4}, rng, 0.05, 0.95);
  T target(pred.shape());
  for (Index i = 0; i < target.size(); ++i) target.values()[i] = uniform_real(rng, 0.0, 1.0) < 0.4 ? 1.0 : 0.0;
  const auto res = compute_loss(kind, pred, target);
  check_entries(r, pred.data(), res.grad.data(), pred.size(), [&] { return compute_loss(kind, pred, target).value; });
  return r;
}

GradCheckResult check_network(std::mt19937_64& rng) {
  GradCheckResult r{"network.default_8x8", 0, 0.0, kNetworkTolerance};
  NetworkConfig cfg;
  NetworkParams params = build_network(cfg, rng());
  T x = random_tensor<double>({1, cfg.in_channels, 8, 8}, rng, 0.0, 1.0);

  // The probe on the network output keeps directional derivatives well above
  // the round-off floor; the loss chain itself is verified separately.
  ForwardCache cache;
  const auto pred = forward(params, x, cache);
  const Probe probe = make_probe(pred.shape(), rng);
  T grad_x;
  const NetworkParams grads = backward(params, cache, probe.weights, &grad_x);
  std::vector<const double*> g_blocks;
  grads.for_each_parameter([&](const std::string&, const double* d, Index) { g_blocks.push_back(d); });

  // Jacobian-vector products: directional derivatives along random directions
  // over all parameters, over the input, and over both jointly.
  // A direction whose +-h step flips any ReLU pre-activation sign straddles a
  // kink, where central differences are meaningless; such draws are redrawn.
  auto relu_pattern = [&](const NetworkParams& p, const T& input) {
    ForwardCache c;
    forward(p, input, c);
    std::vector<bool> pattern;
    for (const auto* group : {&c.enc_pre, &c.bot_pre})
      for (const auto& t : *group)
        for (Index i = 0; i < t.size(); ++i) pattern.push_back(t.values()[i] > 0.0);
    return pattern;
  };

  r.required = 6;
  int accepted = 0;
  for (int attempt = 0; accepted < 6 && attempt < 60; ++attempt) {
    const int d = accepted;
    const bool move_params = d != 2 && d != 3;
    const bool move_input = d >= 2;
    std::vector<std::vector<double>> dir;
    double norm2 = 0.0;
    params.for_each_parameter([&](const std::string&, double*, Index n) {
      std::vector<double> v(static_cast<std::size_t>(n), 0.0);
      if (move_params)
        for (auto& e : v) {
          e = uniform_real(rng, -1.0, 1.0);
          norm2 += e * e;
        }
      dir.push_back(std::move(v));
    });
    T x_dir(x.shape());
    if (move_input) {
      x_dir = random_tensor<double>(x.shape(), rng);
      norm2 += x_dir.values().square().sum();
    }
    // Unit-length directions keep the +-h step small in every coordinate.
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : dir)
      for (auto& e : v) e *= inv;
    x_dir.values() *= inv;
    double analytic = (grad_x.values() * x_dir.values()).sum();
    double g_norm2 = move_input ? grad_x.values().square().sum() : 0.0;
    double moved = move_input ? static_cast<double>(x.size()) : 0.0;
    for (std::size_t b = 0; b < dir.size(); ++b) {
      for (std::size_t i = 0; i < dir[b].size(); ++i) analytic += g_blocks[b][i] * dir[b][i];
      if (move_params) {
        for (std::size_t i = 0; i < dir[b].size(); ++i) g_norm2 += g_blocks[b][i] * g_blocks[b][i];
        moved += static_cast<double>(dir[b].size());
      }
    }
    // A random unit direction typically yields |g|/sqrt(n); draws far below
    // that are nearly orthogonal to the gradient and sit at the round-off floor.
    if (std::abs(analytic) < 0.1 * std::sqrt(g_norm2 / moved)) continue;

    auto moved_params = [&](double t) {
      NetworkParams moved = params;
      std::size_t j = 0;
      moved.for_each_parameter([&](const std::string&, double* p, Index n) {
        for (Index i = 0; i < n; ++i) p[i] += t * dir[j][static_cast<std::size_t>(i)];
        ++j;
      });
      return moved;
    };
    auto moved_input = [&](double t) {
      T moved_x = x;
      moved_x.values() += t * x_dir.values();
      return moved_x;
    };
    const double eps = kFiniteDifferenceStep;
    if (relu_pattern(moved_params(eps), moved_input(eps)) != relu_pattern(moved_params(-eps), moved_input(-eps))) {
      continue;
    }
    auto shifted = [&](double t) { return forward(moved_params(t), moved_input(t)); };
    const double fd = probe.difference(shifted(eps), shifted(-eps)) / (2.0 * eps);
    r.max_rel_error = std::max(r.max_rel_error, relative_error(fd, analytic));
    ++r.checked;
    ++accepted;
  }
  return r;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> out;

  {
    Conv2DLayer<double> conv(ConvGeometry{2, 3, 3, 3, 1, 1});
    init_uniform(conv, rng);
    out.push_back(check_layer(
        "conv2d", conv, {2, 2, 5, 5},
        [](const auto& l, const T& x) { return conv2d_forward(l, x); },
        [](const auto& l, const T& x, const T& g) { return conv2d_backward(l, x, g); }, rng));
  }
  for (int q : {1, 3, 5, 7}) {
    SelfOnnConv2D<double> onn(ConvGeometry{2, 2, 3, 3, 1, 1}, q);
    init_uniform(onn, rng);
    out.push_back(check_layer(
        "selfonn.q" + std::to_string(q), onn, {1, 2, 4, 4},
        [](const auto& l, const T& x) { return selfonn_forward(l, x); },
        [](const auto& l, const T& x, const T& g) { return selfonn_backward(l, x, g); }, rng));
  }
  for (Activation a : {Activation::tanh, Activation::relu, Activation::sigmoid}) out.push_back(check_activation(a, rng));
  out.push_back(check_avgpool(rng));
  out.push_back(check_upsample(rng));
  out.push_back(check_concat(rng));
  out.push_back(check_loss(LossKind::bce, rng));
  out.push_back(check_loss(LossKind::dice, rng));
  out.push_back(check_loss(LossKind::compound, rng));
  out.push_back(check_network(rng));
  return out;
}

}  // namespace casr
