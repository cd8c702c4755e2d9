#include "casr/network.hpp"

#include <cmath>
#include <random>

namespace casr {

void NetworkConfig::validate() const {
  require(in_channels >= 1, "NetworkConfig: in_channels must be >= 1");
  require(levels >= 1, "NetworkConfig: levels must be >= 1");
  require(base_channels >= 1, "NetworkConfig: base_channels must be >= 1");
  require(q_order >= 1, "NetworkConfig: q_order must be >= 1");
  require(levels <= 8, "NetworkConfig: levels must be <= 8");
}

Index NetworkParams::parameter_count() const {
  Index total = 0;
  for_each_parameter([&](const std::string&, const double*, Index n) { total += n; });
  return total;
}

NetworkParams NetworkParams::zeros_like() const {
  NetworkParams z = *this;
  z.for_each_parameter([](const std::string&, double* data, Index n) { std::fill_n(data, n, 0.0); });
  return z;
}

Index expected_parameter_count(const NetworkConfig& cfg) {
  auto conv = [](Index in, Index out, Index k, Index q) { return (in * k * k * q + 1) * out; };
  Index total = 0;
  Index prev = cfg.in_channels;
  for (int l = 0; l < cfg.levels; ++l) {
    total += conv(prev, cfg.width(l), 3, 1) + conv(cfg.width(l), cfg.width(l), 3, 1);
    prev = cfg.width(l);
  }
  total += conv(prev, cfg.width(cfg.levels), 3, 1) + conv(cfg.width(cfg.levels), cfg.width(cfg.levels), 3, 1);
  for (int l = cfg.levels - 1; l >= 0; --l) {
    total += conv(cfg.width(l + 1) + cfg.width(l), cfg.width(l), 3, cfg.q_order) +
             conv(cfg.width(l), cfg.width(l), 3, cfg.q_order);
  }
  total += conv(cfg.width(0), 1, 1, 1);
  return total;
}

namespace {

// Weights uniform in [-s, s], s = gain / sqrt(fan_in * Q), so the variance is gain^2 / (3 fan_in Q).
template <typename Layer>
void init_scaled(Layer& layer, int q_order, double gain, std::mt19937_64& rng) {
  const double s = gain / std::sqrt(static_cast<double>(layer.geom.taps()) * q_order);
  for (Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = uniform_real(rng, -s, s);
  layer.bias.setZero();
}

// Power-k weights shrink by 1/k!, like Taylor coefficients, so inputs above
// 1 (the decoder sees unbounded ReLU skips) do not saturate tanh at init.
void init_selfonn(SelfOnnConv2D<double>& layer, double gain, std::mt19937_64& rng) {
  init_scaled(layer, layer.q_order, gain, rng);
  double factorial = 1;
  for (int q = 1; q <= layer.q_order; ++q) {
    factorial *= q;
    for (Index c = q - 1; c < layer.weights.cols(); c += layer.q_order) layer.weights.col(c) /= factorial;
  }
}

}  // namespace

NetworkParams build_network(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  NetworkParams p;
  p.cfg = cfg;
  auto conv3 = [](Index in, Index out) { return ConvGeometry{in, out, 3, 3, 1, 1}; };

  Index prev = cfg.in_channels;
  for (int l = 0; l < cfg.levels; ++l) {
    p.encoder.emplace_back(conv3(prev, cfg.width(l)));
    p.encoder.emplace_back(conv3(cfg.width(l), cfg.width(l)));
    prev = cfg.width(l);
  }
  p.bottleneck.emplace_back(conv3(prev, cfg.width(cfg.levels)));
  p.bottleneck.emplace_back(conv3(cfg.width(cfg.levels), cfg.width(cfg.levels)));
  for (int l = cfg.levels - 1; l >= 0; --l) {
    p.decoder.emplace_back(conv3(cfg.width(l + 1) + cfg.width(l), cfg.width(l)), cfg.q_order);
    p.decoder.emplace_back(conv3(cfg.width(l), cfg.width(l)), cfg.q_order);
  }
  p.head = Conv2DLayer<double>(ConvGeometry{cfg.width(0), 1, 1, 1, 0, 1});

  // Variance-preserving bounds: He for the ReLU encoder, LeCun for the tanh
  // decoder and the head. Biases start at zero.
  for (auto& layer : p.encoder) init_scaled(layer, 1, std::sqrt(6.0), rng);
  for (auto& layer : p.bottleneck) init_scaled(layer, 1, std::sqrt(6.0), rng);
  for (auto& layer : p.decoder) init_selfonn(layer, std::sqrt(3.0), rng);
  init_scaled(p.head, 1, std::sqrt(3.0), rng);
  return p;
}

Tensor<double> forward(const NetworkParams& params, const Tensor<double>& batch) {
  ForwardCache cache;
  return forward(params, batch, cache);
}

Tensor<double> forward(const NetworkParams& params, const Tensor<double>& batch, ForwardCache& cache) {
  const auto& cfg = params.cfg;
  const Index div = Index{1} << cfg.levels;
  require(batch.c() == cfg.in_channels, "forward: batch has " + std::to_string(batch.c()) + " channels, network expects " +
                                            std::to_string(cfg.in_channels));
  require(batch.h() % div == 0 && batch.w() % div == 0,
          "forward: H and W must be divisible by " + std::to_string(div) + ", got " + to_string(batch.shape()));
  cache = ForwardCache{};

  auto conv_block = [](const auto& layer, Activation act, const Tensor<double>& x, auto& ins, auto& pres,
                       auto& acts, auto&& fwd) {
    ins.push_back(x);
    pres.push_back(fwd(layer, x));
    acts.push_back(activation_forward(act, pres.back()));
    return acts.back();
  };
  auto conv_fwd = [](const Conv2DLayer<double>& l, const Tensor<double>& x) { return conv2d_forward(l, x); };
  auto onn_fwd = [](const SelfOnnConv2D<double>& l, const Tensor<double>& x) { return selfonn_forward(l, x); };

  Tensor<double> x = batch;
  for (int l = 0; l < cfg.levels; ++l) {
    x = conv_block(params.encoder[2 * l], cfg.encoder_activation, x, cache.enc_in, cache.enc_pre, cache.enc_act,
                   conv_fwd);
    x = conv_block(params.encoder[2 * l + 1], cfg.encoder_activation, x, cache.enc_in, cache.enc_pre,
                   cache.enc_act, conv_fwd);
    cache.skips.push_back(x);
    x = avgpool2_forward(x);
  }
  for (int b = 0; b < 2; ++b)
    x = conv_block(params.bottleneck[b], cfg.encoder_activation, x, cache.bot_in, cache.bot_pre, cache.bot_act,
                   conv_fwd);
  for (int j = 0; j < cfg.levels; ++j) {
    const int level = cfg.levels - 1 - j;
    x = concat_channels(upsample2_forward(x), cache.skips[level]);
    x = conv_block(params.decoder[2 * j], cfg.decoder_activation, x, cache.dec_in, cache.dec_pre, cache.dec_act,
                   onn_fwd);
    x = conv_block(params.decoder[2 * j + 1], cfg.decoder_activation, x, cache.dec_in, cache.dec_pre,
                   cache.dec_act, onn_fwd);
  }
  cache.head_in = x;
  cache.head_pre = conv2d_forward(params.head, x);
  cache.prob = activation_forward(Activation::sigmoid, cache.head_pre);
  return cache.prob;
}

NetworkParams backward(const NetworkParams& params, const ForwardCache& cache, const Tensor<double>& grad_prob,
                       Tensor<double>* grad_input) {
  const auto& cfg = params.cfg;
  require(grad_prob.shape() == cache.prob.shape(), "backward: gradient shape does not match forward output");
  NetworkParams grads = params.zeros_like();

  auto store = [](auto& dst, auto&& g) {
    dst.weights = std::move(g.weights);
    dst.bias = std::move(g.bias);
    return std::move(g.input);
  };

  Tensor<double> g = activation_backward(Activation::sigmoid, cache.head_pre, cache.prob, grad_prob);
  g = store(grads.head, conv2d_backward(params.head, cache.head_in, g));

  std::vector<Tensor<double>> skip_grads(static_cast<std::size_t>(cfg.levels));
  for (int j = cfg.levels - 1; j >= 0; --j) {
    const int level = cfg.levels - 1 - j;
    for (int k = 1; k >= 0; --k) {
      const auto idx = static_cast<std::size_t>(2 * j + k);
      g = activation_backward(cfg.decoder_activation, cache.dec_pre[idx], cache.dec_act[idx], g);
      g = store(grads.decoder[idx], selfonn_backward(params.decoder[idx], cache.dec_in[idx], g));
    }
    const Index boundary = cache.dec_in[static_cast<std::size_t>(2 * j)].c() - cache.skips[level].c();
    auto [g_up, g_skip] = concat_channels_backward(g, boundary);
    skip_grads[level] = std::move(g_skip);
    g = upsample2_backward(g_up);
  }
  for (int b = 1; b >= 0; --b) {
    g = activation_backward(cfg.encoder_activation, cache.bot_pre[b], cache.bot_act[b], g);
    g = store(grads.bottleneck[b], conv2d_backward(params.bottleneck[b], cache.bot_in[b], g));
  }
  for (int l = cfg.levels - 1; l >= 0; --l) {
    g = avgpool2_backward(cache.skips[l].shape(), g);
    g.values() += skip_grads[l].values();
    for (int k = 1; k >= 0; --k) {
      const auto idx = static_cast<std::size_t>(2 * l + k);
      g = activation_backward(cfg.encoder_activation, cache.enc_pre[idx], cache.enc_act[idx], g);
      g = store(grads.encoder[idx], conv2d_backward(params.encoder[idx], cache.enc_in[idx], g));
    }
  }
  if (grad_input) *grad_input = std::move(g);
  return grads;
}

}  // namespace casr
