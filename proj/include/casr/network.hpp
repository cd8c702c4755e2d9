#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "casr/layers.hpp"
#include "casr/ops.hpp"

namespace casr {

struct NetworkConfig {
  int in_channels = 2;
  int levels = 3;
  int base_channels = 8;
  int q_order = 3;
  Activation decoder_activation = Activation::tanh;
  Activation encoder_activation = Activation::relu;

  /// Channel width at resolution level i (i == levels is the bottleneck).
  int width(int level) const { return base_channels << level; }
  void validate() const;
};

/// Encoder-decoder parameters. Encoder level i holds two 3x3 convolutions
/// (indices 2i, 2i+1), the bottleneck two more, decoder block j (deepest
/// first) two 3x3 Self-ONN layers, and the head a 1x1 convolution.
struct NetworkParams {
  NetworkConfig cfg;
  std::vector<Conv2DLayer<double>> encoder;
  std::vector<Conv2DLayer<double>> bottleneck;
  std::vector<SelfOnnConv2D<double>> decoder;
  Conv2DLayer<double> head;

  Index parameter_count() const;

  /// Visits every parameter array in the fixed architecture order as
  /// (name, data pointer, length).
  template <typename F>
  void for_each_parameter(F&& f);
  template <typename F>
  void for_each_parameter(F&& f) const;

  /// Same architecture with all parameters zero (gradient accumulators).
  NetworkParams zeros_like() const;
};

/// Closed-form parameter count for a configuration.
Index expected_parameter_count(const NetworkConfig& cfg);

NetworkParams build_network(const NetworkConfig& cfg, std::uint64_t seed);

/// Intermediate activations recorded by the forward pass.
struct ForwardCache {
  // Per conv layer: its input and its pre-activation output.
  std::vector<Tensor<double>> enc_in, enc_pre, enc_act;
  std::vector<Tensor<double>> bot_in, bot_pre, bot_act;
  std::vector<Tensor<double>> dec_in, dec_pre, dec_act;
  std::vector<Tensor<double>> skips;  // encoder outputs per level, before pooling
  Tensor<double> head_in, head_pre, prob;
};

Tensor<double> forward(const NetworkParams& params, const Tensor<double>& batch);
Tensor<double> forward(const NetworkParams& params, const Tensor<double>& batch, ForwardCache& cache);

/// Backpropagates dL/dprob through the cached forward pass. Returns parameter
/// gradients shaped like `params`; the input gradient is written to
/// `grad_input` when non-null.
NetworkParams backward(const NetworkParams& params, const ForwardCache& cache, const Tensor<double>& grad_prob,
                       Tensor<double>* grad_input = nullptr);

// ---------------------------------------------------------------------------

template <typename F>
void NetworkParams::for_each_parameter(F&& f) {
  auto visit = [&](const std::string& name, auto& layer) {
    f(name + ".weight", layer.weights.data(), layer.weights.size());
    f(name + ".bias", layer.bias.data(), layer.bias.size());
  };
  for (std::size_t i = 0; i < encoder.size(); ++i) visit("encoder." + std::to_string(i), encoder[i]);
  for (std::size_t i = 0; i < bottleneck.size(); ++i) visit("bottleneck." + std::to_string(i), bottleneck[i]);
  for (std::size_t i = 0; i < decoder.size(); ++i) visit("decoder." + std::to_string(i), decoder[i]);
  visit("head", head);
}

template <typename F>
void NetworkParams::for_each_parameter(F&& f) const {
  const_cast<NetworkParams*>(this)->for_each_parameter(
      [&](const std::string& name, double* data, Index n) { f(name, static_cast<const double*>(data), n); });
}

}  // namespace casr
