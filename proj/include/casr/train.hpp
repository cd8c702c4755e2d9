#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "casr/image.hpp"
#include "casr/losses.hpp"
#include "casr/network.hpp"

namespace casr {

struct TrainConfig {
  int batch_size = 16;
  double learning_rate = 1e-4;
  int max_epochs = 200;
  double lr_drop_factor = 0.2;
  int lr_patience_epochs = 5;
  int early_stop_epochs = 20;
  LossKind loss = LossKind::dice;
  std::uint64_t seed = 0;
  bool verbose = false;

  void validate() const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  NetworkParams m;
  NetworkParams v;

  explicit AdamState(const NetworkParams& params) : m(params.zeros_like()), v(params.zeros_like()) {}

  void update(NetworkParams& params, const NetworkParams& grads, double learning_rate);
};

/// Reduce-on-plateau learning-rate schedule combined with early stopping.
/// Epochs are 0-based; epoch 0 always sets the first best value. A drop fires
/// once `patience` consecutive epochs pass without strict improvement; the
/// run stops once `early_stop` such epochs accumulate since the best epoch.
class PlateauScheduler {
 public:
  struct Event {
    bool improved = false;
    bool dropped = false;
    bool stop = false;
  };

  PlateauScheduler(double learning_rate, double drop_factor, int patience, int early_stop)
      : lr_(learning_rate), drop_(drop_factor), patience_(patience), early_stop_(early_stop) {}

  Event observe(double val_loss);

  double learning_rate() const { return lr_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  double lr_;
  double drop_;
  int patience_;
  int early_stop_;
  double best_ = 0.0;
  int best_epoch_ = -1;
  int epoch_ = -1;
  int since_best_ = 0;
  int since_drop_ = 0;
};

/// One network input with its target, both shaped (1, C, H, W).
struct Sample {
  Tensor<double> input;
  Tensor<double> target;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  NetworkParams params;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

/// Optional per-epoch view of the training set (e.g. augmentation); receives
/// the epoch index and returns the samples to iterate that epoch.
using EpochView = std::function<std::vector<Sample>(const std::vector<Sample>&, int epoch)>;

TrainResult train(const NetworkParams& init, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const EpochView& view = {});

/// Mean loss over fixed sequential batches (no parameter update).
double evaluate_loss(const NetworkParams& params, const std::vector<Sample>& set, LossKind loss, int batch_size);

/// Stacks samples[first, last) along the batch axis.
Tensor<double> stack_inputs(const std::vector<Sample>& samples, std::size_t first, std::size_t last);
Tensor<double> stack_targets(const std::vector<Sample>& samples, std::size_t first, std::size_t last);

/// 8-bit planes scaled to [0, 1] as a (1, C, H, W) tensor.
Tensor<double> to_input_tensor(const MultiChannelImage& img);
Tensor<double> to_target_tensor(const BinaryMask& mask);

/// Reflect-pads to a multiple of 2^levels, runs the network, and crops back.
FloatImage predict(const NetworkParams& params, const MultiChannelImage& img);

/// Foreground iff prob >= threshold.
BinaryMask binarize(const FloatImage& prob, double threshold = 0.5);

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace casr
