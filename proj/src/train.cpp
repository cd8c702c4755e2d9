#include "casr/train.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>

namespace casr {

void TrainConfig::validate() const {
  require(batch_size > 0, "TrainConfig: batch_size must be positive");
  require(learning_rate > 0.0, "TrainConfig: learning_rate must be positive");
  require(max_epochs > 0, "TrainConfig: max_epochs must be positive");
  require(lr_drop_factor > 0.0 && lr_drop_factor < 1.0, "TrainConfig: lr_drop_factor must be in (0,1)");
  require(lr_patience_epochs > 0, "TrainConfig: lr_patience_epochs must be positive");
  require(early_stop_epochs > 0, "TrainConfig: early_stop_epochs must be positive");
}

void AdamState::update(NetworkParams& params, const NetworkParams& grads, double learning_rate) {
  ++step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  std::vector<const double*> g_ptrs;
  std::vector<double*> m_ptrs;
  std::vector<double*> v_ptrs;
  grads.for_each_parameter([&](const std::string&, const double* d, Index) { g_ptrs.push_back(d); });
  m.for_each_parameter([&](const std::string&, double* d, Index) { m_ptrs.push_back(d); });
  v.for_each_parameter([&](const std::string&, double* d, Index) { v_ptrs.push_back(d); });
  std::size_t k = 0;
  params.for_each_parameter([&](const std::string&, double* p, Index n) {
    const double* g = g_ptrs[k];
    double* mk = m_ptrs[k];
    double* vk = v_ptrs[k];
    for (Index i = 0; i < n; ++i) {
      mk[i] = beta1 * mk[i] + (1.0 - beta1) * g[i];
      vk[i] = beta2 * vk[i] + (1.0 - beta2) * g[i] * g[i];
      p[i] -= learning_rate * (mk[i] / c1) / (std::sqrt(vk[i] / c2) + epsilon);
    }
    ++k;
  });
}

PlateauScheduler::Event PlateauScheduler::observe(double val_loss) {
  ++epoch_;
  Event ev;
  if (best_epoch_ < 0 || val_loss < best_) {
    best_ = val_loss;
    best_epoch_ = epoch_;
    since_best_ = 0;
    since_drop_ = 0;
    ev.improved = true;
    return ev;
  }
  ++since_best_;
  ++since_drop_;
  if (since_best_ >= early_stop_) {
    ev.stop = true;
  } else if (since_drop_ >= patience_) {
    lr_ *= drop_;
    since_drop_ = 0;
    ev.dropped = true;
  }
  return ev;
}

namespace {

Tensor<double> stack(const std::vector<Sample>& samples, std::size_t first, std::size_t last, bool targets) {
  require(first < last && last <= samples.size(), "stack: bad range");
  const auto& proto = targets ? samples[first].target : samples[first].input;
  Tensor<double> out(static_cast<Index>(last - first), proto.c(), proto.h(), proto.w());
  const Index item = proto.c() * proto.h() * proto.w();
  for (std::size_t i = first; i < last; ++i) {
    const auto& t = targets ? samples[i].target : samples[i].input;
    require(t.c() == proto.c() && t.h() == proto.h() && t.w() == proto.w(), "stack: inconsistent sample shapes");
    std::copy_n(t.data(), item, out.data() + static_cast<Index>(i - first) * item);
  }
  return out;
}

}  // namespace

Tensor<double> stack_inputs(const std::vector<Sample>& samples, std::size_t first, std::size_t last) {
  return stack(samples, first, last, false);
}

Tensor<double> stack_targets(const std::vector<Sample>& samples, std::size_t first, std::size_t last) {
  return stack(samples, first, last, true);
}

double evaluate_loss(const NetworkParams& params, const std::vector<Sample>& set, LossKind loss, int batch_size) {
  require(!set.empty(), "evaluate_loss: empty set");
  double sum = 0.0;
  int batches = 0;
  for (std::size_t first = 0; first < set.size(); first += static_cast<std::size_t>(batch_size)) {
    const std::size_t last = std::min(set.size(), first + static_cast<std::size_t>(batch_size));
    const auto pred = forward(params, stack_inputs(set, first, last));
    sum += compute_loss(loss, pred, stack_targets(set, first, last)).value;
    ++batches;
  }
  return sum / batches;
}

TrainResult train(const NetworkParams& init, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const EpochView& view) {
  cfg.validate();
  require(!train_set.empty(), "train: empty training set");
  require(!val_set.empty(), "train: empty validation set");

  TrainResult result{init, {}, 0};
  NetworkParams params = init;
  AdamState adam(params);
  PlateauScheduler sched(cfg.learning_rate, cfg.lr_drop_factor, cfg.lr_patience_epochs, cfg.early_stop_epochs);
  std::mt19937_64 rng(cfg.seed);
  ForwardCache cache;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const std::vector<Sample> epoch_items = view ? view(train_set, epoch) : std::vector<Sample>{};
    const auto& items = view ? epoch_items : train_set;
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, rng);
    std::vector<Sample> shuffled;
    shuffled.reserve(items.size());
    for (auto i : order) shuffled.push_back(items[i]);

    const double lr = sched.learning_rate();
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t first = 0; first < shuffled.size(); first += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t last = std::min(shuffled.size(), first + static_cast<std::size_t>(cfg.batch_size));
      const auto pred = forward(params, stack_inputs(shuffled, first, last), cache);
      const auto loss = compute_loss(cfg.loss, pred, stack_targets(shuffled, first, last));
      if (!std::isfinite(loss.value)) throw ContractError("train: non-finite loss at epoch " + std::to_string(epoch));
      adam.update(params, backward(params, cache, loss.grad), lr);
      loss_sum += loss.value;
      ++batches;
    }
    const double val = evaluate_loss(params, val_set, cfg.loss, cfg.batch_size);
    result.history.push_back({epoch, loss_sum / batches, val, lr});
    const auto ev = sched.observe(val);
    if (cfg.verbose) {
      std::cerr << "epoch " << epoch << " train " << loss_sum / batches << " val " << val << " lr " << lr
                << (ev.improved ? " *" : "") << '\n';
    }
    if (ev.improved) {
      result.params = params;
      result.best_epoch = epoch;
    }
    if (ev.stop) break;
  }
  return result;
}

Tensor<double> to_input_tensor(const MultiChannelImage& img) {
  require(img.channels() >= 1, "to_input_tensor: no planes");
  Tensor<double> t(1, img.channels(), img.height(), img.width());
  for (int c = 0; c < img.channels(); ++c) {
    require(same_size(img.planes[c], img.planes[0]), "to_input_tensor: plane size mismatch");
    t.plane(0, c) = img.planes[c].cast<double>().matrix() / 255.0;
  }
  return t;
}

Tensor<double> to_target_tensor(const BinaryMask& mask) {
  Tensor<double> t(1, 1, mask.rows(), mask.cols());
  t.plane(0, 0) = mask.cast<double>().matrix();
  return t;
}

namespace {

Index reflect(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

}  // namespace

FloatImage predict(const NetworkParams& params, const MultiChannelImage& img) {
  const Tensor<double> x = to_input_tensor(img);
  const Index div = Index{1} << params.cfg.levels;
  const Index ph = (x.h() + div - 1) / div * div;
  const Index pw = (x.w() + div - 1) / div * div;
  Tensor<double> padded(1, x.c(), ph, pw);
  for (Index c = 0; c < x.c(); ++c)
    for (Index y = 0; y < ph; ++y)
      for (Index xx = 0; xx < pw; ++xx) padded(0, c, y, xx) = x(0, c, reflect(y, x.h()), reflect(xx, x.w()));
  const auto prob = forward(params, padded);
  return prob.plane(0, 0).block(0, 0, x.h(), x.w()).array();
}

BinaryMask binarize(const FloatImage& prob, double threshold) {
  require(threshold > 0.0 && threshold < 1.0, "binarize: threshold must be in (0,1)");
  return prob >= threshold;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_loss,val_loss,lr\n" << std::setprecision(17);
  for (const auto& r : history)
    out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.learning_rate << '\n';
}

}  // namespace casr
