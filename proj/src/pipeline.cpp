#include "casr/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "casr/augment.hpp"
#include "casr/checkpoint.hpp"
#include "casr/error.hpp"
#include "casr/image_io.hpp"
#include "casr/overlay.hpp"
#include "casr/random.hpp"

namespace casr {

namespace fs = std::filesystem;

std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream) {
  return derive_seed(seed, static_cast<std::uint64_t>(stream));
}

std::string phantom_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "phantom_%04d", index);
  return buf;
}

std::vector<Phantom> synth_phantoms(const PhantomSpec& spec, int count, std::uint64_t seed) {
  require(count >= 1, "synth: count must be >= 1");
  const std::uint64_t base = stream_seed(seed, SeedStream::phantom);
  std::vector<Phantom> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    PhantomSpec s = spec;
    s.seed = derive_seed(base, static_cast<std::uint64_t>(i));
    out.push_back(synth_phantom(s));
  }
  return out;
}

void synth_dataset(const fs::path& root, const PhantomSpec& spec, int count, std::uint64_t seed) {
  const auto phantoms = synth_phantoms(spec, count, seed);
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  for (int i = 0; i < count; ++i) {
    const std::string id = phantom_id(i);
    save_image(phantoms[static_cast<std::size_t>(i)].image, root / "images" / (id + ".png"));
    save_image(phantoms[static_cast<std::size_t>(i)].mask, root / "masks" / (id + ".png"));
  }
}

std::vector<LabeledImage> preprocess_items(const std::vector<std::string>& ids, const std::vector<GrayImage>& raw,
                                           const std::vector<BinaryMask>& masks, ChannelMode mode,
                                           const PreprocessConfig& cfg) {
  require(ids.size() == raw.size() && raw.size() == masks.size(), "preprocess: ids, images, and masks differ in count");
  std::vector<LabeledImage> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    require(same_size(raw[i], masks[i]), "preprocess: mask dimensions differ for " + ids[i]);
    out.push_back({ids[i], preprocess_image(raw[i], mode, cfg), masks[i]});
  }
  return out;
}

void preprocess_dataset(const fs::path& in_root, const fs::path& out_root, ChannelMode mode,
                        const PreprocessConfig& cfg) {
  const auto ids = list_png_ids(in_root / "images");
  fs::create_directories(out_root / "images");
  const bool has_masks = fs::is_directory(in_root / "masks");
  if (has_masks) fs::create_directories(out_root / "masks");
  for (const auto& id : ids) {
    const GrayImage img = load_image(in_root / "images" / (id + ".png"));
    save_image(preprocess_image(img, mode, cfg), out_root / "images" / (id + ".png"));
    const fs::path mask = in_root / "masks" / (id + ".png");
    if (has_masks && fs::exists(mask)) {
      const GrayImage m = load_image(mask);
      if (!same_size(m, img)) throw IoError("mask dimensions differ for " + id);
      save_image(gray_to_mask(m), out_root / "masks" / (id + ".png"));
    }
  }
}

std::vector<LabeledImage> load_labeled(const DatasetIndex& index, int expected_channels) {
  std::vector<LabeledImage> out;
  out.reserve(index.size());
  for (const auto& item : index.items) {
    MultiChannelImage img = load_multichannel(item.image);
    if (img.channels() != expected_channels)
      throw ContractError(item.id + ": image has " + std::to_string(img.channels()) + " channel(s), expected " +
                          std::to_string(expected_channels));
    BinaryMask mask = gray_to_mask(load_image(item.mask));
    if (!same_size(mask, img.planes.front())) throw IoError("mask dimensions differ for " + item.id);
    out.push_back({item.id, std::move(img), std::move(mask)});
  }
  return out;
}

namespace {

Sample to_sample(const MultiChannelImage& img, const BinaryMask& mask) {
  return {to_input_tensor(img), to_target_tensor(mask)};
}

std::vector<Sample> to_samples(const std::vector<LabeledImage>& data, const std::vector<std::size_t>& which) {
  std::vector<Sample> out;
  out.reserve(which.size());
  for (std::size_t i : which) out.push_back(to_sample(data[i].image, data[i].mask));
  return out;
}

}  // namespace

TrainRun train_run(const std::vector<LabeledImage>& data, const RunConfig& cfg) {
  cfg.validate();
  require(data.size() >= static_cast<std::size_t>(cfg.split.k), "train: fewer items than folds");
  for (const auto& item : data)
    require(item.image.channels() == cfg.network.in_channels,
            "train: " + item.id + " has " + std::to_string(item.image.channels()) + " channel(s), network expects " +
                std::to_string(cfg.network.in_channels));

  TrainRun run{kfold_split(data.size(), cfg.split.k, stream_seed(cfg.seed, SeedStream::split)), {}};
  const auto val_idx = run.split.members(cfg.split.val_fold());
  const auto train_idx = run.split.complement({cfg.split.test_fold, cfg.split.val_fold()});
  require(!train_idx.empty(), "train: no training folds remain after holding out test and validation");
  for (std::size_t i : train_idx)
    require(data[i].mask.any(), "train: training mask " + data[i].id + " is empty (Dice is undefined)");

  std::vector<Sample> train_set;
  EpochView view;
  switch (cfg.augment_policy) {
    case AugmentPolicy::none:
      train_set = to_samples(data, train_idx);
      break;
    case AugmentPolicy::expand:
      for (std::size_t i : train_idx)
        for (const auto& [img, mask] : augment(data[i].image, data[i].mask, cfg.augment))
          train_set.push_back(to_sample(img, mask));
      break;
    case AugmentPolicy::sample: {
      require(cfg.augment.count() > 0, "train: augmentation spec has no transforms");
      train_set = to_samples(data, train_idx);
      const std::uint64_t base = stream_seed(cfg.seed, SeedStream::augment);
      view = [&data, train_idx, &cfg, base](const std::vector<Sample>&, int epoch) {
        std::mt19937_64 rng(derive_seed(base, static_cast<std::uint64_t>(epoch)));
        std::vector<Sample> out;
        out.reserve(train_idx.size());
        for (std::size_t i : train_idx) {
          const auto pick = uniform_index(rng, cfg.augment.count());
          const auto [img, mask] = augment_at(data[i].image, data[i].mask, cfg.augment, pick);
          out.push_back(to_sample(img, mask));
        }
        return out;
      };
      break;
    }
  }

  TrainConfig tc = cfg.train;
  tc.seed = stream_seed(cfg.seed, SeedStream::shuffle);
  const NetworkParams init = build_network(cfg.network, stream_seed(cfg.seed, SeedStream::network));
  run.result = train(init, train_set, to_samples(data, val_idx), tc, view);
  return run;
}

BinaryMask refine_mask(const BinaryMask& mask, const RefineConfig& cfg) {
  BinaryMask out = mask;
  if (cfg.mode == RefineMode::contour || cfg.mode == RefineMode::both) out = contour_refine(out, cfg.area_threshold);
  if (cfg.mode == RefineMode::patch || cfg.mode == RefineMode::both) out = patch_lines(out, cfg.patch);
  return out;
}

Evaluation evaluate_items(const NetworkParams& params, const std::vector<LabeledImage>& data,
                          const std::vector<std::size_t>& which, const RunConfig& cfg) {
  require(!which.empty(), "evaluate: no items selected");
  Evaluation ev;
  for (std::size_t i : which) {
    const auto& item = data[i];
    FloatImage prob = predict(params, item.image);
    BinaryMask pred = refine_mask(binarize(prob, cfg.threshold), cfg.refine);
    ev.rows.push_back(evaluate_pair(item.id, pred, item.mask));
    ev.ids.push_back(item.id);
    ev.probabilities.push_back(std::move(prob));
    ev.predictions.push_back(std::move(pred));
  }
  ev.pooled = pooled_report(ev.rows);
  return ev;
}

Experiment run_experiment(const std::vector<LabeledImage>& data, const RunConfig& cfg) {
  Experiment ex{train_run(data, cfg), {}};
  ex.test = evaluate_items(ex.run.result.params, data, ex.run.split.members(cfg.split.test_fold), cfg);
  return ex;
}

void write_train_outputs(const fs::path& dir, const RunConfig& cfg, const std::vector<LabeledImage>& data,
                         const TrainRun& run) {
  fs::create_directories(dir);
  save_run_config(cfg, dir / "config.json");
  nlohmann::json meta = {{"seed", cfg.seed},
                         {"channels", to_string(cfg.channels)},
                         {"best_epoch", run.result.best_epoch},
                         {"epochs", run.result.history.size()}};
  save_checkpoint(to_checkpoint(run.result.params, meta), dir / "checkpoint.casr");
  write_history_csv(run.result.history, dir / "history.csv");
  std::vector<std::string> ids;
  for (const auto& item : data) ids.push_back(item.id);
  write_fold_csv(dir / "folds.csv", ids, run.split);
}

GrayImage probability_to_gray(const FloatImage& prob) { return quantize(prob * 255.0); }

void write_predictions(const fs::path& dir, const std::vector<std::string>& ids,
                       const std::vector<FloatImage>& probabilities, const std::vector<BinaryMask>& masks,
                       const std::vector<BinaryMask>* gt) {
  require(ids.size() == probabilities.size() && ids.size() == masks.size(), "write_predictions: count mismatch");
  require(gt == nullptr || gt->size() == ids.size(), "write_predictions: ground-truth count mismatch");
  fs::create_directories(dir / "prob");
  fs::create_directories(dir / "masks");
  if (gt) fs::create_directories(dir / "overlay");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    save_image(probability_to_gray(probabilities[i]), dir / "prob" / (ids[i] + ".png"));
    save_image(masks[i], dir / "masks" / (ids[i] + ".png"));
    if (gt) save_image(render_overlay(masks[i], (*gt)[i]), dir / "overlay" / (ids[i] + ".png"));
  }
}

std::vector<EvalRow> evaluate_directories(const fs::path& pred_dir, const fs::path& gt_dir) {
  std::vector<EvalRow> rows;
  for (const auto& id : list_png_ids(pred_dir)) {
    const fs::path gt_path = gt_dir / (id + ".png");
    if (!fs::exists(gt_path)) throw IoError("no ground truth for " + id + " in " + gt_dir.string());
    const BinaryMask pred = gray_to_mask(load_image(pred_dir / (id + ".png")));
    const BinaryMask gt = gray_to_mask(load_image(gt_path));
    if (!same_size(pred, gt)) throw ContractError("eval: dimension mismatch for " + id);
    rows.push_back(evaluate_pair(id, pred, gt));
  }
  if (rows.empty()) throw IoError("no predictions found in " + pred_dir.string());
  return rows;
}

std::vector<AblationEntry> run_ablation(const std::vector<std::string>& ids, const std::vector<GrayImage>& raw,
                                        const std::vector<BinaryMask>& masks, const RunConfig& base,
                                        const std::vector<std::string>& axes) {
  std::map<ChannelMode, std::vector<LabeledImage>> prepared;
  auto data_for = [&](ChannelMode mode) -> const std::vector<LabeledImage>& {
    auto it = prepared.find(mode);
    if (it == prepared.end()) it = prepared.emplace(mode, preprocess_items(ids, raw, masks, mode, base.preprocess)).first;
    return it->second;
  };
  // Runs are keyed by their full variant so the shared baseline trains once.
  std::map<std::string, std::pair<MetricReport, int>> cache;
  auto run = [&](const RunConfig& cfg) {
    const std::string key = to_json(cfg).dump();
    auto it = cache.find(key);
    if (it == cache.end()) {
      const Experiment ex = run_experiment(data_for(cfg.channels), cfg);
      it = cache.emplace(key, std::pair{ex.test.pooled, static_cast<int>(ex.run.result.history.size())}).first;
    }
    return it->second;
  };

  std::vector<AblationEntry> out;
  for (const auto& axis : axes) {
    if (axis == "q_order") {
      for (int q : {1, 3, 5, 7}) {
        RunConfig cfg = base;
        cfg.network.q_order = q;
        const auto [report, epochs] = run(cfg);
        out.push_back({axis, std::to_string(q), report, epochs});
      }
    } else if (axis == "loss") {
      for (LossKind k : {LossKind::bce, LossKind::dice, LossKind::compound}) {
        RunConfig cfg = base;
        cfg.train.loss = k;
        const auto [report, epochs] = run(cfg);
        out.push_back({axis, to_string(k), report, epochs});
      }
    } else if (axis == "channels") {
      for (ChannelMode m : {ChannelMode::original, ChannelMode::clahe, ChannelMode::ben_graham, ChannelMode::multi}) {
        RunConfig cfg = base;
        cfg.channels = m;
        cfg.network.in_channels = channel_count(m);
        const auto [report, epochs] = run(cfg);
        out.push_back({axis, to_string(m), report, epochs});
      }
    } else {
      throw ContractError("ablate: unknown axis '" + axis + "' (expected q_order, loss, channels)");
    }
  }
  return out;
}

void write_ablation_csv(const fs::path& path, const std::vector<AblationEntry>& entries) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "axis,variant,epochs,acc,iou,dsc,p,sn,sp,fnr,fpr,cldice\n";
  char buf[32];
  for (const auto& e : entries) {
    os << e.axis << ',' << e.variant << ',' << e.epochs;
    const MetricReport& r = e.pooled;
    for (double v : {r.acc, r.iou, r.dsc, r.precision, r.sensitivity, r.specificity, r.fnr, r.fpr, r.cl_dice}) {
      std::snprintf(buf, sizeof buf, ",%.2f", to_percent(v));
      os << buf;
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace casr
