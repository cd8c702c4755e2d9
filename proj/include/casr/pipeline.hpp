#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "casr/config.hpp"
#include "casr/dataset.hpp"
#include "casr/metrics.hpp"
#include "casr/phantom.hpp"
#include "casr/train.hpp"

namespace casr {

/// Seed streams derived from the run seed.
enum class SeedStream : std::uint64_t { network = 1, shuffle = 2, split = 3, augment = 4, phantom = 5 };
std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream);

struct LabeledImage {
  std::string id;
  MultiChannelImage image;
  BinaryMask mask;
};

/// Id of the i-th synthesized phantom ("phantom_0007").
std::string phantom_id(int index);

/// `count` phantoms, the i-th drawn with seed derive_seed(stream_seed(seed, phantom), i).
std::vector<Phantom> synth_phantoms(const PhantomSpec& spec, int count, std::uint64_t seed);

/// Writes `<root>/images/<id>.png` and `<root>/masks/<id>.png`.
void synth_dataset(const std::filesystem::path& root, const PhantomSpec& spec, int count, std::uint64_t seed);

/// Enhances raw frames with the given channel mode.
std::vector<LabeledImage> preprocess_items(const std::vector<std::string>& ids, const std::vector<GrayImage>& raw,
                                           const std::vector<BinaryMask>& masks, ChannelMode mode,
                                           const PreprocessConfig& cfg);

/// Preprocesses `<in>/images` into multichannel PNGs under `<out>/images`
/// and copies `<in>/masks` (when present) to `<out>/masks`.
void preprocess_dataset(const std::filesystem::path& in_root, const std::filesystem::path& out_root, ChannelMode mode,
                        const PreprocessConfig& cfg);

/// Loads an indexed dataset, checking plane count and mask dimensions.
std::vector<LabeledImage> load_labeled(const DatasetIndex& index, int expected_channels);

struct TrainRun {
  FoldSplit split;
  TrainResult result;
};

/// Splits into folds, trains on all folds except the test and validation
/// folds, and selects the best epoch by validation loss. Every training mask
/// must be nonempty.
TrainRun train_run(const std::vector<LabeledImage>& data, const RunConfig& cfg);

/// Contour filtering and/or gap patching as configured.
BinaryMask refine_mask(const BinaryMask& mask, const RefineConfig& cfg);

struct Evaluation {
  std::vector<std::string> ids;
  std::vector<FloatImage> probabilities;
  std::vector<BinaryMask> predictions;  // after refinement
  std::vector<EvalRow> rows;
  MetricReport pooled;
};

/// Predicts, binarizes, refines, and scores the given items.
Evaluation evaluate_items(const NetworkParams& params, const std::vector<LabeledImage>& data,
                          const std::vector<std::size_t>& which, const RunConfig& cfg);

struct Experiment {
  TrainRun run;
  Evaluation test;
};

/// train_run followed by evaluation on the held-out test fold.
Experiment run_experiment(const std::vector<LabeledImage>& data, const RunConfig& cfg);

/// Writes config.json, checkpoint.casr, history.csv, and folds.csv into `dir`.
void write_train_outputs(const std::filesystem::path& dir, const RunConfig& cfg, const std::vector<LabeledImage>& data,
                         const TrainRun& run);

/// Writes prob/<id>.png, masks/<id>.png and, when ground truth is given,
/// overlay/<id>.png.
void write_predictions(const std::filesystem::path& dir, const std::vector<std::string>& ids,
                       const std::vector<FloatImage>& probabilities, const std::vector<BinaryMask>& masks,
                       const std::vector<BinaryMask>* gt = nullptr);

/// Probability map to 8 bits (p * 255, rounded).
GrayImage probability_to_gray(const FloatImage& prob);

/// Scores `<pred_dir>/<id>.png` against `<gt_dir>/<id>.png` for every id in pred_dir.
std::vector<EvalRow> evaluate_directories(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir);

struct AblationEntry {
  std::string axis;     // "q_order", "loss", or "channels"
  std::string variant;  // e.g. "3", "dice", "multi"
  MetricReport pooled;
  int epochs = 0;
};

/// One-factor-at-a-time sweep around `base` over the requested axes, sharing
/// the baseline run. Raw frames are preprocessed per channel mode.
std::vector<AblationEntry> run_ablation(const std::vector<std::string>& ids, const std::vector<GrayImage>& raw,
                                        const std::vector<BinaryMask>& masks, const RunConfig& base,
                                        const std::vector<std::string>& axes);

void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationEntry>& entries);

}  // namespace casr
