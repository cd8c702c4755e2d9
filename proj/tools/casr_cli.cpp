// Command-line driver: synth -> preprocess -> train -> predict -> refine -> eval,
// plus split, gradcheck, and ablate.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "casr/checkpoint.hpp"
#include "casr/config.hpp"
#include "casr/error.hpp"
#include "casr/gradcheck.hpp"
#include "casr/image_io.hpp"
#include "casr/metrics.hpp"
#include "casr/pipeline.hpp"

namespace fs = std::filesystem;
using namespace casr;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;

  RunConfig load() const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_run_config(config);
    if (seed) {
      cfg.seed = *seed;
      cfg.train.seed = *seed;
    }
    return cfg;
  }
};

// Stage-1 flags shared by preprocess and ablate.
struct PreprocessFlags {
  std::string grid;
  std::optional<double> clip, canny_low, canny_high, crop_fraction, gray_offset;
  std::optional<int> closing_radius;

  void add(CLI::App* app) {
    app->add_option("--clahe-grid", grid, "CLAHE tile grid as WxH (default 4x4)");
    app->add_option("--clahe-clip", clip, "CLAHE normalized clip factor (default 8)");
    app->add_option("--canny-low", canny_low, "Canny low threshold (default 30)");
    app->add_option("--canny-high", canny_high, "Canny high threshold (default 90)");
    app->add_option("--closing-radius", closing_radius, "field-mask closing disk radius (default 5)");
    app->add_option("--crop-fraction", crop_fraction, "Ben Graham center-crop fraction (default 0.9)");
    app->add_option("--gray-offset", gray_offset, "Ben Graham gray offset (default 128)");
  }

  void apply(PreprocessConfig& p) const {
    if (!grid.empty()) {
      int w = 0, h = 0;
      char x = 0;
      std::istringstream is(grid);
      if (!(is >> w >> x >> h) || (x != 'x' && x != 'X') || w < 1 || h < 1)
        throw ContractError("--clahe-grid must look like 4x4");
      p.clahe.grid_w = w;
      p.clahe.grid_h = h;
    }
    if (clip) p.clahe.clip_factor = *clip;
    if (canny_low) p.ben_graham.canny_low = *canny_low;
    if (canny_high) p.ben_graham.canny_high = *canny_high;
    if (closing_radius) p.ben_graham.closing_radius = *closing_radius;
    if (crop_fraction) p.ben_graham.crop_fraction = *crop_fraction;
    if (gray_offset) p.ben_graham.gray_offset = *gray_offset;
  }
};

// Network/training flags shared by train and ablate.
struct TrainFlags {
  std::optional<int> epochs, batch, q, base, levels, test_fold, k;
  std::optional<double> lr;
  std::string loss, augment;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "maximum epochs");
    app->add_option("--batch", batch, "batch size");
    app->add_option("--lr", lr, "initial learning rate");
    app->add_option("--loss", loss, "bce | dice | compound");
    app->add_option("--q", q, "Self-ONN q-order");
    app->add_option("--base", base, "base channel width");
    app->add_option("--levels", levels, "encoder depth");
    app->add_option("--augment", augment, "augmentation policy: none | sample | expand");
    app->add_option("--k", k, "number of folds");
    app->add_option("--test-fold", test_fold, "held-out fold index");
  }

  void apply(RunConfig& cfg) const {
    if (epochs) cfg.train.max_epochs = *epochs;
    if (batch) cfg.train.batch_size = *batch;
    if (lr) cfg.train.learning_rate = *lr;
    if (!loss.empty()) cfg.train.loss = parse_loss(loss);
    if (q) cfg.network.q_order = *q;
    if (base) cfg.network.base_channels = *base;
    if (levels) cfg.network.levels = *levels;
    if (!augment.empty()) cfg.augment_policy = parse_augment_policy(augment);
    if (k) cfg.split.k = *k;
    if (test_fold) cfg.split.test_fold = *test_fold;
  }
};

std::vector<int> read_fold_csv(const fs::path& path, std::vector<std::string>& ids) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read fold file " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != "id,fold") throw IoError("fold file lacks the id,fold header: " + path.string());
  std::vector<int> folds;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw IoError("malformed fold row: " + line);
    ids.push_back(line.substr(0, comma));
    try {
      folds.push_back(std::stoi(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw IoError("malformed fold row: " + line);
    }
  }
  return folds;
}

void print_report(const std::string& label, const MetricReport& r) {
  std::cout << label << ": dsc " << to_percent(r.dsc) << " iou " << to_percent(r.iou) << " cldice "
            << to_percent(r.cl_dice) << " sn " << to_percent(r.sensitivity) << " p " << to_percent(r.precision)
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coronary artery segmentation pipeline with Self-ONN decoder"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "global seed (overrides the config)");
  app.add_option("--config", g.config, "RunConfig JSON file");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a phantom dataset (images/ and masks/)");
  std::string synth_out;
  std::optional<int> synth_count, synth_size, synth_branches;
  std::optional<double> synth_wmin, synth_wmax, synth_sten, synth_pinch, synth_noise;
  bool synth_no_vignette = false;
  synth->add_option("--output", synth_out, "dataset directory")->required();
  synth->add_option("--count", synth_count, "number of phantoms");
  synth->add_option("--size", synth_size, "canvas size in pixels");
  synth->add_option("--branches", synth_branches, "branches per tree");
  synth->add_option("--width-min", synth_wmin, "minimum vessel width");
  synth->add_option("--width-max", synth_wmax, "maximum vessel width");
  synth->add_option("--stenosis-prob", synth_sten, "per-branch stenosis probability");
  synth->add_option("--pinch", synth_pinch, "stenosis width multiplier");
  synth->add_option("--noise", synth_noise, "Gaussian noise sigma");
  synth->add_flag("--no-vignette", synth_no_vignette, "disable the field-of-view disk");

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "enhance raw frames into multichannel PNGs");
  std::string prep_in, prep_out, prep_channels = "multi";
  PreprocessFlags prep_flags;
  prep->add_option("--input", prep_in, "dataset directory with images/ (and masks/)")->required();
  prep->add_option("--output", prep_out, "output dataset directory")->required();
  prep->add_option("--channels", prep_channels, "orig | clahe | bg | multi");
  prep_flags.add(prep);

  // split
  auto* split = app.add_subcommand("split", "write a k-fold assignment file");
  std::string split_data, split_out;
  int split_k = 5;
  split->add_option("--data", split_data, "dataset directory")->required();
  split->add_option("--k", split_k, "number of folds");
  split->add_option("--output", split_out, "fold CSV path")->required();

  // train
  auto* trn = app.add_subcommand("train", "train on a preprocessed dataset");
  std::string trn_data, trn_out;
  bool trn_verbose = false;
  TrainFlags trn_flags;
  trn->add_option("--data", trn_data, "preprocessed dataset directory");
  trn->add_option("--output", trn_out, "run directory");
  trn->add_flag("--verbose", trn_verbose, "print per-epoch losses");
  trn_flags.add(trn);

  // predict
  auto* pred = app.add_subcommand("predict", "write probability maps, masks, and overlays");
  std::string pred_ckpt, pred_images, pred_out, pred_gt, pred_folds;
  std::optional<int> pred_fold;
  double pred_threshold = 0.5;
  pred->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
  pred->add_option("--images", pred_images, "directory of preprocessed images")->required();
  pred->add_option("--output", pred_out, "output directory")->required();
  pred->add_option("--gt", pred_gt, "ground-truth mask directory (enables overlays)");
  pred->add_option("--folds", pred_folds, "fold CSV restricting the images");
  pred->add_option("--fold", pred_fold, "fold index to keep (with --folds)");
  pred->add_option("--threshold", pred_threshold, "binarization threshold");

  // refine
  auto* ref = app.add_subcommand("refine", "contour filtering and gap patching of mask PNGs");
  std::string ref_in, ref_out, ref_mode = "both";
  RefineConfig ref_cfg;
  ref->add_option("--input", ref_in, "directory of mask PNGs")->required();
  ref->add_option("--output", ref_out, "output directory")->required();
  ref->add_option("--mode", ref_mode, "contour | patch | both");
  ref->add_option("--area-threshold", ref_cfg.area_threshold, "minimum component area kept");
  ref->add_option("--max-dist", ref_cfg.patch.max_dist, "maximum endpoint distance");
  ref->add_option("--tau", ref_cfg.patch.tau, "patch validity threshold");
  ref->add_option("--line-width", ref_cfg.patch.line_width, "patch line width");

  // eval
  auto* ev = app.add_subcommand("eval", "score predicted masks against ground truth");
  std::string ev_pred, ev_gt, ev_out;
  ev->add_option("--pred", ev_pred, "predicted mask directory")->required();
  ev->add_option("--gt", ev_gt, "ground-truth mask directory")->required();
  ev->add_option("--output", ev_out, "metric CSV path")->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "run the finite-difference gradient suite");

  // ablate
  auto* abl = app.add_subcommand("ablate", "q-order, loss, and channel sweeps on a raw dataset");
  std::string abl_data, abl_out, abl_axes = "q_order,loss,channels";
  TrainFlags abl_flags;
  PreprocessFlags abl_prep;
  abl->add_option("--data", abl_data, "raw dataset directory (images/ and masks/)")->required();
  abl->add_option("--output", abl_out, "output directory")->required();
  abl->add_option("--axes", abl_axes, "comma-separated subset of q_order,loss,channels");
  abl_flags.add(abl);
  abl_prep.add(abl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (synth->parsed()) {
      RunConfig cfg = g.load();
      PhantomSpec spec = cfg.phantom;
      int count = cfg.phantom_count;
      if (synth_count) count = *synth_count;
      if (synth_size) spec.size = *synth_size;
      if (synth_branches) spec.n_branches = *synth_branches;
      if (synth_wmin) spec.width_min = *synth_wmin;
      if (synth_wmax) spec.width_max = *synth_wmax;
      if (synth_sten) spec.stenosis_probability = *synth_sten;
      if (synth_pinch) spec.pinch = *synth_pinch;
      if (synth_noise) spec.noise_sigma = *synth_noise;
      if (synth_no_vignette) spec.vignette = false;
      synth_dataset(synth_out, spec, count, cfg.seed);
      std::cout << "wrote " << count << " phantoms to " << synth_out << '\n';
    } else if (prep->parsed()) {
      RunConfig cfg = g.load();
      prep_flags.apply(cfg.preprocess);
      preprocess_dataset(prep_in, prep_out, parse_channel_mode(prep_channels), cfg.preprocess);
      std::cout << "preprocessed " << prep_in << " -> " << prep_out << '\n';
    } else if (split->parsed()) {
      RunConfig cfg = g.load();
      const DatasetIndex index = scan_dataset(split_data);
      std::vector<std::string> ids;
      for (const auto& item : index.items) ids.push_back(item.id);
      write_fold_csv(split_out, ids, kfold_split(ids.size(), split_k, stream_seed(cfg.seed, SeedStream::split)));
      std::cout << "wrote " << split_out << '\n';
    } else if (trn->parsed()) {
      RunConfig cfg = g.load();
      if (!trn_data.empty()) cfg.data_dir = trn_data;
      if (!trn_out.empty()) cfg.output_dir = trn_out;
      trn_flags.apply(cfg);
      const DatasetIndex index = scan_dataset(cfg.data_dir);
      if (index.size() == 0) throw IoError("no images in " + (cfg.data_dir / "images").string());
      const int planes = load_multichannel(index.items.front().image).channels();
      if (planes != channel_count(cfg.channels)) cfg.channels = planes == 2 ? ChannelMode::multi : ChannelMode::original;
      cfg.network.in_channels = planes;
      cfg.train.verbose = trn_verbose;
      cfg.validate();
      const auto data = load_labeled(index, planes);
      const TrainRun run = train_run(data, cfg);
      write_train_outputs(cfg.output_dir, cfg, data, run);
      const auto& best = run.result.history[static_cast<std::size_t>(run.result.best_epoch)];
      std::cout << "trained " << run.result.history.size() << " epochs; best epoch " << run.result.best_epoch
                << " (val loss " << best.val_loss << "); outputs in " << cfg.output_dir.string() << '\n';
    } else if (pred->parsed()) {
      const NetworkParams params = from_checkpoint(load_checkpoint(pred_ckpt));
      require(pred_threshold > 0.0 && pred_threshold < 1.0, "--threshold must be in (0,1)");
      std::vector<std::string> ids = list_png_ids(pred_images);
      if (!pred_folds.empty()) {
        require(pred_fold.has_value(), "--folds requires --fold");
        std::vector<std::string> fold_ids;
        const auto folds = read_fold_csv(pred_folds, fold_ids);
        std::vector<std::string> keep;
        for (std::size_t i = 0; i < fold_ids.size(); ++i)
          if (folds[i] == *pred_fold) keep.push_back(fold_ids[i]);
        ids = keep;
      }
      std::vector<FloatImage> probs;
      std::vector<BinaryMask> masks, gts;
      for (const auto& id : ids) {
        const MultiChannelImage img = load_multichannel(fs::path(pred_images) / (id + ".png"));
        require(img.channels() == params.cfg.in_channels,
                id + ": image has " + std::to_string(img.channels()) + " channel(s), checkpoint expects " +
                    std::to_string(params.cfg.in_channels));
        probs.push_back(predict(params, img));
        masks.push_back(binarize(probs.back(), pred_threshold));
        if (!pred_gt.empty()) gts.push_back(gray_to_mask(load_image(fs::path(pred_gt) / (id + ".png"))));
      }
      write_predictions(pred_out, ids, probs, masks, pred_gt.empty() ? nullptr : &gts);
      std::cout << "predicted " << ids.size() << " images into " << pred_out << '\n';
    } else if (ref->parsed()) {
      ref_cfg.mode = parse_refine_mode(ref_mode);
      fs::create_directories(ref_out);
      const auto ids = list_png_ids(ref_in);
      for (const auto& id : ids) {
        const BinaryMask m = gray_to_mask(load_image(fs::path(ref_in) / (id + ".png")));
        save_image(refine_mask(m, ref_cfg), fs::path(ref_out) / (id + ".png"));
      }
      std::cout << "refined " << ids.size() << " masks into " << ref_out << '\n';
    } else if (ev->parsed()) {
      const auto rows = evaluate_directories(ev_pred, ev_gt);
      write_metrics_csv(ev_out, rows);
      print_report("pooled", pooled_report(rows));
      print_report("macro", macro_report(rows));
    } else if (gc->parsed()) {
      const std::uint64_t seed = g.seed.value_or(42);
      bool ok = true;
      for (const auto& r : run_gradient_suite(seed)) {
        std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << " checked=" << r.checked
                  << " max_rel_err=" << r.max_rel_error << " tol=" << r.tolerance << '\n';
        ok = ok && r.passed();
      }
      return ok ? 0 : 1;
    } else if (abl->parsed()) {
      RunConfig cfg = g.load();
      abl_flags.apply(cfg);
      abl_prep.apply(cfg.preprocess);
      cfg.validate();
      const DatasetIndex index = scan_dataset(abl_data);
      std::vector<std::string> ids;
      std::vector<GrayImage> raw;
      std::vector<BinaryMask> masks;
      for (const auto& item : index.items) {
        ids.push_back(item.id);
        raw.push_back(load_image(item.image));
        masks.push_back(gray_to_mask(load_image(item.mask)));
      }
      std::vector<std::string> axes;
      std::stringstream ss(abl_axes);
      for (std::string a; std::getline(ss, a, ',');)
        if (!a.empty()) axes.push_back(a);
      const auto entries = run_ablation(ids, raw, masks, cfg, axes);
      fs::create_directories(abl_out);
      save_run_config(cfg, fs::path(abl_out) / "config.json");
      write_ablation_csv(fs::path(abl_out) / "ablation.csv", entries);
      for (const auto& e : entries) print_report(e.axis + "=" + e.variant, e.pooled);
    }
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
