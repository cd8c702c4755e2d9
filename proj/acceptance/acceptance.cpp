// Acceptance checks. Each criterion prints one line:
//   criterion <n> <name>: PASS|FAIL <detail>
// and the process exits nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "casr/components.hpp"
#include "casr/gradcheck.hpp"
#include "casr/layers.hpp"
#include "casr/metrics.hpp"
#include "casr/phantom.hpp"
#include "casr/pipeline.hpp"
#include "casr/postprocess.hpp"
#include "casr/preprocess.hpp"
#include "casr/random.hpp"
#include "helpers.hpp"

using namespace casr;
using Eigen::Index;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradientBudgetSeconds = 120.0;
constexpr double kDegeneracyTolerance = 1e-12;
constexpr double kIdentityTolerance = 1e-12;
constexpr int kGapSuccessesRequired = 95;
constexpr double kJunctionClearance = 6.0;  // pixels between a cut and any other branch
constexpr double kStubLength = 8.0;         // vessel kept on each side of a cut
constexpr double kTrainingDscTarget = 0.85;
constexpr double kTrainingClDiceTarget = 0.85;
constexpr double kTrainingBudgetSeconds = 20.0 * 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// 1: finite-difference gradient suite.

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto results = run_gradient_suite(42);
  const double elapsed = seconds_since(t0);
  bool ok = elapsed < kGradientBudgetSeconds;
  double op_worst = 0.0, net_worst = 0.0;
  std::string failed;
  for (const auto& r : results) {
    if (!r.passed()) {
      ok = false;
      failed += " " + r.name;
    }
    (r.name.rfind("network", 0) == 0 ? net_worst : op_worst) =
        std::max(r.name.rfind("network", 0) == 0 ? net_worst : op_worst, r.max_rel_error);
  }
  std::string detail = std::to_string(results.size()) + " checks, worst op rel err " + fmt(op_worst, 3) + " < " +
                       fmt(kOpTolerance, 1) + ", network " + fmt(net_worst, 3) + " < " + fmt(kNetworkTolerance, 1) +
                       ", " + fmt(elapsed, 3) + " s < " + fmt(kGradientBudgetSeconds, 3) + " s";
  if (!failed.empty()) detail += "; failed:" + failed;
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 2: Self-ONN with one power term is plain convolution.

// Direct zero-padded convolution loop, written without the im2col path.
Tensor<double> direct_conv(const Conv2DLayer<double>& layer, const Tensor<double>& x) {
  const ConvGeometry& g = layer.geom;
  const Index n = x.shape().n, h = x.shape().h, w = x.shape().w;
  const Index oh = g.out_h(h), ow = g.out_w(w);
  Tensor<double> y(n, g.out_channels, oh, ow);
  for (Index b = 0; b < n; ++b)
    for (Index o = 0; o < g.out_channels; ++o)
      for (Index r = 0; r < oh; ++r)
        for (Index c = 0; c < ow; ++c) {
          double acc = layer.bias(o);
          for (Index i = 0; i < g.in_channels; ++i)
            for (Index kr = 0; kr < g.kernel_h; ++kr)
              for (Index kc = 0; kc < g.kernel_w; ++kc) {
                const Index yy = r * g.stride + kr - g.padding, xx = c * g.stride + kc - g.padding;
                if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
                acc += layer.w(o, i, kr, kc) * x(b, i, yy, xx);
              }
          y(b, o, r, c) = acc;
        }
  return y;
}

Outcome degeneracy() {
  std::mt19937_64 rng(2024);
  double worst_conv = 0.0, worst_direct = 0.0;
  for (int t = 0; t < 100; ++t) {
    ConvGeometry g;
    g.in_channels = 1 + static_cast<Index>(uniform_index(rng, 4));
    g.out_channels = 1 + static_cast<Index>(uniform_index(rng, 4));
    g.kernel_h = g.kernel_w = std::array<Index, 3>{1, 3, 5}[uniform_index(rng, 3)];
    g.padding = g.kernel_h / 2;
    Conv2DLayer<double> conv(g);
    init_uniform(conv, rng);
    // Copy the same weights into a one-term Self-ONN layer.
    SelfOnnConv2D<double> onn(g, 1);
    onn.weights = conv.weights;
    onn.bias = conv.bias;
    const Index h = 3 + static_cast<Index>(uniform_index(rng, 10)), w = 3 + static_cast<Index>(uniform_index(rng, 10));
    const auto x = random_tensor<double>({1 + static_cast<Index>(uniform_index(rng, 2)), g.in_channels, h, w}, rng, -2.0, 2.0);
    const auto y = selfonn_forward(onn, x);
    worst_conv = std::max(worst_conv, (y.values() - conv2d_forward(conv, x).values()).abs().maxCoeff());
    worst_direct = std::max(worst_direct, (y.values() - direct_conv(conv, x).values()).abs().maxCoeff());
  }
  const bool ok = worst_conv < kDegeneracyTolerance && worst_direct < kDegeneracyTolerance;
  return {ok, "100 layer/input pairs, max |onn - conv| " + fmt(worst_conv, 3) + ", vs direct loop " +
                  fmt(worst_direct, 3) + " (tol " + fmt(kDegeneracyTolerance, 1) + ")"};
}

// ---------------------------------------------------------------------------
// 3: metric identities and the published complement pair.

Outcome metric_identities() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  int count_mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const Index h = 4 + static_cast<Index>(uniform_index(rng, 40)), w = 4 + static_cast<Index>(uniform_index(rng, 40));
    const BinaryMask a = test::random_mask(h, w, uniform_real(rng, 0.02, 0.98), rng);
    const BinaryMask b = test::random_mask(h, w, uniform_real(rng, 0.02, 0.98), rng);
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) {
        if (a(y, x) && b(y, x)) ++tp;
        else if (a(y, x)) ++fp;
        else if (b(y, x)) ++fn;
        else ++tn;
      }
    const ConfusionCounts c = confusion(a, b);
    if (!(c.tp == tp && c.fp == fp && c.tn == tn && c.fn == fn)) ++count_mismatches;
    const MetricReport r = compute_metrics(c);
    worst = std::max({worst, std::abs(r.dsc - 2 * r.iou / (1 + r.iou)), std::abs(r.sensitivity + r.fnr - 1),
                      std::abs(r.specificity + r.fpr - 1)});
  }
  // 7861 of 10000 vessel pixels recovered.
  const MetricReport spot = compute_metrics(ConfusionCounts{7861, 0, 10000, 2139});
  const bool spot_ok = to_percent(spot.sensitivity) == 78.61 && to_percent(spot.fnr) == 21.39;
  const bool ok = worst < kIdentityTolerance && count_mismatches == 0 && spot_ok;
  return {ok, "1000 pairs, worst identity residual " + fmt(worst, 3) + " (tol " + fmt(kIdentityTolerance, 1) +
                  "), confusion mismatches " + std::to_string(count_mismatches) + ", SN/FNR " +
                  fmt(to_percent(spot.sensitivity)) + "/" + fmt(to_percent(spot.fnr))};
}

// ---------------------------------------------------------------------------
// 4: CLAHE at tile centers equals single-tile clipped equalization.

Outcome clahe_oracle() {
  std::mt19937_64 rng(4);
  constexpr Index kSize = 256;
  constexpr int kGrid = 4;
  constexpr double kClip = 8.0;
  constexpr Index kTile = kSize / kGrid;
  int checked = 0, mismatches = 0;
  for (int t = 0; t < 20; ++t) {
    GrayImage img = test::random_gray(kSize, kSize, rng);
    // Half the images get a dominant level so clipping engages.
    if (t % 2) {
      const auto level = static_cast<std::uint8_t>(uniform_index(rng, 256));
      for (Index i = 0; i < img.size(); ++i)
        if (uniform_real(rng, 0, 1) < 0.4) img.data()[i] = level;
    }
    const GrayImage out = clahe(img, {kGrid, kGrid, kClip});
    for (int ty = 0; ty < kGrid; ++ty)
      for (int tx = 0; tx < kGrid; ++tx) {
        const Index y = ty * kTile + kTile / 2, x = tx * kTile + kTile / 2;
        const auto tile = img.block(ty * kTile, tx * kTile, kTile, kTile);
        ++checked;
        mismatches += out(y, x) != test::clipped_equalization(tile, kClip, img(y, x));
      }
  }
  return {mismatches == 0, "20 images 256x256, grid 4x4, clip 8: " + std::to_string(checked - mismatches) + "/" +
                               std::to_string(checked) + " tile centers exact"};
}

// ---------------------------------------------------------------------------
// 5: corruption followed by contour filtering restores the mask.

Outcome refinement_round_trip() {
  constexpr int kClusters = 5, kRadiusMin = 2, kRadiusMax = 4;
  constexpr std::int64_t kThreshold = 60;  // a radius-4 disk covers 49 pixels
  int accepted = 0, exact = 0, drawn = 0;
  for (std::uint64_t seed = 0; accepted < 100 && seed < 5000; ++seed) {
    ++drawn;
    PhantomSpec spec;
    spec.seed = seed;
    const BinaryMask gt = synth_phantom(spec).mask;
    const BinaryMask noisy = corrupt_mask(gt, derive_seed(seed, 99), kClusters, kRadiusMin, kRadiusMax);
    // Premise: every component is either a whole vessel piece above the
    // threshold or a cluster that touches no vessel and is below it.
    const ComponentSet comps = connected_components(noisy);
    bool premise = (noisy != gt).any();
    for (std::size_t c = 0; c < comps.areas.size() && premise; ++c) {
      const BinaryMask piece = comps.labels.array() == static_cast<int>(c + 1);
      const auto on_vessel = (piece && gt).count();
      const auto area = comps.areas[c];
      premise = on_vessel == 0 ? area < kThreshold : (on_vessel == area && area >= kThreshold);
    }
    if (!premise) continue;
    ++accepted;
    exact += (contour_refine(noisy, kThreshold) == gt).all();
  }
  return {accepted == 100 && exact == 100, std::to_string(exact) + "/" + std::to_string(accepted) +
                                               " phantoms restored exactly (" + std::to_string(drawn) +
                                               " seeds drawn to meet the premise)"};
}

// ---------------------------------------------------------------------------
// 6: a single cut across a vessel is bridged.

struct GapCase {
  BinaryMask gt, cut;
  int length = 0;
};

// Clears the pixels of branch `bi` within `len / 2` of sample i along its
// tangent, across the full stroke width. Returns false when the site does not
// isolate one clean gap.
bool cut_gap(const Phantom& ph, std::size_t bi, std::size_t i, int len, BinaryMask& out) {
  const auto& s = ph.branches[bi].samples;
  if (i < 2 || i + 2 >= s.size()) return false;
  const double tx0 = s[i + 2].x - s[i - 2].x, ty0 = s[i + 2].y - s[i - 2].y;
  const double norm = std::hypot(tx0, ty0);
  const double tx = tx0 / norm, ty = ty0 / norm;
  const double reach = s[i].radius + 1.5;
  const Index rows = ph.mask.rows(), cols = ph.mask.cols();
  std::vector<BinaryMask> own(ph.branches.size());
  for (std::size_t b = 0; b < ph.branches.size(); ++b) {
    own[b] = BinaryMask::Zero(rows, cols);
    stroke(own[b], ph.branches[b].samples);
  }
  out = ph.mask;
  bool touched_other = false;
  for (Index y = 0; y < rows; ++y)
    for (Index x = 0; x < cols; ++x) {
      const double dx = x - s[i].x, dy = y - s[i].y;
      const double along = dx * tx + dy * ty, across = -dx * ty + dy * tx;
      if (std::abs(along) >= len / 2.0 || std::abs(across) > reach || !ph.mask(y, x)) continue;
      // Stay clear of the border and of every other branch.
      if (y < 3 || x < 3 || y >= rows - 3 || x >= cols - 3) return false;
      for (std::size_t b = 0; b < own.size(); ++b) touched_other |= b != bi && own[b](y, x);
      out(y, x) = false;
    }
  if (touched_other || count_components(out) != count_components(ph.mask) + 1) return false;
  // Both sides keep a real stub: the centerline stays on the mask for
  // kStubLength pixels beyond each cut face.
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double along = (s[j].x - s[i].x) * tx + (s[j].y - s[i].y) * ty;
    if (std::abs(along) < len / 2.0 || std::abs(along) > len / 2.0 + kStubLength) continue;
    const auto x = static_cast<Index>(std::lround(s[j].x)), y = static_cast<Index>(std::lround(s[j].y));
    if (x < 0 || y < 0 || x >= cols || y >= rows || !out(y, x)) return false;
  }
  // Mid-segment only: a cut beside a bifurcation leaves no spur to reconnect.
  const double clearance = len / 2.0 + reach + kJunctionClearance;
  for (std::size_t b = 0; b < own.size(); ++b) {
    if (b == bi) continue;
    for (Index y = 0; y < rows; ++y)
      for (Index x = 0; x < cols; ++x)
        if (own[b](y, x) && std::hypot(x - s[i].x, y - s[i].y) < clearance) return false;
  }
  return true;
}

std::vector<GapCase> gap_cases(int n) {
  std::vector<GapCase> cases;
  for (std::uint64_t seed = 0; static_cast<int>(cases.size()) < n && seed < 10000; ++seed) {
    PhantomSpec spec;
    spec.size = 128;
    spec.seed = seed;
    const Phantom ph = synth_phantom(spec);
    const int len = 4 + static_cast<int>(cases.size() % 12);  // cycles through 4..15
    std::mt19937_64 rng(derive_seed(seed, 6));
    for (int attempt = 0; attempt < 10; ++attempt) {
      const std::size_t bi = uniform_index(rng, ph.branches.size());
      const auto& samples = ph.branches[bi].samples;
      const auto i = static_cast<std::size_t>(uniform_real(rng, 0.3, 0.7) * static_cast<double>(samples.size()));
      BinaryMask cut;
      if (!cut_gap(ph, bi, i, len, cut)) continue;
      cases.push_back({ph.mask, cut, len});
      break;
    }
  }
  return cases;
}

Outcome gap_bridging() {
  const auto cases = gap_cases(100);
  int joined = 0, increased = 0;
  double cl_before = 0.0, cl_after = 0.0;
  for (const auto& c : cases) {
    const BinaryMask patched = patch_lines(c.cut);
    const int before = count_components(c.cut), after = count_components(patched);
    joined += after == before - 1;
    increased += after > before;
    cl_before += cl_dice(c.cut, c.gt) / static_cast<double>(cases.size());
    cl_after += cl_dice(patched, c.gt) / static_cast<double>(cases.size());
  }
  const bool ok = cases.size() == 100 && joined >= kGapSuccessesRequired && increased == 0 && cl_after > cl_before;
  const PatchConfig pc;
  return {ok, std::to_string(joined) + "/" + std::to_string(cases.size()) + " gaps of 4-15 px joined at max_dist " +
                  fmt(pc.max_dist) + ", tau " + std::to_string(pc.tau) + " (need " +
                  std::to_string(kGapSuccessesRequired) + "), " + std::to_string(increased) +
                  " count increases, mean clDice " + fmt(cl_before) + " -> " + fmt(cl_after)};
}

// ---------------------------------------------------------------------------
// 7: desk-scale training run.

RunConfig training_config() {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.channels = ChannelMode::multi;
  cfg.train.max_epochs = 60;
  cfg.train.learning_rate = 2e-3;
  cfg.train.batch_size = 8;
  cfg.refine.mode = RefineMode::none;
  return cfg;
}

std::vector<LabeledImage> phantom_set(const RunConfig& cfg, int count) {
  const auto phantoms = synth_phantoms(cfg.phantom, count, cfg.seed);
  std::vector<std::string> ids;
  std::vector<GrayImage> raw;
  std::vector<BinaryMask> masks;
  for (int i = 0; i < count; ++i) {
    ids.push_back(phantom_id(i));
    raw.push_back(phantoms[i].image);
    masks.push_back(phantoms[i].mask);
  }
  return preprocess_items(ids, raw, masks, cfg.channels, cfg.preprocess);
}

Outcome training() {
  const auto t0 = Clock::now();
  RunConfig cfg = training_config();
  const auto data = phantom_set(cfg, 240);
  const Experiment ex = run_experiment(data, cfg);
  const double elapsed = seconds_since(t0);
  RunConfig refined = cfg;
  refined.refine.mode = RefineMode::both;
  const Evaluation after = evaluate_items(ex.run.result.params, data, ex.run.split.members(cfg.split.test_fold), refined);
  const MetricReport& p = ex.test.pooled;
  const bool ok = p.dsc >= kTrainingDscTarget && p.cl_dice >= kTrainingClDiceTarget && elapsed <= kTrainingBudgetSeconds;
  return {ok, "240 phantoms, " + std::to_string(ex.run.result.history.size()) + " epochs (best " +
                  std::to_string(ex.run.result.best_epoch) + "), test fold of " +
                  std::to_string(ex.test.ids.size()) + ": DSC " + fmt(p.dsc) + ", clDice " + fmt(p.cl_dice) +
                  " (targets " + fmt(kTrainingDscTarget) + "), " + fmt(elapsed, 4) + " s <= " +
                  fmt(kTrainingBudgetSeconds, 4) + " s; with refinement DSC " + fmt(after.pooled.dsc) +
                  ", clDice " + fmt(after.pooled.cl_dice)};
}

// ---------------------------------------------------------------------------
// 8: ablation directions, reported only.

Outcome ablation() {
  RunConfig cfg = training_config();
  cfg.train.max_epochs = 20;
  constexpr int kCount = 120;
  const auto phantoms = synth_phantoms(cfg.phantom, kCount, cfg.seed);
  std::vector<std::string> ids;
  std::vector<GrayImage> raw;
  std::vector<BinaryMask> masks;
  for (int i = 0; i < kCount; ++i) {
    ids.push_back(phantom_id(i));
    raw.push_back(phantoms[i].image);
    masks.push_back(phantoms[i].mask);
  }
  const auto entries = run_ablation(ids, raw, masks, cfg, {"q_order", "loss", "channels"});
  std::map<std::string, double> dsc;
  for (const auto& e : entries) dsc[e.axis + ":" + e.variant] = e.pooled.dsc;
  auto compare = [&](const std::string& label, const std::string& a, const std::string& b) {
    if (!dsc.count(a) || !dsc.count(b)) return label + " missing";
    const bool holds = dsc[a] >= dsc[b];
    std::string note = holds ? " (holds)" : " (reversed)";
    if (dsc[a] == 0.0 || dsc[b] == 0.0) note += ", an arm predicted no foreground";
    return label + fmt(dsc[a]) + " vs " + fmt(dsc[b]) + note;
  };
  const std::string detail = std::to_string(kCount) + " phantoms, " + std::to_string(cfg.train.max_epochs) +
                             " epochs; dice>=bce " + compare("", "loss:dice", "loss:bce") + "; q3>=q7 " +
                             compare("", "q_order:3", "q_order:7") + "; multi>=orig " +
                             compare("", "channels:multi", "channels:orig");
  // Directions are reported, not gated: the criterion passes once every arm ran.
  const bool complete = dsc.count("loss:bce") && dsc.count("q_order:7") && dsc.count("channels:orig");
  return {complete, detail};
}

// ---------------------------------------------------------------------------
// 9: two identical pipeline runs produce identical bytes.

void pipeline_run(const fs::path& root) {
  fs::remove_all(root);
  RunConfig cfg;
  cfg.seed = 11;
  cfg.network.base_channels = 4;
  cfg.network.levels = 2;
  cfg.train.max_epochs = 3;
  cfg.train.learning_rate = 2e-3;
  cfg.train.batch_size = 4;
  cfg.augment_policy = AugmentPolicy::sample;
  cfg.phantom.size = 32;
  cfg.output_dir = root / "run";
  synth_dataset(root / "raw", cfg.phantom, 20, cfg.seed);
  preprocess_dataset(root / "raw", root / "pre", cfg.channels, cfg.preprocess);
  const auto data = load_labeled(scan_dataset(root / "pre"), channel_count(cfg.channels));
  cfg.network.in_channels = channel_count(cfg.channels);
  const TrainRun run = train_run(data, cfg);
  write_train_outputs(cfg.output_dir, cfg, data, run);
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Evaluation ev = evaluate_items(run.result.params, data, all, cfg);
  std::vector<BinaryMask> gts;
  for (const auto& d : data) gts.push_back(d.mask);
  write_predictions(root / "pred", ev.ids, ev.probabilities, ev.predictions, &gts);
  write_metrics_csv((root / "metrics.csv").string(), ev.rows);
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream is(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).generic_string()] = {std::istreambuf_iterator<char>(is), {}};
  }
  return files;
}

Outcome determinism() {
  // Both runs use the same RunConfig, output paths included.
  const test::TempDir base("determinism");
  pipeline_run(base / "run");
  const auto a = snapshot(base / "run");
  pipeline_run(base / "run");
  const auto b = snapshot(base / "run");
  int differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    differing += it == b.end() || it->second != bytes;
  }
  differing += static_cast<int>(b.size() > a.size() ? b.size() - a.size() : 0);
  const bool has_checkpoint = a.count("run/checkpoint.casr") && a.count("metrics.csv");
  return {differing == 0 && has_checkpoint && !a.empty(),
          std::to_string(a.size()) + " files per run (checkpoint, masks, CSVs), " + std::to_string(differing) +
              " differ"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks; runs every criterion unless --only is given"};
  std::vector<int> only;
  app.add_option("--only", only, "criterion numbers to run")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "gradient suite", gradient_suite},
      {2, "degeneracy oracle", degeneracy},
      {3, "metric identities", metric_identities},
      {4, "CLAHE oracle", clahe_oracle},
      {5, "refinement round-trip", refinement_round_trip},
      {6, "gap bridging", gap_bridging},
      {7, "desk-scale training", training},
      {8, "ablation directions (reported)", ablation},
      {9, "determinism", determinism},
  };
  bool all_ok = true;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all_ok &= o.pass;
    std::cout << "criterion " << c.id << " " << c.name << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
              << std::endl;
  }
  return all_ok ? 0 : 1;
}
