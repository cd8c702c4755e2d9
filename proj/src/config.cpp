#include "casr/config.hpp"

#include <fstream>
#include <set>

#include "casr/checkpoint.hpp"
#include "casr/error.hpp"

namespace casr {

using nlohmann::json;

RefineMode parse_refine_mode(const std::string& name) {
  if (name == "none") return RefineMode::none;
  if (name == "contour") return RefineMode::contour;
  if (name == "patch") return RefineMode::patch;
  if (name == "both") return RefineMode::both;
  throw ContractError("unknown refine mode '" + name + "' (expected none, contour, patch, both)");
}

std::string to_string(RefineMode mode) {
  switch (mode) {
    case RefineMode::none: return "none";
    case RefineMode::contour: return "contour";
    case RefineMode::patch: return "patch";
    case RefineMode::both: return "both";
  }
  return "both";
}

AugmentPolicy parse_augment_policy(const std::string& name) {
  if (name == "none") return AugmentPolicy::none;
  if (name == "sample") return AugmentPolicy::sample;
  if (name == "expand") return AugmentPolicy::expand;
  throw ContractError("unknown augment policy '" + name + "' (expected none, sample, expand)");
}

std::string to_string(AugmentPolicy policy) {
  switch (policy) {
    case AugmentPolicy::none: return "none";
    case AugmentPolicy::sample: return "sample";
    case AugmentPolicy::expand: return "expand";
  }
  return "none";
}

int channel_count(ChannelMode mode) { return mode == ChannelMode::multi ? 2 : 1; }

void RunConfig::validate() const {
  network.validate();
  train.validate();
  augment.validate();
  phantom.validate();
  require(network.in_channels == channel_count(channels),
          "RunConfig: network.in_channels must be " + std::to_string(channel_count(channels)) + " for channels '" +
              to_string(channels) + "'");
  require(split.k >= 2, "RunConfig: split.k must be >= 2");
  require(split.test_fold >= 0 && split.test_fold < split.k, "RunConfig: split.test_fold out of range");
  require(threshold > 0.0 && threshold < 1.0, "RunConfig: threshold must be in (0,1)");
  require(refine.area_threshold >= 0, "RunConfig: refine.area_threshold must be >= 0");
  require(refine.patch.max_dist >= 0.0 && refine.patch.line_width >= 1, "RunConfig: invalid patch parameters");
  require(phantom_count >= split.k, "RunConfig: phantom_count must be >= split.k");
}

namespace {

// Reads known keys of one JSON object and rejects anything else.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    require(j.is_object(), "config: '" + name_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ContractError("config: " + name_ + "." + key + ": " + e.what());
    }
  }

  template <typename T, typename Parse>
  void read_enum(const char* key, T& out, Parse parse) {
    std::string s;
    read(key, s);
    if (j_.contains(key)) out = parse(s);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ContractError("config: unknown key '" + name_ + "." + key + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

json to_json(const RunConfig& c) {
  json translations = json::array();
  for (const auto& t : c.augment.translations) translations.push_back({t.dy, t.dx});
  const auto& bg = c.preprocess.ben_graham;
  const auto& ph = c.phantom;
  return {
      {"version", RunConfig::kVersion},
      {"seed", c.seed},
      {"data_dir", c.data_dir.string()},
      {"output_dir", c.output_dir.string()},
      {"channels", to_string(c.channels)},
      {"threshold", c.threshold},
      {"clahe", {{"grid_w", c.preprocess.clahe.grid_w}, {"grid_h", c.preprocess.clahe.grid_h},
                 {"clip_factor", c.preprocess.clahe.clip_factor}}},
      {"ben_graham", {{"canny_low", bg.canny_low}, {"canny_high", bg.canny_high},
                      {"closing_radius", bg.closing_radius}, {"crop_fraction", bg.crop_fraction},
                      {"gray_offset", bg.gray_offset}, {"cross_refinement", bg.cross_refinement}}},
      {"network", to_json(c.network)},
      {"train", {{"batch_size", c.train.batch_size}, {"learning_rate", c.train.learning_rate},
                 {"max_epochs", c.train.max_epochs}, {"lr_drop_factor", c.train.lr_drop_factor},
                 {"lr_patience_epochs", c.train.lr_patience_epochs},
                 {"early_stop_epochs", c.train.early_stop_epochs}, {"loss", to_string(c.train.loss)}}},
      {"augment", {{"policy", to_string(c.augment_policy)}, {"angles", c.augment.angles},
                   {"translations", translations}, {"include_original", c.augment.include_original}}},
      {"refine", {{"mode", to_string(c.refine.mode)}, {"area_threshold", c.refine.area_threshold},
                  {"max_dist", c.refine.patch.max_dist}, {"tau", c.refine.patch.tau},
                  {"line_width", c.refine.patch.line_width}}},
      {"split", {{"k", c.split.k}, {"test_fold", c.split.test_fold}}},
      {"phantom", {{"count", c.phantom_count}, {"size", ph.size}, {"n_branches", ph.n_branches},
                   {"width_min", ph.width_min}, {"width_max", ph.width_max},
                   {"stenosis_probability", ph.stenosis_probability}, {"pinch", ph.pinch},
                   {"noise_sigma", ph.noise_sigma}, {"vignette", ph.vignette}, {"background", ph.background},
                   {"contrast", ph.contrast}, {"curvature", ph.curvature}, {"taper", ph.taper}}},
  };
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  {
    Section root(j, "config");
    int version = 0;
    root.read("version", version);
    require(j.contains("version"), "config: missing 'version'");
    require(version == RunConfig::kVersion, "config: unsupported version " + std::to_string(version));
    root.read("seed", c.seed);
    std::string data_dir = c.data_dir.string(), output_dir = c.output_dir.string();
    root.read("data_dir", data_dir);
    root.read("output_dir", output_dir);
    c.data_dir = data_dir;
    c.output_dir = output_dir;
    root.read_enum("channels", c.channels, parse_channel_mode);
    root.read("threshold", c.threshold);

    if (const json* s = root.child("clahe")) {
      Section sec(*s, "clahe");
      sec.read("grid_w", c.preprocess.clahe.grid_w);
      sec.read("grid_h", c.preprocess.clahe.grid_h);
      sec.read("clip_factor", c.preprocess.clahe.clip_factor);
      sec.finish();
    }
    if (const json* s = root.child("ben_graham")) {
      Section sec(*s, "ben_graham");
      auto& bg = c.preprocess.ben_graham;
      sec.read("canny_low", bg.canny_low);
      sec.read("canny_high", bg.canny_high);
      sec.read("closing_radius", bg.closing_radius);
      sec.read("crop_fraction", bg.crop_fraction);
      sec.read("gray_offset", bg.gray_offset);
      sec.read("cross_refinement", bg.cross_refinement);
      sec.finish();
    }
    c.network.in_channels = channel_count(c.channels);
    if (const json* s = root.child("network")) {
      Section sec(*s, "network");
      sec.read("in_channels", c.network.in_channels);
      sec.read("levels", c.network.levels);
      sec.read("base_channels", c.network.base_channels);
      sec.read("q_order", c.network.q_order);
      sec.read_enum("decoder_activation", c.network.decoder_activation, parse_activation);
      sec.read_enum("encoder_activation", c.network.encoder_activation, parse_activation);
      sec.finish();
    }
    if (const json* s = root.child("train")) {
      Section sec(*s, "train");
      sec.read("batch_size", c.train.batch_size);
      sec.read("learning_rate", c.train.learning_rate);
      sec.read("max_epochs", c.train.max_epochs);
      sec.read("lr_drop_factor", c.train.lr_drop_factor);
      sec.read("lr_patience_epochs", c.train.lr_patience_epochs);
      sec.read("early_stop_epochs", c.train.early_stop_epochs);
      sec.read_enum("loss", c.train.loss, parse_loss);
      sec.finish();
    }
    if (const json* s = root.child("augment")) {
      Section sec(*s, "augment");
      sec.read_enum("policy", c.augment_policy, parse_augment_policy);
      sec.read("angles", c.augment.angles);
      std::vector<std::vector<double>> pairs;
      sec.read("translations", pairs);
      if (s->contains("translations")) {
        c.augment.translations.clear();
        for (const auto& p : pairs) {
          require(p.size() == 2, "config: augment.translations entries must be [dy, dx]");
          c.augment.translations.push_back({p[0], p[1]});
        }
      }
      sec.read("include_original", c.augment.include_original);
      sec.finish();
    }
    if (const json* s = root.child("refine")) {
      Section sec(*s, "refine");
      sec.read_enum("mode", c.refine.mode, parse_refine_mode);
      sec.read("area_threshold", c.refine.area_threshold);
      sec.read("max_dist", c.refine.patch.max_dist);
      sec.read("tau", c.refine.patch.tau);
      sec.read("line_width", c.refine.patch.line_width);
      sec.finish();
    }
    if (const json* s = root.child("split")) {
      Section sec(*s, "split");
      sec.read("k", c.split.k);
      sec.read("test_fold", c.split.test_fold);
      sec.finish();
    }
    if (const json* s = root.child("phantom")) {
      Section sec(*s, "phantom");
      auto& ph = c.phantom;
      sec.read("count", c.phantom_count);
      sec.read("size", ph.size);
      sec.read("n_branches", ph.n_branches);
      sec.read("width_min", ph.width_min);
      sec.read("width_max", ph.width_max);
      sec.read("stenosis_probability", ph.stenosis_probability);
      sec.read("pinch", ph.pinch);
      sec.read("noise_sigma", ph.noise_sigma);
      sec.read("vignette", ph.vignette);
      sec.read("background", ph.background);
      sec.read("contrast", ph.contrast);
      sec.read("curvature", ph.curvature);
      sec.read("taper", ph.taper);
      sec.finish();
    }
    root.finish();
  }
  c.train.seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw IoError("malformed config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << to_json(cfg).dump(2) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace casr
