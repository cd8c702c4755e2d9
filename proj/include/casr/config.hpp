#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "casr/augment.hpp"
#include "casr/network.hpp"
#include "casr/phantom.hpp"
#include "casr/postprocess.hpp"
#include "casr/preprocess.hpp"
#include "casr/train.hpp"

namespace casr {

enum class RefineMode { none, contour, patch, both };
RefineMode parse_refine_mode(const std::string& name);
std::string to_string(RefineMode mode);

struct RefineConfig {
  RefineMode mode = RefineMode::both;
  std::int64_t area_threshold = 20;
  PatchConfig patch;
};

/// How the augmentation spec feeds training: not at all, by drawing one
/// transform per sample each epoch, or by expanding the set with every transform.
enum class AugmentPolicy { none, sample, expand };
AugmentPolicy parse_augment_policy(const std::string& name);
std::string to_string(AugmentPolicy policy);

struct SplitConfig {
  int k = 5;
  int test_fold = 0;  // validation uses the next fold, training the rest

  int val_fold() const { return (test_fold + 1) % k; }
};

/// Everything a run needs, serialized as one versioned JSON document.
struct RunConfig {
  static constexpr int kVersion = 1;

  std::uint64_t seed = 0;
  std::filesystem::path data_dir = "data";
  std::filesystem::path output_dir = "runs";
  ChannelMode channels = ChannelMode::multi;
  PreprocessConfig preprocess;
  NetworkConfig network;
  TrainConfig train;
  AugmentSpec augment = AugmentSpec::defaults();
  AugmentPolicy augment_policy = AugmentPolicy::none;
  RefineConfig refine;
  SplitConfig split;
  double threshold = 0.5;
  PhantomSpec phantom;
  int phantom_count = 240;

  void validate() const;
};

/// Plane count produced by a channel mode.
int channel_count(ChannelMode mode);

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys, wrong types, and invalid
/// values raise ContractError.
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace casr
