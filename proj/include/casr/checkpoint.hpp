#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "casr/layers.hpp"
#include "casr/network.hpp"

namespace casr {

/// Binary parameter checkpoint:
///   8 bytes  magic "CASRCKPT"
///   u32 LE   format version
///   u64 LE   header length L
///   L bytes  UTF-8 JSON header {format_version, metadata, layers:[...]}
///   payload  per layer, weights then bias, as little-endian IEEE-754 float64
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointLayer {
  std::string name;
  std::string kind;  // "conv" or "selfonn"
  ConvGeometry geom;
  int q_order = 1;
  RowMatrix<double> weights;
  Vector<double> bias;
};

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<CheckpointLayer> layers;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Network <-> checkpoint. The network config is stored under
/// metadata["network"]; extra metadata is preserved.
Checkpoint to_checkpoint(const NetworkParams& params, nlohmann::json metadata = nlohmann::json::object());
NetworkParams from_checkpoint(const Checkpoint& ckpt);

nlohmann::json to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const nlohmann::json& j);

}  // namespace casr
