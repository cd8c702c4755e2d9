#include "casr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace casr {
namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'C', 'A', 'S', 'R', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw IoError("truncated checkpoint");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(T);
  return v;
}

void put_doubles(std::string& out, const double* data, Index n) {
  for (Index i = 0; i < n; ++i) put_le(out, std::bit_cast<std::uint64_t>(data[i]));
}

void get_doubles(const std::string& in, std::size_t& pos, double* data, Index n) {
  for (Index i = 0; i < n; ++i) data[i] = std::bit_cast<double>(get_le<std::uint64_t>(in, pos));
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["metadata"] = ckpt.metadata;
  header["layers"] = nlohmann::json::array();
  for (const auto& l : ckpt.layers) {
    require(l.weights.rows() == l.geom.out_channels && l.weights.cols() == l.geom.taps() * l.q_order &&
                l.bias.size() == l.geom.out_channels,
            "save_checkpoint: inconsistent shapes for layer " + l.name);
    header["layers"].push_back({{"name", l.name},
                                {"kind", l.kind},
                                {"in_channels", l.geom.in_channels},
                                {"out_channels", l.geom.out_channels},
                                {"kernel_h", l.geom.kernel_h},
                                {"kernel_w", l.geom.kernel_w},
                                {"padding", l.geom.padding},
                                {"stride", l.geom.stride},
                                {"q_order", l.q_order}});
  }
  const std::string text = header.dump();
  std::string blob(kMagic, sizeof(kMagic));
  put_le(blob, kCheckpointVersion);
  put_le(blob, static_cast<std::uint64_t>(text.size()));
  blob += text;
  for (const auto& l : ckpt.layers) {
    put_doubles(blob, l.weights.data(), l.weights.size());
    put_doubles(blob, l.bias.data(), l.bias.size());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string blob{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (blob.size() < sizeof(kMagic) || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint file: " + path.string());
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get_le<std::uint32_t>(blob, pos);
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto len = get_le<std::uint64_t>(blob, pos);
  if (pos + len > blob.size()) throw IoError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(pos, len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad checkpoint header: ") + e.what());
  }
  pos += len;

  Checkpoint ckpt;
  ckpt.metadata = header.value("metadata", nlohmann::json::object());
  try {
    for (const auto& j : header.at("layers")) {
      CheckpointLayer l;
      l.name = j.at("name").get<std::string>();
      l.kind = j.at("kind").get<std::string>();
      l.geom = ConvGeometry{j.at("in_channels").get<Index>(), j.at("out_channels").get<Index>(),
                            j.at("kernel_h").get<Index>(),    j.at("kernel_w").get<Index>(),
                            j.at("padding").get<Index>(),     j.at("stride").get<Index>()};
      l.q_order = j.at("q_order").get<int>();
      if (l.q_order < 1 || l.geom.in_channels < 1 || l.geom.out_channels < 1) {
        throw IoError("bad layer shape in checkpoint: " + l.name);
      }
      l.weights.resize(l.geom.out_channels, l.geom.taps() * l.q_order);
      l.bias.resize(l.geom.out_channels);
      get_doubles(blob, pos, l.weights.data(), l.weights.size());
      get_doubles(blob, pos, l.bias.data(), l.bias.size());
      ckpt.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad checkpoint header: ") + e.what());
  }
  if (pos != blob.size()) throw IoError("trailing bytes in checkpoint " + path.string());
  return ckpt;
}

nlohmann::json to_json(const NetworkConfig& cfg) {
  return {{"in_channels", cfg.in_channels},
          {"levels", cfg.levels},
          {"base_channels", cfg.base_channels},
          {"q_order", cfg.q_order},
          {"decoder_activation", to_string(cfg.decoder_activation)},
          {"encoder_activation", to_string(cfg.encoder_activation)}};
}

NetworkConfig network_config_from_json(const nlohmann::json& j) {
  NetworkConfig cfg;
  cfg.in_channels = j.value("in_channels", cfg.in_channels);
  cfg.levels = j.value("levels", cfg.levels);
  cfg.base_channels = j.value("base_channels", cfg.base_channels);
  cfg.q_order = j.value("q_order", cfg.q_order);
  cfg.decoder_activation = parse_activation(j.value("decoder_activation", std::string("tanh")));
  cfg.encoder_activation = parse_activation(j.value("encoder_activation", std::string("relu")));
  cfg.validate();
  return cfg;
}

Checkpoint to_checkpoint(const NetworkParams& params, nlohmann::json metadata) {
  Checkpoint ckpt;
  ckpt.metadata = std::move(metadata);
  ckpt.metadata["network"] = to_json(params.cfg);
  auto add = [&](const std::string& name, const std::string& kind, const auto& layer, int q) {
    ckpt.layers.push_back({name, kind, layer.geom, q, layer.weights, layer.bias});
  };
  for (std::size_t i = 0; i < params.encoder.size(); ++i) add("encoder." + std::to_string(i), "conv", params.encoder[i], 1);
  for (std::size_t i = 0; i < params.bottleneck.size(); ++i)
    add("bottleneck." + std::to_string(i), "conv", params.bottleneck[i], 1);
  for (std::size_t i = 0; i < params.decoder.size(); ++i)
    add("decoder." + std::to_string(i), "selfonn", params.decoder[i], params.decoder[i].q_order);
  add("head", "conv", params.head, 1);
  return ckpt;
}

NetworkParams from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.metadata.contains("network")) throw IoError("checkpoint lacks network config");
  NetworkConfig cfg;
  try {
    cfg = network_config_from_json(ckpt.metadata.at("network"));
  } catch (const ContractError& e) {
    throw IoError(std::string("bad network config in checkpoint: ") + e.what());
  }
  NetworkParams params = build_network(cfg, 0);
  std::size_t k = 0;
  auto take = [&](auto& layer, const std::string& name) {
    if (k >= ckpt.layers.size()) throw IoError("checkpoint is missing layer " + name);
    const auto& l = ckpt.layers[k++];
    if (l.name != name || l.weights.rows() != layer.weights.rows() || l.weights.cols() != layer.weights.cols() ||
        l.bias.size() != layer.bias.size()) {
      throw IoError("checkpoint layer " + l.name + " does not match architecture slot " + name);
    }
    layer.weights = l.weights;
    layer.bias = l.bias;
  };
  for (std::size_t i = 0; i < params.encoder.size(); ++i) take(params.encoder[i], "encoder." + std::to_string(i));
  for (std::size_t i = 0; i < params.bottleneck.size(); ++i)
    take(params.bottleneck[i], "bottleneck." + std::to_string(i));
  for (std::size_t i = 0; i < params.decoder.size(); ++i) take(params.decoder[i], "decoder." + std::to_string(i));
  take(params.head, "head");
  if (k != ckpt.layers.size()) throw IoError("checkpoint has extra layers");
  return params;
}

}  // namespace casr
