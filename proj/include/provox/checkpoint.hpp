#pragma once

// Model checkpoints: a binary container ("OCKP") holding a JSON description
// of the layer graph (plus a free-form config echo and the training seed)
// followed by shape-prefixed little-endian float32 parameter tensors.
// Saving and re-loading a model reproduces its forward outputs bitwise.
//
// A pipeline checkpoint is a directory with one model file per stage and a
// pipeline.json manifest naming stage order, seeds, and configs.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "provox/gan.hpp"
#include "provox/model.hpp"
#include "provox/ovol.hpp"  // little-endian byte helpers
#include "provox/pipeline.hpp"

namespace provox {

inline constexpr char kCheckpointMagic[4] = {'O', 'C', 'K', 'P'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

inline LayerKind layer_kind_from_name(const std::string& name) {
  static const std::pair<const char*, LayerKind> kNames[] = {
      {"conv2d", LayerKind::Conv2D},
      {"upsample_conv", LayerKind::UpsampleConv},
      {"conv3d", LayerKind::Conv3D},
      {"instance_norm", LayerKind::InstanceNorm},
      {"relu", LayerKind::ReLU},
      {"leaky_relu", LayerKind::LeakyReLU},
      {"sigmoid", LayerKind::Sigmoid},
      {"tanh", LayerKind::Tanh},
      {"skip_concat", LayerKind::SkipConcat},
      {"residual_tanh_clamp", LayerKind::ResidualTanhClamp},
  };
  for (const auto& [n, k] : kNames)
    if (name == n) return k;
  throw std::runtime_error("checkpoint: unknown layer kind \"" + name + "\"");
}

namespace detail {

inline void put_f32le(std::string& out, float v) {
  put_u32le(out, std::bit_cast<std::uint32_t>(v));
}

inline std::uint32_t get_u32le_at(const std::string& buf, std::size_t off) {
  return get_u32le(reinterpret_cast<const unsigned char*>(buf.data()) + off);
}

inline float get_f32le(const std::string& buf, std::size_t off) {
  return std::bit_cast<float>(get_u32le_at(buf, off));
}

inline void put_tensor(std::string& out, const Tensor<float>& t) {
  if (t.data.empty()) {
    out.push_back('\0');  // ndim 0 marks an absent tensor (e.g. no bias)
    return;
  }
  out.push_back(static_cast<char>(t.shape.size()));
  for (int d : t.shape) put_u32le(out, static_cast<std::uint32_t>(d));
  for (float v : t.data) put_f32le(out, v);
}

inline Tensor<float> get_tensor(const std::string& buf, std::size_t& off) {
  if (off >= buf.size())
    throw std::runtime_error("checkpoint: truncated tensor section");
  const int ndim = static_cast<unsigned char>(buf[off++]);
  if (ndim == 0) return Tensor<float>{};
  if (ndim > 8) throw std::runtime_error("checkpoint: corrupt tensor rank");
  std::vector<int> dims(ndim);
  std::size_t numel = 1;
  for (int i = 0; i < ndim; ++i) {
    if (off + 4 > buf.size())
      throw std::runtime_error("checkpoint: truncated tensor section");
    dims[i] = static_cast<int>(get_u32le_at(buf, off));
    off += 4;
    if (dims[i] <= 0)
      throw std::runtime_error("checkpoint: corrupt tensor shape");
    numel *= static_cast<std::size_t>(dims[i]);
  }
  if (off + 4 * numel > buf.size())
    throw std::runtime_error("checkpoint: truncated tensor section");
  Tensor<float> t(dims);
  for (std::size_t i = 0; i < numel; ++i, off += 4)
    t.data[i] = get_f32le(buf, off);
  return t;
}

inline nlohmann::ordered_json layer_to_json(const LayerSpec& s) {
  nlohmann::ordered_json j;
  j["kind"] = layer_kind_name(s.kind);
  j["in_channels"] = s.in_channels;
  j["out_channels"] = s.out_channels;
  j["kernel"] = s.kernel;
  j["stride"] = s.stride;
  j["pad"] = s.pad;
  j["slope"] = s.slope;
  j["source"] = s.source;
  j["has_bias"] = s.has_bias;
  return j;
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
  LayerSpec s;
  s.kind = layer_kind_from_name(j.at("kind").get<std::string>());
  s.in_channels = j.at("in_channels").get<int>();
  s.out_channels = j.at("out_channels").get<int>();
  s.kernel = j.at("kernel").get<int>();
  s.stride = j.at("stride").get<int>();
  s.pad = j.at("pad").get<int>();
  s.slope = j.at("slope").get<double>();
  s.source = j.at("source").get<int>();
  s.has_bias = j.at("has_bias").get<bool>();
  return s;
}

}  // namespace detail

struct CheckpointMeta {
  std::uint64_t seed = 0;
  nlohmann::ordered_json config;  // free-form echo of the builder's config
};

inline std::string encode_model(const Model<float>& m,
                                const CheckpointMeta& meta) {
  validate_model(m);
  nlohmann::ordered_json j;
  j["format"] = "ockp";
  j["spatial_rank"] = m.spatial_rank;
  j["in_channels"] = m.in_channels;
  j["seed"] = meta.seed;
  j["config"] = meta.config.is_null() ? nlohmann::ordered_json::object()
                                      : meta.config;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const LayerSpec& s : m.layers) layers.push_back(detail::layer_to_json(s));
  j["layers"] = std::move(layers);
  const std::string meta_bytes = j.dump();

  std::string out;
  out.append(kCheckpointMagic, 4);
  out.push_back(static_cast<char>(kCheckpointVersion));
  detail::put_u32le(out, static_cast<std::uint32_t>(meta_bytes.size()));
  out += meta_bytes;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    detail::put_tensor(out, m.weights[i]);
    detail::put_tensor(out, m.biases[i]);
  }
  return out;
}

struct LoadedModel {
  Model<float> model;
  CheckpointMeta meta;
};

inline LoadedModel decode_model(const std::string& buf) {
  if (buf.size() < 9) throw std::runtime_error("checkpoint: truncated header");
  if (std::memcmp(buf.data(), kCheckpointMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  const std::uint8_t version = static_cast<std::uint8_t>(buf[4]);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: bad version " +
                             std::to_string(version));
  const std::size_t meta_len = detail::get_u32le_at(buf, 5);
  if (9 + meta_len > buf.size())
    throw std::runtime_error("checkpoint: truncated metadata");
  const nlohmann::json j = nlohmann::json::parse(buf.substr(9, meta_len));

  LoadedModel out;
  out.model.spatial_rank = j.at("spatial_rank").get<int>();
  out.model.in_channels = j.at("in_channels").get<int>();
  for (const auto& lj : j.at("layers"))
    out.model.layers.push_back(detail::layer_from_json(lj));
  out.meta.seed = j.at("seed").get<std::uint64_t>();
  out.meta.config = j.at("config");

  std::size_t off = 9 + meta_len;
  for (std::size_t i = 0; i < out.model.layers.size(); ++i) {
    out.model.weights.push_back(detail::get_tensor(buf, off));
    out.model.biases.push_back(detail::get_tensor(buf, off));
  }
  if (off != buf.size())
    throw std::runtime_error("checkpoint: trailing bytes after tensors");
  validate_model(out.model);
  return out;
}

inline void save_model(const std::filesystem::path& path,
                       const Model<float>& m, const CheckpointMeta& meta) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f)
    throw std::runtime_error("checkpoint: cannot open for writing: " +
                             path.string());
  const std::string bytes = encode_model(m, meta);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed: " + path.string());
}

inline LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw std::runtime_error("checkpoint: cannot open: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  return decode_model(buf);
}

// ---------------------------------------------------------------------------
// Pipeline checkpoints (directory of stage models + manifest)

namespace detail {

inline nlohmann::ordered_json generator_config_to_json(
    const GeneratorConfig& c) {
  nlohmann::ordered_json j;
  j["in_channels"] = c.in_channels;
  j["out_channels"] = c.out_channels;
  j["base_channels"] = c.base_channels;
  j["depth"] = c.depth;
  j["residual_mode"] = c.residual_mode;
  j["spatial_rank"] = c.spatial_rank;
  return j;
}

inline GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.in_channels = j.at("in_channels").get<int>();
  c.out_channels = j.at("out_channels").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.depth = j.at("depth").get<int>();
  c.residual_mode = j.at("residual_mode").get<bool>();
  c.spatial_rank = j.at("spatial_rank").get<int>();
  return c;
}

}  // namespace detail

inline void save_pipeline(const std::filesystem::path& dir,
                          const PipelineModels& p) {
  std::filesystem::create_directories(dir);
  const struct {
    const char* file;
    const Model<float>* model;
    const GeneratorConfig* cfg;
    Orientation orientation;
  } stages[3] = {
      {"g_axial.ockp", &p.g_axial, &p.axial_cfg, Orientation::Axial},
      {"g_coronal.ockp", &p.g_coronal, &p.refine_cfg, Orientation::Coronal},
      {"g_sagittal.ockp", &p.g_sagittal, &p.refine_cfg, Orientation::Sagittal},
  };
  nlohmann::ordered_json manifest;
  manifest["format"] = "provox-pipeline";
  manifest["master_seed"] = p.master_seed;
  manifest["epochs_per_stage"] = p.epochs_per_stage;
  nlohmann::ordered_json stage_list = nlohmann::ordered_json::array();
  for (const auto& s : stages) {
    CheckpointMeta meta;
    meta.seed = p.master_seed + static_cast<std::uint64_t>(s.orientation);
    meta.config = detail::generator_config_to_json(*s.cfg);
    save_model(dir / s.file, *s.model, meta);
    nlohmann::ordered_json sj;
    sj["orientation"] = orientation_name(s.orientation);
    sj["file"] = s.file;
    sj["seed"] = meta.seed;
    sj["trained"] =
        std::find(p.trained_stages.begin(), p.trained_stages.end(),
                  s.orientation) != p.trained_stages.end();
    stage_list.push_back(std::move(sj));
  }
  manifest["stages"] = std::move(stage_list);
  std::ofstream f(dir / "pipeline.json", std::ios::trunc);
  if (!f)
    throw std::runtime_error("checkpoint: cannot write pipeline manifest in " +
                             dir.string());
  f << manifest.dump(2) << "\n";
}

inline PipelineModels load_pipeline(const std::filesystem::path& dir) {
  std::ifstream f(dir / "pipeline.json");
  if (!f)
    throw std::runtime_error("checkpoint: cannot open pipeline.json in " +
                             dir.string());
  const nlohmann::json manifest = nlohmann::json::parse(f);
  if (manifest.at("format").get<std::string>() != "provox-pipeline")
    throw std::runtime_error("checkpoint: not a pipeline manifest");

  PipelineModels p;
  p.master_seed = manifest.at("master_seed").get<std::uint64_t>();
  p.epochs_per_stage = manifest.at("epochs_per_stage").get<int>();
  for (const auto& sj : manifest.at("stages")) {
    const Orientation o =
        orientation_from_name(sj.at("orientation").get<std::string>());
    LoadedModel lm = load_model(dir / sj.at("file").get<std::string>());
    const GeneratorConfig cfg =
        detail::generator_config_from_json(lm.meta.config);
    switch (o) {
      case Orientation::Axial:
        p.g_axial = std::move(lm.model);
        p.axial_cfg = cfg;
        break;
      case Orientation::Coronal:
        p.g_coronal = std::move(lm.model);
        p.refine_cfg = cfg;
        break;
      case Orientation::Sagittal:
        p.g_sagittal = std::move(lm.model);
        p.refine_cfg = cfg;
        break;
    }
    if (sj.at("trained").get<bool>()) p.trained_stages.push_back(o);
  }
  return p;
}

}  // namespace provox
