// Copyright 2026 The WSI Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wsi/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace wsi {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

void put_u16(std::ostream& out, std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); }
void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

struct Reader {
  std::ifstream in;
  std::string context;

  explicit Reader(const std::filesystem::path& path) : in(path, std::ios::binary) {
    if (!in) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open checkpoint: " + path.string());
  }

  void read_exact(void* dst, std::size_t n, const std::string& what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw CheckpointError(CheckpointError::Kind::kTruncated, "truncated checkpoint while reading " + what);
  }

  std::uint16_t u16(const std::string& what) {
    std::uint16_t v = 0;
    read_exact(&v, 2, what);
    return v;
  }
  std::uint32_t u32(const std::string& what) {
    std::uint32_t v = 0;
    read_exact(&v, 4, what);
    return v;
  }
  std::uint8_t u8(const std::string& what) {
    std::uint8_t v = 0;
    read_exact(&v, 1, what);
    return v;
  }
};

}  // namespace

nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["n_mels"] = cfg.n_mels;
  j["d_model"] = cfg.d_model;
  j["n_layers"] = cfg.n_layers;
  j["n_heads"] = cfg.n_heads;
  j["ffn_mult"] = cfg.ffn_mult;
  j["proj_hidden"] = cfg.proj_hidden;
  j["embed_dim"] = cfg.embed_dim;
  j["max_frames"] = cfg.max_frames;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.n_mels = j.at("n_mels").get<int>();
  cfg.d_model = j.at("d_model").get<int>();
  cfg.n_layers = j.at("n_layers").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.ffn_mult = j.at("ffn_mult").get<int>();
  cfg.proj_hidden = j.at("proj_hidden").get<int>();
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.max_frames = j.at("max_frames").get<int>();
  return cfg;
}

void write_tensor_record(std::ostream& out, const std::string& name, const std::vector<std::uint32_t>& shape,
                         const double* data, std::size_t size, TensorDtype dtype) {
  put_u16(out, static_cast<std::uint16_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  out.put(static_cast<char>(dtype));
  out.put(static_cast<char>(shape.size()));
  for (std::uint32_t dim : shape) put_u32(out, dim);
  if (dtype == TensorDtype::kF64) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(size * sizeof(double)));
  } else {
    std::vector<float> f(size);
    for (std::size_t i = 0; i < size; ++i) f[i] = static_cast<float>(data[i]);
    out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(size * sizeof(float)));
  }
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path, TensorDtype dtype) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open for writing: " + path.string());
  out.write("WSIC", 4);
  put_u32(out, kCheckpointVersion);
  const std::string cfg_json = model_config_to_json(params.config).dump();
  put_u32(out, static_cast<std::uint32_t>(cfg_json.size()));
  out.write(cfg_json.data(), static_cast<std::streamsize>(cfg_json.size()));
  const auto views = params.tensors();
  put_u32(out, static_cast<std::uint32_t>(views.size()));
  for (const auto& t : views) write_tensor_record(out, t.name, t.shape, t.data, t.size, dtype);
  if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "write failed: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[4] = {};
  r.read_exact(magic, 4, "magic");
  if (std::memcmp(magic, "WSIC", 4) != 0)
    throw CheckpointError(CheckpointError::Kind::kBadMagic, "bad magic in " + path.string());
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw CheckpointError(CheckpointError::Kind::kBadVersion,
                          "unsupported checkpoint version " + std::to_string(version) + " (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t cfg_len = r.u32("config length");
  std::string cfg_json(cfg_len, '\0');
  r.read_exact(cfg_json.data(), cfg_len, "config block");
  ModelConfig cfg;
  try {
    cfg = model_config_from_json(nlohmann::json::parse(cfg_json));
    cfg.validate();
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kInconsistent,
                          std::string("invalid config block: ") + e.what());
  }

  // Allocate the expected tensor set from the config, then require the file
  // to provide exactly those tensors in order.
  ModelParams params = ModelParams::init(cfg, 0);
  auto views = params.tensors();
  const std::uint32_t count = r.u32("tensor count");
  if (count != views.size())
    throw CheckpointError(CheckpointError::Kind::kInconsistent,
                          "tensor count " + std::to_string(count) + " does not match the " +
                              std::to_string(views.size()) + " tensors implied by the config");
  for (auto& view : views) {
    const std::uint16_t name_len = r.u16("tensor name length");
    std::string name(name_len, '\0');
    r.read_exact(name.data(), name_len, "tensor name");
    if (name != view.name)
      throw CheckpointError(CheckpointError::Kind::kInconsistent,
                            "unexpected tensor '" + name + "' (expected '" + view.name + "')");
    const auto dtype = static_cast<TensorDtype>(r.u8("dtype of " + name));
    if (dtype != TensorDtype::kF32 && dtype != TensorDtype::kF64)
      throw CheckpointError(CheckpointError::Kind::kInconsistent, "unknown dtype tag for tensor " + name);
    const std::uint8_t rank = r.u8("rank of " + name);
    if (rank != view.shape.size())
      throw CheckpointError(CheckpointError::Kind::kInconsistent, "rank mismatch for tensor " + name);
    std::size_t size = 1;
    for (std::size_t i = 0; i < rank; ++i) {
      const std::uint32_t dim = r.u32("dims of " + name);
      if (dim != view.shape[i])
        throw CheckpointError(CheckpointError::Kind::kInconsistent, "shape mismatch for tensor " + name);
      size *= dim;
    }
    if (size != view.size)
      throw CheckpointError(CheckpointError::Kind::kInconsistent, "element count mismatch for tensor " + name);
    if (dtype == TensorDtype::kF64) {
      r.read_exact(view.data, size * sizeof(double), "tensor " + name);
    } else {
      std::vector<float> f(size);
      r.read_exact(f.data(), size * sizeof(float), "tensor " + name);
      for (std::size_t i = 0; i < size; ++i) view.data[i] = static_cast<double>(f[i]);
    }
  }
  return params;
}

}  // namespace wsi
