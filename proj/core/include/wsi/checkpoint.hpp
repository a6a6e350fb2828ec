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

#ifndef WSI_CHECKPOINT_HPP_
#define WSI_CHECKPOINT_HPP_

#include <filesystem>
#include <ostream>

#include <json.hpp>

#include "wsi/model.hpp"

namespace wsi {

// Checkpoint layout (all integers little-endian):
//   magic "WSIC" | version u32 | config length u32 + config JSON |
//   tensor count u32 | per tensor: name length u16 + name | dtype u8
//   (0 = f32, 1 = f64) | rank u8 | dims u32 each | raw row-major data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class TensorDtype : std::uint8_t { kF32 = 0, kF64 = 1 };

struct CheckpointError : IoError {
  enum class Kind { kBadMagic, kBadVersion, kTruncated, kInconsistent, kIo };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg) : IoError(msg), kind(k) {}
};

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     TensorDtype dtype = TensorDtype::kF64);
ModelParams load_checkpoint(const std::filesystem::path& path);

// One tensor in the checkpoint record encoding; also used for debug feature
// dumps.
void write_tensor_record(std::ostream& out, const std::string& name, const std::vector<std::uint32_t>& shape,
                         const double* data, std::size_t size, TensorDtype dtype);

nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace wsi

#endif  // WSI_CHECKPOINT_HPP_
