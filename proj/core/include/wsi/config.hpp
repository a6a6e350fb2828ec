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

#ifndef WSI_CONFIG_HPP_
#define WSI_CONFIG_HPP_

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "wsi/augment.hpp"
#include "wsi/dsp.hpp"
#include "wsi/losses.hpp"
#include "wsi/model.hpp"

namespace wsi {

struct TrainConfig {
  int batch_size = 16;
  int epochs = 3;
  double learning_rate = 1e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  LossConfig loss;
  // P x K batch sampler: speakers_per_batch * utts_per_speaker_per_batch
  // must equal batch_size, and both sides need >= 2 so mining always has
  // positives and negatives.
  int speakers_per_batch = 4;
  int utts_per_speaker_per_batch = 4;
  bool grad_clip_enabled = false;
  double grad_clip_norm = 1.0;

  void validate() const;
};

// Resolved configuration for a whole run; flat sections mirror the config
// types one-to-one in JSON.
struct RunConfig {
  FeatureConfig features;
  ModelConfig model;
  AugmentConfig augment;
  TrainConfig train;

  // Cross-section consistency on top of the per-section checks.
  void validate() const;
};

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);
// Unknown sections or keys are rejected so typos never silently fall back to
// defaults. Missing keys keep the values of `base`.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace wsi

#endif  // WSI_CONFIG_HPP_
