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

#include "wsi/config.hpp"

#include <fstream>
#include <set>

#include "wsi/checkpoint.hpp"

namespace wsi {

void TrainConfig::validate() const {
  if (batch_size < 4) throw ConfigError("batch_size must be >= 4");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0)
    throw ConfigError("adam betas must lie in [0, 1)");
  if (adam_eps <= 0.0) throw ConfigError("adam_eps must be > 0");
  if (speakers_per_batch < 2) throw ConfigError("speakers_per_batch must be >= 2");
  if (utts_per_speaker_per_batch < 2) throw ConfigError("utts_per_speaker_per_batch must be >= 2");
  if (speakers_per_batch * utts_per_speaker_per_batch != batch_size)
    throw ConfigError("speakers_per_batch * utts_per_speaker_per_batch must equal batch_size");
  if (grad_clip_enabled && grad_clip_norm <= 0.0) throw ConfigError("grad_clip_norm must be > 0");
  loss.validate();
}

void RunConfig::validate() const {
  features.validate();
  model.validate();
  augment.validate();
  train.validate();
  if (features.n_mels != model.n_mels)
    throw ConfigError("features.n_mels must match model.n_mels");
  if (features.fixed_frames > model.max_frames)
    throw ConfigError("features.fixed_frames exceeds model.max_frames");
}

namespace {

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where + " config");
  }
}

}  // namespace

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["features"] = {{"sample_rate", cfg.features.sample_rate}, {"n_fft", cfg.features.n_fft},
                   {"hop", cfg.features.hop},                 {"n_mels", cfg.features.n_mels},
                   {"fixed_frames", cfg.features.fixed_frames}, {"fmin", cfg.features.fmin},
                   {"fmax", cfg.features.fmax},               {"log_floor", cfg.features.log_floor}};
  j["model"] = model_config_to_json(cfg.model);
  j["augment"] = {{"snr_db_range", {cfg.augment.snr_db_low, cfg.augment.snr_db_high}},
                  {"stretch_range", {cfg.augment.stretch_low, cfg.augment.stretch_high}},
                  {"seed", cfg.augment.seed}};
  j["loss"] = {{"margin", cfg.train.loss.margin},
               {"ssl_weight", cfg.train.loss.ssl_weight},
               {"temperature", cfg.train.loss.temperature}};
  j["train"] = {{"batch_size", cfg.train.batch_size},
                {"epochs", cfg.train.epochs},
                {"learning_rate", cfg.train.learning_rate},
                {"adam_beta1", cfg.train.adam_beta1},
                {"adam_beta2", cfg.train.adam_beta2},
                {"adam_eps", cfg.train.adam_eps},
                {"seed", cfg.train.seed},
                {"speakers_per_batch", cfg.train.speakers_per_batch},
                {"utts_per_speaker_per_batch", cfg.train.utts_per_speaker_per_batch},
                {"grad_clip_enabled", cfg.train.grad_clip_enabled},
                {"grad_clip_norm", cfg.train.grad_clip_norm}};
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base) {
  RunConfig cfg = std::move(base);
  reject_unknown(j, {"features", "model", "augment", "loss", "train"}, "top-level");
  if (auto it = j.find("features"); it != j.end()) {
    const auto& f = *it;
    reject_unknown(f, {"sample_rate", "n_fft", "hop", "n_mels", "fixed_frames", "fmin", "fmax", "log_floor"},
                   "features");
    get_if(f, "sample_rate", cfg.features.sample_rate);
    get_if(f, "n_fft", cfg.features.n_fft);
    get_if(f, "hop", cfg.features.hop);
    get_if(f, "n_mels", cfg.features.n_mels);
    get_if(f, "fixed_frames", cfg.features.fixed_frames);
    get_if(f, "fmin", cfg.features.fmin);
    get_if(f, "fmax", cfg.features.fmax);
    get_if(f, "log_floor", cfg.features.log_floor);
  }
  if (auto it = j.find("model"); it != j.end()) {
    const auto& m = *it;
    reject_unknown(m, {"n_mels", "d_model", "n_layers", "n_heads", "ffn_mult", "proj_hidden", "embed_dim",
                       "max_frames"},
                   "model");
    get_if(m, "n_mels", cfg.model.n_mels);
    get_if(m, "d_model", cfg.model.d_model);
    get_if(m, "n_layers", cfg.model.n_layers);
    get_if(m, "n_heads", cfg.model.n_heads);
    get_if(m, "ffn_mult", cfg.model.ffn_mult);
    get_if(m, "proj_hidden", cfg.model.proj_hidden);
    get_if(m, "embed_dim", cfg.model.embed_dim);
    get_if(m, "max_frames", cfg.model.max_frames);
  }
  if (auto it = j.find("augment"); it != j.end()) {
    const auto& a = *it;
    reject_unknown(a, {"snr_db_range", "stretch_range", "seed"}, "augment");
    if (auto r = a.find("snr_db_range"); r != a.end()) {
      if (!r->is_array() || r->size() != 2) throw ConfigError("snr_db_range must be [low, high]");
      cfg.augment.snr_db_low = (*r)[0].get<double>();
      cfg.augment.snr_db_high = (*r)[1].get<double>();
    }
    if (auto r = a.find("stretch_range"); r != a.end()) {
      if (!r->is_array() || r->size() != 2) throw ConfigError("stretch_range must be [low, high]");
      cfg.augment.stretch_low = (*r)[0].get<double>();
      cfg.augment.stretch_high = (*r)[1].get<double>();
    }
    get_if(a, "seed", cfg.augment.seed);
  }
  if (auto it = j.find("loss"); it != j.end()) {
    const auto& l = *it;
    reject_unknown(l, {"margin", "ssl_weight", "temperature"}, "loss");
    get_if(l, "margin", cfg.train.loss.margin);
    get_if(l, "ssl_weight", cfg.train.loss.ssl_weight);
    get_if(l, "temperature", cfg.train.loss.temperature);
  }
  if (auto it = j.find("train"); it != j.end()) {
    const auto& t = *it;
    reject_unknown(t, {"batch_size", "epochs", "learning_rate", "adam_beta1", "adam_beta2", "adam_eps",
                       "seed", "speakers_per_batch", "utts_per_speaker_per_batch", "grad_clip_enabled",
                       "grad_clip_norm"},
                   "train");
    get_if(t, "batch_size", cfg.train.batch_size);
    get_if(t, "epochs", cfg.train.epochs);
    get_if(t, "learning_rate", cfg.train.learning_rate);
    get_if(t, "adam_beta1", cfg.train.adam_beta1);
    get_if(t, "adam_beta2", cfg.train.adam_beta2);
    get_if(t, "adam_eps", cfg.train.adam_eps);
    get_if(t, "seed", cfg.train.seed);
    get_if(t, "speakers_per_batch", cfg.train.speakers_per_batch);
    get_if(t, "utts_per_speaker_per_batch", cfg.train.utts_per_speaker_per_batch);
    get_if(t, "grad_clip_enabled", cfg.train.grad_clip_enabled);
    get_if(t, "grad_clip_norm", cfg.train.grad_clip_norm);
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, std::move(base));
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << run_config_to_json(cfg).dump(2) << '\n';
}

}  // namespace wsi
