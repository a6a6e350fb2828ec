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

#include "wsi/augment.hpp"

#include <algorithm>
#include <cmath>

#include "wsi/common.hpp"

namespace wsi {

void AugmentConfig::validate() const {
  if (snr_db_low > snr_db_high) throw ConfigError("snr_db range must satisfy low <= high");
  if (stretch_low > stretch_high) throw ConfigError("stretch range must satisfy low <= high");
  if (stretch_low <= 0.0) throw ConfigError("stretch range must be positive");
}

std::vector<double> noise_augment(std::span<const double> waveform, const AugmentConfig& cfg, Rng& draw) {
  cfg.validate();
  if (waveform.empty()) throw ArgumentError("noise_augment: empty waveform");

  const double snr_db = draw.uniform(cfg.snr_db_low, cfg.snr_db_high);
  double energy = 0.0;
  for (double v : waveform) energy += v * v;
  const double signal_rms = std::sqrt(energy / static_cast<double>(waveform.size()));

  // Fixed reference level when the input carries no signal to measure.
  constexpr double kSilenceNoiseRms = 0.01;
  const double target_rms =
      signal_rms > 1e-12 ? signal_rms * std::pow(10.0, -snr_db / 20.0) : kSilenceNoiseRms;

  std::vector<double> noise(waveform.size());
  double noise_energy = 0.0;
  for (auto& g : noise) {
    g = draw.normal();
    noise_energy += g * g;
  }
  const double noise_rms = std::sqrt(noise_energy / static_cast<double>(noise.size()));
  const double scale = noise_rms > 0.0 ? target_rms / noise_rms : 0.0;

  std::vector<double> out(waveform.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::clamp(waveform[i] + scale * noise[i], -1.0, 1.0);
  return out;
}

std::vector<double> time_stretch(std::span<const double> waveform, const AugmentConfig& cfg, Rng& draw) {
  cfg.validate();
  if (waveform.empty()) throw ArgumentError("time_stretch: empty waveform");

  const double rate = draw.uniform(cfg.stretch_low, cfg.stretch_high);
  const auto n_in = static_cast<long>(waveform.size());
  const auto n_out = static_cast<long>(std::llround(static_cast<double>(n_in) / rate));

  std::vector<double> out(static_cast<std::size_t>(std::max(n_out, 1L)));
  for (long j = 0; j < static_cast<long>(out.size()); ++j) {
    const double pos = std::min(static_cast<double>(j) * rate, static_cast<double>(n_in - 1));
    const long i0 = static_cast<long>(pos);
    const long i1 = std::min(i0 + 1, n_in - 1);
    const double frac = pos - static_cast<double>(i0);
    out[static_cast<std::size_t>(j)] =
        (1.0 - frac) * waveform[static_cast<std::size_t>(i0)] + frac * waveform[static_cast<std::size_t>(i1)];
  }
  return out;
}

}  // namespace wsi
