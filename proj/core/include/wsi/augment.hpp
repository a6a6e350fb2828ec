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

#ifndef WSI_AUGMENT_HPP_
#define WSI_AUGMENT_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "wsi/rng.hpp"

namespace wsi {

struct AugmentConfig {
  double snr_db_low = 10.0;
  double snr_db_high = 30.0;
  double stretch_low = 0.8;
  double stretch_high = 1.25;
  std::uint64_t seed = 0;  // base for the per-step draw streams

  void validate() const;
};

// Adds white Gaussian noise scaled so the realized SNR equals a uniform draw
// from [snr_db_low, snr_db_high]; output is clamped to [-1, 1]. A zero-energy
// input returns noise alone at a fixed 0.01 RMS reference level.
std::vector<double> noise_augment(std::span<const double> waveform, const AugmentConfig& cfg, Rng& draw);

// Resamples by linear interpolation at a rate drawn uniformly from
// [stretch_low, stretch_high]; output length is round(len/rate). Pitch moves
// with the rate, which is fine for a label-preserving consistency view.
std::vector<double> time_stretch(std::span<const double> waveform, const AugmentConfig& cfg, Rng& draw);

}  // namespace wsi

#endif  // WSI_AUGMENT_HPP_
