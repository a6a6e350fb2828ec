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

#ifndef WSI_WAV_HPP_
#define WSI_WAV_HPP_

#include <filesystem>
#include <span>
#include <vector>

namespace wsi {

// Mono 16 kHz 16-bit PCM WAV is the only on-disk audio format.
struct WavData {
  int sample_rate = 0;
  std::vector<double> samples;  // in [-1, 1]
};

// Samples are clamped to [-1, 1] and quantized to 16-bit PCM.
void write_wav(const std::filesystem::path& path, std::span<const double> samples, int sample_rate);

WavData read_wav(const std::filesystem::path& path);

}  // namespace wsi

#endif  // WSI_WAV_HPP_
