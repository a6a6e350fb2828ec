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

#ifndef WSI_DSP_HPP_
#define WSI_DSP_HPP_

#include <complex>
#include <span>
#include <vector>

#include "wsi/common.hpp"

namespace wsi {

struct FeatureConfig {
  int sample_rate = 16000;
  int n_fft = 400;       // 25 ms window
  int hop = 160;         // 10 ms
  int n_mels = 80;       // F
  int fixed_frames = 3000;  // T; zero-pad or truncate to this many frames
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;

  int bins() const { return n_fft / 2 + 1; }
  void validate() const;
};

// F x fixed_frames features. Columns at index >= valid_frames are exactly
// zero padding.
struct LogMelSpectrogram {
  Matrix data;
  int valid_frames = 0;
  FeatureConfig config;
};

// In-place radix-2 FFT with a naive DFT base case for odd lengths, so
// non-power-of-two sizes such as 400 work without an external library.
void fft(std::vector<std::complex<double>>& x);

// Triangular mel filterbank, n_mels x (n_fft/2 + 1). Mel scale is linear
// below 1 kHz and logarithmic above, with per-filter area normalization.
// Throws ConfigError when a filter row would be all zero (n_mels too large
// for the FFT resolution).
Matrix mel_filterbank(const FeatureConfig& cfg);

// Hann-windowed STFT power -> mel filterbank -> log10 with floor ->
// per-utterance affine normalization ((x - max + 4) / 4) -> pad/truncate the
// time axis to fixed_frames. Frames are centered at t*hop with zeros beyond
// the waveform, so appending trailing silence never changes earlier frames.
LogMelSpectrogram log_mel(std::span<const double> waveform, int sample_rate, const FeatureConfig& cfg);

}  // namespace wsi

#endif  // WSI_DSP_HPP_
