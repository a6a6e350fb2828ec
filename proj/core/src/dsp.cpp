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

#include "wsi/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wsi {

namespace {

// Slaney-style mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz) {
  constexpr double kBreak = 1000.0;
  constexpr double kLinear = 3.0 / 200.0;
  if (hz < kBreak) return hz * kLinear;
  const double logstep = std::log(6.4) / 27.0;
  return kBreak * kLinear + std::log(hz / kBreak) / logstep;
}

double mel_to_hz(double mel) {
  constexpr double kBreak = 1000.0;
  constexpr double kLinear = 3.0 / 200.0;
  const double mel_break = kBreak * kLinear;
  if (mel < mel_break) return mel / kLinear;
  const double logstep = std::log(6.4) / 27.0;
  return kBreak * std::exp(logstep * (mel - mel_break));
}

}  // namespace

void FeatureConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (n_fft <= 0 || hop <= 0) throw ConfigError("n_fft and hop must be positive");
  if (hop > n_fft) throw ConfigError("hop must not exceed n_fft");
  if (n_mels < 2) throw ConfigError("n_mels must be >= 2");
  if (fixed_frames < 1) throw ConfigError("fixed_frames must be >= 1");
  if (fmin < 0.0 || fmax <= fmin) throw ConfigError("need 0 <= fmin < fmax");
  if (fmax > sample_rate / 2.0) throw ConfigError("fmax must not exceed the Nyquist frequency");
  if (log_floor <= 0.0) throw ConfigError("log_floor must be positive");
}

void fft(std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  if (n <= 1) return;
  if (n % 2 != 0) {
    // Naive DFT for odd sizes; reached only at the bottom of the recursion.
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
        acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
      }
      out[k] = acc;
    }
    x = std::move(out);
    return;
  }
  std::vector<std::complex<double>> even(n / 2), odd(n / 2);
  for (std::size_t i = 0; i < n / 2; ++i) {
    even[i] = x[2 * i];
    odd[i] = x[2 * i + 1];
  }
  fft(even);
  fft(odd);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    const std::complex<double> tw = std::complex<double>(std::cos(ang), std::sin(ang)) * odd[k];
    x[k] = even[k] + tw;
    x[k + n / 2] = even[k] - tw;
  }
}

Matrix mel_filterbank(const FeatureConfig& cfg) {
  cfg.validate();
  const int bins = cfg.bins();
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> hz(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (int j = 0; j < cfg.n_mels + 2; ++j) {
    const double mel = mel_lo + (mel_hi - mel_lo) * j / (cfg.n_mels + 1);
    hz[static_cast<std::size_t>(j)] = mel_to_hz(mel);
  }

  Matrix fb = Matrix::Zero(cfg.n_mels, bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double f_lo = hz[static_cast<std::size_t>(m)];
    const double f_c = hz[static_cast<std::size_t>(m) + 1];
    const double f_hi = hz[static_cast<std::size_t>(m) + 2];
    const double norm = 2.0 / (f_hi - f_lo);  // area normalization
    bool any = false;
    for (int k = 0; k < bins; ++k) {
      const double fk = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
      const double up = (fk - f_lo) / (f_c - f_lo);
      const double down = (f_hi - fk) / (f_hi - f_c);
      const double w = std::max(0.0, std::min(up, down));
      if (w > 0.0) any = true;
      fb(m, k) = w * norm;
    }
    if (!any)
      throw ConfigError("mel filter " + std::to_string(m) +
                        " is all zero: n_mels too large for the FFT resolution");
  }
  return fb;
}

LogMelSpectrogram log_mel(std::span<const double> waveform, int sample_rate, const FeatureConfig& cfg) {
  cfg.validate();
  if (waveform.empty()) throw ArgumentError("log_mel: empty waveform");
  if (sample_rate != cfg.sample_rate)
    throw ArgumentError("log_mel: waveform sample rate " + std::to_string(sample_rate) +
                        " does not match configured " + std::to_string(cfg.sample_rate));

  const auto n = static_cast<long>(waveform.size());
  const int n_frames = static_cast<int>(n / cfg.hop);
  const int half = cfg.n_fft / 2;

  std::vector<double> window(static_cast<std::size_t>(cfg.n_fft));
  for (int i = 0; i < cfg.n_fft; ++i)
    window[static_cast<std::size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.n_fft);

  const Matrix fb = mel_filterbank(cfg);
  Matrix power(cfg.bins(), std::max(n_frames, 0));
  std::vector<std::complex<double>> frame(static_cast<std::size_t>(cfg.n_fft));
  for (int t = 0; t < n_frames; ++t) {
    const long start = static_cast<long>(t) * cfg.hop - half;
    for (int i = 0; i < cfg.n_fft; ++i) {
      const long s = start + i;
      const double v = (s >= 0 && s < n) ? waveform[static_cast<std::size_t>(s)] : 0.0;
      frame[static_cast<std::size_t>(i)] = v * window[static_cast<std::size_t>(i)];
    }
    fft(frame);
    for (int k = 0; k < cfg.bins(); ++k) power(k, t) = std::norm(frame[static_cast<std::size_t>(k)]);
  }

  LogMelSpectrogram out;
  out.config = cfg;
  out.valid_frames = std::min(n_frames, cfg.fixed_frames);
  out.data = Matrix::Zero(cfg.n_mels, cfg.fixed_frames);
  if (n_frames > 0) {
    Matrix mel = fb * power;  // n_mels x n_frames
    Matrix logm = mel.array().max(cfg.log_floor).log10().matrix();
    const double mx = logm.maxCoeff();
    logm = ((logm.array() - mx) + 4.0) / 4.0;
    out.data.leftCols(out.valid_frames) = logm.leftCols(out.valid_frames);
  }
  return out;
}

}  // namespace wsi
