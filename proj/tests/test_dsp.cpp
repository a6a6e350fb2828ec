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

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "wsi/common.hpp"
#include "wsi/dsp.hpp"
#include "wsi/rng.hpp"

using namespace wsi;

namespace {

std::vector<double> sine(double freq_hz, double seconds, int sr, double amp = 0.5) {
  std::vector<double> out(static_cast<std::size_t>(seconds * sr));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = amp * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / sr);
  return out;
}

// Slaney mel mapping, written out independently of the implementation.
double oracle_hz_to_mel(double hz) {
  if (hz < 1000.0) return hz * 3.0 / 200.0;
  return 15.0 + std::log(hz / 1000.0) / (std::log(6.4) / 27.0);
}
double oracle_mel_to_hz(double mel) {
  if (mel < 15.0) return mel * 200.0 / 3.0;
  return 1000.0 * std::exp((std::log(6.4) / 27.0) * (mel - 15.0));
}

FeatureConfig test_config(int fixed_frames = 300) {
  FeatureConfig cfg;
  cfg.fixed_frames = fixed_frames;
  return cfg;
}

}  // namespace

TEST_CASE("fft matches a naive DFT on size 400") {
  Rng rng(1);
  std::vector<std::complex<double>> x(400);
  for (auto& v : x) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  auto got = x;
  fft(got);
  for (std::size_t k = 0; k < x.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t % x.size()) /
                         static_cast<double>(x.size());
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    CHECK(std::abs(got[k] - acc) < 1e-9 * std::max(1.0, std::abs(acc)));
  }
}

TEST_CASE("mel filterbank rows are non-empty and overlap") {
  const FeatureConfig cfg = test_config();
  const Matrix fb = mel_filterbank(cfg);
  REQUIRE(fb.rows() == 80);
  REQUIRE(fb.cols() == 201);
  for (int m = 0; m < fb.rows(); ++m) CHECK(fb.row(m).sum() > 0.0);

  // Interior bins (strictly inside the filterbank span) are covered by at
  // least one filter.
  const double lo_hz = oracle_mel_to_hz(oracle_hz_to_mel(cfg.fmin) +
                                        (oracle_hz_to_mel(cfg.fmax) - oracle_hz_to_mel(cfg.fmin)) /
                                            (cfg.n_mels + 1));
  for (int k = 0; k < fb.cols(); ++k) {
    const double fk = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
    if (fk > lo_hz && fk < cfg.fmax - 1.0) CHECK(fb.col(k).sum() > 0.0);
  }
}

TEST_CASE("mel filter peaks stay below fmax and increase monotonically") {
  const FeatureConfig cfg = test_config();
  const Matrix fb = mel_filterbank(cfg);
  int prev_peak = -1;
  for (int m = 0; m < fb.rows(); ++m) {
    int peak = 0;
    fb.row(m).maxCoeff(&peak);
    CHECK(static_cast<double>(peak) * cfg.sample_rate / cfg.n_fft <= cfg.fmax);
    CHECK(peak >= prev_peak);
    prev_peak = peak;
  }
}

TEST_CASE("mel filterbank rejects unresolvable configurations") {
  FeatureConfig cfg = test_config();
  cfg.n_mels = 300;  // narrower than one FFT bin near the bottom
  CHECK_THROWS_AS((void)mel_filterbank(cfg), ConfigError);
}

TEST_CASE("silence maps to a constant spectrogram") {
  const FeatureConfig cfg = test_config();
  std::vector<double> silence(16000, 0.0);
  const LogMelSpectrogram m = log_mel(silence, 16000, cfg);
  CHECK(m.valid_frames == 100);
  for (int t = 0; t < m.valid_frames; ++t)
    for (int f = 0; f < cfg.n_mels; ++f) CHECK(m.data(f, t) == m.data(0, 0));
  // The whole valid region normalizes to (0 + 4) / 4.
  CHECK(m.data(0, 0) == doctest::Approx(1.0));
  for (int t = m.valid_frames; t < cfg.fixed_frames; ++t)
    CHECK(m.data.col(t).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a 1 kHz tone lands in the mel bin containing 1 kHz") {
  const FeatureConfig cfg = test_config();
  const LogMelSpectrogram m = log_mel(sine(1000.0, 1.0, 16000), 16000, cfg);
  Vector mean_energy = m.data.leftCols(m.valid_frames).rowwise().mean();
  int argmax = 0;
  mean_energy.maxCoeff(&argmax);

  // Oracle: filter m covers (f_m, f_{m+2}) around its center; collect every
  // row whose support contains 1 kHz.
  const double mel_lo = oracle_hz_to_mel(cfg.fmin);
  const double mel_hi = oracle_hz_to_mel(cfg.fmax);
  bool contained = false;
  for (int row = 0; row < cfg.n_mels; ++row) {
    const double f_lo = oracle_mel_to_hz(mel_lo + (mel_hi - mel_lo) * row / (cfg.n_mels + 1));
    const double f_hi = oracle_mel_to_hz(mel_lo + (mel_hi - mel_lo) * (row + 2) / (cfg.n_mels + 1));
    if (row == argmax && f_lo < 1000.0 && 1000.0 < f_hi) contained = true;
  }
  CHECK(contained);
}

TEST_CASE("long input is truncated to fixed_frames") {
  FeatureConfig cfg;
  cfg.fixed_frames = 3000;
  std::vector<double> wave(35 * 16000, 0.0);
  for (std::size_t i = 0; i < wave.size(); ++i)
    wave[i] = 0.3 * std::sin(2.0 * std::numbers::pi * 250.0 * static_cast<double>(i) / 16000.0);
  const LogMelSpectrogram m = log_mel(wave, 16000, cfg);
  CHECK(m.data.cols() == 3000);
  CHECK(m.valid_frames == 3000);
}

TEST_CASE("shape law: output is always F x fixed_frames") {
  const FeatureConfig cfg = test_config(50);
  for (std::size_t n : std::vector<std::size_t>{1, 159, 160, 4000, 16000}) {
    std::vector<double> wave(n, 0.1);
    const LogMelSpectrogram m = log_mel(wave, 16000, cfg);
    CHECK(m.data.rows() == cfg.n_mels);
    CHECK(m.data.cols() == cfg.fixed_frames);
    CHECK(m.valid_frames == std::min<int>(static_cast<int>(n / cfg.hop), cfg.fixed_frames));
  }
}

TEST_CASE("padding law: trailing silence leaves earlier frames unchanged") {
  const FeatureConfig cfg = test_config();
  const auto wave = sine(440.0, 1.5, 16000);
  const LogMelSpectrogram a = log_mel(wave, 16000, cfg);

  auto padded = wave;
  padded.resize(wave.size() + 8000, 0.0);
  const LogMelSpectrogram b = log_mel(padded, 16000, cfg);
  CHECK(b.valid_frames > a.valid_frames);
  for (int t = 0; t < a.valid_frames; ++t)
    for (int f = 0; f < cfg.n_mels; ++f) CHECK(std::abs(a.data(f, t) - b.data(f, t)) <= 1e-6);
}

TEST_CASE("log_mel is bit-deterministic") {
  const FeatureConfig cfg = test_config();
  const auto wave = sine(333.0, 0.7, 16000);
  const LogMelSpectrogram a = log_mel(wave, 16000, cfg);
  const LogMelSpectrogram b = log_mel(wave, 16000, cfg);
  CHECK(a.data == b.data);
}

TEST_CASE("log_mel argument errors") {
  const FeatureConfig cfg = test_config();
  CHECK_THROWS_AS((void)log_mel(std::vector<double>{}, 16000, cfg), ArgumentError);
  CHECK_THROWS_AS((void)log_mel(std::vector<double>(100, 0.0), 8000, cfg), ArgumentError);
}
