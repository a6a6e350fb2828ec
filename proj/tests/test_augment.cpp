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

#include "wsi/augment.hpp"
#include "wsi/common.hpp"
#include "wsi/dsp.hpp"

using namespace wsi;

namespace {

double rms(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return std::sqrt(e / static_cast<double>(x.size()));
}

std::vector<double> sine(double freq_hz, double seconds, int sr, double amp) {
  std::vector<double> out(static_cast<std::size_t>(seconds * sr));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = amp * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / sr);
  return out;
}

}  // namespace

TEST_CASE("noise scale follows the drawn SNR exactly") {
  // 10^(-20/20) of the signal RMS.
  AugmentConfig cfg;
  cfg.snr_db_low = cfg.snr_db_high = 20.0;
  std::vector<double> input(8000, 0.5);  // headroom: clamping never triggers
  Rng draw(123);
  const auto out = noise_augment(input, cfg, draw);
  REQUIRE(out.size() == input.size());
  std::vector<double> injected(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) injected[i] = out[i] - input[i];
  CHECK(rms(injected) == doctest::Approx(0.5 * 0.1).epsilon(1e-12));
}

TEST_CASE("noise_augment is deterministic in the draw state") {
  AugmentConfig cfg;
  const auto input = sine(200.0, 0.5, 16000, 0.4);
  Rng a(55), b(55);
  CHECK(noise_augment(input, cfg, a) == noise_augment(input, cfg, b));
}

TEST_CASE("realized SNR stays within the configured range over 100 draws") {
  AugmentConfig cfg;  // [10, 30] dB
  const auto input = sine(180.0, 0.25, 16000, 0.4);
  const double sig = rms(input);
  for (int trial = 0; trial < 100; ++trial) {
    Rng draw(1000 + static_cast<std::uint64_t>(trial));
    const auto out = noise_augment(input, cfg, draw);
    std::vector<double> injected(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) injected[i] = out[i] - input[i];
    const double snr_db = 20.0 * std::log10(sig / rms(injected));
    CHECK(snr_db >= 9.5);
    CHECK(snr_db <= 30.5);
  }
}

TEST_CASE("zero-energy input yields reference-level noise") {
  AugmentConfig cfg;
  std::vector<double> input(4000, 0.0);
  Rng draw(7);
  const auto out = noise_augment(input, cfg, draw);
  CHECK(rms(out) == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("noise output is clamped to [-1, 1]") {
  AugmentConfig cfg;
  cfg.snr_db_low = cfg.snr_db_high = 10.0;
  std::vector<double> input(4000, 0.95);
  Rng draw(3);
  for (double v : noise_augment(input, cfg, draw)) {
    CHECK(v <= 1.0);
    CHECK(v >= -1.0);
  }
}

TEST_CASE("time_stretch at rate 1 is the identity") {
  AugmentConfig cfg;
  cfg.stretch_low = cfg.stretch_high = 1.0;
  const auto input = sine(440.0, 0.5, 16000, 0.6);
  Rng draw(1);
  const auto out = time_stretch(input, cfg, draw);
  REQUIRE(out.size() == input.size());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - input[i]) <= 1e-7);
}

TEST_CASE("time_stretch length law") {
  for (double rate : {0.8, 0.9, 1.1, 1.25, 2.0}) {
    AugmentConfig cfg;
    cfg.stretch_low = cfg.stretch_high = rate;
    std::vector<double> input(12345, 0.1);
    Rng draw(9);
    const auto out = time_stretch(input, cfg, draw);
    CHECK(out.size() == static_cast<std::size_t>(std::llround(12345.0 / rate)));
  }
}

TEST_CASE("half-rate stretch halves the pitch of a sine") {
  AugmentConfig cfg;
  cfg.stretch_low = cfg.stretch_high = 0.5;
  const auto input = sine(440.0, 1.0, 16000, 0.6);
  Rng draw(2);
  const auto out = time_stretch(input, cfg, draw);

  // FFT oracle over the first power-of-two window.
  const std::size_t n = 16384;
  REQUIRE(out.size() >= n);
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = out[i];
  fft(buf);
  std::size_t peak = 1;
  for (std::size_t k = 1; k < n / 2; ++k)
    if (std::abs(buf[k]) > std::abs(buf[peak])) peak = k;
  const double bin_hz = 16000.0 / static_cast<double>(n);
  CHECK(std::abs(static_cast<double>(peak) * bin_hz - 220.0) <= bin_hz);
}

TEST_CASE("stretch preserves amplitude bounds") {
  AugmentConfig cfg;
  const auto input = sine(100.0, 0.3, 16000, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Rng draw(static_cast<std::uint64_t>(trial));
    for (double v : time_stretch(input, cfg, draw)) {
      CHECK(v <= 1.0);
      CHECK(v >= -1.0);
    }
  }
}

TEST_CASE("augment argument and config errors") {
  AugmentConfig cfg;
  Rng draw(1);
  CHECK_THROWS_AS((void)noise_augment(std::vector<double>{}, cfg, draw), ArgumentError);
  CHECK_THROWS_AS((void)time_stretch(std::vector<double>{}, cfg, draw), ArgumentError);
  AugmentConfig bad;
  bad.stretch_low = -0.5;
  CHECK_THROWS_AS((void)time_stretch(std::vector<double>(10, 0.1), bad, draw), ConfigError);
  AugmentConfig bad2;
  bad2.snr_db_low = 20.0;
  bad2.snr_db_high = 10.0;
  CHECK_THROWS_AS((void)noise_augment(std::vector<double>(10, 0.1), bad2, draw), ConfigError);
}
