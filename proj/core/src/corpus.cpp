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

#include "wsi/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "wsi/common.hpp"
#include "wsi/rng.hpp"
#include "wsi/threading.hpp"
#include "wsi/wav.hpp"

namespace wsi {

namespace {

// Substream tags for seed derivation.
constexpr std::uint64_t kGridStream = 1;
constexpr std::uint64_t kProfileStream = 2;
constexpr std::uint64_t kUtteranceStream = 3;
constexpr std::uint64_t kTrialStream = 4;

constexpr double kF0GridBase = 80.0;
constexpr double kF0GridStep = 4.0;
constexpr double kF0JitterMax = 2.0;
constexpr double kHarmonicCeilingHz = 7600.0;

// Resonance bandwidths for the three formant filters.
constexpr std::array<double, 3> kFormantBandwidthHz = {90.0, 120.0, 160.0};

double formant_envelope(double freq_hz, const std::array<double, 3>& centers,
                        const std::array<double, 3>& gains) {
  double e = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = (freq_hz - centers[k]) / kFormantBandwidthHz[k];
    e += gains[k] / (1.0 + d * d);
  }
  return e;
}

}  // namespace

int Corpus::n_speakers() const {
  int n = 0;
  for (const auto& u : utterances) n = std::max(n, u.speaker_id + 1);
  return n;
}

int Corpus::find_by_path(const std::string& relative_path) const {
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (utterance_relative_path(utterances[i].speaker_id, utterances[i].utterance_id) == relative_path)
      return static_cast<int>(i);
  }
  return -1;
}

std::string utterance_relative_path(int speaker_id, int utterance_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%03d/u%04d.wav", speaker_id, utterance_id);
  return buf;
}

SpeakerProfile make_speaker_profile(std::uint64_t corpus_seed, int speaker_id) {
  if (speaker_id < 0 || speaker_id >= kMaxSpeakers)
    throw ArgumentError("speaker_id out of range [0, " + std::to_string(kMaxSpeakers) + ")");

  // Seed-dependent permutation of the f0 grid slots; jitter stays below half
  // the slot spacing so the 2 Hz separation guarantee holds.
  std::vector<int> slots(kMaxSpeakers);
  for (int i = 0; i < kMaxSpeakers; ++i) slots[i] = i;
  Rng grid_rng(derive_seed(corpus_seed, {kGridStream}));
  grid_rng.shuffle(slots);

  Rng rng(derive_seed(corpus_seed, {kProfileStream, static_cast<std::uint64_t>(speaker_id)}));
  SpeakerProfile p;
  p.speaker_id = speaker_id;
  p.f0_base = kF0GridBase + kF0GridStep * slots[speaker_id] + rng.uniform(0.0, kF0JitterMax);
  p.formants = {rng.uniform(320.0, 880.0), rng.uniform(1000.0, 2200.0), rng.uniform(2400.0, 3400.0)};
  // Narrow enough that per-utterance tilt variation exceeds the between-
  // speaker slope spread; decay is a supporting cue, not a giveaway.
  p.harmonic_decay = rng.uniform(0.82, 0.92);
  p.vibrato_rate = rng.uniform(4.0, 7.0);
  p.vibrato_depth = rng.uniform(0.005, 0.03);
  return p;
}

std::vector<double> synthesize_utterance(std::uint64_t corpus_seed, const SpeakerProfile& profile,
                                         int utterance_id, double duration_s, int sample_rate) {
  if (duration_s <= 0.0) throw ArgumentError("duration_s must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));

  Rng rng(derive_seed(corpus_seed, {kUtteranceStream, static_cast<std::uint64_t>(profile.speaker_id),
                                    static_cast<std::uint64_t>(utterance_id)}));

  // 2-4 pseudo-phonetic segments; each shifts the formant targets and level.
  const int n_segments = 2 + static_cast<int>(rng.uniform_int(3));
  std::vector<double> knot_pos(n_segments);       // segment midpoints, as sample index
  std::vector<std::array<double, 3>> knot_mult(n_segments);
  std::vector<std::array<double, 3>> knot_gain(n_segments);
  std::vector<double> bounds(n_segments + 1);
  bounds[0] = 0.0;
  double acc = 0.0;
  std::vector<double> widths(n_segments);
  for (int s = 0; s < n_segments; ++s) {
    widths[s] = rng.uniform(0.6, 1.4);
    acc += widths[s];
  }
  for (int s = 0; s < n_segments; ++s) bounds[s + 1] = bounds[s] + widths[s] / acc * static_cast<double>(n);
  // Segment centers mostly track the pseudo-phonetic content (fresh draws
  // per segment); the speaker's own formants enter as a tendency. Within-
  // speaker spectral variety must dominate, as it does across spoken content.
  constexpr std::array<std::array<double, 2>, 3> kVowelBands = {
      {{320.0, 1050.0}, {950.0, 2500.0}, {1900.0, 3450.0}}};
  constexpr double kContentWeight = 0.65;
  for (int s = 0; s < n_segments; ++s) {
    knot_pos[s] = 0.5 * (bounds[s] + bounds[s + 1]);
    for (int k = 0; k < 3; ++k) {
      const double content = rng.uniform(kVowelBands[static_cast<std::size_t>(k)][0],
                                         kVowelBands[static_cast<std::size_t>(k)][1]);
      const double blended = std::pow(profile.formants[k], 1.0 - kContentWeight) * std::pow(content, kContentWeight);
      knot_mult[s][k] = blended / profile.formants[k];
      knot_gain[s][k] = rng.uniform(0.15, 1.0);
    }
  }

  const double vibrato_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  // Slow intonation wander on top of the vibrato: zero-mean sinusoids, so
  // the utterance-average f0 stays at the speaker's base while instantaneous
  // harmonics smear across mel bins.
  const double inton_depth1 = rng.uniform(0.012, 0.035);
  const double inton_depth2 = rng.uniform(0.008, 0.025);
  const double inton_rate1 = rng.uniform(0.15, 0.45);
  const double inton_rate2 = rng.uniform(0.5, 0.9);
  const double inton_phase1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double inton_phase2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  // Per-utterance bandwidth: harmonics above this ceiling are absent, as if
  // recorded through a band-limited channel.
  const double ceiling_hz = rng.uniform(4200.0, kHarmonicCeilingHz);
  const int n_harmonics =
      std::max(1, static_cast<int>(ceiling_hz / (profile.f0_base * (1.0 + profile.vibrato_depth))));

  // Per-utterance channel: spectral tilt, a smooth gain curve and a low
  // shelf. Mimics recording-condition variety so utterances of one speaker
  // do not share a near-identical long-term spectrum.
  const double tilt = rng.uniform(-0.55, 1.0);
  const double chan_lin_db = rng.uniform(-18.0, 18.0);
  const double chan_quad_db = rng.uniform(-14.0, 14.0);
  const double chan_shelf_db = rng.uniform(-12.0, 12.0);
  std::vector<double> channel(static_cast<std::size_t>(n_harmonics));
  for (int h = 0; h < n_harmonics; ++h) {
    const double freq = profile.f0_base * (h + 1);
    const double x = freq / 8000.0;
    const double gain_db = chan_lin_db * x + chan_quad_db * x * x + chan_shelf_db * std::exp(-freq / 500.0);
    channel[static_cast<std::size_t>(h)] =
        std::pow(10.0, gain_db / 20.0) * std::pow(static_cast<double>(h + 1), -tilt);
  }

  // Control-rate formant envelope; recomputing the per-harmonic amplitudes
  // every sample would dominate the synthesis cost.
  constexpr int kControlHop = 160;

  std::vector<double> out(n, 0.0);
  std::vector<double> amp(static_cast<std::size_t>(n_harmonics), 0.0);
  double phase = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (t % kControlHop == 0) {
      // Piecewise-linear formant trajectory between segment midpoints.
      const double x = static_cast<double>(t);
      int s1 = 0;
      while (s1 + 1 < n_segments && knot_pos[s1 + 1] < x) ++s1;
      int s2 = std::min(s1 + 1, n_segments - 1);
      double w = 0.0;
      if (s2 != s1 && knot_pos[s2] > knot_pos[s1])
        w = std::clamp((x - knot_pos[s1]) / (knot_pos[s2] - knot_pos[s1]), 0.0, 1.0);
      std::array<double, 3> centers{};
      std::array<double, 3> gains{};
      for (int k = 0; k < 3; ++k) {
        const double mult = (1.0 - w) * knot_mult[s1][k] + w * knot_mult[s2][k];
        centers[k] = std::clamp(profile.formants[k] * mult, 300.0, 3500.0);
        gains[k] = (1.0 - w) * knot_gain[s1][k] + w * knot_gain[s2][k];
      }
      double decay = 1.0;
      for (int h = 0; h < n_harmonics; ++h) {
        const double freq = profile.f0_base * (h + 1);
        amp[static_cast<std::size_t>(h)] =
            decay * formant_envelope(freq, centers, gains) * channel[static_cast<std::size_t>(h)];
        decay *= profile.harmonic_decay;
      }
    }
    const double tsec = static_cast<double>(t) / sample_rate;
    const double modulation =
        profile.vibrato_depth *
            std::sin(2.0 * std::numbers::pi * profile.vibrato_rate * tsec + vibrato_phase) +
        inton_depth1 * std::sin(2.0 * std::numbers::pi * inton_rate1 * tsec + inton_phase1) +
        inton_depth2 * std::sin(2.0 * std::numbers::pi * inton_rate2 * tsec + inton_phase2);
    const double f0 = profile.f0_base * (1.0 + modulation);
    phase += 2.0 * std::numbers::pi * f0 / sample_rate;
    if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;
    // All harmonics share the base phase: rotate (cos, sin) incrementally.
    const double c1 = std::cos(phase), s1 = std::sin(phase);
    double ch = c1, sh = s1;
    double v = 0.0;
    for (int h = 0; h < n_harmonics; ++h) {
      v += amp[static_cast<std::size_t>(h)] * sh;
      const double ch_next = ch * c1 - sh * s1;
      sh = sh * c1 + ch * s1;
      ch = ch_next;
    }
    out[t] = v;
  }

  // Peak-normalize the harmonic part to a per-utterance level, then add
  // low-level aspiration noise.
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  const double level = rng.uniform(0.5, 0.9);
  const double scale = peak > 0.0 ? level / peak : 0.0;
  const double noise_rms = level * std::pow(10.0, -rng.uniform(18.0, 38.0) / 20.0);
  for (std::size_t t = 0; t < n; ++t) {
    out[t] = std::clamp(out[t] * scale + noise_rms * rng.normal(), -1.0, 1.0);
  }
  return out;
}

Corpus generate_corpus(std::uint64_t seed, int n_speakers, int utts_per_speaker, double duration_s,
                       int sample_rate) {
  if (n_speakers < 2) throw ArgumentError("n_speakers must be >= 2");
  if (n_speakers > kMaxSpeakers)
    throw ArgumentError("n_speakers exceeds the " + std::to_string(kMaxSpeakers) +
                        "-speaker capacity of the f0 grid");
  if (utts_per_speaker < 2) throw ArgumentError("utts_per_speaker must be >= 2");
  if (duration_s <= 0.0) throw ArgumentError("duration_s must be positive");

  Corpus corpus;
  corpus.seed = seed;
  corpus.profiles.reserve(static_cast<std::size_t>(n_speakers));
  for (int s = 0; s < n_speakers; ++s) corpus.profiles.push_back(make_speaker_profile(seed, s));

  const std::size_t total = static_cast<std::size_t>(n_speakers) * static_cast<std::size_t>(utts_per_speaker);
  corpus.utterances.resize(total);
  parallel_for(total, [&](std::size_t i) {
    const int s = static_cast<int>(i) / utts_per_speaker;
    const int u = static_cast<int>(i) % utts_per_speaker;
    Utterance& utt = corpus.utterances[i];
    utt.speaker_id = s;
    utt.utterance_id = u;
    utt.sample_rate = sample_rate;
    utt.samples = synthesize_utterance(seed, corpus.profiles[static_cast<std::size_t>(s)], u, duration_s, sample_rate);
  });
  return corpus;
}

TrialList make_trials(const Corpus& corpus, std::uint64_t seed, int n_target, int n_nontarget) {
  if (corpus.n_speakers() < 2) throw ArgumentError("make_trials needs at least 2 speakers");
  if (n_target < 0 || n_nontarget < 0) throw ArgumentError("trial counts must be non-negative");

  std::vector<std::pair<int, int>> same, diff;
  const auto& utts = corpus.utterances;
  for (std::size_t a = 0; a < utts.size(); ++a) {
    for (std::size_t b = a + 1; b < utts.size(); ++b) {
      if (utts[a].speaker_id == utts[b].speaker_id)
        same.emplace_back(static_cast<int>(a), static_cast<int>(b));
      else
        diff.emplace_back(static_cast<int>(a), static_cast<int>(b));
    }
  }
  if (static_cast<std::size_t>(n_target) > same.size())
    throw ArgumentError("n_target=" + std::to_string(n_target) + " exceeds the " +
                        std::to_string(same.size()) + " same-speaker pairs available");
  if (static_cast<std::size_t>(n_nontarget) > diff.size())
    throw ArgumentError("n_nontarget=" + std::to_string(n_nontarget) + " exceeds the " +
                        std::to_string(diff.size()) + " different-speaker pairs available");

  Rng rng(derive_seed(seed, {kTrialStream}));
  rng.shuffle(same);
  rng.shuffle(diff);

  TrialList out;
  out.trials.reserve(static_cast<std::size_t>(n_target + n_nontarget));
  auto path_of = [&](int i) {
    return utterance_relative_path(utts[static_cast<std::size_t>(i)].speaker_id,
                                   utts[static_cast<std::size_t>(i)].utterance_id);
  };
  for (int i = 0; i < n_target; ++i)
    out.trials.push_back({1, path_of(same[static_cast<std::size_t>(i)].first),
                          path_of(same[static_cast<std::size_t>(i)].second)});
  for (int i = 0; i < n_nontarget; ++i)
    out.trials.push_back({0, path_of(diff[static_cast<std::size_t>(i)].first),
                          path_of(diff[static_cast<std::size_t>(i)].second)});
  return out;
}

SpeakerSplit split_by_speaker(const Corpus& corpus, int n_val_speakers) {
  const int n = corpus.n_speakers();
  if (n_val_speakers < 0 || n_val_speakers >= n)
    throw ArgumentError("n_val_speakers must be in [0, n_speakers)");
  SpeakerSplit split;
  const int first_val = n - n_val_speakers;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    if (corpus.utterances[i].speaker_id >= first_val)
      split.val_utterances.push_back(static_cast<int>(i));
    else
      split.train_utterances.push_back(static_cast<int>(i));
  }
  return split;
}

void write_manifest(const Corpus& corpus, const std::vector<int>& utterance_indices,
                    const std::filesystem::path& manifest_path) {
  std::ofstream f(manifest_path, std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + manifest_path.string());
  for (int i : utterance_indices) {
    const auto& u = corpus.utterances[static_cast<std::size_t>(i)];
    f << u.speaker_id << '\t' << u.utterance_id << '\t'
      << utterance_relative_path(u.speaker_id, u.utterance_id) << '\n';
  }
  if (!f) throw IoError("write failed: " + manifest_path.string());
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  parallel_for(corpus.utterances.size(), [&](std::size_t i) {
    const auto& u = corpus.utterances[i];
    const auto path = dir / utterance_relative_path(u.speaker_id, u.utterance_id);
    std::filesystem::create_directories(path.parent_path());
    write_wav(path, u.samples, u.sample_rate);
  });
  std::vector<int> all(corpus.utterances.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  write_manifest(corpus, all, dir / "manifest.tsv");
}

Corpus load_corpus(const std::filesystem::path& dir, const std::string& manifest_name) {
  std::ifstream f(dir / manifest_name);
  if (!f) throw IoError("cannot open manifest: " + (dir / manifest_name).string());
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Utterance u;
    std::string rel;
    if (!(ss >> u.speaker_id >> u.utterance_id >> rel))
      throw IoError("malformed manifest line " + std::to_string(lineno) + " in " + manifest_name);
    WavData wav = read_wav(dir / rel);
    u.sample_rate = wav.sample_rate;
    u.samples = std::move(wav.samples);
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

void write_trials(const TrialList& trials, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  for (const auto& t : trials.trials) f << t.label << ' ' << t.path_a << ' ' << t.path_b << '\n';
  if (!f) throw IoError("write failed: " + path.string());
}

TrialList load_trials(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open trial list: " + path.string());
  TrialList out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Trial t;
    if (!(ss >> t.label >> t.path_a >> t.path_b) || (t.label != 0 && t.label != 1))
      throw IoError("malformed trial line " + std::to_string(lineno) + " in " + path.string());
    out.trials.push_back(std::move(t));
  }
  return out;
}

}  // namespace wsi
