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

#ifndef WSI_CORPUS_HPP_
#define WSI_CORPUS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wsi {

// Largest speaker population the fundamental-frequency grid supports while
// keeping any two speakers at least 2 Hz apart.
inline constexpr int kMaxSpeakers = 55;

struct SpeakerProfile {
  int speaker_id = 0;
  double f0_base = 0.0;                  // Hz, in [80, 300]
  std::array<double, 3> formants{};      // Hz, strictly increasing, in [300, 3500]
  double harmonic_decay = 0.0;           // in (0.5, 0.95]
  double vibrato_rate = 0.0;             // Hz, in [4, 7]
  double vibrato_depth = 0.0;            // fraction, in [0, 0.03]
};

struct Utterance {
  int speaker_id = 0;
  int utterance_id = 0;
  int sample_rate = 16000;
  std::vector<double> samples;  // amplitude within [-1, 1]

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct Corpus {
  std::uint64_t seed = 0;
  std::vector<SpeakerProfile> profiles;  // empty when loaded from disk
  std::vector<Utterance> utterances;     // ordered by (speaker_id, utterance_id)

  int n_speakers() const;
  // Index into utterances for a canonical relative path; -1 if unknown.
  int find_by_path(const std::string& relative_path) const;
};

// One verification trial. Utterances are referenced by their canonical
// relative path so in-memory and on-disk pipelines score identical files.
struct Trial {
  int label = 0;  // 1 = same speaker, 0 = different
  std::string path_a;
  std::string path_b;
};

struct TrialList {
  std::vector<Trial> trials;
};

// Canonical on-disk layout of one utterance inside a corpus directory.
std::string utterance_relative_path(int speaker_id, int utterance_id);

// Speaker parameters are a pure function of (corpus_seed, speaker_id):
// fundamental frequencies sit on a seed-permuted 4 Hz grid with sub-slot
// jitter, so distinct speakers differ by more than 2 Hz.
SpeakerProfile make_speaker_profile(std::uint64_t corpus_seed, int speaker_id);

std::vector<double> synthesize_utterance(std::uint64_t corpus_seed, const SpeakerProfile& profile,
                                         int utterance_id, double duration_s, int sample_rate);

// Deterministic in all arguments; utterances are synthesized independently so
// the call may fan out across threads without changing the result.
Corpus generate_corpus(std::uint64_t seed, int n_speakers, int utts_per_speaker, double duration_s,
                       int sample_rate = 16000);

// Samples exactly n_target same-speaker and n_nontarget different-speaker
// pairs without replacement per label class. Never pairs an utterance with
// itself. Target trials come first.
TrialList make_trials(const Corpus& corpus, std::uint64_t seed, int n_target, int n_nontarget);

// Partitions utterance indices by speaker: the last n_val_speakers ids form
// the validation side.
struct SpeakerSplit {
  std::vector<int> train_utterances;
  std::vector<int> val_utterances;
};
SpeakerSplit split_by_speaker(const Corpus& corpus, int n_val_speakers);

// Directory layout: <dir>/manifest.tsv plus one WAV per utterance at its
// canonical relative path. Manifest line: "<speaker_id>\t<utterance_id>\t<relative_path>".
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir, const std::string& manifest_name = "manifest.tsv");
void write_manifest(const Corpus& corpus, const std::vector<int>& utterance_indices,
                    const std::filesystem::path& manifest_path);

// Trial list file: "<label> <path_a> <path_b>\n" with single spaces.
void write_trials(const TrialList& trials, const std::filesystem::path& path);
TrialList load_trials(const std::filesystem::path& path);

}  // namespace wsi

#endif  // WSI_CORPUS_HPP_
