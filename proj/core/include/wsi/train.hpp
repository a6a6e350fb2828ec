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

#ifndef WSI_TRAIN_HPP_
#define WSI_TRAIN_HPP_

#include <functional>
#include <optional>
#include <unordered_map>

#include "wsi/config.hpp"
#include "wsi/corpus.hpp"

namespace wsi {

struct StepRecord {
  long step = 0;
  int epoch = 0;
  double total = 0.0;
  double triplet = 0.0;
  double ntxent = 0.0;
};

struct TrainState {
  long step = 0;
  int epoch = 0;
  ModelParams adam_m;  // first moments, shaped like the parameters
  ModelParams adam_v;  // second moments
  std::vector<StepRecord> history;

  static TrainState init(const ModelParams& params);
};

// A batch is a list of utterance indices into the corpus.
using Batch = std::vector<int>;

// P x K sampling: each batch holds exactly speakers_per_batch distinct
// speakers with utts_per_speaker_per_batch utterances each, drawn without
// replacement within the epoch. Leftovers that cannot complete a full P x K
// group are skipped for that epoch; reshuffling rotates them across epochs.
std::vector<Batch> make_batches(const Corpus& corpus, const TrainConfig& cfg, std::uint64_t epoch_seed);

// Clean features are immutable per utterance, so steps share a cache.
using FeatureCache = std::unordered_map<int, LogMelSpectrogram>;

// One optimization step: augment both views, extract features, embed all
// three views, joint loss, exact reverse-mode gradients, Adam update with
// bias correction. Throws NumericError (leaving params untouched) if a loss
// or gradient turns non-finite.
StepRecord train_step(ModelParams& params, TrainState& state, const Corpus& corpus, const Batch& batch,
                      const RunConfig& cfg, FeatureCache* cache = nullptr);

struct GradCheckTensor {
  std::string name;
  double max_rel_err = 0.0;
  int n_checked = 0;
  bool skipped = false;  // non-trainable tensors are reported but not checked
};

struct GradCheckReport {
  std::vector<GradCheckTensor> tensors;
  double tolerance = 0.0;
  double max_rel_err = 0.0;
  bool passed = false;
};

// Central finite differences (eps = 1e-5) against the analytic gradient on
// n_coords coordinates per trainable tensor. Probe points whose batch sits
// within 1e-3 of a hinge or mining boundary, or whose perturbation flips the
// mined structure, are rejected and redrawn. `grad_hook` mutates the
// analytic gradient before comparison (fault-injection hook for tests).
GradCheckReport grad_check(const ModelParams& params, const Corpus& corpus, const Batch& batch,
                           const RunConfig& cfg, int n_coords, double tolerance,
                           const std::function<void(ModelParams&)>& grad_hook = {});

struct FitResult {
  ModelParams params;
  std::vector<StepRecord> history;
};

// Algorithm: for each epoch, rebatch and run train_step over every batch;
// a checkpoint is written after every epoch (and once for epochs == 0). The
// log is newline-delimited "step=<n> epoch=<e> total=<f> triplet=<f>
// ntxent=<f>" with floats at 17 significant digits.
FitResult fit(const Corpus& corpus, const RunConfig& cfg, const std::filesystem::path& checkpoint_path,
              const std::filesystem::path& log_path,
              const std::function<void(const StepRecord&)>& on_step = {});

std::string format_step_record(const StepRecord& r);

}  // namespace wsi

#endif  // WSI_TRAIN_HPP_
