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

#ifndef WSI_EVAL_HPP_
#define WSI_EVAL_HPP_

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsi/common.hpp"
#include "wsi/corpus.hpp"

namespace wsi {

struct ScoredTrial {
  int label = 0;       // 1 target, 0 nontarget
  double score = 0.0;  // in [-1, 1]
};

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  double tpr = 0.0;
};

struct EvalReport {
  double eer = 0.0;
  double eer_threshold = 0.0;
  double auc = 0.0;
  int n_target = 0;
  int n_nontarget = 0;
  long tp = 0, fp = 0, tn = 0, fn = 0;  // confusion counts at eer_threshold
  std::vector<RocPoint> roc;            // one operating point per distinct score
};

// Cosine similarity with a zero-norm guard: either norm below 1e-12 scores 0.
// Bitwise-identical vectors score exactly 1.
double cosine_similarity(const Vector& z1, const Vector& z2);

// Scores every trial; each distinct utterance reference is embedded exactly
// once. The embedder maps a reference (relative path) to its embedding.
using Embedder = std::function<Vector(const std::string&)>;
std::vector<ScoredTrial> score_trials(const std::vector<Trial>& trials, const Embedder& embedder);

// Threshold sweep over all distinct scores with accept-iff-score>=t; the
// operating point minimizes |FPR - FNR| (lowest threshold on ties) and EER is
// reported as the midpoint (FPR + FNR) / 2 there.
std::pair<double, double> compute_eer(const std::vector<ScoredTrial>& scored);

// Mann-Whitney statistic: fraction of (target, nontarget) pairs ranked
// correctly, ties counted one half.
double compute_auc(const std::vector<ScoredTrial>& scored);

EvalReport evaluate(const std::vector<ScoredTrial>& scored);

nlohmann::ordered_json report_to_json(const EvalReport& report);

}  // namespace wsi

#endif  // WSI_EVAL_HPP_
