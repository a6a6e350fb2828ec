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

#include "wsi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "wsi/threading.hpp"

namespace wsi {

namespace {

constexpr double kNormGuard = 1e-12;

void check_two_classes(const std::vector<ScoredTrial>& scored) {
  int n_target = 0, n_nontarget = 0;
  for (const auto& t : scored) (t.label == 1 ? n_target : n_nontarget)++;
  if (n_target == 0 || n_nontarget == 0)
    throw ArgumentError("need at least one target and one nontarget trial");
}

}  // namespace

double cosine_similarity(const Vector& z1, const Vector& z2) {
  if (z1.size() != z2.size())
    throw ArgumentError("cosine_similarity: dimension mismatch " + std::to_string(z1.size()) + " vs " +
                        std::to_string(z2.size()));
  const double n1 = z1.norm();
  const double n2 = z2.norm();
  if (n1 < kNormGuard || n2 < kNormGuard) return 0.0;
  if (z1 == z2) return 1.0;  // avoids sqrt round-off on self-comparisons
  return std::clamp(z1.dot(z2) / (n1 * n2), -1.0, 1.0);
}

std::vector<ScoredTrial> score_trials(const std::vector<Trial>& trials, const Embedder& embedder) {
  std::vector<std::string> keys;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& t : trials) {
    for (const auto& key : {t.path_a, t.path_b}) {
      if (index.emplace(key, keys.size()).second) keys.push_back(key);
    }
  }
  std::vector<Vector> embeddings(keys.size());
  parallel_for(keys.size(), [&](std::size_t i) {
    try {
      embeddings[i] = embedder(keys[i]);
    } catch (const std::exception& e) {
      throw ArgumentError("cannot embed utterance '" + keys[i] + "': " + e.what());
    }
  });

  std::vector<ScoredTrial> out(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    out[i].label = t.label;
    out[i].score = cosine_similarity(embeddings[index.at(t.path_a)], embeddings[index.at(t.path_b)]);
  }
  return out;
}

std::pair<double, double> compute_eer(const std::vector<ScoredTrial>& scored) {
  const EvalReport r = evaluate(scored);
  return {r.eer, r.eer_threshold};
}

double compute_auc(const std::vector<ScoredTrial>& scored) {
  check_two_classes(scored);
  std::vector<std::pair<double, int>> s;  // (score, label)
  s.reserve(scored.size());
  long n_target = 0, n_nontarget = 0;
  for (const auto& t : scored) {
    s.emplace_back(t.score, t.label);
    (t.label == 1 ? n_target : n_nontarget)++;
  }
  std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  // Midrank sum over targets equals the pairwise count with half ties.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j].first == s[i].first) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (s[k].second == 1) rank_sum += midrank;
    i = j;
  }
  const double u = rank_sum - 0.5 * static_cast<double>(n_target) * static_cast<double>(n_target + 1);
  return u / (static_cast<double>(n_target) * static_cast<double>(n_nontarget));
}

EvalReport evaluate(const std::vector<ScoredTrial>& scored) {
  check_two_classes(scored);
  for (const auto& t : scored)
    if (!std::isfinite(t.score)) throw ArgumentError("non-finite trial score");

  long n_target = 0, n_nontarget = 0;
  std::vector<std::pair<double, int>> s;
  s.reserve(scored.size());
  for (const auto& t : scored) {
    s.emplace_back(t.score, t.label);
    (t.label == 1 ? n_target : n_nontarget)++;
  }
  std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  EvalReport report;
  report.n_target = static_cast<int>(n_target);
  report.n_nontarget = static_cast<int>(n_nontarget);
  report.auc = compute_auc(scored);

  // Ascending sweep: at threshold t (a distinct score), targets strictly
  // below t are rejected (FN) and nontargets at or above t are accepted (FP).
  double best_gap = std::numeric_limits<double>::infinity();
  long targets_below = 0, nontargets_below = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    const double threshold = s[i].first;
    const double fnr = static_cast<double>(targets_below) / static_cast<double>(n_target);
    const double fpr =
        static_cast<double>(n_nontarget - nontargets_below) / static_cast<double>(n_nontarget);
    report.roc.push_back({threshold, fpr, fnr, 1.0 - fnr});
    const double gap = std::abs(fpr - fnr);
    if (gap < best_gap) {
      best_gap = gap;
      report.eer = 0.5 * (fpr + fnr);
      report.eer_threshold = threshold;
      report.fn = targets_below;
      report.tp = n_target - targets_below;
      report.fp = n_nontarget - nontargets_below;
      report.tn = nontargets_below;
    }
    while (i < s.size() && s[i].first == threshold) {
      (s[i].second == 1 ? targets_below : nontargets_below)++;
      ++i;
    }
  }
  return report;
}

nlohmann::ordered_json report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["eer"] = report.eer;
  j["eer_threshold"] = report.eer_threshold;
  j["auc"] = report.auc;
  j["n_target"] = report.n_target;
  j["n_nontarget"] = report.n_nontarget;
  j["counts"] = {{"tp", report.tp}, {"fp", report.fp}, {"tn", report.tn}, {"fn", report.fn}};
  auto roc = nlohmann::ordered_json::array();
  for (const auto& p : report.roc) roc.push_back({p.threshold, p.fpr, p.fnr, p.tpr});
  j["roc"] = std::move(roc);
  return j;
}

}  // namespace wsi
