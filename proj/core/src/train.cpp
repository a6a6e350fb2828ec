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

#include "wsi/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "wsi/checkpoint.hpp"
#include "wsi/rng.hpp"

namespace wsi {

namespace {

constexpr std::uint64_t kEpochStream = 0x65706f6368ULL;
constexpr std::uint64_t kAugmentStream = 0x617567ULL;
constexpr double kBoundaryMargin = 1e-3;
constexpr double kFdEpsilon = 1e-5;

struct PreparedBatch {
  std::vector<int> labels;
  std::vector<LogMelSpectrogram> clean;
  std::vector<LogMelSpectrogram> noise;
  std::vector<LogMelSpectrogram> stretch;
};

PreparedBatch prepare_views(const Corpus& corpus, const Batch& batch, const RunConfig& cfg, int epoch,
                            long step, FeatureCache* cache) {
  PreparedBatch out;
  const std::size_t b = batch.size();
  out.labels.resize(b);
  out.clean.resize(b);
  out.noise.resize(b);
  out.stretch.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& utt = corpus.utterances.at(static_cast<std::size_t>(batch[i]));
    out.labels[i] = utt.speaker_id;
    if (cache) {
      auto it = cache->find(batch[i]);
      if (it == cache->end())
        it = cache->emplace(batch[i], log_mel(utt.samples, utt.sample_rate, cfg.features)).first;
      out.clean[i] = it->second;
    } else {
      out.clean[i] = log_mel(utt.samples, utt.sample_rate, cfg.features);
    }
    // One independent draw stream per (epoch, step, sample, view).
    Rng rng_noise(derive_seed(cfg.augment.seed, {kAugmentStream, static_cast<std::uint64_t>(epoch),
                                                 static_cast<std::uint64_t>(step), i, 0}));
    out.noise[i] = log_mel(noise_augment(utt.samples, cfg.augment, rng_noise), utt.sample_rate, cfg.features);
    Rng rng_stretch(derive_seed(cfg.augment.seed, {kAugmentStream, static_cast<std::uint64_t>(epoch),
                                                   static_cast<std::uint64_t>(step), i, 1}));
    out.stretch[i] =
        log_mel(time_stretch(utt.samples, cfg.augment, rng_stretch), utt.sample_rate, cfg.features);
  }
  return out;
}

void forward_views(const PreparedBatch& views, const ModelParams& params, Matrix& z, Matrix& zn, Matrix& zt) {
  const auto b = static_cast<Eigen::Index>(views.labels.size());
  const int dim = params.config.embed_dim;
  z.resize(b, dim);
  zn.resize(b, dim);
  zt.resize(b, dim);
  for (Eigen::Index i = 0; i < b; ++i) {
    z.row(i) = embed_features(views.clean[static_cast<std::size_t>(i)], params).transpose();
    zn.row(i) = embed_features(views.noise[static_cast<std::size_t>(i)], params).transpose();
    zt.row(i) = embed_features(views.stretch[static_cast<std::size_t>(i)], params).transpose();
  }
}

// Backward through one embedding pass; the pooled gradient spreads uniformly
// over the frames.
void backward_one_view(const LogMelSpectrogram& feats, const ModelParams& params, const Vector& d_embedding,
                       ModelParams& grads) {
  EncodeWorkspace ws;
  ProjWorkspace pws;
  FrameEmbeddings frames = encode(feats, params, &ws);
  Vector pooled = pool(frames);
  (void)project(pooled, params, &pws);
  Vector d_pooled;
  project_backward(params, pws, d_embedding, grads, d_pooled);
  const auto t2 = frames.data.rows();
  Matrix d_frames(t2, d_pooled.size());
  d_frames.rowwise() = (d_pooled / static_cast<double>(t2)).transpose();
  encode_backward(params, ws, d_frames, grads);
}

// Joint loss plus parameter gradients for a prepared batch.
JointLoss accumulate_gradients(const ModelParams& params, const PreparedBatch& views, const LossConfig& loss_cfg,
                               ModelParams& grads) {
  Matrix z, zn, zt;
  forward_views(views, params, z, zn, zt);
  Matrix dz, dzn, dzt;
  const JointLoss joint = joint_loss(z, zn, zt, views.labels, loss_cfg, &dz, &dzn, &dzt);
  if (!std::isfinite(joint.total)) throw NumericError("non-finite loss");
  for (std::size_t i = 0; i < views.labels.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    backward_one_view(views.clean[i], params, dz.row(r).transpose(), grads);
    backward_one_view(views.noise[i], params, dzn.row(r).transpose(), grads);
    backward_one_view(views.stretch[i], params, dzt.row(r).transpose(), grads);
  }
  return joint;
}

const TensorView* find_nonfinite(const std::vector<TensorView>& views) {
  for (const auto& t : views) {
    for (std::size_t i = 0; i < t.size; ++i)
      if (!std::isfinite(t.data[i])) return &t;
  }
  return nullptr;
}

}  // namespace

TrainState TrainState::init(const ModelParams& params) {
  TrainState s;
  s.adam_m = ModelParams::zeros_like(params);
  s.adam_v = ModelParams::zeros_like(params);
  return s;
}

std::vector<Batch> make_batches(const Corpus& corpus, const TrainConfig& cfg, std::uint64_t epoch_seed) {
  cfg.validate();
  const int p = cfg.speakers_per_batch;
  const int k = cfg.utts_per_speaker_per_batch;

  std::map<int, std::vector<int>> by_speaker;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i)
    by_speaker[corpus.utterances[i].speaker_id].push_back(static_cast<int>(i));

  int feasible = 0;
  for (const auto& [sid, utts] : by_speaker)
    if (static_cast<int>(utts.size()) >= k) ++feasible;
  if (feasible < p)
    throw ConfigError("corpus cannot supply " + std::to_string(p) + " speakers with " + std::to_string(k) +
                      " utterances each");

  Rng rng(epoch_seed);
  std::vector<int> speaker_order;
  speaker_order.reserve(by_speaker.size());
  for (const auto& [sid, utts] : by_speaker) speaker_order.push_back(sid);
  rng.shuffle(speaker_order);
  std::map<int, std::vector<int>> remaining;
  for (int sid : speaker_order) {
    auto utts = by_speaker[sid];
    rng.shuffle(utts);
    remaining[sid] = std::move(utts);
  }

  std::vector<Batch> batches;
  for (;;) {
    // Stable order: most utterances left first, earlier shuffle position on
    // ties.
    std::vector<int> candidates;
    for (int sid : speaker_order)
      if (static_cast<int>(remaining[sid].size()) >= k) candidates.push_back(sid);
    if (static_cast<int>(candidates.size()) < p) break;
    std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
      return remaining[a].size() > remaining[b].size();
    });
    Batch batch;
    batch.reserve(static_cast<std::size_t>(p * k));
    for (int s = 0; s < p; ++s) {
      auto& pool_utts = remaining[candidates[static_cast<std::size_t>(s)]];
      for (int j = 0; j < k; ++j) {
        batch.push_back(pool_utts.back());
        pool_utts.pop_back();
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

StepRecord train_step(ModelParams& params, TrainState& state, const Corpus& corpus, const Batch& batch,
                      const RunConfig& cfg, FeatureCache* cache) {
  if (batch.empty()) throw ArgumentError("train_step: empty batch");

  const PreparedBatch views = prepare_views(corpus, batch, cfg, state.epoch, state.step, cache);
  ModelParams grads = ModelParams::zeros_like(params);
  const JointLoss joint = accumulate_gradients(params, views, cfg.train.loss, grads);

  auto grad_views = grads.tensors();
  if (const TensorView* bad = find_nonfinite(grad_views))
    throw NumericError("non-finite gradient in tensor " + bad->name);

  if (cfg.train.grad_clip_enabled) {
    double sq = 0.0;
    for (const auto& t : grad_views) {
      if (!t.trainable) continue;
      for (std::size_t i = 0; i < t.size; ++i) sq += t.data[i] * t.data[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg.train.grad_clip_norm) {
      const double scale = cfg.train.grad_clip_norm / norm;
      for (auto& t : grad_views)
        for (std::size_t i = 0; i < t.size; ++i) t.data[i] *= scale;
    }
  }

  // Adam with bias correction; moments update even at learning rate zero.
  const long t = state.step + 1;
  const double b1 = cfg.train.adam_beta1;
  const double b2 = cfg.train.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
  auto param_views = params.tensors();
  auto m_views = state.adam_m.tensors();
  auto v_views = state.adam_v.tensors();
  for (std::size_t ti = 0; ti < param_views.size(); ++ti) {
    if (!param_views[ti].trainable) continue;
    double* w = param_views[ti].data;
    double* m = m_views[ti].data;
    double* v = v_views[ti].data;
    const double* g = grad_views[ti].data;
    for (std::size_t i = 0; i < param_views[ti].size; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      w[i] -= cfg.train.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.train.adam_eps);
    }
  }

  state.step = t;
  StepRecord rec{t, state.epoch, joint.total, joint.triplet, joint.ntxent};
  state.history.push_back(rec);
  return rec;
}

GradCheckReport grad_check(const ModelParams& params, const Corpus& corpus, const Batch& batch,
                           const RunConfig& cfg, int n_coords, double tolerance,
                           const std::function<void(ModelParams&)>& grad_hook) {
  if (n_coords < 1) throw ArgumentError("grad_check: n_coords must be >= 1");
  const PreparedBatch views = prepare_views(corpus, batch, cfg, 0, 0, nullptr);

  struct Structure {
    std::vector<int> positive, negative;
    std::vector<bool> active;
    double margin = 0.0;
    bool operator==(const Structure& o) const {
      return positive == o.positive && negative == o.negative && active == o.active;
    }
  };
  auto loss_and_structure = [&](const ModelParams& p, Structure* st) {
    Matrix z, zn, zt;
    forward_views(views, p, z, zn, zt);
    const JointLoss joint = joint_loss(z, zn, zt, views.labels, cfg.train.loss);
    if (st) {
      const MinedTriplets mined = mine_batch_hard(z, views.labels);
      st->positive = mined.positive;
      st->negative = mined.negative;
      st->active.assign(mined.valid.size(), false);
      for (std::size_t a = 0; a < mined.valid.size(); ++a) {
        if (!mined.valid[a]) continue;
        const double d_ap = (z.row(static_cast<Eigen::Index>(a)) - z.row(mined.positive[a])).norm();
        const double d_an = (z.row(static_cast<Eigen::Index>(a)) - z.row(mined.negative[a])).norm();
        st->active[a] = cfg.train.loss.margin + d_ap - d_an > 0.0;
      }
      st->margin = mining_boundary_margin(z, views.labels, cfg.train.loss);
    }
    return joint.total;
  };

  Structure base;
  (void)loss_and_structure(params, &base);
  if (base.margin < kBoundaryMargin)
    throw ArgumentError("grad_check: batch sits within " + std::to_string(kBoundaryMargin) +
                        " of a mining/hinge boundary; redraw the batch seed");

  ModelParams grads = ModelParams::zeros_like(params);
  (void)accumulate_gradients(params, views, cfg.train.loss, grads);
  if (grad_hook) grad_hook(grads);
  const auto grad_views = grads.tensors();

  ModelParams probe = params;  // mutated one coordinate at a time
  auto probe_views = probe.tensors();

  GradCheckReport report;
  report.tolerance = tolerance;
  Rng rng(derive_seed(cfg.train.seed, {0x67636bULL}));
  for (std::size_t ti = 0; ti < probe_views.size(); ++ti) {
    GradCheckTensor entry;
    entry.name = probe_views[ti].name;
    if (!probe_views[ti].trainable) {
      entry.skipped = true;
      report.tensors.push_back(std::move(entry));
      continue;
    }
    const std::size_t size = probe_views[ti].size;
    const int want = std::min<int>(n_coords, static_cast<int>(size));
    int attempts = 0;
    const int max_attempts = want * 20;
    while (entry.n_checked < want && attempts < max_attempts) {
      ++attempts;
      const std::size_t ci = static_cast<std::size_t>(rng.uniform_int(size));
      double* slot = probe_views[ti].data + ci;
      const double saved = *slot;
      Structure sp, sm;
      *slot = saved + kFdEpsilon;
      const double f_plus = loss_and_structure(probe, &sp);
      *slot = saved - kFdEpsilon;
      const double f_minus = loss_and_structure(probe, &sm);
      *slot = saved;
      // Reject probes whose discrete structure differs between the two
      // evaluation points; the difference quotient is meaningless there.
      if (!(sp == base) || !(sm == base) || sp.margin < kBoundaryMargin || sm.margin < kBoundaryMargin)
        continue;
      const double fd = (f_plus - f_minus) / (2.0 * kFdEpsilon);
      const double analytic = grad_views[ti].data[ci];
      const double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-6});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      ++entry.n_checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.tensors.push_back(std::move(entry));
  }
  report.passed = report.max_rel_err <= tolerance;
  for (const auto& t : report.tensors)
    if (!t.skipped && t.n_checked == 0) report.passed = false;
  return report;
}

std::string format_step_record(const StepRecord& r) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "step=%ld epoch=%d total=%.17g triplet=%.17g ntxent=%.17g", r.step,
                r.epoch, r.total, r.triplet, r.ntxent);
  return buf;
}

FitResult fit(const Corpus& corpus, const RunConfig& cfg, const std::filesystem::path& checkpoint_path,
              const std::filesystem::path& log_path, const std::function<void(const StepRecord&)>& on_step) {
  cfg.validate();
  ModelParams params = ModelParams::init(cfg.model, cfg.train.seed);
  TrainState state = TrainState::init(params);
  FeatureCache cache;

  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError("cannot open training log for writing: " + log_path.string());

  if (cfg.train.epochs == 0) save_checkpoint(params, checkpoint_path);
  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    state.epoch = epoch;
    const auto batches =
        make_batches(corpus, cfg.train, derive_seed(cfg.train.seed, {kEpochStream, static_cast<std::uint64_t>(epoch)}));
    for (const Batch& batch : batches) {
      const StepRecord rec = train_step(params, state, corpus, batch, cfg, &cache);
      log << format_step_record(rec) << '\n';
      log.flush();  // partial log survives an aborted step
      if (on_step) on_step(rec);
    }
    save_checkpoint(params, checkpoint_path);
  }
  return {std::move(params), std::move(state.history)};
}

}  // namespace wsi
