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

// Command-line frontend: synth | train | embed | eval | verify | gradcheck.
// Exit codes: 0 success (or verify-accept), 1 verify-reject / gradcheck FAIL,
// 2 usage, configuration or I/O errors, 3 numeric failures.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "wsi/checkpoint.hpp"
#include "wsi/config.hpp"
#include "wsi/eval.hpp"
#include "wsi/train.hpp"
#include "wsi/wav.hpp"

namespace fs = std::filesystem;
using namespace wsi;

namespace {

constexpr int kExitReject = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct CommonConfigFlags {
  std::string config_path;
  std::string preset = "base";
  std::optional<int> fixed_frames;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file (sections: features, model, augment, loss, train)");
    cmd->add_option("--preset", preset, "Model size preset: 'base' (whisper-tiny shaped, 3000 frames) or 'micro' (test scale, 300 frames)")
        ->check(CLI::IsMember({"base", "micro"}))
        ->capture_default_str();
    cmd->add_option("--fixed-frames", fixed_frames, "Override features.fixed_frames");
  }

  // Precedence: defaults < preset < config file < flags.
  RunConfig resolve() const {
    RunConfig cfg;
    if (preset == "micro") {
      cfg.model = ModelConfig::micro();
      cfg.features.fixed_frames = 300;
    }
    if (!config_path.empty()) cfg = load_run_config(config_path, cfg);
    if (fixed_frames) cfg.features.fixed_frames = *fixed_frames;
    return cfg;
  }
};

// For embed/eval/verify: the checkpoint's embedded model config is
// authoritative; feature settings come from --config, else from the
// training sidecar next to the checkpoint, else defaults.
RunConfig resolve_scoring_config(const std::string& config_path, const fs::path& checkpoint,
                                 std::optional<int> fixed_frames) {
  RunConfig cfg;
  if (!config_path.empty()) {
    cfg = load_run_config(config_path);
  } else {
    const fs::path sidecar = checkpoint.string() + ".run.json";
    if (fs::exists(sidecar)) cfg = load_run_config(sidecar);
  }
  if (fixed_frames) cfg.features.fixed_frames = *fixed_frames;
  return cfg;
}

Vector embed_wav(const fs::path& wav_path, const ModelParams& params, const FeatureConfig& features) {
  const WavData wav = read_wav(wav_path);
  return embed_features(log_mel(wav.samples, wav.sample_rate, features), params);
}

void print_json_array(const Vector& v) {
  std::string out = "[";
  char buf[32];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", v(i));
    out += buf;
    if (i + 1 < v.size()) out += ",";
  }
  out += "]";
  std::puts(out.c_str());
}

int cmd_synth(const fs::path& out_dir, std::uint64_t seed, int speakers, int utts, double duration,
              bool force, int trial_targets, int trial_nontargets, std::optional<std::uint64_t> trial_seed,
              int val_speakers) {
  if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force)
    throw ConfigError("output directory " + out_dir.string() + " is not empty (use --force to overwrite)");

  const Corpus corpus = generate_corpus(seed, speakers, utts, duration);
  write_corpus(corpus, out_dir);
  std::printf("wrote %zu utterances (%d speakers x %d) to %s\n", corpus.utterances.size(), speakers, utts,
              out_dir.string().c_str());

  if (val_speakers > 0) {
    const SpeakerSplit split = split_by_speaker(corpus, val_speakers);
    write_manifest(corpus, split.train_utterances, out_dir / "manifest.train.tsv");
    write_manifest(corpus, split.val_utterances, out_dir / "manifest.val.tsv");
    std::printf("split: %zu train / %zu val utterances\n", split.train_utterances.size(),
                split.val_utterances.size());
  }
  if (trial_targets > 0 || trial_nontargets > 0) {
    const TrialList trials =
        make_trials(corpus, trial_seed.value_or(seed + 1), trial_targets, trial_nontargets);
    write_trials(trials, out_dir / "trials.txt");
    std::printf("wrote %zu trials to %s\n", trials.trials.size(), (out_dir / "trials.txt").string().c_str());
  }

  nlohmann::ordered_json manifest;
  manifest["seed"] = seed;
  manifest["speakers"] = speakers;
  manifest["utts_per_speaker"] = utts;
  manifest["duration_s"] = duration;
  manifest["trial_targets"] = trial_targets;
  manifest["trial_nontargets"] = trial_nontargets;
  manifest["trial_seed"] = trial_seed.value_or(seed + 1);
  manifest["val_speakers"] = val_speakers;
  std::ofstream f(out_dir / "synth.json", std::ios::trunc);
  f << manifest.dump(2) << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& corpus_dir, const std::string& manifest_name,
              const fs::path& out_ckpt, const fs::path& log_path) {
  cfg.validate();
  const Corpus corpus = load_corpus(corpus_dir, manifest_name);
  save_run_config(cfg, out_ckpt.string() + ".run.json");

  StepRecord last{};
  double total_sum = 0.0;
  long n_steps = 0;
  const FitResult result = fit(corpus, cfg, out_ckpt, log_path, [&](const StepRecord& rec) {
    last = rec;
    total_sum += rec.total;
    ++n_steps;
  });
  (void)result;
  if (n_steps > 0) {
    std::printf("final step=%ld epoch=%d total=%.6f triplet=%.6f ntxent=%.6f mean_total=%.6f\n", last.step,
                last.epoch, last.total, last.triplet, last.ntxent, total_sum / static_cast<double>(n_steps));
  } else {
    std::printf("no training steps (epochs=0); wrote initialization checkpoint\n");
  }
  std::printf("checkpoint=%s log=%s\n", out_ckpt.string().c_str(), log_path.string().c_str());
  return 0;
}

int cmd_embed(const fs::path& checkpoint, const fs::path& wav_path, const std::string& config_path,
              std::optional<int> fixed_frames, const std::string& dump_features) {
  const ModelParams params = load_checkpoint(checkpoint);
  RunConfig cfg = resolve_scoring_config(config_path, checkpoint, fixed_frames);
  cfg.model = params.config;
  cfg.features.n_mels = params.config.n_mels;
  cfg.validate();

  const WavData wav = read_wav(wav_path);
  const LogMelSpectrogram features = log_mel(wav.samples, wav.sample_rate, cfg.features);
  if (!dump_features.empty()) {
    std::ofstream f(dump_features, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + dump_features);
    write_tensor_record(f, "log_mel", {static_cast<std::uint32_t>(features.data.rows()),
                                       static_cast<std::uint32_t>(features.data.cols())},
                        features.data.data(), static_cast<std::size_t>(features.data.size()),
                        TensorDtype::kF64);
  }
  print_json_array(project(pool(encode(features, params)), params));
  return 0;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& trials_path, const fs::path& report_path,
             const std::string& config_path, std::optional<int> fixed_frames, const std::string& roc_dump) {
  const ModelParams params = load_checkpoint(checkpoint);
  RunConfig cfg = resolve_scoring_config(config_path, checkpoint, fixed_frames);
  cfg.model = params.config;
  cfg.features.n_mels = params.config.n_mels;
  cfg.validate();

  const TrialList trials = load_trials(trials_path);
  const fs::path base = trials_path.parent_path();
  const auto scored = score_trials(trials.trials, [&](const std::string& rel) {
    return embed_wav(base / rel, params, cfg.features);
  });
  const EvalReport report = evaluate(scored);

  nlohmann::ordered_json j = report_to_json(report);
  j["config"] = run_config_to_json(cfg);
  std::ofstream f(report_path, std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + report_path.string());
  f << j.dump(2) << '\n';

  if (!roc_dump.empty()) {
    std::ofstream roc(roc_dump, std::ios::trunc);
    if (!roc) throw IoError("cannot open for writing: " + roc_dump);
    for (const auto& p : report.roc) {
      char line[128];
      std::snprintf(line, sizeof(line), "%.17g\t%.17g\t%.17g\t%.17g\n", p.threshold, p.fpr, p.fnr, p.tpr);
      roc << line;
    }
  }
  std::printf("EER=%.4f%% AUC=%.6f\n", 100.0 * report.eer, report.auc);
  return 0;
}

int cmd_verify(const fs::path& checkpoint, const fs::path& wav_a, const fs::path& wav_b, double threshold,
               const std::string& config_path, std::optional<int> fixed_frames) {
  const ModelParams params = load_checkpoint(checkpoint);
  RunConfig cfg = resolve_scoring_config(config_path, checkpoint, fixed_frames);
  cfg.model = params.config;
  cfg.features.n_mels = params.config.n_mels;
  cfg.validate();

  const double score = cosine_similarity(embed_wav(wav_a, params, cfg.features),
                                         embed_wav(wav_b, params, cfg.features));
  const bool accept = score >= threshold;
  std::printf("score=%.6f threshold=%.6f decision=%s\n", score, threshold, accept ? "accept" : "reject");
  return accept ? 0 : kExitReject;
}

int cmd_gradcheck(const RunConfig& base_cfg, std::uint64_t seed, int coords, double tolerance) {
  RunConfig cfg = base_cfg;
  cfg.train.batch_size = 8;
  cfg.train.speakers_per_batch = 4;
  cfg.train.utts_per_speaker_per_batch = 2;
  cfg.validate();

  // Utterances sized to fill the fixed frame window.
  const double duration = static_cast<double>(cfg.features.fixed_frames) * cfg.features.hop /
                          cfg.features.sample_rate;

  GradCheckReport report;
  bool done = false;
  for (std::uint64_t attempt = 0; attempt < 10 && !done; ++attempt) {
    const std::uint64_t s = seed + attempt;
    const Corpus corpus = generate_corpus(s, 4, 2, duration);
    RunConfig attempt_cfg = cfg;
    attempt_cfg.train.seed = s;
    attempt_cfg.augment.seed = s;
    const auto batches = make_batches(corpus, attempt_cfg.train, s);
    if (batches.empty()) throw ConfigError("gradcheck corpus produced no batches");
    // Larger weights than the training init keep embedding distances O(1),
    // far from mining boundaries.
    const ModelParams params = ModelParams::init(cfg.model, s, 0.25);
    try {
      report = grad_check(params, corpus, batches[0], attempt_cfg, coords, tolerance);
      done = true;
    } catch (const ArgumentError& e) {
      std::fprintf(stderr, "resampling batch (seed %llu): %s\n", static_cast<unsigned long long>(s),
                   e.what());
    }
  }
  if (!done) throw NumericError("gradcheck could not find a boundary-safe batch in 10 attempts");

  for (const auto& t : report.tensors) {
    if (t.skipped)
      std::printf("tensor=%s skipped (non-trainable)\n", t.name.c_str());
    else
      std::printf("tensor=%s max_rel_err=%.3e coords=%d\n", t.name.c_str(), t.max_rel_err, t.n_checked);
  }
  std::printf("%s max_rel_err=%.3e tolerance=%.3e\n", report.passed ? "PASS" : "FAIL", report.max_rel_err,
              report.tolerance);
  return report.passed ? 0 : kExitReject;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speaker-embedding training and verification on a synthetic corpus"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic corpus (WAV + manifest, optional trial list)");
  std::string synth_out;
  std::uint64_t synth_seed = 7;
  int synth_speakers = 20, synth_utts = 10;
  double synth_duration = 4.0;
  bool synth_force = false;
  int synth_targets = 0, synth_nontargets = 0;
  std::optional<std::uint64_t> synth_trial_seed;
  int synth_val_speakers = 0;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Corpus seed")->capture_default_str();
  synth->add_option("--speakers", synth_speakers, "Number of speakers (>= 2)")->capture_default_str();
  synth->add_option("--utts", synth_utts, "Utterances per speaker (>= 2)")->capture_default_str();
  synth->add_option("--duration", synth_duration, "Utterance length in seconds (default mirrors 4 s segments)")
      ->capture_default_str();
  synth->add_flag("--force", synth_force, "Write into a non-empty directory");
  synth->add_option("--trial-targets", synth_targets, "Same-speaker trials to emit")->capture_default_str();
  synth->add_option("--trial-nontargets", synth_nontargets, "Different-speaker trials to emit")
      ->capture_default_str();
  synth->add_option("--trial-seed", synth_trial_seed, "Trial sampling seed (default: corpus seed + 1)");
  synth->add_option("--val-speakers", synth_val_speakers,
                    "Also write manifest.train.tsv / manifest.val.tsv holding out this many speakers")
      ->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train encoder + projection head (batch-hard triplet + self-supervised consistency)");
  CommonConfigFlags train_cfg_flags;
  std::string train_corpus, train_manifest = "manifest.tsv", train_out, train_log;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_epochs, train_batch, train_p, train_k;
  std::optional<double> train_lr, train_lambda, train_margin, train_temp;
  train->add_option("--corpus", train_corpus, "Corpus directory (from synth)")->required();
  train->add_option("--manifest", train_manifest, "Manifest file name inside the corpus directory")
      ->capture_default_str();
  train->add_option("--out", train_out, "Checkpoint output path")->required();
  train->add_option("--log", train_log, "Training log path (default: <out>.log)");
  train_cfg_flags.attach(train);
  train->add_option("--seed", train_seed, "Run seed (default 0)");
  train->add_option("--epochs", train_epochs, "Training epochs (default 3)");
  train->add_option("--lr", train_lr, "Adam learning rate (default 1e-5)");
  train->add_option("--lambda", train_lambda, "Self-supervised loss weight (default 1.0; 0 disables the consistency term)");
  train->add_option("--margin", train_margin, "Triplet margin (default 1.0)");
  train->add_option("--temperature", train_temp, "Contrastive softmax temperature (default 0.5)");
  train->add_option("--batch-size", train_batch, "Batch size (default 16)");
  train->add_option("--speakers-per-batch", train_p, "Distinct speakers per batch (default 4)");
  train->add_option("--utts-per-batch", train_k, "Utterances per speaker per batch (default 4)");

  // embed
  auto* embed = app.add_subcommand("embed", "Print the 256-dim embedding of one WAV as a JSON array");
  std::string embed_ckpt, embed_wav_path, embed_config, embed_dump;
  std::optional<int> embed_frames;
  embed->add_option("--checkpoint", embed_ckpt, "Model checkpoint")->required();
  embed->add_option("--wav", embed_wav_path, "Input WAV file (mono 16 kHz PCM)")->required();
  embed->add_option("--config", embed_config, "JSON config (default: <checkpoint>.run.json if present)");
  embed->add_option("--fixed-frames", embed_frames, "Override features.fixed_frames");
  embed->add_option("--dump-features", embed_dump, "Write the log-mel tensor in the checkpoint record format");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score a trial list and report EER / AUC / ROC");
  std::string eval_ckpt, eval_trials, eval_report = "report.json", eval_config, eval_roc;
  std::optional<int> eval_frames;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
  eval_cmd->add_option("--trials", eval_trials, "Trial list file; WAV paths resolve relative to it")->required();
  eval_cmd->add_option("--report", eval_report, "JSON report output path")->capture_default_str();
  eval_cmd->add_option("--config", eval_config, "JSON config (default: <checkpoint>.run.json if present)");
  eval_cmd->add_option("--fixed-frames", eval_frames, "Override features.fixed_frames");
  eval_cmd->add_option("--roc-dump", eval_roc, "Optional tab-separated ROC dump (threshold fpr fnr tpr)");

  // verify
  auto* verify = app.add_subcommand("verify", "Same-speaker decision for two WAV files");
  std::string verify_ckpt, verify_config;
  std::string verify_a, verify_b;
  double verify_threshold = 0.5;
  std::optional<int> verify_frames;
  verify->add_option("wav_a", verify_a, "First WAV file")->required();
  verify->add_option("wav_b", verify_b, "Second WAV file")->required();
  verify->add_option("--checkpoint", verify_ckpt, "Model checkpoint")->required();
  verify->add_option("--threshold", verify_threshold, "Accept when cosine score >= threshold")
      ->capture_default_str();
  verify->add_option("--config", verify_config, "JSON config (default: <checkpoint>.run.json if present)");
  verify->add_option("--fixed-frames", verify_frames, "Override features.fixed_frames");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference verification of the analytic gradients");
  CommonConfigFlags gc_cfg_flags;
  gc_cfg_flags.preset = "micro";
  std::uint64_t gc_seed = 1;
  int gc_coords = 20;
  double gc_tolerance = 1e-4;
  gc_cfg_flags.attach(gradcheck);
  gradcheck->add_option("--seed", gc_seed, "Seed for the check corpus and batch")->capture_default_str();
  gradcheck->add_option("--coords", gc_coords, "Coordinates sampled per tensor")->capture_default_str();
  gradcheck->add_option("--tolerance", gc_tolerance, "Maximum relative error")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      return cmd_synth(synth_out, synth_seed, synth_speakers, synth_utts, synth_duration, synth_force,
                       synth_targets, synth_nontargets, synth_trial_seed, synth_val_speakers);
    }
    if (train->parsed()) {
      RunConfig cfg = train_cfg_flags.resolve();
      if (train_seed) {
        cfg.train.seed = *train_seed;
        cfg.augment.seed = *train_seed;
      }
      if (train_epochs) cfg.train.epochs = *train_epochs;
      if (train_lr) cfg.train.learning_rate = *train_lr;
      if (train_lambda) cfg.train.loss.ssl_weight = *train_lambda;
      if (train_margin) cfg.train.loss.margin = *train_margin;
      if (train_temp) cfg.train.loss.temperature = *train_temp;
      if (train_batch) cfg.train.batch_size = *train_batch;
      if (train_p) cfg.train.speakers_per_batch = *train_p;
      if (train_k) cfg.train.utts_per_speaker_per_batch = *train_k;
      const std::string log = train_log.empty() ? train_out + ".log" : train_log;
      return cmd_train(cfg, train_corpus, train_manifest, train_out, log);
    }
    if (embed->parsed()) return cmd_embed(embed_ckpt, embed_wav_path, embed_config, embed_frames, embed_dump);
    if (eval_cmd->parsed())
      return cmd_eval(eval_ckpt, eval_trials, eval_report, eval_config, eval_frames, eval_roc);
    if (verify->parsed())
      return cmd_verify(verify_ckpt, verify_a, verify_b, verify_threshold, verify_config, verify_frames);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_cfg_flags.resolve(), gc_seed, gc_coords, gc_tolerance);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
