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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "wsi/checkpoint.hpp"
#include "wsi/model.hpp"
#include "wsi/rng.hpp"
#include "test_util.hpp"

using namespace wsi;

namespace {

LogMelSpectrogram random_features(int n_mels, int frames, std::uint64_t seed) {
  LogMelSpectrogram x;
  x.config.n_mels = n_mels;
  x.config.fixed_frames = frames;
  x.valid_frames = frames;
  x.data.resize(n_mels, frames);
  Rng rng(seed);
  for (int f = 0; f < n_mels; ++f)
    for (int t = 0; t < frames; ++t) x.data(f, t) = rng.uniform(-1.0, 1.0);
  return x;
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.n_mels = 13;
  cfg.d_model = 8;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.ffn_mult = 2;
  cfg.proj_hidden = 6;
  cfg.embed_dim = 5;
  cfg.max_frames = 24;
  return cfg;
}

}  // namespace

TEST_CASE("micro config shapes: 300 frames stride to 150") {
  const ModelConfig cfg = ModelConfig::micro();
  const ModelParams params = ModelParams::init(cfg, 1);
  const LogMelSpectrogram x = random_features(cfg.n_mels, 300, 2);
  const FrameEmbeddings e = encode(x, params);
  CHECK(e.data.rows() == 150);
  CHECK(e.data.cols() == 32);
}

TEST_CASE("zeroed parameters with unit gains map constant input to constant frames") {
  const ModelConfig cfg = tiny_config();
  ModelParams params = ModelParams::zeros_like(ModelParams::init(cfg, 1));
  params.config = cfg;
  for (auto& b : params.blocks) {
    b.ln1_g.setOnes();
    b.ln2_g.setOnes();
  }
  params.ln_post_g.setOnes();

  LogMelSpectrogram x;
  x.config.n_mels = cfg.n_mels;
  x.config.fixed_frames = 20;
  x.valid_frames = 20;
  x.data = Matrix::Constant(cfg.n_mels, 20, 0.37);
  const FrameEmbeddings e = encode(x, params);
  for (Eigen::Index t = 1; t < e.data.rows(); ++t) CHECK(e.data.row(t) == e.data.row(0));
}

TEST_CASE("encode rejects shape mismatches") {
  const ModelConfig cfg = tiny_config();
  const ModelParams params = ModelParams::init(cfg, 1);
  CHECK_THROWS_AS((void)encode(random_features(cfg.n_mels + 1, 10, 3), params), ArgumentError);
  CHECK_THROWS_AS((void)encode(random_features(cfg.n_mels, cfg.max_frames + 1, 3), params), ArgumentError);
}

TEST_CASE("encode flags non-finite parameters as numeric errors") {
  const ModelConfig cfg = tiny_config();
  ModelParams params = ModelParams::init(cfg, 1);
  params.conv1_w(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS((void)encode(random_features(cfg.n_mels, 10, 3), params), NumericError);
}

TEST_CASE("pool basics") {
  FrameEmbeddings one;
  one.data.resize(1, 3);
  one.data << 1.0, -2.0, 0.5;
  CHECK(pool(one) == Vector(one.data.row(0).transpose()));

  FrameEmbeddings two;
  two.data.resize(2, 2);
  two.data << 1.0, 1.0, 3.0, 3.0;
  const Vector m = pool(two);
  CHECK(m(0) == 2.0);
  CHECK(m(1) == 2.0);

  FrameEmbeddings empty;
  empty.data.resize(0, 4);
  CHECK_THROWS_AS((void)pool(empty), ArgumentError);
}

TEST_CASE("pool matches a compensated-sum oracle") {
  Rng rng(5);
  FrameEmbeddings e;
  e.data.resize(150, 32);
  for (Eigen::Index r = 0; r < 150; ++r)
    for (Eigen::Index c = 0; c < 32; ++c) e.data(r, c) = rng.uniform(-10.0, 10.0);
  const Vector got = pool(e);
  for (Eigen::Index c = 0; c < 32; ++c) {
    // Kahan summation over the column.
    double sum = 0.0, comp = 0.0;
    for (Eigen::Index r = 0; r < 150; ++r) {
      const double y = e.data(r, c) - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
    const double expected = sum / 150.0;
    CHECK(std::abs(got(c) - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));
  }
}

TEST_CASE("pool is exactly permutation invariant") {
  Rng rng(6);
  FrameEmbeddings e;
  e.data.resize(64, 8);
  for (Eigen::Index r = 0; r < 64; ++r)
    for (Eigen::Index c = 0; c < 8; ++c) e.data(r, c) = rng.normal();
  const Vector base = pool(e);

  std::vector<int> perm(64);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  FrameEmbeddings shuffled;
  shuffled.data.resize(64, 8);
  for (int r = 0; r < 64; ++r) shuffled.data.row(r) = e.data.row(perm[static_cast<std::size_t>(r)]);
  CHECK(pool(shuffled) == base);
}

TEST_CASE("project: zero input and zero biases give zero output") {
  const ModelConfig cfg = tiny_config();
  ModelParams params = ModelParams::init(cfg, 2);
  const Vector z = project(Vector::Zero(cfg.d_model), params);
  CHECK(z.isZero(0.0));
}

TEST_CASE("project reproduces a hand-computed 3-dim case") {
  ModelConfig cfg = tiny_config();
  cfg.d_model = 2;
  cfg.n_heads = 1;
  cfg.proj_hidden = 3;
  cfg.embed_dim = 3;
  ModelParams params = ModelParams::init(cfg, 3);
  params.proj1_w << 1, 0, 0, 1, 1, 1;
  params.proj1_b << 0.1, -0.2, 0.0;
  params.proj2_w << 1, 2, 3, 0, 1, 0, -1, 0, 1;
  params.proj2_b << 0.0, 0.5, 0.0;

  Vector v(2);
  v << 0.5, -1.0;
  // hidden_pre = [0.6, -1.2, -0.5]; relu = [0.6, 0, 0]
  // z = W2 * relu + b2 = [0.6, 0.5, -0.6]
  const Vector z = project(v, params);
  CHECK(z(0) == doctest::Approx(0.6));
  CHECK(z(1) == doctest::Approx(0.5));
  CHECK(z(2) == doctest::Approx(-0.6));
}

TEST_CASE("default config projects to 256 dimensions") {
  ModelConfig cfg;  // whisper-tiny shaped defaults
  CHECK(cfg.embed_dim == 256);
  cfg.n_layers = 1;  // keep the test quick; the head is what matters
  cfg.max_frames = 40;
  const ModelParams params = ModelParams::init(cfg, 4);
  const Vector z = embed_features(random_features(cfg.n_mels, 40, 5), params);
  CHECK(z.size() == 256);
}

TEST_CASE("project rejects dimension mismatches") {
  const ModelParams params = ModelParams::init(tiny_config(), 2);
  CHECK_THROWS_AS((void)project(Vector::Zero(3), params), ArgumentError);
}

TEST_CASE("encode output is stable across runs and thread budgets") {
  const ModelConfig cfg = ModelConfig::micro();
  const ModelParams params = ModelParams::init(cfg, 99);
  const LogMelSpectrogram x = random_features(cfg.n_mels, 300, 100);

  setenv("WSI_THREADS", "1", 1);
  const FrameEmbeddings a = encode(x, params);
  setenv("WSI_THREADS", "4", 1);
  const FrameEmbeddings b = encode(x, params);
  unsetenv("WSI_THREADS");
  CHECK(a.data == b.data);

  // Golden hash recorded from this implementation; flags unintended changes
  // to the forward pass or the initializer.
  const std::uint64_t h = testing::hash_doubles(a.data.data(), static_cast<std::size_t>(a.data.size()));
  CHECK(h == 0x112015af10e058feULL);
}

TEST_CASE("full-model gradients match finite differences on a tiny model") {
  const ModelConfig cfg = tiny_config();
  const ModelParams params = ModelParams::init(cfg, 7, 0.3);
  const LogMelSpectrogram x = random_features(cfg.n_mels, 17, 8);

  // Scalar objective: dot(c, embed(x)); smooth in every parameter.
  Rng rng(9);
  Vector c(cfg.embed_dim);
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = rng.uniform(-1.0, 1.0);

  auto objective = [&](const ModelParams& p) { return c.dot(embed_features(x, p)); };

  ModelParams grads = ModelParams::zeros_like(params);
  {
    EncodeWorkspace ws;
    ProjWorkspace pws;
    const FrameEmbeddings frames = encode(x, params, &ws);
    const Vector pooled = pool(frames);
    (void)project(pooled, params, &pws);
    Vector d_pooled;
    project_backward(params, pws, c, grads, d_pooled);
    Matrix d_frames(frames.data.rows(), d_pooled.size());
    d_frames.rowwise() = (d_pooled / static_cast<double>(frames.data.rows())).transpose();
    encode_backward(params, ws, d_frames, grads);
  }

  ModelParams probe = params;
  auto probe_views = probe.tensors();
  auto grad_views = grads.tensors();
  const double eps = 1e-6;
  for (std::size_t ti = 0; ti < probe_views.size(); ++ti) {
    if (!probe_views[ti].trainable) continue;
    Rng coord_rng(derive_seed(11, {ti}));
    const int n = static_cast<int>(std::min<std::size_t>(6, probe_views[ti].size));
    for (int k = 0; k < n; ++k) {
      const std::size_t ci = coord_rng.uniform_int(probe_views[ti].size);
      double* slot = probe_views[ti].data + ci;
      const double saved = *slot;
      *slot = saved + eps;
      const double fp = objective(probe);
      *slot = saved - eps;
      const double fm = objective(probe);
      *slot = saved;
      const double fd = (fp - fm) / (2.0 * eps);
      const double analytic = grad_views[ti].data[ci];
      const double rel = std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-8});
      INFO("tensor ", probe_views[ti].name, " coord ", ci);
      CHECK(rel <= 2e-5);
    }
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  testing::TempDir tmp("ckpt");
  const ModelConfig cfg = ModelConfig::micro();
  const ModelParams params = ModelParams::init(cfg, 21);
  const auto path = tmp.path() / "model.ckpt";
  save_checkpoint(params, path);

  const ModelParams loaded = load_checkpoint(path);
  CHECK(loaded.config == cfg);
  const auto a = params.tensors();
  const auto b = loaded.tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].shape == b[i].shape);
    REQUIRE(a[i].size == b[i].size);
    bool equal = true;
    for (std::size_t k = 0; k < a[i].size; ++k) equal = equal && a[i].data[k] == b[i].data[k];
    CHECK(equal);
  }

  // Re-saving the loaded params reproduces the file byte for byte.
  save_checkpoint(loaded, tmp.path() / "again.ckpt");
  CHECK(testing::read_bytes(path) == testing::read_bytes(tmp.path() / "again.ckpt"));
}

TEST_CASE("f32 checkpoints round trip through float precision") {
  testing::TempDir tmp("ckpt32");
  const ModelParams params = ModelParams::init(ModelConfig::micro(), 22);
  const auto path = tmp.path() / "model32.ckpt";
  save_checkpoint(params, path, TensorDtype::kF32);
  const ModelParams loaded = load_checkpoint(path);
  const auto a = params.tensors();
  const auto b = loaded.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) {
    bool equal = true;
    for (std::size_t k = 0; k < a[i].size; ++k)
      equal = equal && b[i].data[k] == static_cast<double>(static_cast<float>(a[i].data[k]));
    CHECK(equal);
  }
}

TEST_CASE("malformed checkpoints raise distinct errors") {
  testing::TempDir tmp("ckpt_bad");
  const ModelParams params = ModelParams::init(tiny_config(), 23);
  const auto path = tmp.path() / "model.ckpt";
  save_checkpoint(params, path);
  auto bytes = testing::read_bytes(path);

  auto write_variant = [&](const std::vector<char>& data, const char* name) {
    const auto p = tmp.path() / name;
    std::ofstream f(p, std::ios::binary);
    f.write(data.data(), static_cast<std::streamsize>(data.size()));
    return p;
  };

  {
    auto bad = bytes;
    bad[0] = 'X';
    try {
      (void)load_checkpoint(write_variant(bad, "magic.ckpt"));
      FAIL("expected bad magic");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::kBadMagic);
    }
  }
  {
    auto bad = bytes;
    bad[4] = 99;
    try {
      (void)load_checkpoint(write_variant(bad, "version.ckpt"));
      FAIL("expected bad version");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::kBadVersion);
    }
  }
  {
    // Cut the file inside the last tensor's data: its name must be reported.
    auto bad = bytes;
    bad.resize(bad.size() - 16);
    try {
      (void)load_checkpoint(write_variant(bad, "trunc.ckpt"));
      FAIL("expected truncation");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::kTruncated);
      CHECK(std::string(e.what()).find("proj.2.bias") != std::string::npos);
    }
  }
  {
    // Declare one tensor fewer than the config implies.
    auto bad = bytes;
    std::uint32_t cfg_len;
    __builtin_memcpy(&cfg_len, bad.data() + 8, 4);
    const std::size_t count_offset = 12 + cfg_len;
    std::uint32_t count;
    __builtin_memcpy(&count, bad.data() + count_offset, 4);
    count -= 1;
    __builtin_memcpy(bad.data() + count_offset, &count, 4);
    try {
      (void)load_checkpoint(write_variant(bad, "count.ckpt"));
      FAIL("expected inconsistency");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::kInconsistent);
    }
  }
}
