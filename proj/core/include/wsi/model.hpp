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

#ifndef WSI_MODEL_HPP_
#define WSI_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "wsi/common.hpp"
#include "wsi/dsp.hpp"

namespace wsi {

struct ModelConfig {
  int n_mels = 80;
  int d_model = 384;
  int n_layers = 4;
  int n_heads = 6;
  int ffn_mult = 4;
  int proj_hidden = 384;
  int embed_dim = 256;
  int max_frames = 3000;  // input frame capacity before the conv stride

  // Small preset used throughout the test and verification suites.
  static ModelConfig micro();

  int head_dim() const { return d_model / n_heads; }
  int ffn_dim() const { return d_model * ffn_mult; }
  // Frame count after the stride-2 conv stem: ceil(T / 2).
  static int strided_frames(int frames) { return (frames + 1) / 2; }
  int pos_rows() const { return strided_frames(max_frames); }
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Flat view over one named parameter tensor. `shape` is the logical
// (row-major) shape written to checkpoints; `data` always points at
// contiguous row-major storage of `size` doubles.
struct TensorView {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
  std::vector<std::uint32_t> shape;
  bool trainable = true;
};

struct AttentionParams {
  Matrix wq, wk, wv, wo;  // (d_model, d_model); key projection carries no bias
  Vector bq, bv, bo;
};

struct BlockParams {
  Vector ln1_g, ln1_b;
  AttentionParams attn;
  Vector ln2_g, ln2_b;
  Matrix ff1_w;  // (ffn_dim, d_model)
  Vector ff1_b;
  Matrix ff2_w;  // (d_model, ffn_dim)
  Vector ff2_b;
};

struct ModelParams {
  ModelConfig config;
  Matrix conv1_w;  // (d_model, n_mels * 3), logical shape (d_model, n_mels, 3)
  Vector conv1_b;
  Matrix conv2_w;  // (d_model, d_model * 3), logical shape (d_model, d_model, 3)
  Vector conv2_b;
  Matrix pos;      // (pos_rows, d_model), sinusoidal, non-trainable
  std::vector<BlockParams> blocks;
  Vector ln_post_g, ln_post_b;
  Matrix proj1_w;  // (proj_hidden, d_model)
  Vector proj1_b;
  Matrix proj2_w;  // (embed_dim, proj_hidden)
  Vector proj2_b;

  // Truncated-normal(0, weight_std) weights clipped at two standard
  // deviations, zero biases, unit layer-norm gains, sinusoidal positions.
  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed, double weight_std = 0.02);
  // Same shapes, all-zero values (including the position table); used for
  // gradients and optimizer moments.
  static ModelParams zeros_like(const ModelParams& other);

  // Named views over every tensor in a fixed, config-determined order.
  std::vector<TensorView> tensors();
  std::vector<TensorView> tensors() const;  // views are const in spirit; callers must not write

  std::size_t n_trainable() const;
};

Matrix sinusoidal_positions(int rows, int channels);

struct FrameEmbeddings {
  Matrix data;  // T' x D, one row per (strided) frame
};

// Stored activations for one encoder pass, consumed by encode_backward.
struct BlockWorkspace {
  Matrix input;               // stream entering the block
  Vector ln1_mean, ln1_rstd;
  Matrix ln1_out;
  Matrix q, k, v;             // T' x D
  std::vector<Matrix> att;    // per-head softmax matrices, T' x T'
  Matrix att_concat;          // heads merged, input to the out projection
  Matrix after_attn;          // stream after the attention residual
  Vector ln2_mean, ln2_rstd;
  Matrix ln2_out;
  Matrix ff_pre;              // T' x ffn_dim, before GELU
  Matrix ff_act;
};

struct EncodeWorkspace {
  Matrix patches1;   // T x 3F
  Matrix conv1_pre;  // T x D
  Matrix conv1_act;
  Matrix patches2;   // T' x 3D
  Matrix conv2_pre;  // T' x D
  std::vector<BlockWorkspace> blocks;
  Matrix lnp_input;  // stream entering the final layer norm
  Vector lnp_mean, lnp_rstd;
};

// Conv stem -> sinusoidal positions -> pre-norm transformer blocks -> final
// layer norm. Pass a workspace to keep the activations needed for backward.
FrameEmbeddings encode(const LogMelSpectrogram& x, const ModelParams& params,
                       EncodeWorkspace* ws = nullptr);

// Accumulates parameter gradients for one encode pass given the gradient at
// the frame embeddings. `grads` must be zeros_like-shaped.
void encode_backward(const ModelParams& params, const EncodeWorkspace& ws, const Matrix& d_encoded,
                     ModelParams& grads);

// Mean over frames. Each channel is summed in value order, so any
// permutation of the frames yields a bit-identical result.
Vector pool(const FrameEmbeddings& frames);

struct ProjWorkspace {
  Vector input;
  Vector hidden_pre;
};

// Dense -> ReLU -> dense; no output normalization (cosine scoring
// normalizes at comparison time).
Vector project(const Vector& pooled, const ModelParams& params, ProjWorkspace* ws = nullptr);

void project_backward(const ModelParams& params, const ProjWorkspace& ws, const Vector& d_embedding,
                      ModelParams& grads, Vector& d_pooled);

// Full utterance embedding: encode -> pool -> project.
Vector embed_features(const LogMelSpectrogram& x, const ModelParams& params);

}  // namespace wsi

#endif  // WSI_MODEL_HPP_
