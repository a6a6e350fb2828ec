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

#include "wsi/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wsi/rng.hpp"

namespace wsi {

namespace {

constexpr double kLayerNormEps = 1e-5;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void layer_norm(const Matrix& x, const Vector& gain, const Vector& bias, Matrix& y, Vector& mean,
                Vector& rstd) {
  const auto rows = x.rows();
  const auto cols = x.cols();
  y.resize(rows, cols);
  mean.resize(rows);
  rstd.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mu = x.row(r).mean();
    const auto centered = x.row(r).array() - mu;
    const double var = centered.square().sum() / static_cast<double>(cols);
    const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
    y.row(r) = (centered * rs * gain.transpose().array() + bias.transpose().array()).matrix();
    mean(r) = mu;
    rstd(r) = rs;
  }
}

void layer_norm_backward(const Matrix& x, const Vector& gain, const Vector& mean, const Vector& rstd,
                         const Matrix& dy, Matrix& dx, Vector& dgain, Vector& dbias) {
  const auto rows = x.rows();
  const auto cols = x.cols();
  dx.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto xhat = ((x.row(r).array() - mean(r)) * rstd(r)).eval();
    const auto dxhat = (dy.row(r).array() * gain.transpose().array()).eval();
    const double m1 = dxhat.mean();
    const double m2 = (dxhat * xhat).mean();
    dx.row(r) = (rstd(r) * (dxhat - m1 - xhat * m2)).matrix();
    dgain.array() += (dy.row(r).array() * xhat).transpose();
    dbias += dy.row(r).transpose();
  }
}

void require_finite(const Matrix& m, const char* stage) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite activation after ") + stage);
}

}  // namespace

ModelConfig ModelConfig::micro() {
  ModelConfig cfg;
  cfg.n_mels = 80;
  cfg.d_model = 32;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.ffn_mult = 4;
  cfg.proj_hidden = 64;
  cfg.embed_dim = 256;
  cfg.max_frames = 300;
  return cfg;
}

void ModelConfig::validate() const {
  if (n_mels < 1) throw ConfigError("n_mels must be positive");
  if (d_model < 2 || d_model % 2 != 0) throw ConfigError("d_model must be even and >= 2");
  if (n_heads < 1 || d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (n_layers < 1) throw ConfigError("n_layers must be >= 1");
  if (ffn_mult < 1) throw ConfigError("ffn_mult must be >= 1");
  if (proj_hidden < 1) throw ConfigError("proj_hidden must be >= 1");
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (max_frames < 1) throw ConfigError("max_frames must be >= 1");
}

Matrix sinusoidal_positions(int rows, int channels) {
  const int half = channels / 2;
  const double increment = half > 1 ? std::log(10000.0) / (half - 1) : 0.0;
  Matrix out(rows, channels);
  for (int t = 0; t < rows; ++t) {
    for (int i = 0; i < half; ++i) {
      const double angle = t * std::exp(-increment * i);
      out(t, i) = std::sin(angle);
      out(t, half + i) = std::cos(angle);
    }
  }
  return out;
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed, double weight_std) {
  cfg.validate();
  const int d = cfg.d_model;
  ModelParams p;
  p.config = cfg;

  Rng rng(derive_seed(seed, {0x6d6f64656cULL}));  // independent of other streams
  auto fill = [&](Matrix& m, Eigen::Index rows, Eigen::Index cols) {
    m.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.truncated_normal(weight_std);
  };

  fill(p.conv1_w, d, cfg.n_mels * 3);
  p.conv1_b = Vector::Zero(d);
  fill(p.conv2_w, d, d * 3);
  p.conv2_b = Vector::Zero(d);
  p.pos = sinusoidal_positions(cfg.pos_rows(), d);
  p.blocks.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& b : p.blocks) {
    b.ln1_g = Vector::Ones(d);
    b.ln1_b = Vector::Zero(d);
    fill(b.attn.wq, d, d);
    b.attn.bq = Vector::Zero(d);
    fill(b.attn.wk, d, d);
    fill(b.attn.wv, d, d);
    b.attn.bv = Vector::Zero(d);
    fill(b.attn.wo, d, d);
    b.attn.bo = Vector::Zero(d);
    b.ln2_g = Vector::Ones(d);
    b.ln2_b = Vector::Zero(d);
    fill(b.ff1_w, cfg.ffn_dim(), d);
    b.ff1_b = Vector::Zero(cfg.ffn_dim());
    fill(b.ff2_w, d, cfg.ffn_dim());
    b.ff2_b = Vector::Zero(d);
  }
  p.ln_post_g = Vector::Ones(d);
  p.ln_post_b = Vector::Zero(d);
  fill(p.proj1_w, cfg.proj_hidden, d);
  p.proj1_b = Vector::Zero(cfg.proj_hidden);
  fill(p.proj2_w, cfg.embed_dim, cfg.proj_hidden);
  p.proj2_b = Vector::Zero(cfg.embed_dim);
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams p;
  p.config = other.config;
  p.conv1_w = Matrix::Zero(other.conv1_w.rows(), other.conv1_w.cols());
  p.conv1_b = Vector::Zero(other.conv1_b.size());
  p.conv2_w = Matrix::Zero(other.conv2_w.rows(), other.conv2_w.cols());
  p.conv2_b = Vector::Zero(other.conv2_b.size());
  p.pos = Matrix::Zero(other.pos.rows(), other.pos.cols());
  p.blocks.resize(other.blocks.size());
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const auto& src = other.blocks[i];
    auto& dst = p.blocks[i];
    dst.ln1_g = Vector::Zero(src.ln1_g.size());
    dst.ln1_b = Vector::Zero(src.ln1_b.size());
    dst.attn.wq = Matrix::Zero(src.attn.wq.rows(), src.attn.wq.cols());
    dst.attn.bq = Vector::Zero(src.attn.bq.size());
    dst.attn.wk = Matrix::Zero(src.attn.wk.rows(), src.attn.wk.cols());
    dst.attn.wv = Matrix::Zero(src.attn.wv.rows(), src.attn.wv.cols());
    dst.attn.bv = Vector::Zero(src.attn.bv.size());
    dst.attn.wo = Matrix::Zero(src.attn.wo.rows(), src.attn.wo.cols());
    dst.attn.bo = Vector::Zero(src.attn.bo.size());
    dst.ln2_g = Vector::Zero(src.ln2_g.size());
    dst.ln2_b = Vector::Zero(src.ln2_b.size());
    dst.ff1_w = Matrix::Zero(src.ff1_w.rows(), src.ff1_w.cols());
    dst.ff1_b = Vector::Zero(src.ff1_b.size());
    dst.ff2_w = Matrix::Zero(src.ff2_w.rows(), src.ff2_w.cols());
    dst.ff2_b = Vector::Zero(src.ff2_b.size());
  }
  p.ln_post_g = Vector::Zero(other.ln_post_g.size());
  p.ln_post_b = Vector::Zero(other.ln_post_b.size());
  p.proj1_w = Matrix::Zero(other.proj1_w.rows(), other.proj1_w.cols());
  p.proj1_b = Vector::Zero(other.proj1_b.size());
  p.proj2_w = Matrix::Zero(other.proj2_w.rows(), other.proj2_w.cols());
  p.proj2_b = Vector::Zero(other.proj2_b.size());
  return p;
}

namespace {

template <typename Params>
std::vector<TensorView> collect_tensors(Params& p) {
  std::vector<TensorView> out;
  auto u32 = [](Eigen::Index v) { return static_cast<std::uint32_t>(v); };
  auto mat = [&](const std::string& name, auto& m, std::vector<std::uint32_t> shape, bool trainable = true) {
    out.push_back({name, const_cast<double*>(m.data()), static_cast<std::size_t>(m.size()),
                   std::move(shape), trainable});
  };
  const auto& cfg = p.config;
  mat("conv1.weight", p.conv1_w, {u32(cfg.d_model), u32(cfg.n_mels), 3});
  mat("conv1.bias", p.conv1_b, {u32(cfg.d_model)});
  mat("conv2.weight", p.conv2_w, {u32(cfg.d_model), u32(cfg.d_model), 3});
  mat("conv2.bias", p.conv2_b, {u32(cfg.d_model)});
  mat("positional_embedding", p.pos, {u32(p.pos.rows()), u32(cfg.d_model)}, false);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string prefix = "blocks." + std::to_string(i) + ".";
    mat(prefix + "attn_ln.weight", b.ln1_g, {u32(cfg.d_model)});
    mat(prefix + "attn_ln.bias", b.ln1_b, {u32(cfg.d_model)});
    mat(prefix + "attn.query.weight", b.attn.wq, {u32(cfg.d_model), u32(cfg.d_model)});
    mat(prefix + "attn.query.bias", b.attn.bq, {u32(cfg.d_model)});
    mat(prefix + "attn.key.weight", b.attn.wk, {u32(cfg.d_model), u32(cfg.d_model)});
    mat(prefix + "attn.value.weight", b.attn.wv, {u32(cfg.d_model), u32(cfg.d_model)});
    mat(prefix + "attn.value.bias", b.attn.bv, {u32(cfg.d_model)});
    mat(prefix + "attn.out.weight", b.attn.wo, {u32(cfg.d_model), u32(cfg.d_model)});
    mat(prefix + "attn.out.bias", b.attn.bo, {u32(cfg.d_model)});
    mat(prefix + "mlp_ln.weight", b.ln2_g, {u32(cfg.d_model)});
    mat(prefix + "mlp_ln.bias", b.ln2_b, {u32(cfg.d_model)});
    mat(prefix + "mlp.0.weight", b.ff1_w, {u32(cfg.ffn_dim()), u32(cfg.d_model)});
    mat(prefix + "mlp.0.bias", b.ff1_b, {u32(cfg.ffn_dim())});
    mat(prefix + "mlp.2.weight", b.ff2_w, {u32(cfg.d_model), u32(cfg.ffn_dim())});
    mat(prefix + "mlp.2.bias", b.ff2_b, {u32(cfg.d_model)});
  }
  mat("ln_post.weight", p.ln_post_g, {u32(cfg.d_model)});
  mat("ln_post.bias", p.ln_post_b, {u32(cfg.d_model)});
  mat("proj.0.weight", p.proj1_w, {u32(cfg.proj_hidden), u32(cfg.d_model)});
  mat("proj.0.bias", p.proj1_b, {u32(cfg.proj_hidden)});
  mat("proj.2.weight", p.proj2_w, {u32(cfg.embed_dim), u32(cfg.proj_hidden)});
  mat("proj.2.bias", p.proj2_b, {u32(cfg.embed_dim)});
  return out;
}

}  // namespace

std::vector<TensorView> ModelParams::tensors() { return collect_tensors(*this); }
std::vector<TensorView> ModelParams::tensors() const { return collect_tensors(*this); }

std::size_t ModelParams::n_trainable() const {
  std::size_t n = 0;
  for (const auto& t : tensors())
    if (t.trainable) n += t.size;
  return n;
}

FrameEmbeddings encode(const LogMelSpectrogram& x, const ModelParams& params, EncodeWorkspace* ws) {
  const ModelConfig& cfg = params.config;
  if (x.data.rows() != cfg.n_mels)
    throw ArgumentError("encode: input has " + std::to_string(x.data.rows()) + " mel bins, model expects " +
                        std::to_string(cfg.n_mels));
  const int frames = static_cast<int>(x.data.cols());
  if (frames > cfg.max_frames)
    throw ArgumentError("encode: input frames " + std::to_string(frames) + " exceed capacity " +
                        std::to_string(cfg.max_frames));

  const int d = cfg.d_model;
  const int t1 = frames;
  const int t2 = ModelConfig::strided_frames(frames);

  EncodeWorkspace local;
  EncodeWorkspace& w = ws ? *ws : local;

  // Conv stem. Patch layout matches a (out, in, tap) weight: column i*3+j of
  // a patch row holds channel i at tap j.
  w.patches1 = Matrix::Zero(t1, 3 * cfg.n_mels);
  for (int t = 0; t < t1; ++t) {
    for (int j = 0; j < 3; ++j) {
      const int s = t + j - 1;
      if (s < 0 || s >= t1) continue;
      for (int i = 0; i < cfg.n_mels; ++i) w.patches1(t, i * 3 + j) = x.data(i, s);
    }
  }
  w.conv1_pre.noalias() = w.patches1 * params.conv1_w.transpose();
  w.conv1_pre.rowwise() += params.conv1_b.transpose();
  w.conv1_act = w.conv1_pre.unaryExpr([](double v) { return gelu(v); });

  w.patches2 = Matrix::Zero(t2, 3 * d);
  for (int u = 0; u < t2; ++u) {
    for (int j = 0; j < 3; ++j) {
      const int s = 2 * u + j - 1;
      if (s < 0 || s >= t1) continue;
      for (int i = 0; i < d; ++i) w.patches2(u, i * 3 + j) = w.conv1_act(s, i);
    }
  }
  w.conv2_pre.noalias() = w.patches2 * params.conv2_w.transpose();
  w.conv2_pre.rowwise() += params.conv2_b.transpose();
  Matrix stream = w.conv2_pre.unaryExpr([](double v) { return gelu(v); });
  stream += params.pos.topRows(t2);
  require_finite(stream, "conv_stem");

  const int heads = cfg.n_heads;
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  w.blocks.assign(static_cast<std::size_t>(cfg.n_layers), BlockWorkspace{});
  for (int layer = 0; layer < cfg.n_layers; ++layer) {
    const BlockParams& b = params.blocks[static_cast<std::size_t>(layer)];
    BlockWorkspace& bw = w.blocks[static_cast<std::size_t>(layer)];
    bw.input = stream;
    layer_norm(bw.input, b.ln1_g, b.ln1_b, bw.ln1_out, bw.ln1_mean, bw.ln1_rstd);

    bw.q.noalias() = bw.ln1_out * b.attn.wq.transpose();
    bw.q.rowwise() += b.attn.bq.transpose();
    bw.k.noalias() = bw.ln1_out * b.attn.wk.transpose();
    bw.v.noalias() = bw.ln1_out * b.attn.wv.transpose();
    bw.v.rowwise() += b.attn.bv.transpose();

    bw.att.assign(static_cast<std::size_t>(heads), Matrix());
    bw.att_concat.resize(t2, d);
    for (int h = 0; h < heads; ++h) {
      const auto qh = bw.q.middleCols(h * dh, dh);
      const auto kh = bw.k.middleCols(h * dh, dh);
      const auto vh = bw.v.middleCols(h * dh, dh);
      Matrix scores = (qh * kh.transpose()) * scale;
      for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const double mx = scores.row(r).maxCoeff();
        Eigen::ArrayXd e = (scores.row(r).array() - mx).exp();
        scores.row(r) = (e / e.sum()).matrix();
      }
      bw.att[static_cast<std::size_t>(h)] = std::move(scores);
      bw.att_concat.middleCols(h * dh, dh).noalias() = bw.att[static_cast<std::size_t>(h)] * vh;
    }
    Matrix attn_out = bw.att_concat * b.attn.wo.transpose();
    attn_out.rowwise() += b.attn.bo.transpose();
    bw.after_attn = bw.input + attn_out;

    layer_norm(bw.after_attn, b.ln2_g, b.ln2_b, bw.ln2_out, bw.ln2_mean, bw.ln2_rstd);
    bw.ff_pre.noalias() = bw.ln2_out * b.ff1_w.transpose();
    bw.ff_pre.rowwise() += b.ff1_b.transpose();
    bw.ff_act = bw.ff_pre.unaryExpr([](double v) { return gelu(v); });
    Matrix ffn_out = bw.ff_act * b.ff2_w.transpose();
    ffn_out.rowwise() += b.ff2_b.transpose();
    stream = bw.after_attn + ffn_out;
    require_finite(stream, ("block " + std::to_string(layer)).c_str());
  }

  w.lnp_input = std::move(stream);
  FrameEmbeddings out;
  layer_norm(w.lnp_input, params.ln_post_g, params.ln_post_b, out.data, w.lnp_mean, w.lnp_rstd);
  require_finite(out.data, "ln_post");
  return out;
}

void encode_backward(const ModelParams& params, const EncodeWorkspace& ws, const Matrix& d_encoded,
                     ModelParams& grads) {
  const ModelConfig& cfg = params.config;
  const int d = cfg.d_model;
  const int heads = cfg.n_heads;
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const int t2 = static_cast<int>(ws.lnp_input.rows());
  const int t1 = static_cast<int>(ws.conv1_act.rows());

  Matrix d_stream;
  layer_norm_backward(ws.lnp_input, params.ln_post_g, ws.lnp_mean, ws.lnp_rstd, d_encoded, d_stream,
                      grads.ln_post_g, grads.ln_post_b);

  for (int layer = cfg.n_layers - 1; layer >= 0; --layer) {
    const BlockParams& b = params.blocks[static_cast<std::size_t>(layer)];
    const BlockWorkspace& bw = ws.blocks[static_cast<std::size_t>(layer)];
    auto& gb = grads.blocks[static_cast<std::size_t>(layer)];

    // Feed-forward branch.
    const Matrix& d_out = d_stream;
    Matrix d_ff_act = d_out * b.ff2_w;
    gb.ff2_w.noalias() += d_out.transpose() * bw.ff_act;
    gb.ff2_b += d_out.colwise().sum().transpose();
    Matrix d_ff_pre =
        d_ff_act.array() * bw.ff_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    Matrix d_ln2_out = d_ff_pre * b.ff1_w;
    gb.ff1_w.noalias() += d_ff_pre.transpose() * bw.ln2_out;
    gb.ff1_b += d_ff_pre.colwise().sum().transpose();
    Matrix d_after_attn_ln;
    layer_norm_backward(bw.after_attn, b.ln2_g, bw.ln2_mean, bw.ln2_rstd, d_ln2_out, d_after_attn_ln,
                        gb.ln2_g, gb.ln2_b);
    Matrix d_after_attn = d_out + d_after_attn_ln;

    // Attention branch.
    Matrix d_concat = d_after_attn * b.attn.wo;
    gb.attn.wo.noalias() += d_after_attn.transpose() * bw.att_concat;
    gb.attn.bo += d_after_attn.colwise().sum().transpose();

    Matrix dq(t2, d), dk(t2, d), dv(t2, d);
    for (int h = 0; h < heads; ++h) {
      const auto qh = bw.q.middleCols(h * dh, dh);
      const auto kh = bw.k.middleCols(h * dh, dh);
      const auto vh = bw.v.middleCols(h * dh, dh);
      const Matrix& att = bw.att[static_cast<std::size_t>(h)];
      const auto d_oh = d_concat.middleCols(h * dh, dh);

      Matrix d_att = d_oh * vh.transpose();
      dv.middleCols(h * dh, dh).noalias() = att.transpose() * d_oh;

      Matrix d_scores(t2, t2);
      for (int r = 0; r < t2; ++r) {
        const double dot = d_att.row(r).dot(att.row(r));
        d_scores.row(r) = (att.row(r).array() * (d_att.row(r).array() - dot)).matrix();
      }
      dq.middleCols(h * dh, dh).noalias() = scale * (d_scores * kh);
      dk.middleCols(h * dh, dh).noalias() = scale * (d_scores.transpose() * qh);
    }

    Matrix d_ln1_out = dq * b.attn.wq;
    d_ln1_out.noalias() += dk * b.attn.wk;
    d_ln1_out.noalias() += dv * b.attn.wv;
    gb.attn.wq.noalias() += dq.transpose() * bw.ln1_out;
    gb.attn.bq += dq.colwise().sum().transpose();
    gb.attn.wk.noalias() += dk.transpose() * bw.ln1_out;
    gb.attn.wv.noalias() += dv.transpose() * bw.ln1_out;
    gb.attn.bv += dv.colwise().sum().transpose();

    Matrix d_input_ln;
    layer_norm_backward(bw.input, b.ln1_g, bw.ln1_mean, bw.ln1_rstd, d_ln1_out, d_input_ln, gb.ln1_g,
                        gb.ln1_b);
    d_stream = d_after_attn + d_input_ln;
  }

  // Positions are constant, so the stream gradient passes straight to conv2.
  Matrix d_conv2_pre =
      d_stream.array() * ws.conv2_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
  grads.conv2_w.noalias() += d_conv2_pre.transpose() * ws.patches2;
  grads.conv2_b += d_conv2_pre.colwise().sum().transpose();
  Matrix d_patches2 = d_conv2_pre * params.conv2_w;

  Matrix d_conv1_act = Matrix::Zero(t1, d);
  for (int u = 0; u < t2; ++u) {
    for (int j = 0; j < 3; ++j) {
      const int s = 2 * u + j - 1;
      if (s < 0 || s >= t1) continue;
      for (int i = 0; i < d; ++i) d_conv1_act(s, i) += d_patches2(u, i * 3 + j);
    }
  }
  Matrix d_conv1_pre =
      d_conv1_act.array() * ws.conv1_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
  grads.conv1_w.noalias() += d_conv1_pre.transpose() * ws.patches1;
  grads.conv1_b += d_conv1_pre.colwise().sum().transpose();
}

Vector pool(const FrameEmbeddings& frames) {
  const auto rows = frames.data.rows();
  if (rows < 1) throw ArgumentError("pool: no frames");
  const auto cols = frames.data.cols();
  Vector out(cols);
  std::vector<double> buf(static_cast<std::size_t>(rows));
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) buf[static_cast<std::size_t>(r)] = frames.data(r, c);
    std::sort(buf.begin(), buf.end());
    double acc = 0.0;
    for (double v : buf) acc += v;
    out(c) = acc / static_cast<double>(rows);
  }
  return out;
}

Vector project(const Vector& pooled, const ModelParams& params, ProjWorkspace* ws) {
  if (pooled.size() != params.config.d_model)
    throw ArgumentError("project: input dimension " + std::to_string(pooled.size()) +
                        " does not match d_model " + std::to_string(params.config.d_model));
  Vector hidden_pre = params.proj1_w * pooled + params.proj1_b;
  Vector hidden = hidden_pre.cwiseMax(0.0);
  Vector z = params.proj2_w * hidden + params.proj2_b;
  if (ws) {
    ws->input = pooled;
    ws->hidden_pre = std::move(hidden_pre);
  }
  return z;
}

void project_backward(const ModelParams& params, const ProjWorkspace& ws, const Vector& d_embedding,
                      ModelParams& grads, Vector& d_pooled) {
  const Vector hidden = ws.hidden_pre.cwiseMax(0.0);
  grads.proj2_w.noalias() += d_embedding * hidden.transpose();
  grads.proj2_b += d_embedding;
  Vector d_hidden = params.proj2_w.transpose() * d_embedding;
  for (Eigen::Index i = 0; i < d_hidden.size(); ++i)
    if (ws.hidden_pre(i) <= 0.0) d_hidden(i) = 0.0;
  grads.proj1_w.noalias() += d_hidden * ws.input.transpose();
  grads.proj1_b += d_hidden;
  d_pooled = params.proj1_w.transpose() * d_hidden;
}

Vector embed_features(const LogMelSpectrogram& x, const ModelParams& params) {
  return project(pool(encode(x, params)), params);
}

}  // namespace wsi
