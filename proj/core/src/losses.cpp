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

#include "wsi/losses.hpp"

#include <cmath>
#include <limits>

namespace wsi {

namespace {

constexpr double kNormGuard = 1e-12;

void check_batch(const Matrix& z, const std::vector<int>& labels) {
  if (z.rows() < 1) throw ArgumentError("empty batch");
  if (static_cast<std::size_t>(z.rows()) != labels.size())
    throw ArgumentError("label count does not match batch size");
}

}  // namespace

void LossConfig::validate() const {
  if (margin < 0.0) throw ConfigError("margin must be >= 0");
  if (temperature <= 0.0) throw ConfigError("temperature must be > 0");
  if (ssl_weight < 0.0) throw ConfigError("ssl_weight must be >= 0");
}

int MinedTriplets::n_valid() const {
  int n = 0;
  for (bool v : valid) n += v ? 1 : 0;
  return n;
}

Matrix pairwise_sq_euclidean(const Matrix& z) {
  if (z.rows() < 1) throw ArgumentError("pairwise_sq_euclidean: empty input");
  const Vector sq = z.rowwise().squaredNorm();
  Matrix d = (-2.0 * (z * z.transpose())).rowwise() + sq.transpose();
  d.colwise() += sq;
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  // Mirror the upper triangle so symmetry is exact, not just up to rounding.
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) d(j, i) = d(i, j);
  return d;
}

MinedTriplets mine_batch_hard(const Matrix& z, const std::vector<int>& labels) {
  check_batch(z, labels);
  const int b = static_cast<int>(z.rows());
  if (b < 2) throw ArgumentError("mine_batch_hard: batch size must be >= 2");
  const Matrix d = pairwise_sq_euclidean(z);

  MinedTriplets mined;
  mined.positive.assign(static_cast<std::size_t>(b), -1);
  mined.negative.assign(static_cast<std::size_t>(b), -1);
  mined.valid.assign(static_cast<std::size_t>(b), false);
  for (int a = 0; a < b; ++a) {
    int pos = -1, neg = -1;
    double worst_pos = -1.0, best_neg = std::numeric_limits<double>::infinity();
    for (int j = 0; j < b; ++j) {
      if (j == a) continue;
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(a)]) {
        if (d(a, j) > worst_pos) {
          worst_pos = d(a, j);
          pos = j;
        }
      } else if (d(a, j) < best_neg) {
        best_neg = d(a, j);
        neg = j;
      }
    }
    if (pos >= 0 && neg >= 0) {
      mined.positive[static_cast<std::size_t>(a)] = pos;
      mined.negative[static_cast<std::size_t>(a)] = neg;
      mined.valid[static_cast<std::size_t>(a)] = true;
    }
  }
  return mined;
}

double triplet_loss(const Matrix& z, const std::vector<int>& labels, const LossConfig& cfg, Matrix* d_z) {
  cfg.validate();
  check_batch(z, labels);
  if (z.rows() < 2) throw ArgumentError("triplet_loss: batch size must be >= 2");
  if (d_z) *d_z = Matrix::Zero(z.rows(), z.cols());

  const MinedTriplets mined = mine_batch_hard(z, labels);
  const int n_valid = mined.n_valid();
  if (n_valid == 0) return 0.0;

  double total = 0.0;
  for (int a = 0; a < static_cast<int>(z.rows()); ++a) {
    if (!mined.valid[static_cast<std::size_t>(a)]) continue;
    const int p = mined.positive[static_cast<std::size_t>(a)];
    const int n = mined.negative[static_cast<std::size_t>(a)];
    const double d_ap = (z.row(a) - z.row(p)).norm();
    const double d_an = (z.row(a) - z.row(n)).norm();
    const double hinge = cfg.margin + d_ap - d_an;
    if (hinge <= 0.0) continue;
    total += hinge;
    if (d_z) {
      const double w = 1.0 / static_cast<double>(n_valid);
      if (d_ap > 0.0) {
        const auto dir = ((z.row(a) - z.row(p)) / d_ap).eval();
        d_z->row(a) += w * dir;
        d_z->row(p) -= w * dir;
      }
      if (d_an > 0.0) {
        const auto dir = ((z.row(a) - z.row(n)) / d_an).eval();
        d_z->row(a) -= w * dir;
        d_z->row(n) += w * dir;
      }
    }
  }
  return total / static_cast<double>(n_valid);
}

double nt_xent(const Matrix& za, const Matrix& zb, double temperature, Matrix* d_za, Matrix* d_zb) {
  if (temperature <= 0.0) throw ConfigError("temperature must be > 0");
  if (za.rows() != zb.rows() || za.cols() != zb.cols())
    throw ArgumentError("nt_xent: view shapes must match");
  const int b = static_cast<int>(za.rows());
  if (b < 2) throw ArgumentError("nt_xent: batch size must be >= 2");

  const int n = 2 * b;
  Matrix u(n, za.cols());
  u.topRows(b) = za;
  u.bottomRows(b) = zb;

  Vector norms = u.rowwise().norm();
  Matrix unit = u;
  std::vector<bool> zero_row(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    if (norms(i) < kNormGuard) {
      zero_row[static_cast<std::size_t>(i)] = true;
      unit.row(i).setZero();
    } else {
      unit.row(i) /= norms(i);
    }
  }
  Matrix sim = unit * unit.transpose();  // cosine; zero-norm rows contribute 0

  double loss = 0.0;
  // dL/dS for every ordered pair (i, k), k != i.
  Matrix d_sim = Matrix::Zero(n, n);
  const double inv_rows = 1.0 / static_cast<double>(n);
  for (int i = 0; i < n; ++i) {
    const int partner = i < b ? i + b : i - b;
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k)
      if (k != i) mx = std::max(mx, sim(i, k) / temperature);
    double denom = 0.0;
    for (int k = 0; k < n; ++k)
      if (k != i) denom += std::exp(sim(i, k) / temperature - mx);
    const double lse = mx + std::log(denom);
    loss += lse - sim(i, partner) / temperature;
    if (d_za) {
      for (int k = 0; k < n; ++k) {
        if (k == i) continue;
        const double prob = std::exp(sim(i, k) / temperature - lse);
        d_sim(i, k) = inv_rows * (prob - (k == partner ? 1.0 : 0.0)) / temperature;
      }
    }
  }
  loss *= inv_rows;

  if (d_za) {
    // d cos(u_i, u_k)/d u_i = (unit_k - sim_ik * unit_i) / |u_i|; collect the
    // (i, k) and (k, i) contributions through the symmetric coefficient sum.
    Matrix coeff = d_sim + d_sim.transpose();
    Matrix du = Matrix::Zero(n, u.cols());
    for (int i = 0; i < n; ++i) {
      if (zero_row[static_cast<std::size_t>(i)]) continue;
      double diag = 0.0;
      for (int k = 0; k < n; ++k) diag += coeff(i, k) * sim(i, k);
      du.row(i) = (coeff.row(i) * unit - diag * unit.row(i)) / norms(i);
    }
    *d_za = du.topRows(b);
    if (d_zb) *d_zb = du.bottomRows(b);
  }
  return loss;
}

JointLoss joint_loss(const Matrix& z, const Matrix& zn, const Matrix& zt, const std::vector<int>& labels,
                     const LossConfig& cfg, Matrix* d_z, Matrix* d_zn, Matrix* d_zt) {
  cfg.validate();
  if (z.rows() != zn.rows() || z.rows() != zt.rows() || z.cols() != zn.cols() || z.cols() != zt.cols())
    throw ArgumentError("joint_loss: embedding sets must share shape");

  JointLoss out;
  Matrix d_triplet;
  out.triplet = triplet_loss(z, labels, cfg, d_z ? &d_triplet : nullptr);

  Matrix d_z_n, d_zn_local, d_z_t, d_zt_local;
  const double ln = nt_xent(z, zn, cfg.temperature, d_z ? &d_z_n : nullptr, d_z ? &d_zn_local : nullptr);
  const double lt = nt_xent(z, zt, cfg.temperature, d_z ? &d_z_t : nullptr, d_z ? &d_zt_local : nullptr);
  out.ntxent = 0.5 * (ln + lt);
  out.total = out.triplet + cfg.ssl_weight * out.ntxent;

  if (d_z) {
    *d_z = d_triplet + cfg.ssl_weight * 0.5 * (d_z_n + d_z_t);
    if (d_zn) *d_zn = cfg.ssl_weight * 0.5 * d_zn_local;
    if (d_zt) *d_zt = cfg.ssl_weight * 0.5 * d_zt_local;
  }
  return out;
}

double mining_boundary_margin(const Matrix& z, const std::vector<int>& labels, const LossConfig& cfg) {
  const MinedTriplets mined = mine_batch_hard(z, labels);
  double margin = std::numeric_limits<double>::infinity();
  const int b = static_cast<int>(z.rows());
  for (int a = 0; a < b; ++a) {
    if (!mined.valid[static_cast<std::size_t>(a)]) continue;
    const int p = mined.positive[static_cast<std::size_t>(a)];
    const int n = mined.negative[static_cast<std::size_t>(a)];
    const double d_ap = (z.row(a) - z.row(p)).norm();
    const double d_an = (z.row(a) - z.row(n)).norm();
    margin = std::min(margin, std::abs(cfg.margin + d_ap - d_an));
    for (int j = 0; j < b; ++j) {
      if (j == a || j == p || j == n) continue;
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(a)])
        margin = std::min(margin, d_ap - (z.row(a) - z.row(j)).norm());
      else
        margin = std::min(margin, (z.row(a) - z.row(j)).norm() - d_an);
    }
  }
  return margin;
}

}  // namespace wsi
