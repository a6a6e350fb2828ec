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

#ifndef WSI_LOSSES_HPP_
#define WSI_LOSSES_HPP_

#include <vector>

#include "wsi/common.hpp"

namespace wsi {

struct LossConfig {
  double margin = 1.0;
  double ssl_weight = 1.0;  // lambda; 0 disables the self-supervised term
  double temperature = 0.5;

  void validate() const;
};

// Batch-hard selection: per anchor, the farthest same-label sample and the
// nearest different-label sample (Euclidean). Anchors lacking either
// candidate are invalid. Ties break toward the lowest index.
struct MinedTriplets {
  std::vector<int> positive;  // -1 when invalid
  std::vector<int> negative;
  std::vector<bool> valid;

  int n_valid() const;
};

// Symmetric, zero-diagonal, non-negative; tiny negatives from the expansion
// identity are clamped to zero.
Matrix pairwise_sq_euclidean(const Matrix& z);

MinedTriplets mine_batch_hard(const Matrix& z, const std::vector<int>& labels);

// Mean over valid anchors of max(0, margin + d(a,p) - d(a,n)) on true
// Euclidean distances; 0 when no anchor is valid. Mined indices are treated
// as constants under differentiation. When d_z is given it is resized,
// zeroed, and filled with dLoss/dZ.
double triplet_loss(const Matrix& z, const std::vector<int>& labels, const LossConfig& cfg,
                    Matrix* d_z = nullptr);

// NT-Xent over the 2B rows [za; zb], partner i <-> i+B: mean over rows of
// -log(exp(cos(i, partner)/tau) / sum_{k != i} exp(cos(i, k)/tau)). Rows with
// norm below 1e-12 contribute zero similarity.
double nt_xent(const Matrix& za, const Matrix& zb, double temperature, Matrix* d_za = nullptr,
               Matrix* d_zb = nullptr);

struct JointLoss {
  double total = 0.0;
  double triplet = 0.0;
  double ntxent = 0.0;
};

// total = triplet(z, labels) + lambda * 0.5 * (ntxent(z, zn) + ntxent(z, zt)).
JointLoss joint_loss(const Matrix& z, const Matrix& zn, const Matrix& zt, const std::vector<int>& labels,
                     const LossConfig& cfg, Matrix* d_z = nullptr, Matrix* d_zn = nullptr,
                     Matrix* d_zt = nullptr);

// Distance from the nearest piecewise boundary of the joint loss: the
// smallest of all hinge slacks |margin + d_ap - d_an| and all mining
// near-ties (gap between the chosen hardest candidate and each alternative).
// Used to reject finite-difference probe points near non-differentiable
// points. Returns +inf for a batch with no valid anchors.
double mining_boundary_margin(const Matrix& z, const std::vector<int>& labels, const LossConfig& cfg);

}  // namespace wsi

#endif  // WSI_LOSSES_HPP_
