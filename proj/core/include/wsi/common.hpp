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

#ifndef WSI_COMMON_HPP_
#define WSI_COMMON_HPP_

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace wsi {

// All numerics are double precision; matrices are row-major so that tensor
// serialization can write .data() directly.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad call-site input (shape mismatch, empty waveform, infeasible counts).
struct ArgumentError : Error {
  using Error::Error;
};

// Invalid or inconsistent configuration detected before any work starts.
struct ConfigError : Error {
  using Error::Error;
};

// Non-finite value produced where the pipeline requires finite math.
struct NumericError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace wsi

#endif  // WSI_COMMON_HPP_
