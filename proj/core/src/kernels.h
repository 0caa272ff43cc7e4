// Copyright 2026 The n2l Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef N2L_SRC_KERNELS_H_
#define N2L_SRC_KERNELS_H_

#include <algorithm>
#include <cstddef>

#include <Eigen/Core>

// Reductions with a fixed four-lane summation order. The lanes vectorize
// without -ffast-math and the result is bit-reproducible for a given n.

namespace n2l::kernels {

inline double dot(const double* __restrict a, const double* __restrict b,
                  std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int j = 0; j < 4; ++j) lane[j] += a[i + j] * b[i + j];
  }
  for (; i < n; ++i) lane[0] += a[i] * b[i];
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

inline double sum(const double* __restrict a, std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int j = 0; j < 4; ++j) lane[j] += a[i + j];
  }
  for (; i < n; ++i) lane[0] += a[i];
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

// y[i] = exp(x[i]) with Eigen's vectorized exponential (within ~1.5 ulp).
// Every element goes through the packet path via an aligned local block:
// mapping the caller's buffer directly lets Eigen peel an address-dependent
// head onto scalar std::exp, which rounds differently.
inline void exp(const double* x, double* y, std::size_t n) {
  Eigen::Array4d block;
  for (std::size_t i = 0; i < n; i += 4) {
    const std::size_t m = std::min<std::size_t>(4, n - i);
    block.setZero();
    for (std::size_t j = 0; j < m; ++j) block[j] = x[i + j];
    block = block.exp();
    for (std::size_t j = 0; j < m; ++j) y[i + j] = block[j];
  }
}

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

}  // namespace n2l::kernels

#endif  // N2L_SRC_KERNELS_H_
