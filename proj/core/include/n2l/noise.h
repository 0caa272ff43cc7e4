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

#ifndef N2L_NOISE_H_
#define N2L_NOISE_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "n2l/config.h"
#include "n2l/tensor.h"

namespace n2l {

// The 16-bit value signalled in the stream header.
struct Seed {
  std::uint16_t value = 0;
  bool operator==(const Seed&) const = default;
};

// Canonical standard-normal stream. Wire behaviour: any conforming decoder
// must reproduce these variates bit for bit.
//
//   state_0 = seed (zero-extended to 64 bits)
//   state_k = state_{k-1} + 0x9E3779B97F4A7C15
//   out     = splitmix64 finalizer of state_k
//   u       = 1 - (out >> 11) * 2^-53          in (0, 1]
//   (u1,u2) -> sqrt(-2 ln u1) * {cos, sin}(2 pi u2), cos first.
class GaussianStream {
 public:
  explicit GaussianStream(Seed seed) : state_(seed.value) {}
  explicit GaussianStream(std::uint64_t raw_state) : state_(raw_state) {}

  std::uint64_t next_u64();
  // Uniform in (0, 1].
  double next_uniform();
  double next();

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::vector<double> gaussian_stream(Seed seed, std::size_t count);

struct NoisePyramid {
  std::vector<Tensor> scales;  // scale i has shape [1, c_i, ceil(H/2^i), ceil(W/2^i)]
  Tensor fused;                // [1, sum c_i, H, W]
};

// Fills the scales from one stream in scale order (finest first), each in
// channel-major then row-major order, then upsamples and concatenates.
NoisePyramid build_pyramid(Seed seed, const ModelConfig& config, int height, int width);

// Fixed sinusoidal map, seed independent. Channel m uses the column
// coordinate for even m and the row coordinate for odd m, frequency
// 2^(m/4) * pi, and a quarter-period phase shift when m % 4 >= 2.
Tensor build_pe(int height, int width, int dims);

}  // namespace n2l

#endif  // N2L_NOISE_H_
