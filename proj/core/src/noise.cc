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

#include "n2l/noise.h"

#include <cmath>
#include <numbers>

#include "n2l/autodiff.h"
#include "n2l/errors.h"

namespace n2l {

std::uint64_t GaussianStream::next_u64() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double GaussianStream::next_uniform() {
  return 1.0 - static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double GaussianStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  const double c = std::cos(theta);
  // Keep GCC from fusing the pair into sincos(), which is not bit-identical
  // to cos()/sin() in glibc and would make the stream depend on the compiler.
  asm volatile("" : "+m"(theta));
  spare_ = radius * std::sin(theta);
  has_spare_ = true;
  return radius * c;
}

std::vector<double> gaussian_stream(Seed seed, std::size_t count) {
  GaussianStream stream(seed);
  std::vector<double> out(count);
  for (double& v : out) v = stream.next();
  return out;
}

NoisePyramid build_pyramid(Seed seed, const ModelConfig& config, int height, int width) {
  if (config.scales < 1 || config.noise_ch_per_scale < 1) {
    throw ConfigError("noise pyramid needs at least one scale and one channel");
  }
  const int min_extent = 1 << (config.scales - 1);
  if (height < min_extent || width < min_extent) {
    throw ConfigError("image " + std::to_string(width) + "x" + std::to_string(height) +
                      " is smaller than the coarsest noise scale (needs >= " +
                      std::to_string(min_extent) + " per side)");
  }
  NoisePyramid pyramid;
  GaussianStream stream(seed);
  for (int i = 0; i < config.scales; ++i) {
    const int div = 1 << i;
    Tensor z(Shape{1, config.noise_ch_per_scale, (height + div - 1) / div,
                   (width + div - 1) / div});
    for (double& v : z.data()) v = stream.next();
    pyramid.scales.push_back(std::move(z));
  }
  Graph graph;
  std::vector<Var> upsampled;
  for (const Tensor& z : pyramid.scales) {
    Var v = graph.input(z);
    if (z.shape().h != height || z.shape().w != width) {
      v = bilinear_upsample(v, height, width);
    }
    upsampled.push_back(v);
  }
  Var fused = concat_channels(upsampled);
  pyramid.fused = graph.value(fused);
  return pyramid;
}

Tensor build_pe(int height, int width, int dims) {
  if (dims < 1) throw ContractViolation("build_pe: dims must be >= 1");
  if (height < 1 || width < 1) throw ContractViolation("build_pe: empty image");
  Tensor pe(Shape{1, dims, height, width});
  for (int m = 0; m < dims; ++m) {
    const double freq = std::ldexp(std::numbers::pi, m / 4);
    const double phase = (m % 4 >= 2) ? 0.5 * std::numbers::pi : 0.0;
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        const double u = (m % 2 == 0) ? (c + 0.5) / width : (r + 0.5) / height;
        pe.at(m, r, c) = std::sin(freq * u + phase);
      }
    }
  }
  return pe;
}

}  // namespace n2l
