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

#ifndef N2L_TENSOR_H_
#define N2L_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace n2l {

// (batch, channels, height, width). Activations always have n == 1; conv
// weights reuse the same 4-tuple as (out, in / groups, kh, kw).
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

// Dense float64 tensor, channel-major then row-major. The gradient buffer
// exists only while requires_grad() is set.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* channel(int c) { return data_.data() + c * shape_.plane(); }
  const double* channel(int c) const {
    return data_.data() + c * shape_.plane();
  }

  double& at(int c, int y, int x) {
    return data_[(c * shape_.plane()) + static_cast<std::size_t>(y) * shape_.w + x];
  }
  double at(int c, int y, int x) const {
    return data_[(c * shape_.plane()) + static_cast<std::size_t>(y) * shape_.w + x];
  }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on);
  std::span<double> grad() { return grad_; }
  std::span<const double> grad() const { return grad_; }
  void zero_grad();

  // Releases the storage so a buffer pool can reuse it.
  std::vector<double> release();

 private:
  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
};

// FNV-1a 64 over the little-endian IEEE-754 bytes of each value.
std::uint64_t fnv1a64(std::span<const double> values);

}  // namespace n2l

#endif  // N2L_TENSOR_H_
