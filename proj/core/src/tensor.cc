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

#include "n2l/tensor.h"

#include <cstring>

#include "n2l/errors.h"

namespace n2l {

std::string Shape::str() const {
  return "[" + std::to_string(n) + "," + std::to_string(c) + "," +
         std::to_string(h) + "," + std::to_string(w) + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(shape), data_(shape.numel(), fill) {
  if (shape.n < 1 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ContractViolation("invalid tensor shape " + shape.str());
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape.numel()) {
    throw ContractViolation("tensor data length " +
                            std::to_string(data_.size()) +
                            " does not match shape " + shape.str());
  }
}

void Tensor::set_requires_grad(bool on) {
  requires_grad_ = on;
  if (on) {
    grad_.assign(data_.size(), 0.0);
  } else {
    grad_.clear();
    grad_.shrink_to_fit();
  }
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

std::vector<double> Tensor::release() {
  shape_ = Shape{1, 0, 0, 0};
  grad_.clear();
  requires_grad_ = false;
  return std::move(data_);
}

std::uint64_t fnv1a64(std::span<const double> values) {
  std::uint64_t hash = 0xCBF29CE484222325ull;
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      hash ^= (bits >> (8 * b)) & 0xFFu;
      hash *= 0x100000001B3ull;
    }
  }
  return hash;
}

}  // namespace n2l
