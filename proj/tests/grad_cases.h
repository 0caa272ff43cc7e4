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

// Randomized op cases shared by the gradient unit tests and the acceptance
// runner. Each case draws small random inputs and returns the op under test.

#ifndef N2L_TESTS_GRAD_CASES_H_
#define N2L_TESTS_GRAD_CASES_H_

#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <vector>

#include "n2l/autodiff.h"
#include "test_util.h"

namespace n2l::testing {

struct OpCase {
  const char* name;
  // Builds random inputs and returns the op under test.
  std::function<BuildFn(std::mt19937_64&, std::vector<Tensor>&)> make;
};

// gtest (and ctest's discovered test names) print parameters through this.
inline void PrintTo(const OpCase& c, std::ostream* os) { *os << c.name; }

inline Shape random_shape(std::mt19937_64& rng, int max_c, int max_hw) {
  return Shape{1, uniform_int(rng, 1, max_c), uniform_int(rng, 1, max_hw),
               uniform_int(rng, 1, max_hw)};
}

inline BuildFn conv_case(std::mt19937_64& rng, std::vector<Tensor>& in, int k, bool depthwise,
                           int max_c, int max_hw) {
  const int cin = uniform_int(rng, 1, max_c);
  const int groups = depthwise ? cin : 1;
  const int cout = depthwise ? cin : uniform_int(rng, 1, max_c);
  const int h = uniform_int(rng, 1, max_hw), w = uniform_int(rng, 1, max_hw);
  in.push_back(random_tensor(rng, Shape{1, cin, h, w}));
  in.push_back(random_tensor(rng, Shape{cout, cin / groups, k, k}));
  in.push_back(random_tensor(rng, Shape{1, cout, 1, 1}));
  return [k, groups](Graph&, std::span<const Var> v) {
    return conv2d(v[0], v[1], v[2], k, groups);
  };
}

inline const OpCase kOpCases[] = {
    {"conv1x1", [](auto& rng, auto& in) { return conv_case(rng, in, 1, false, 5, 5); }},
    {"conv3x3", [](auto& rng, auto& in) { return conv_case(rng, in, 3, false, 3, 5); }},
    {"conv3x3_depthwise", [](auto& rng, auto& in) { return conv_case(rng, in, 3, true, 4, 6); }},
    {"conv7x7", [](auto& rng, auto& in) { return conv_case(rng, in, 7, false, 2, 4); }},
    {"layer_norm",
     [](auto& rng, auto& in) {
       // With one or two channels the output is (almost) independent of x,
       // so the x-gradient is ~0 and the relative error measures round-off.
       Shape s = random_shape(rng, 5, 4);
       s.c = uniform_int(rng, 3, 5);
       in.push_back(random_tensor(rng, s, -2.0, 2.0));
       in.push_back(random_tensor(rng, Shape{1, s.c, 1, 1}));
       in.push_back(random_tensor(rng, Shape{1, s.c, 1, 1}));
       return BuildFn(
           [](Graph&, std::span<const Var> v) { return layer_norm(v[0], v[1], v[2]); });
     }},
    {"gelu",
     [](auto& rng, auto& in) {
       in.push_back(random_tensor(rng, random_shape(rng, 3, 5), -4.0, 4.0));
       return BuildFn([](Graph&, std::span<const Var> v) { return gelu(v[0]); });
     }},
    {"bilinear_upsample",
     [](auto& rng, auto& in) {
       const Shape s = random_shape(rng, 2, 4);
       const int oh = uniform_int(rng, s.h, 9), ow = uniform_int(rng, s.w, 9);
       in.push_back(random_tensor(rng, s));
       return BuildFn([oh, ow](Graph&, std::span<const Var> v) {
         return bilinear_upsample(v[0], oh, ow);
       });
     }},
    {"concat",
     [](auto& rng, auto& in) {
       const int h = uniform_int(rng, 1, 4), w = uniform_int(rng, 1, 4);
       const int parts = uniform_int(rng, 1, 3);
       for (int p = 0; p < parts; ++p) {
         in.push_back(random_tensor(rng, Shape{1, uniform_int(rng, 1, 3), h, w}));
       }
       return BuildFn(
           [](Graph&, std::span<const Var> v) { return concat_channels(v); });
     }},
    {"slice",
     [](auto& rng, auto& in) {
       const Shape s = random_shape(rng, 5, 4);
       const int begin = uniform_int(rng, 0, s.c - 1);
       const int count = uniform_int(rng, 1, s.c - begin);
       in.push_back(random_tensor(rng, s));
       return BuildFn([begin, count](Graph&, std::span<const Var> v) {
         return slice_channels(v[0], begin, count);
       });
     }},
    {"add",
     [](auto& rng, auto& in) {
       const Shape s = random_shape(rng, 3, 4);
       in.push_back(random_tensor(rng, s));
       in.push_back(random_tensor(rng, s));
       return BuildFn([](Graph&, std::span<const Var> v) { return add(v[0], v[1]); });
     }},
    {"mul",
     [](auto& rng, auto& in) {
       const Shape s = random_shape(rng, 3, 4);
       in.push_back(random_tensor(rng, s));
       in.push_back(random_tensor(rng, s));
       return BuildFn([](Graph&, std::span<const Var> v) { return mul(v[0], v[1]); });
     }},
    {"sigmoid",
     [](auto& rng, auto& in) {
       in.push_back(random_tensor(rng, random_shape(rng, 3, 4), -5.0, 5.0));
       return BuildFn([](Graph&, std::span<const Var> v) { return sigmoid(v[0]); });
     }},
    {"gaussian_scale",
     [](auto& rng, auto& in) {
       // Keep samples clear of the clamp kinks at +-1 where the derivative jumps.
       Tensor x = random_tensor(rng, random_shape(rng, 3, 4), -2.0, 2.0);
       for (double& v : x.data()) {
         if (std::abs(std::abs(v) - 1.0) < 1e-3) v *= 0.5;
       }
       in.push_back(std::move(x));
       return BuildFn(
           [](Graph&, std::span<const Var> v) { return gaussian_scale(v[0], -1.0, 1.0); });
     }},
    {"mse_loss",
     [](auto& rng, auto& in) {
       const Shape s = random_shape(rng, 3, 4);
       in.push_back(random_tensor(rng, s));
       in.push_back(random_tensor(rng, s));
       return BuildFn(
           [](Graph&, std::span<const Var> v) { return mse_loss(v[0], v[1]); });
     }},
    // Shared operand feeding several consumers: exercises gradient donation
    // and fresh-buffer stores on a node with more than one reader.
    {"fan_out",
     [](auto& rng, auto& in) {
       const Shape s = random_shape(rng, 3, 4);
       in.push_back(random_tensor(rng, s));
       in.push_back(random_tensor(rng, Shape{s.c, s.c, 1, 1}));
       in.push_back(random_tensor(rng, Shape{1, s.c, 1, 1}));
       return BuildFn([](Graph&, std::span<const Var> v) {
         Var h = conv2d(v[0], v[1], v[2], 1, 1);
         return add(add(h, mul(h, v[0])), gelu(add(h, h)));
       });
     }},
};

}  // namespace n2l::testing

#endif  // N2L_TESTS_GRAD_CASES_H_
