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

#ifndef N2L_MODEL_H_
#define N2L_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "n2l/autodiff.h"
#include "n2l/config.h"
#include "n2l/tensor.h"

namespace n2l {

enum class ParamGroup : std::uint8_t { kGpp = 0, kSynthesis = 1 };

struct Parameter {
  std::string name;
  ParamGroup group;
  Tensor tensor;
};

// Parameters of the GPP and synthesis networks in canonical order.
//
// Canonical order (this is the payload order of the bitstream):
//   GPP group:       proj.{weight,bias}
//                    block[k].{dw.weight, dw.bias, norm.gamma, norm.beta,
//                              expand.weight, expand.bias,
//                              project.weight, project.bias}  for k = 0..M-1
//                    head_mu.{weight,bias}, head_sigma.{weight,bias}
//   synthesis group: the same layout with N blocks and a single 3-channel
//                    head.{weight,bias}.
// With the no-GPP ablation the GPP group is empty and the synthesis group
// holds the single noise-to-image stack.
class CodecModel {
 public:
  struct Conv {
    int weight = -1;
    int bias = -1;
    int kernel = 1;
    int groups = 1;
  };
  // Depthwise 3x3 -> channel layer norm -> 1x1 expand (x2) -> GELU ->
  // 1x1 project, added back onto the block input.
  struct Block {
    Conv depthwise;
    int norm_gamma = -1;
    int norm_beta = -1;
    Conv expand;
    Conv project;
  };
  struct Stack {
    Conv proj;
    std::vector<Block> blocks;
    std::vector<Conv> heads;  // GPP: mu then log-sigma; synthesis: RGB
  };

  // Uniform fan-in initialization from init_seed. The GPP head starts at
  // zero so the first forward pass sees mu = 0, sigma = 1 (y = z_M).
  static CodecModel initialized(const ModelConfig& config, std::uint16_t init_seed);
  static CodecModel zeros(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  const std::optional<Stack>& gpp() const { return gpp_; }
  const Stack& synthesis() const { return synthesis_; }

  std::size_t param_count() const;
  std::size_t group_size(ParamGroup group) const;
  std::vector<double> flatten(ParamGroup group) const;
  void load(ParamGroup group, std::span<const double> values);

  void set_requires_grad(bool on);
  void zero_grad();

 private:
  explicit CodecModel(const ModelConfig& config);
  Conv add_conv(const std::string& name, ParamGroup group, int in, int out,
                int kernel, int groups);
  struct HeadSpec {
    const char* name;
    int out;
  };
  Stack add_stack(const std::string& prefix, ParamGroup group, int in, int width,
                  int blocks, std::initializer_list<HeadSpec> heads);

  ModelConfig config_;
  std::vector<Parameter> params_;
  std::optional<Stack> gpp_;
  Stack synthesis_;
};

// Analytic parameter and MAC counts for a config (no model is built).
std::size_t count_params(const ModelConfig& config);
double count_mac_per_pixel(const ModelConfig& config);

inline constexpr double kLogScaleMin = -10.0;
inline constexpr double kLogScaleMax = 10.0;

struct LatentParams {
  Var mu;
  Var sigma;
};

// concat(z_M, PE) -> 1x1 -> M blocks -> two 1x1 heads of C channels each:
// mu, and s with sigma = exp(clamp(s, -10, 10)).
LatentParams gpp_forward(Graph& graph, CodecModel& model, Var z_m, Var pe);

// y = mu + sigma * z_M; z_M is treated as a constant.
Var reparameterize(Var mu, Var sigma, Var z_m);

// y -> 1x1 -> N blocks -> 1x1 head to RGB -> sigmoid.
Var synthesis_forward(Graph& graph, CodecModel& model, Var y);

// Ablation: concat(z_M, PE) -> single stack -> RGB, no latent.
Var no_gpp_forward(Graph& graph, CodecModel& model, Var z_m, Var pe);

struct Reconstruction {
  Var image;
  std::optional<Var> latent;  // y_pred; absent for the no-GPP ablation
  std::optional<LatentParams> gaussian;
};

// Dispatches on the model's ablation flags.
Reconstruction reconstruct(Graph& graph, CodecModel& model, Var z_m, Var pe);

// Gradient-free reconstruction, returning the [1, 3, H, W] image.
Tensor render(CodecModel& model, const Tensor& z_m, const Tensor& pe);

}  // namespace n2l

#endif  // N2L_MODEL_H_
