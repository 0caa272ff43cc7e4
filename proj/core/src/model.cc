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

#include "n2l/model.h"

#include <cmath>
#include <cstdlib>

#include "n2l/errors.h"
#include "n2l/noise.h"

namespace n2l {

// --- Configuration table ------------------------------------------------------

AblationFlags AblationFlags::from_bits(std::uint8_t bits) {
  return AblationFlags{(bits & 1u) != 0, (bits & 2u) != 0};
}

std::string AblationFlags::describe() const {
  if (!no_gpp && !single_scale) return "none";
  std::string out;
  if (no_gpp) out = "no-gpp";
  if (single_scale) out += out.empty() ? "single-scale" : "+single-scale";
  return out;
}

ModelConfig setting(int setting_id) {
  struct Row {
    int scales, nch, cch, pe, m, n;
  };
  static constexpr std::array<Row, kNumSettings> kTable = {{
      {4, 12, 8, 8, 3, 3},
      {4, 12, 10, 10, 3, 3},
      {4, 12, 12, 12, 4, 4},
      {4, 12, 16, 10, 3, 3},
      {4, 12, 16, 10, 4, 4},
  }};
  if (setting_id < 0 || setting_id >= kNumSettings) {
    throw ConfigError("unknown setting " + std::to_string(setting_id) + " (expected 0..4)");
  }
  const Row& r = kTable[setting_id];
  ModelConfig config;
  config.setting_id = setting_id;
  config.scales = r.scales;
  config.noise_ch_per_scale = r.nch;
  config.conv_ch = r.cch;
  config.pe_dims = r.pe;
  config.gpp_blocks = r.m;
  config.synth_blocks = r.n;
  return config;
}

ModelConfig derive_config(int setting_id, AblationFlags flags) {
  ModelConfig config = setting(setting_id);
  const std::size_t target = count_params(config);
  if (flags.single_scale) {
    config.noise_ch_per_scale *= config.scales;
    config.scales = 1;
  }
  config.flags = flags;
  if (flags.no_gpp) {
    config.direct_blocks = config.gpp_blocks + config.synth_blocks;
    int best_width = 1;
    std::size_t best_gap = static_cast<std::size_t>(-1);
    for (int width = 1; width <= 128; ++width) {
      config.direct_ch = width;
      const std::size_t count = count_params(config);
      const std::size_t gap = count > target ? count - target : target - count;
      if (gap < best_gap) {
        best_gap = gap;
        best_width = width;
      }
    }
    config.direct_ch = best_width;
  }
  return config;
}

// --- Counting ------------------------------------------------------------------

namespace {

std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k, std::size_t groups) {
  return out * (in / groups) * k * k + out;
}

std::size_t conv_macs(std::size_t in, std::size_t out, std::size_t k, std::size_t groups) {
  return out * (in / groups) * k * k;
}

std::size_t block_params(std::size_t c) {
  return conv_params(c, c, 3, c) + 2 * c + conv_params(c, 2 * c, 1, 1) +
         conv_params(2 * c, c, 1, 1);
}

std::size_t block_macs(std::size_t c) {
  return conv_macs(c, c, 3, c) + conv_macs(c, 2 * c, 1, 1) + conv_macs(2 * c, c, 1, 1);
}

std::size_t stack_params(std::size_t in, std::size_t width, std::size_t blocks, std::size_t out) {
  return conv_params(in, width, 1, 1) + blocks * block_params(width) +
         conv_params(width, out, 1, 1);
}

std::size_t stack_macs(std::size_t in, std::size_t width, std::size_t blocks, std::size_t out) {
  return conv_macs(in, width, 1, 1) + blocks * block_macs(width) + conv_macs(width, out, 1, 1);
}

}  // namespace

std::size_t count_params(const ModelConfig& config) {
  const std::size_t latent = config.latent_channels();
  if (config.flags.no_gpp) {
    return stack_params(latent + config.pe_dims, config.direct_ch, config.direct_blocks, 3);
  }
  return stack_params(latent + config.pe_dims, config.conv_ch, config.gpp_blocks, 2 * latent) +
         stack_params(latent, config.conv_ch, config.synth_blocks, 3);
}

double count_mac_per_pixel(const ModelConfig& config) {
  const std::size_t latent = config.latent_channels();
  if (config.flags.no_gpp) {
    return static_cast<double>(
        stack_macs(latent + config.pe_dims, config.direct_ch, config.direct_blocks, 3));
  }
  return static_cast<double>(
      stack_macs(latent + config.pe_dims, config.conv_ch, config.gpp_blocks, 2 * latent) +
      stack_macs(latent, config.conv_ch, config.synth_blocks, 3));
}

// --- CodecModel -----------------------------------------------------------------

CodecModel::CodecModel(const ModelConfig& config) : config_(config) {
  const int latent = config.latent_channels();
  if (config.flags.no_gpp) {
    synthesis_ = add_stack("direct", ParamGroup::kSynthesis, latent + config.pe_dims,
                           config.direct_ch, config.direct_blocks, {{"head", 3}});
    return;
  }
  gpp_ = add_stack("gpp", ParamGroup::kGpp, latent + config.pe_dims, config.conv_ch,
                   config.gpp_blocks, {{"head_mu", latent}, {"head_sigma", latent}});
  synthesis_ = add_stack("synthesis", ParamGroup::kSynthesis, latent, config.conv_ch,
                         config.synth_blocks, {{"head", 3}});
}

CodecModel::Conv CodecModel::add_conv(const std::string& name, ParamGroup group, int in,
                                      int out, int kernel, int groups) {
  Conv conv;
  conv.kernel = kernel;
  conv.groups = groups;
  conv.weight = static_cast<int>(params_.size());
  params_.push_back({name + ".weight", group, Tensor(Shape{out, in / groups, kernel, kernel})});
  conv.bias = static_cast<int>(params_.size());
  params_.push_back({name + ".bias", group, Tensor(Shape{1, out, 1, 1})});
  return conv;
}

CodecModel::Stack CodecModel::add_stack(const std::string& prefix, ParamGroup group, int in,
                                        int width, int blocks,
                                        std::initializer_list<HeadSpec> heads) {
  Stack stack;
  stack.proj = add_conv(prefix + ".proj", group, in, width, 1, 1);
  for (int k = 0; k < blocks; ++k) {
    const std::string name = prefix + ".block" + std::to_string(k);
    Block block;
    block.depthwise = add_conv(name + ".dw", group, width, width, 3, width);
    block.norm_gamma = static_cast<int>(params_.size());
    params_.push_back({name + ".norm.gamma", group, Tensor(Shape{1, width, 1, 1}, 1.0)});
    block.norm_beta = static_cast<int>(params_.size());
    params_.push_back({name + ".norm.beta", group, Tensor(Shape{1, width, 1, 1})});
    block.expand = add_conv(name + ".expand", group, width, 2 * width, 1, 1);
    block.project = add_conv(name + ".project", group, 2 * width, width, 1, 1);
    stack.blocks.push_back(block);
  }
  for (const HeadSpec& head : heads) {
    stack.heads.push_back(add_conv(prefix + "." + head.name, group, width, head.out, 1, 1));
  }
  return stack;
}

CodecModel CodecModel::zeros(const ModelConfig& config) {
  CodecModel model(config);
  for (Parameter& p : model.params_) {
    std::fill(p.tensor.data().begin(), p.tensor.data().end(), 0.0);
  }
  return model;
}

CodecModel CodecModel::initialized(const ModelConfig& config, std::uint16_t init_seed) {
  CodecModel model(config);
  // Offset keeps the weight stream distinct from the noise stream when the
  // two seeds coincide.
  GaussianStream rng(static_cast<std::uint64_t>(init_seed) ^ 0xD1B54A32D192ED03ull);
  auto init_conv = [&](const Conv& conv) {
    Tensor& w = model.params_[conv.weight].tensor;
    const Shape s = w.shape();
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.c) * s.h * s.w);
    for (double& v : w.data()) v = bound * (2.0 * rng.next_uniform() - 1.0);
    for (double& v : model.params_[conv.bias].tensor.data()) {
      v = bound * (2.0 * rng.next_uniform() - 1.0);
    }
  };
  auto init_stack = [&](const Stack& stack, bool zero_head) {
    init_conv(stack.proj);
    for (const Block& b : stack.blocks) {
      init_conv(b.depthwise);
      init_conv(b.expand);
      init_conv(b.project);
    }
    if (zero_head) return;
    for (const Conv& head : stack.heads) init_conv(head);
  };
  if (model.gpp_) init_stack(*model.gpp_, /*zero_head=*/true);
  init_stack(model.synthesis_, /*zero_head=*/false);
  return model;
}

std::size_t CodecModel::param_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.tensor.size();
  return n;
}

std::size_t CodecModel::group_size(ParamGroup group) const {
  std::size_t n = 0;
  for (const Parameter& p : params_) {
    if (p.group == group) n += p.tensor.size();
  }
  return n;
}

std::vector<double> CodecModel::flatten(ParamGroup group) const {
  std::vector<double> out;
  out.reserve(group_size(group));
  for (const Parameter& p : params_) {
    if (p.group == group) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  }
  return out;
}

void CodecModel::load(ParamGroup group, std::span<const double> values) {
  if (values.size() != group_size(group)) {
    throw ContractViolation("CodecModel::load: expected " + std::to_string(group_size(group)) +
                            " values, got " + std::to_string(values.size()));
  }
  std::size_t offset = 0;
  for (Parameter& p : params_) {
    if (p.group != group) continue;
    std::copy_n(values.begin() + offset, p.tensor.size(), p.tensor.data().begin());
    offset += p.tensor.size();
  }
}

void CodecModel::set_requires_grad(bool on) {
  for (Parameter& p : params_) p.tensor.set_requires_grad(on);
}

void CodecModel::zero_grad() {
  for (Parameter& p : params_) p.tensor.zero_grad();
}

// --- Forward ------------------------------------------------------------------

namespace {

Var param(Graph& graph, CodecModel& model, int index) {
  return graph.leaf(model.parameters()[index].tensor);
}

Var apply_conv(Graph& graph, CodecModel& model, const CodecModel::Conv& conv, Var x) {
  return conv2d(x, param(graph, model, conv.weight), param(graph, model, conv.bias),
                conv.kernel, conv.groups);
}

Var apply_block(Graph& graph, CodecModel& model, const CodecModel::Block& block, Var x) {
  Var h = apply_conv(graph, model, block.depthwise, x);
  h = layer_norm(h, param(graph, model, block.norm_gamma), param(graph, model, block.norm_beta));
  h = apply_conv(graph, model, block.expand, h);
  h = gelu(h);
  h = apply_conv(graph, model, block.project, h);
  return add(x, h);
}

Var apply_trunk(Graph& graph, CodecModel& model, const CodecModel::Stack& stack, Var x) {
  Var h = apply_conv(graph, model, stack.proj, x);
  for (const CodecModel::Block& block : stack.blocks) h = apply_block(graph, model, block, h);
  return h;
}

void require_channels(const char* what, Var v, int expected) {
  if (v.shape().c != expected) {
    throw ContractViolation(std::string(what) + ": expected " + std::to_string(expected) +
                            " channels, got " + v.shape().str());
  }
}

}  // namespace

LatentParams gpp_forward(Graph& graph, CodecModel& model, Var z_m, Var pe) {
  const ModelConfig& config = model.config();
  if (!model.gpp()) throw ContractViolation("gpp_forward: model has no GPP (no-gpp ablation)");
  const int latent = config.latent_channels();
  require_channels("gpp_forward z_m", z_m, latent);
  require_channels("gpp_forward pe", pe, config.pe_dims);
  const Var parts[] = {z_m, pe};
  const CodecModel::Stack& stack = *model.gpp();
  Var h = apply_trunk(graph, model, stack, concat_channels(parts));
  Var mu = apply_conv(graph, model, stack.heads[0], h);
  Var sigma = gaussian_scale(apply_conv(graph, model, stack.heads[1], h), kLogScaleMin,
                             kLogScaleMax);
  return LatentParams{mu, sigma};
}

Var reparameterize(Var mu, Var sigma, Var z_m) { return add(mu, mul(sigma, z_m)); }

Var synthesis_forward(Graph& graph, CodecModel& model, Var y) {
  if (model.config().flags.no_gpp) {
    throw ContractViolation("synthesis_forward: no-gpp model has no latent synthesis stack");
  }
  require_channels("synthesis_forward", y, model.config().latent_channels());
  const CodecModel::Stack& stack = model.synthesis();
  return sigmoid(apply_conv(graph, model, stack.heads[0], apply_trunk(graph, model, stack, y)));
}

Var no_gpp_forward(Graph& graph, CodecModel& model, Var z_m, Var pe) {
  const ModelConfig& config = model.config();
  if (!config.flags.no_gpp) throw ContractViolation("no_gpp_forward: model has a GPP");
  require_channels("no_gpp_forward z_m", z_m, config.latent_channels());
  require_channels("no_gpp_forward pe", pe, config.pe_dims);
  const Var parts[] = {z_m, pe};
  const CodecModel::Stack& stack = model.synthesis();
  Var h = apply_trunk(graph, model, stack, concat_channels(parts));
  return sigmoid(apply_conv(graph, model, stack.heads[0], h));
}

Reconstruction reconstruct(Graph& graph, CodecModel& model, Var z_m, Var pe) {
  Reconstruction out;
  if (model.config().flags.no_gpp) {
    out.image = no_gpp_forward(graph, model, z_m, pe);
    return out;
  }
  LatentParams gaussian = gpp_forward(graph, model, z_m, pe);
  Var y = reparameterize(gaussian.mu, gaussian.sigma, z_m);
  out.image = synthesis_forward(graph, model, y);
  out.latent = y;
  out.gaussian = gaussian;
  return out;
}

Tensor render(CodecModel& model, const Tensor& z_m, const Tensor& pe) {
  Graph graph;
  Reconstruction r = reconstruct(graph, model, graph.input(z_m), graph.input(pe));
  return graph.value(r.image);
}

}  // namespace n2l
