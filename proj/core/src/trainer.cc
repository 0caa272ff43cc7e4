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

#include "n2l/trainer.h"

#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>

#include "n2l/autodiff.h"
#include "n2l/errors.h"

namespace n2l {

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(lr_final <= lr_init)) throw ConfigError("lr_final must not exceed lr_init");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
}

void TrainReport::write_csv(std::ostream& out) const {
  out << "step,mse,psnr,lr\n";
  out.precision(10);
  for (const TrainRecord& r : records) {
    out << r.step << ',' << r.mse << ',' << r.psnr_db << ',' << r.lr << '\n';
  }
}

void adam_step(std::span<Parameter> params, AdamState& state, double lr) {
  if (state.first.size() != params.size()) {
    state.first.assign(params.size(), {});
    state.second.assign(params.size(), {});
    for (std::size_t k = 0; k < params.size(); ++k) {
      state.first[k].assign(params[k].tensor.size(), 0.0);
      state.second[k].assign(params[k].tensor.size(), 0.0);
    }
  }
  for (const Parameter& p : params) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw TrainingDivergence("non-finite gradient in " + p.name + " at step " +
                                 std::to_string(state.step));
      }
    }
  }
  state.step += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& t = params[k].tensor;
    auto w = t.data();
    auto g = t.grad();
    if (g.empty()) continue;
    auto& m = state.first[k];
    auto& v = state.second[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

double cosine_lr(int step, const TrainConfig& config) {
  if (step < 0 || step >= config.steps) {
    throw ContractViolation("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(config.steps) + ")");
  }
  if (config.steps == 1) return config.lr_init;
  const double t = static_cast<double>(step) / (config.steps - 1);
  return config.lr_final +
         0.5 * (config.lr_init - config.lr_final) * (1.0 + std::cos(std::numbers::pi * t));
}

double psnr_from_mse(double mse) {
  if (mse < 1e-10) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double psnr(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ContractViolation("psnr: shape mismatch " + a.shape().str() + " vs " +
                            b.shape().str());
  }
  if (a.size() == 0) throw ContractViolation("psnr: empty images");
  double total = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    total += d * d;
  }
  return psnr_from_mse(total / static_cast<double>(x.size()));
}

OverfitResult overfit(const Tensor& image, const ModelConfig& config, const TrainConfig& train,
                      Seed seed, const ProgressFn& progress) {
  train.validate();
  const Shape s = image.shape();
  if (s.n != 1 || s.c != 3) throw ContractViolation("overfit: image must be [1,3,H,W]");
  const auto start = std::chrono::steady_clock::now();

  const NoisePyramid noise = build_pyramid(seed, config, s.h, s.w);
  const Tensor pe = build_pe(s.h, s.w, config.pe_dims);
  const std::uint64_t checksum = fnv1a64(noise.fused.data());

  OverfitResult result{CodecModel::initialized(config, train.init_seed), {}};
  CodecModel& model = result.model;
  TrainReport& report = result.report;
  model.set_requires_grad(true);
  AdamState adam;
  adam.beta1 = train.beta1;
  adam.beta2 = train.beta2;
  adam.epsilon = train.epsilon;

  Graph graph;
  report.losses.reserve(train.steps);
  for (int step = 0; step < train.steps; ++step) {
    graph.reset();
    model.zero_grad();
    Reconstruction rec = reconstruct(graph, model, graph.input(noise.fused), graph.input(pe));
    Var loss = mse_loss(rec.image, graph.input(image));
    const double mse = graph.value(loss).data()[0];
    if (!std::isfinite(mse)) {
      throw TrainingDivergence("non-finite loss at step " + std::to_string(step));
    }
    report.losses.push_back(mse);
    graph.backward(loss);
    const double lr = cosine_lr(step, train);
    if (step % train.eval_every == 0 || step == train.steps - 1) {
      report.records.push_back(TrainRecord{step, mse, psnr_from_mse(mse), lr});
      if (progress) progress(report.records.back());
    }
    adam_step(model.parameters(), adam, lr);
  }
  graph.reset();

  model.set_requires_grad(false);
  const Tensor final_image = render(model, noise.fused, pe);
  double total = 0.0;
  for (std::size_t i = 0; i < final_image.size(); ++i) {
    const double d = final_image.data()[i] - image.data()[i];
    total += d * d;
  }
  report.final_mse = total / static_cast<double>(final_image.size());
  if (!std::isfinite(report.final_mse)) {
    throw TrainingDivergence("non-finite reconstruction after training");
  }
  report.final_psnr_db = psnr_from_mse(report.final_mse);
  report.noise_checksum = fnv1a64(noise.fused.data());
  if (report.noise_checksum != checksum) {
    throw Error("internal: noise tensor changed during training");
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace n2l
