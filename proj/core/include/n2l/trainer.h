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

#ifndef N2L_TRAINER_H_
#define N2L_TRAINER_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "n2l/config.h"
#include "n2l/model.h"
#include "n2l/noise.h"
#include "n2l/tensor.h"

namespace n2l {

struct TrainConfig {
  int steps = 10000;
  double lr_init = 8e-3;
  double lr_final = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int eval_every = 100;
  std::uint16_t init_seed = 0;

  void validate() const;
};

struct TrainRecord {
  int step = 0;
  double mse = 0.0;
  double psnr_db = 0.0;
  double lr = 0.0;
};

struct TrainReport {
  std::vector<TrainRecord> records;
  std::vector<double> losses;  // training MSE before each update, one per step
  double final_mse = 0.0;      // after the last update
  double final_psnr_db = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t noise_checksum = 0;

  // Columns: step,mse,psnr,lr
  void write_csv(std::ostream& out) const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
};

// Bias-corrected Adam update of every parameter from its accumulated grad.
// Throws TrainingDivergence naming the tensor on a non-finite gradient.
void adam_step(std::span<Parameter> params, AdamState& state, double lr);

// lr_final + (lr_init - lr_final) * (1 + cos(pi * step / (steps - 1))) / 2
double cosine_lr(int step, const TrainConfig& config);

// 10 log10(1 / mse) for [0, 1] images, capped at 100 dB.
double psnr_from_mse(double mse);
double psnr(const Tensor& a, const Tensor& b);

struct OverfitResult {
  CodecModel model;
  TrainReport report;
};

using ProgressFn = std::function<void(const TrainRecord&)>;

// Fits a fresh model to one [1, 3, H, W] image in [0, 1]. The noise tensor
// and PE are built once and never written.
OverfitResult overfit(const Tensor& image, const ModelConfig& config, const TrainConfig& train,
                      Seed seed, const ProgressFn& progress = {});

}  // namespace n2l

#endif  // N2L_TRAINER_H_
