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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "n2l/errors.h"
#include "n2l/image_io.h"
#include "n2l/trainer.h"

namespace n2l {
namespace {

Tensor tiny_gradient_image(int h, int w) {
  Tensor t(Shape{1, 3, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      t.at(0, y, x) = (x + 0.5) / w;
      t.at(1, y, x) = (y + 0.5) / h;
      t.at(2, y, x) = 0.5 * (t.at(0, y, x) + t.at(1, y, x));
    }
  }
  return t;
}

TEST(Adam, FirstStepMatchesHandEvaluation) {
  std::vector<Parameter> params;
  params.push_back({"w", ParamGroup::kSynthesis, Tensor(Shape{}, 1.0)});
  params[0].tensor.set_requires_grad(true);
  params[0].tensor.grad()[0] = 1.0;
  AdamState state;
  adam_step(params, state, 0.1);
  // m_hat = g = 1, v_hat = g^2 = 1: step = lr / (1 + eps).
  EXPECT_DOUBLE_EQ(params[0].tensor.data()[0], 1.0 - 0.1 / (1.0 + 1e-8));
}

TEST(Adam, ZeroGradientLeavesParameter) {
  std::vector<Parameter> params;
  params.push_back({"w", ParamGroup::kGpp, Tensor(Shape{1, 1, 1, 4}, 0.25)});
  params[0].tensor.set_requires_grad(true);
  AdamState state;
  for (int i = 0; i < 3; ++i) adam_step(params, state, 0.1);
  for (double v : params[0].tensor.data()) EXPECT_EQ(v, 0.25);
}

TEST(Adam, NonFiniteGradientIsDivergence) {
  std::vector<Parameter> params;
  params.push_back({"w", ParamGroup::kGpp, Tensor(Shape{}, 0.0)});
  params[0].tensor.set_requires_grad(true);
  params[0].tensor.grad()[0] = std::numeric_limits<double>::infinity();
  AdamState state;
  EXPECT_THROW(adam_step(params, state, 0.1), TrainingDivergence);
}

TEST(CosineLr, Endpoints) {
  TrainConfig cfg;
  cfg.steps = 2001;
  EXPECT_EQ(cosine_lr(0, cfg), 8e-3);
  EXPECT_DOUBLE_EQ(cosine_lr(cfg.steps - 1, cfg), 1e-5);
  EXPECT_NEAR(cosine_lr(1000, cfg), 0.5 * (8e-3 + 1e-5), 1e-15);
  EXPECT_THROW(cosine_lr(cfg.steps, cfg), ContractViolation);
  cfg.steps = 1;
  EXPECT_EQ(cosine_lr(0, cfg), cfg.lr_init);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.steps = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.steps = 10;
  cfg.lr_final = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Psnr, CapSymmetryAndKnownValue) {
  Image8 a{4, 4, std::vector<std::uint8_t>(48, 0)};
  Image8 b = a;
  EXPECT_EQ(psnr8(a, b), 100.0);
  for (auto& v : b.rgb) v = 16;
  EXPECT_NEAR(psnr8(a, b), 10.0 * std::log10(255.0 * 255.0 / 256.0), 1e-12);
  EXPECT_NEAR(psnr8(a, b), 24.05, 0.005);
  EXPECT_EQ(psnr8(a, b), psnr8(b, a));
  const Tensor x = to_tensor(a), y = to_tensor(b);
  EXPECT_NEAR(psnr(x, y), psnr8(a, b), 1e-12);
  EXPECT_EQ(psnr(x, y), psnr(y, x));
}

TEST(Overfit, DeterministicAndImproving) {
  const Tensor img = tiny_gradient_image(16, 16);
  TrainConfig train;
  train.steps = 40;
  train.eval_every = 10;
  const ModelConfig cfg = setting(0);
  const OverfitResult a = overfit(img, cfg, train, Seed{3});
  const OverfitResult b = overfit(img, cfg, train, Seed{3});
  EXPECT_EQ(a.report.final_psnr_db, b.report.final_psnr_db);
  EXPECT_EQ(a.report.losses, b.report.losses);
  EXPECT_EQ(a.model.flatten(ParamGroup::kSynthesis), b.model.flatten(ParamGroup::kSynthesis));
  ASSERT_EQ(a.report.losses.size(), 40u);
  EXPECT_LT(a.report.losses.back(), a.report.losses.front());
  // Records every 10 steps plus the last.
  ASSERT_EQ(a.report.records.size(), 5u);
  EXPECT_EQ(a.report.records.back().step, 39);
  EXPECT_NE(a.report.noise_checksum, 0u);
}

TEST(Overfit, NonFiniteTargetIsDivergence) {
  Tensor img = tiny_gradient_image(8, 8);
  img.data()[5] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig train;
  train.steps = 2;
  EXPECT_THROW(overfit(img, setting(0), train, Seed{0}), TrainingDivergence);
}

}  // namespace
}  // namespace n2l
