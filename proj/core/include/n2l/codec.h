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

#ifndef N2L_CODEC_H_
#define N2L_CODEC_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "n2l/bitstream.h"
#include "n2l/config.h"
#include "n2l/image_io.h"
#include "n2l/noise.h"
#include "n2l/trainer.h"

namespace n2l {

inline constexpr int kMinImageSide = 8;

struct EncodeOptions {
  int setting = 0;
  AblationFlags flags;
  Seed seed;
  TrainConfig train;
  std::optional<double> lambda;  // default_lambda(H, W) when unset
  MeshGrid grid;
};

struct EncodeResult {
  std::vector<std::uint8_t> stream;
  BitstreamHeader header;
  ModelConfig config;
  TrainReport train;
  MeshCandidate chosen;
  std::vector<MeshCandidate> candidates;
  double lambda = 0.0;
  double bpp = 0.0;
  double psnr_pre_quant_db = 0.0;
  double psnr_post_quant_float_db = 0.0;  // float reconstruction vs input
  double psnr_post_quant_db = 0.0;        // 8-bit output, as the decoder writes it
  double encode_seconds = 0.0;
};

// load -> normalize -> noise/PE -> overfit -> mesh search -> serialize.
EncodeResult encode_image(const Image8& image, const EncodeOptions& options,
                          const ProgressFn& progress = {});

struct DecodedImage {
  DecodedStream stream;
  Image8 image;
  Tensor noise;    // z_M
  Tensor latent;   // y_pred; empty for the no-GPP ablation
  Tensor recon;    // float reconstruction before 8-bit rounding
  double decode_ms = 0.0;
};

// Everything is rebuilt from the stream bytes: noise from the header seed,
// parameters from the payload.
DecodedImage decode_stream(std::span<const std::uint8_t> bytes, bool keep_intermediates = false);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace n2l

#endif  // N2L_CODEC_H_
