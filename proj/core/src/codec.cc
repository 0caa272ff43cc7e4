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

#include "n2l/codec.h"

#include <chrono>
#include <fstream>
#include <iterator>

#include "n2l/errors.h"
#include "n2l/model.h"

namespace n2l {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

EncodeResult encode_image(const Image8& image, const EncodeOptions& options,
                          const ProgressFn& progress) {
  const auto start = std::chrono::steady_clock::now();
  if (image.width < kMinImageSide || image.height < kMinImageSide) {
    throw ImageTooSmall("image must be at least 8x8, got " + std::to_string(image.width) + "x" +
                      std::to_string(image.height));
  }
  if (image.width > 0xFFFF || image.height > 0xFFFF) {
    throw ConfigError("image dimensions exceed 65535");
  }
  EncodeResult result;
  result.config = derive_config(options.setting, options.flags);
  const Tensor target = to_tensor(image);

  OverfitResult fitted = overfit(target, result.config, options.train, options.seed, progress);
  result.train = std::move(fitted.report);
  result.psnr_pre_quant_db = result.train.final_psnr_db;

  const NoisePyramid noise = build_pyramid(options.seed, result.config, image.height, image.width);
  const Tensor pe = build_pe(image.height, image.width, result.config.pe_dims);
  result.lambda = options.lambda.value_or(default_lambda(image.height, image.width));

  BitstreamHeader header;
  header.setting_id = static_cast<std::uint8_t>(options.setting);
  header.flags = options.flags;
  header.height = static_cast<std::uint16_t>(image.height);
  header.width = static_cast<std::uint16_t>(image.width);
  header.seed = options.seed;
  header.init_seed = options.train.init_seed;
  MeshSearchResult mesh =
      mesh_search(fitted.model, target, noise, pe, result.lambda, header, options.grid);
  result.stream = std::move(mesh.stream);
  result.chosen = mesh.chosen;
  result.candidates = std::move(mesh.candidates);
  result.header = BitstreamHeader::decode(result.stream);
  result.bpp = bits_per_pixel(result.stream.size(), image.height, image.width);
  result.psnr_post_quant_float_db = psnr_from_mse(result.chosen.mse);

  // Same code path as the decoder, fed from the serialized bytes.
  const DecodedImage check = decode_stream(result.stream);
  result.psnr_post_quant_db = psnr8(check.image, image);
  result.encode_seconds = seconds_since(start);
  return result;
}

DecodedImage decode_stream(std::span<const std::uint8_t> bytes, bool keep_intermediates) {
  const auto start = std::chrono::steady_clock::now();
  DecodedImage out;
  out.stream = deserialize(bytes);
  const BitstreamHeader& h = out.stream.header;
  const ModelConfig config = derive_config(h.setting_id, h.flags);
  CodecModel model = CodecModel::zeros(config);
  dequantize_into(out.stream.qmodel, model);
  NoisePyramid noise = build_pyramid(h.seed, config, h.height, h.width);
  const Tensor pe = build_pe(h.height, h.width, config.pe_dims);

  Graph graph;
  Reconstruction r = reconstruct(graph, model, graph.input(noise.fused), graph.input(pe));
  out.recon = graph.value(r.image);
  out.image = to_image8(out.recon);
  if (keep_intermediates) {
    if (r.latent) out.latent = graph.value(*r.latent);
    out.noise = std::move(noise.fused);
  }
  out.decode_ms = 1000.0 * seconds_since(start);
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageIoError("short write to " + path.string());
}

}  // namespace n2l
