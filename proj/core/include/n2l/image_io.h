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

#ifndef N2L_IMAGE_IO_H_
#define N2L_IMAGE_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "n2l/tensor.h"

namespace n2l {

// Interleaved 8-bit RGB.
struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  bool operator==(const Image8&) const = default;
};

// PNG (any bit depth / colour type, converted to 8-bit RGB) or binary PPM
// (P6, maxval 255), chosen by file signature.
Image8 read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image8& image);
void write_gray_png(const std::filesystem::path& path, int width, int height,
                    std::span<const std::uint8_t> gray);
void write_ppm(const std::filesystem::path& path, const Image8& image);

// [1, 3, H, W] with values v / 255.
Tensor to_tensor(const Image8& image);
// Clamps to [0, 1] and rounds half up: floor(255 v + 0.5).
Image8 to_image8(const Tensor& rgb);
// One channel of a tensor, min-max normalized to 0..255.
std::vector<std::uint8_t> normalized_channel(const Tensor& t, int channel);

double psnr8(const Image8& a, const Image8& b);

}  // namespace n2l

#endif  // N2L_IMAGE_IO_H_
