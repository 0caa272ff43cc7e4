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

#include "n2l/image_io.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "n2l/errors.h"
#include "n2l/trainer.h"

namespace n2l {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const std::filesystem::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw ImageIoError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  *what = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

Image8 read_png(const std::filesystem::path& path) {
  File f = open_file(path, "rb");
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn,
                                           png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("libpng initialization failed");
  }
  Image8 image;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("invalid PNG " + path.string() + ": " + error);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(image.width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("unsupported PNG pixel layout in " + path.string());
  }
  image.rgb.resize(static_cast<std::size_t>(image.width) * image.height * 3);
  rows.resize(image.height);
  for (int y = 0; y < image.height; ++y) {
    rows[y] = image.rgb.data() + static_cast<std::size_t>(y) * image.width * 3;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_png_rows(const std::filesystem::path& path, int width, int height, int color_type,
                    int channels, const std::uint8_t* pixels) {
  File f = open_file(path, "wb");
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn,
                                            png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("libpng initialization failed");
  }
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("cannot write PNG " + path.string() + ": " + error);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * width * channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Skips whitespace and '#' comments between PPM header tokens.
int read_ppm_int(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  in >> v;
  if (!in) throw ImageIoError("malformed PPM header");
  return v;
}

Image8 read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6") throw UnsupportedFormat("only binary PPM (P6) is supported: " + path.string());
  Image8 image;
  image.width = read_ppm_int(in);
  image.height = read_ppm_int(in);
  const int maxval = read_ppm_int(in);
  if (image.width <= 0 || image.height <= 0 || maxval != 255) {
    throw UnsupportedFormat("unsupported PPM geometry or maxval in " + path.string());
  }
  in.get();
  image.rgb.resize(static_cast<std::size_t>(image.width) * image.height * 3);
  in.read(reinterpret_cast<char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!in) throw ImageIoError("truncated PPM data in " + path.string());
  return image;
}

}  // namespace

Image8 read_image(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw ImageIoError("cannot open " + path.string());
  unsigned char sig[8] = {};
  probe.read(reinterpret_cast<char*>(sig), sizeof sig);
  const std::streamsize got = probe.gcount();
  probe.close();
  if (got == 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  if (got >= 2 && sig[0] == 'P' && sig[1] == '6') return read_ppm(path);
  throw UnsupportedFormat("unrecognized image format: " + path.string());
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  write_png_rows(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 3, image.rgb.data());
}

void write_gray_png(const std::filesystem::path& path, int width, int height,
                    std::span<const std::uint8_t> gray) {
  if (gray.size() != static_cast<std::size_t>(width) * height) {
    throw ContractViolation("write_gray_png: buffer size does not match dimensions");
  }
  write_png_rows(path, width, height, PNG_COLOR_TYPE_GRAY, 1, gray.data());
}

void write_ppm(const std::filesystem::path& path, const Image8& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot open " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
}

Tensor to_tensor(const Image8& image) {
  Tensor t(Shape{1, 3, image.height, image.width});
  const std::size_t plane = t.shape().plane();
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) t.data()[c * plane + p] = image.rgb[p * 3 + c] / 255.0;
  }
  return t;
}

Image8 to_image8(const Tensor& rgb) {
  const Shape s = rgb.shape();
  if (s.n != 1 || s.c != 3) throw ContractViolation("to_image8: expected [1,3,H,W], got " + s.str());
  Image8 image{s.w, s.h, std::vector<std::uint8_t>(s.plane() * 3)};
  const std::size_t plane = s.plane();
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(rgb.data()[c * plane + p], 0.0, 1.0);
      image.rgb[p * 3 + c] = static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
    }
  }
  return image;
}

std::vector<std::uint8_t> normalized_channel(const Tensor& t, int channel) {
  const Shape s = t.shape();
  if (channel < 0 || channel >= s.c) {
    throw ContractViolation("channel " + std::to_string(channel) + " out of range for " + s.str());
  }
  const double* src = t.channel(channel);
  const auto [lo, hi] = std::minmax_element(src, src + s.plane());
  const double range = *hi - *lo;
  std::vector<std::uint8_t> out(s.plane());
  for (std::size_t p = 0; p < s.plane(); ++p) {
    const double v = range > 0.0 ? (src[p] - *lo) / range : 0.0;
    out[p] = static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
  }
  return out;
}

double psnr8(const Image8& a, const Image8& b) {
  if (a.width != b.width || a.height != b.height || a.rgb.size() != b.rgb.size()) {
    throw ContractViolation("psnr8: image dimensions differ");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = (static_cast<double>(a.rgb[i]) - b.rgb[i]) / 255.0;
    total += d * d;
  }
  return psnr_from_mse(total / static_cast<double>(a.rgb.size()));
}

}  // namespace n2l
