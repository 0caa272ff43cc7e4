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

#ifndef N2L_BITSTREAM_H_
#define N2L_BITSTREAM_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "n2l/config.h"
#include "n2l/model.h"
#include "n2l/noise.h"
#include "n2l/tensor.h"

namespace n2l {

// 0 -> 0, -1 -> 1, 1 -> 2, -2 -> 3, ...
std::uint32_t zigzag(std::int32_t v);
std::int32_t unzigzag(std::uint32_t u);

// MSB-first bit packing.
class BitWriter {
 public:
  void put_bit(unsigned bit);
  void put_bits(std::uint64_t value, int count);
  // Pads with zero bits to the next byte boundary.
  void align_to_byte();
  std::size_t bit_count() const { return bits_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t bits_ = 0;
};

class BitReader {
 public:
  // Reads bits [bit_offset, 8 * bytes.size()); positions reported in
  // errors are absolute within `bytes`.
  explicit BitReader(std::span<const std::uint8_t> bytes, std::size_t bit_offset = 0)
      : bytes_(bytes), pos_(bit_offset) {}

  unsigned get_bit();
  std::uint64_t get_bits(int count);
  void align_to_byte();
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() * 8 - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
};

// Order-0 Exp-Golomb: floor(log2(v + 1)) zero bits, then v + 1 in binary.
void exp_golomb_put(BitWriter& out, std::uint32_t v);
std::uint32_t exp_golomb_get(BitReader& in);
std::size_t exp_golomb_length(std::uint32_t v);

// Codes a whole sequence and pads the result to a byte boundary.
std::vector<std::uint8_t> exp_golomb_encode(std::span<const std::uint32_t> values);
std::vector<std::uint32_t> exp_golomb_decode(std::span<const std::uint8_t> bytes,
                                             std::size_t count);

inline constexpr int kMinStepExp = -16;
inline constexpr int kMaxStepExp = 0;
inline constexpr std::int32_t kMaxQuantMagnitude = 1 << 23;

// Fixed 17-byte big-endian header:
//   0  magic "N2L1"        4  version (1)      5  setting id
//   6  flags               7  height (u16)     9  width (u16)
//   11 seed (u16)          13 init seed (u16)  15 gpp step exp (i8)
//   16 synthesis step exp (i8)
struct BitstreamHeader {
  static constexpr std::array<std::uint8_t, 4> kMagic = {'N', '2', 'L', '1'};
  static constexpr std::uint8_t kVersion = 1;
  static constexpr std::size_t kSize = 17;

  std::uint8_t setting_id = 0;
  AblationFlags flags;
  std::uint16_t height = 0;
  std::uint16_t width = 0;
  Seed seed;
  std::uint16_t init_seed = 0;
  std::int8_t gpp_step_exp = -8;
  std::int8_t synth_step_exp = -8;

  std::array<std::uint8_t, kSize> encode() const;
  // Throws UnsupportedFormat (magic/version) or MalformedBitstream.
  static BitstreamHeader decode(std::span<const std::uint8_t> bytes);
  bool operator==(const BitstreamHeader&) const = default;
};

struct QuantizedModel {
  std::int8_t gpp_step_exp = 0;
  std::int8_t synth_step_exp = 0;
  std::vector<std::int32_t> gpp;
  std::vector<std::int32_t> synth;
  bool operator==(const QuantizedModel&) const = default;
};

// 2^exponent, exact.
double step_size(int exponent);

// q = round-half-away-from-zero(w / 2^exp). Throws TrainingDivergence if a
// value is non-finite or |q| reaches 2^23.
QuantizedModel quantize_model(const CodecModel& model, int gpp_step_exp, int synth_step_exp);
std::vector<std::int32_t> quantize_values(std::span<const double> values, int step_exp);
// Writes q * 2^exp into every parameter.
void dequantize_into(const QuantizedModel& qmodel, CodecModel& model);

// Header, then the zigzag + Exp-Golomb GPP group (byte padded), then the
// synthesis group (byte padded). The header's step exponents must match.
std::vector<std::uint8_t> serialize(const BitstreamHeader& header, const QuantizedModel& qmodel);

struct DecodedStream {
  BitstreamHeader header;
  QuantizedModel qmodel;
  std::size_t gpp_bits = 0;    // padded
  std::size_t synth_bits = 0;  // padded
};

DecodedStream deserialize(std::span<const std::uint8_t> bytes, std::size_t gpp_count,
                          std::size_t synth_count);
// Group sizes follow from the header's setting and ablation flags.
DecodedStream deserialize(std::span<const std::uint8_t> bytes);

inline double bits_per_pixel(std::size_t bytes, int height, int width) {
  return 8.0 * static_cast<double>(bytes) / (static_cast<double>(height) * width);
}

struct MeshGrid {
  int min_exp = -12;
  int max_exp = -4;
};

struct MeshCandidate {
  int gpp_step_exp = 0;
  int synth_step_exp = 0;
  bool valid = false;
  std::size_t bits = 0;  // full stream, header included
  double bpp = 0.0;
  double mse = 0.0;
  double cost = 0.0;  // bpp + lambda * mse
};

// Strict total order used for selection: cost, then bits, then smaller
// |gpp exp|, then smaller |synth exp|. Invalid candidates sort last.
bool candidate_before(const MeshCandidate& a, const MeshCandidate& b);

struct MeshSearchResult {
  MeshCandidate chosen;
  QuantizedModel qmodel;
  std::vector<std::uint8_t> stream;
  std::vector<MeshCandidate> candidates;  // grid order, gpp exp outer
};

double default_lambda(int height, int width);

// Evaluates every (gpp, synthesis) exponent pair on the grid: quantize,
// serialize (the rate is the real stream length), reconstruct, score.
// `header` supplies every field except the step exponents.
MeshSearchResult mesh_search(const CodecModel& model, const Tensor& image,
                             const NoisePyramid& noise, const Tensor& pe, double lambda,
                             const BitstreamHeader& header, const MeshGrid& grid = {});

}  // namespace n2l

#endif  // N2L_BITSTREAM_H_
