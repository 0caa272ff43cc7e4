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

#include "n2l/bitstream.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <tuple>

#include "n2l/errors.h"
#include "n2l/trainer.h"

namespace n2l {

std::uint32_t zigzag(std::int32_t v) {
  const auto u = static_cast<std::uint32_t>(v);
  return (u << 1) ^ static_cast<std::uint32_t>(-static_cast<std::int32_t>(u >> 31));
}

std::int32_t unzigzag(std::uint32_t u) {
  return static_cast<std::int32_t>((u >> 1) ^ (0u - (u & 1u)));
}

// --- Bit I/O ---------------------------------------------------------------

void BitWriter::put_bit(unsigned bit) {
  if (bits_ % 8 == 0) bytes_.push_back(0);
  if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ % 8));
  ++bits_;
}

void BitWriter::put_bits(std::uint64_t value, int count) {
  for (int i = count - 1; i >= 0; --i) put_bit(static_cast<unsigned>((value >> i) & 1u));
}

void BitWriter::align_to_byte() { bits_ = bytes_.size() * 8; }

unsigned BitReader::get_bit() {
  if (pos_ >= bytes_.size() * 8) throw MalformedBitstream("unexpected end of stream", pos_);
  const unsigned bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
  ++pos_;
  return bit;
}

std::uint64_t BitReader::get_bits(int count) {
  std::uint64_t v = 0;
  for (int i = 0; i < count; ++i) v = (v << 1) | get_bit();
  return v;
}

void BitReader::align_to_byte() { pos_ = (pos_ + 7) / 8 * 8; }

// --- Exp-Golomb ----------------------------------------------------------------

std::size_t exp_golomb_length(std::uint32_t v) {
  const std::uint64_t x = static_cast<std::uint64_t>(v) + 1;
  const int n = 63 - __builtin_clzll(x);
  return 2 * static_cast<std::size_t>(n) + 1;
}

void exp_golomb_put(BitWriter& out, std::uint32_t v) {
  const std::uint64_t x = static_cast<std::uint64_t>(v) + 1;
  const int n = 63 - __builtin_clzll(x);
  out.put_bits(0, n);
  out.put_bits(x, n + 1);
}

std::uint32_t exp_golomb_get(BitReader& in) {
  const std::size_t start = in.position();
  int zeros = 0;
  while (in.get_bit() == 0) {
    if (++zeros > 32) throw MalformedBitstream("Exp-Golomb prefix longer than 32 bits", start);
  }
  const std::uint64_t x = (std::uint64_t{1} << zeros) | in.get_bits(zeros);
  if (x - 1 > 0xFFFFFFFFull) throw MalformedBitstream("Exp-Golomb value overflows 32 bits", start);
  return static_cast<std::uint32_t>(x - 1);
}

std::vector<std::uint8_t> exp_golomb_encode(std::span<const std::uint32_t> values) {
  BitWriter out;
  for (std::uint32_t v : values) exp_golomb_put(out, v);
  out.align_to_byte();
  return out.bytes();
}

std::vector<std::uint32_t> exp_golomb_decode(std::span<const std::uint8_t> bytes,
                                             std::size_t count) {
  BitReader in(bytes);
  std::vector<std::uint32_t> out(count);
  for (auto& v : out) v = exp_golomb_get(in);
  return out;
}

// --- Header ----------------------------------------------------------------

namespace {

void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 8);
  p[1] = static_cast<std::uint8_t>(v & 0xFF);
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

bool exponent_in_range(int e) { return e >= kMinStepExp && e <= kMaxStepExp; }

}  // namespace

std::array<std::uint8_t, BitstreamHeader::kSize> BitstreamHeader::encode() const {
  if (!exponent_in_range(gpp_step_exp) || !exponent_in_range(synth_step_exp)) {
    throw ContractViolation("step exponents must lie in [-16, 0]");
  }
  if (setting_id >= kNumSettings) throw ContractViolation("setting id out of range");
  std::array<std::uint8_t, kSize> out{};
  std::copy(kMagic.begin(), kMagic.end(), out.begin());
  out[4] = kVersion;
  out[5] = setting_id;
  out[6] = flags.bits();
  put_u16(&out[7], height);
  put_u16(&out[9], width);
  put_u16(&out[11], seed.value);
  put_u16(&out[13], init_seed);
  out[15] = static_cast<std::uint8_t>(gpp_step_exp);
  out[16] = static_cast<std::uint8_t>(synth_step_exp);
  return out;
}

BitstreamHeader BitstreamHeader::decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw UnsupportedFormat("not an n2l stream (bad magic)");
  }
  if (bytes.size() < 5 || bytes[4] != kVersion) {
    throw UnsupportedFormat(bytes.size() < 5 ? "missing version byte"
                                             : "unsupported stream version " +
                                                   std::to_string(bytes[4]));
  }
  if (bytes.size() < kSize) throw MalformedBitstream("truncated header", bytes.size() * 8);
  BitstreamHeader h;
  h.setting_id = bytes[5];
  if (h.setting_id >= kNumSettings) {
    throw MalformedBitstream("setting id " + std::to_string(h.setting_id) + " out of range", 5 * 8);
  }
  if ((bytes[6] & ~3u) != 0) throw MalformedBitstream("unknown flag bits", 6 * 8);
  h.flags = AblationFlags::from_bits(bytes[6]);
  h.height = get_u16(&bytes[7]);
  h.width = get_u16(&bytes[9]);
  if (h.height == 0 || h.width == 0) throw MalformedBitstream("zero image dimension", 7 * 8);
  h.seed = Seed{get_u16(&bytes[11])};
  h.init_seed = get_u16(&bytes[13]);
  h.gpp_step_exp = static_cast<std::int8_t>(bytes[15]);
  h.synth_step_exp = static_cast<std::int8_t>(bytes[16]);
  if (!exponent_in_range(h.gpp_step_exp)) {
    throw MalformedBitstream("gpp step exponent out of range", 15 * 8);
  }
  if (!exponent_in_range(h.synth_step_exp)) {
    throw MalformedBitstream("synthesis step exponent out of range", 16 * 8);
  }
  return h;
}

// --- Quantization -------------------------------------------------------------

double step_size(int exponent) { return std::ldexp(1.0, exponent); }

std::vector<std::int32_t> quantize_values(std::span<const double> values, int step_exp) {
  if (!exponent_in_range(step_exp)) throw ContractViolation("step exponent out of range");
  std::vector<std::int32_t> q(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double scaled = std::round(std::ldexp(values[i], -step_exp));
    if (!std::isfinite(scaled) || std::abs(scaled) >= kMaxQuantMagnitude) {
      throw TrainingDivergence("parameter " + std::to_string(i) +
                               " cannot be quantized at step 2^" + std::to_string(step_exp));
    }
    q[i] = static_cast<std::int32_t>(scaled);
  }
  return q;
}

QuantizedModel quantize_model(const CodecModel& model, int gpp_step_exp, int synth_step_exp) {
  QuantizedModel q;
  q.gpp_step_exp = static_cast<std::int8_t>(gpp_step_exp);
  q.synth_step_exp = static_cast<std::int8_t>(synth_step_exp);
  q.gpp = quantize_values(model.flatten(ParamGroup::kGpp), gpp_step_exp);
  q.synth = quantize_values(model.flatten(ParamGroup::kSynthesis), synth_step_exp);
  return q;
}

namespace {

std::vector<double> dequantize_values(std::span<const std::int32_t> q, int step_exp) {
  std::vector<double> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = std::ldexp(static_cast<double>(q[i]), step_exp);
  return out;
}

}  // namespace

void dequantize_into(const QuantizedModel& qmodel, CodecModel& model) {
  model.load(ParamGroup::kGpp, dequantize_values(qmodel.gpp, qmodel.gpp_step_exp));
  model.load(ParamGroup::kSynthesis, dequantize_values(qmodel.synth, qmodel.synth_step_exp));
}

// --- Serialization -------------------------------------------------------------

std::vector<std::uint8_t> serialize(const BitstreamHeader& header, const QuantizedModel& qmodel) {
  if (header.gpp_step_exp != qmodel.gpp_step_exp ||
      header.synth_step_exp != qmodel.synth_step_exp) {
    throw ContractViolation("serialize: header and quantized model disagree on step exponents");
  }
  const auto head = header.encode();
  BitWriter payload;
  for (std::int32_t v : qmodel.gpp) exp_golomb_put(payload, zigzag(v));
  payload.align_to_byte();
  for (std::int32_t v : qmodel.synth) exp_golomb_put(payload, zigzag(v));
  payload.align_to_byte();
  const auto& body = payload.bytes();
  std::vector<std::uint8_t> out(head.size() + body.size());
  std::copy(head.begin(), head.end(), out.begin());
  std::copy(body.begin(), body.end(), out.begin() + static_cast<std::ptrdiff_t>(head.size()));
  return out;
}

namespace {

std::vector<std::int32_t> read_group(BitReader& in, std::size_t count) {
  std::vector<std::int32_t> out(count);
  for (auto& v : out) {
    const std::size_t at = in.position();
    v = unzigzag(exp_golomb_get(in));
    if (v >= kMaxQuantMagnitude || v <= -kMaxQuantMagnitude) {
      throw MalformedBitstream("quantized parameter magnitude out of range", at);
    }
  }
  in.align_to_byte();
  return out;
}

}  // namespace

DecodedStream deserialize(std::span<const std::uint8_t> bytes, std::size_t gpp_count,
                          std::size_t synth_count) {
  DecodedStream d;
  d.header = BitstreamHeader::decode(bytes);
  d.qmodel.gpp_step_exp = d.header.gpp_step_exp;
  d.qmodel.synth_step_exp = d.header.synth_step_exp;
  BitReader in(bytes, BitstreamHeader::kSize * 8);
  std::size_t mark = in.position();
  d.qmodel.gpp = read_group(in, gpp_count);
  d.gpp_bits = in.position() - mark;
  mark = in.position();
  d.qmodel.synth = read_group(in, synth_count);
  d.synth_bits = in.position() - mark;
  if (in.remaining() != 0) {
    throw MalformedBitstream(std::to_string(in.remaining() / 8) +
                                 " trailing bytes after the synthesis group",
                             in.position());
  }
  return d;
}

DecodedStream deserialize(std::span<const std::uint8_t> bytes) {
  const BitstreamHeader header = BitstreamHeader::decode(bytes);
  const ModelConfig config = derive_config(header.setting_id, header.flags);
  const CodecModel shape_only = CodecModel::zeros(config);
  return deserialize(bytes, shape_only.group_size(ParamGroup::kGpp),
                     shape_only.group_size(ParamGroup::kSynthesis));
}

// --- Mesh search ---------------------------------------------------------------

bool candidate_before(const MeshCandidate& a, const MeshCandidate& b) {
  if (a.valid != b.valid) return a.valid;
  return std::make_tuple(a.cost, a.bits, std::abs(a.gpp_step_exp), std::abs(a.synth_step_exp)) <
         std::make_tuple(b.cost, b.bits, std::abs(b.gpp_step_exp), std::abs(b.synth_step_exp));
}

double default_lambda(int height, int width) {
  return 0.02 * static_cast<double>(height) * static_cast<double>(width);
}

MeshSearchResult mesh_search(const CodecModel& model, const Tensor& image,
                             const NoisePyramid& noise, const Tensor& pe, double lambda,
                             const BitstreamHeader& header, const MeshGrid& grid) {
  if (grid.min_exp > grid.max_exp || !exponent_in_range(grid.min_exp) ||
      !exponent_in_range(grid.max_exp)) {
    throw ContractViolation("mesh_search: invalid exponent grid");
  }
  if (!(lambda >= 0.0)) throw ContractViolation("mesh_search: lambda must be >= 0");
  const Shape s = image.shape();
  MeshSearchResult result;
  CodecModel work = CodecModel::zeros(model.config());
  std::size_t best = 0;
  for (int ge = grid.min_exp; ge <= grid.max_exp; ++ge) {
    for (int se = grid.min_exp; se <= grid.max_exp; ++se) {
      MeshCandidate c;
      c.gpp_step_exp = ge;
      c.synth_step_exp = se;
      try {
        const QuantizedModel q = quantize_model(model, ge, se);
        BitstreamHeader h = header;
        h.gpp_step_exp = static_cast<std::int8_t>(ge);
        h.synth_step_exp = static_cast<std::int8_t>(se);
        c.bits = serialize(h, q).size() * 8;
        dequantize_into(q, work);
        const Tensor recon = render(work, noise.fused, pe);
        double total = 0.0;
        for (std::size_t i = 0; i < recon.size(); ++i) {
          const double d = recon.data()[i] - image.data()[i];
          total += d * d;
        }
        c.mse = total / static_cast<double>(recon.size());
        c.bpp = static_cast<double>(c.bits) / (static_cast<double>(s.h) * s.w);
        c.cost = c.bpp + lambda * c.mse;
        c.valid = std::isfinite(c.cost);
      } catch (const TrainingDivergence&) {
        c.valid = false;
      }
      result.candidates.push_back(c);
      if (candidate_before(c, result.candidates[best])) best = result.candidates.size() - 1;
    }
  }
  result.chosen = result.candidates[best];
  if (!result.chosen.valid) {
    throw TrainingDivergence("mesh search: no quantization candidate gives a finite cost");
  }
  result.qmodel = quantize_model(model, result.chosen.gpp_step_exp, result.chosen.synth_step_exp);
  BitstreamHeader h = header;
  h.gpp_step_exp = static_cast<std::int8_t>(result.chosen.gpp_step_exp);
  h.synth_step_exp = static_cast<std::int8_t>(result.chosen.synth_step_exp);
  result.stream = serialize(h, result.qmodel);
  return result;
}

}  // namespace n2l
