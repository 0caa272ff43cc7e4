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

#ifndef N2L_CONFIG_H_
#define N2L_CONFIG_H_

#include <array>
#include <cstdint>
#include <string>

namespace n2l {

// Ablation switches; each maps onto one bit of the stream header flags.
struct AblationFlags {
  bool no_gpp = false;        // bit 0: noise -> image directly, no latent
  bool single_scale = false;  // bit 1: one full-resolution noise scale

  std::uint8_t bits() const {
    return static_cast<std::uint8_t>((no_gpp ? 1u : 0u) | (single_scale ? 2u : 0u));
  }
  static AblationFlags from_bits(std::uint8_t bits);
  std::string describe() const;
  bool operator==(const AblationFlags&) const = default;
};

// One complexity setting. The five rows of kSettings are the only settings a
// stream may reference; ablation variants are derived from them.
struct ModelConfig {
  int setting_id = 0;
  int scales = 4;
  int noise_ch_per_scale = 12;
  int conv_ch = 8;
  int pe_dims = 8;
  int gpp_blocks = 3;
  int synth_blocks = 3;
  AblationFlags flags;
  // Only meaningful with flags.no_gpp: width and depth of the single
  // noise-to-image stack.
  int direct_ch = 0;
  int direct_blocks = 0;

  int latent_channels() const { return scales * noise_ch_per_scale; }
  bool operator==(const ModelConfig&) const = default;
};

inline constexpr int kNumSettings = 5;

// Per-setting rows: (scales, noise channels, conv channels, PE dims, M, N).
ModelConfig setting(int setting_id);

// Applies ablation flags to a base setting. The no-GPP variant folds the
// GPP blocks into a single stack whose width is picked to land closest to
// the base setting's parameter count.
ModelConfig derive_config(int setting_id, AblationFlags flags);

}  // namespace n2l

#endif  // N2L_CONFIG_H_
