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

#ifndef N2L_EVAL_H_
#define N2L_EVAL_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "n2l/codec.h"

namespace n2l {

struct EvalRecord {
  std::string dataset;
  std::string image;
  int setting = 0;
  std::uint16_t seed = 0;
  std::size_t params = 0;
  double bpp = 0.0;            // from the stream length
  double psnr_db = 0.0;        // decoded 8-bit output vs source
  double train_psnr_db = 0.0;  // float model after the last training step
  double encode_seconds = 0.0;
  double decode_ms = 0.0;
  std::string status = "ok";
};

struct EvalOptions {
  std::vector<int> settings;
  std::vector<std::uint16_t> seeds;
  TrainConfig train;
  std::optional<double> lambda;
  AblationFlags flags;
  int jobs = 1;
  // When set, one convergence CSV per (image, setting, seed) is written here.
  std::optional<std::filesystem::path> convergence_dir;
};

// PNG and PPM files directly inside `dir`, sorted by file name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

// Encodes then decodes every (image, setting, seed) triple. Failures are
// recorded in `status` and do not stop the run. The result is ordered by
// (image, setting, seed) regardless of the number of workers.
std::vector<EvalRecord> run_eval(const std::filesystem::path& image_dir,
                                 const EvalOptions& options, std::ostream* log = nullptr);

std::string convergence_csv_name(const std::string& image, int setting, std::uint16_t seed);

// Columns: dataset,image,setting,seed,params,bpp,psnr_db,train_psnr_db,encode_s,decode_ms,status
void write_eval_csv(std::ostream& out, std::span<const EvalRecord> records);

struct RdPoint {
  double bpp = 0.0;
  double psnr_db = 0.0;
};

// Mean (bpp, PSNR) per setting over successful records, in setting order,
// as gnuplot-friendly whitespace columns: setting bpp psnr_db.
void write_rd_data(std::ostream& out, std::span<const EvalRecord> records);

// Accepts the gnuplot file above, a two-column "bpp psnr" file, or an eval
// CSV (uses the bpp and psnr_db columns).
std::vector<RdPoint> read_rd_points(std::istream& in);

// Bjontegaard rate difference in percent of `test` relative to `anchor`:
// log-rate fitted as a polynomial (cubic with >= 4 points) of PSNR and
// integrated over the overlapping PSNR interval. Negative means savings.
double bd_rate(std::span<const RdPoint> anchor, std::span<const RdPoint> test);

enum class AblationMode { kNoGpp, kSingleScale };

struct AblationArm {
  std::string name;
  AblationFlags flags;
  std::size_t params = 0;
  double train_psnr_db = 0.0;
  double bpp = 0.0;
  double psnr_db = 0.0;
  int gpp_step_exp = 0;
  int synth_step_exp = 0;
  std::vector<std::uint8_t> stream;
};

struct AblationReport {
  AblationMode mode = AblationMode::kNoGpp;
  int setting = 0;
  int steps = 0;
  AblationArm full;
  AblationArm ablated;

  double delta_train_psnr_db() const { return full.train_psnr_db - ablated.train_psnr_db; }
  double delta_psnr_db() const { return full.psnr_db - ablated.psnr_db; }
  void write(std::ostream& out) const;
};

// Trains the full model and the ablated variant with the same setting,
// seeds, step count and lambda.
AblationReport run_ablation(const Image8& image, AblationMode mode, const EncodeOptions& base);

}  // namespace n2l

#endif  // N2L_EVAL_H_
