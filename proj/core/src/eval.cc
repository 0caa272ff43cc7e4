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

#include "n2l/eval.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "n2l/errors.h"
#include "n2l/model.h"

namespace n2l {

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ImageIoError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  return out;
}

std::string convergence_csv_name(const std::string& image, int setting, std::uint16_t seed) {
  return image + "_setting" + std::to_string(setting) + "_seed" + std::to_string(seed) + ".csv";
}

std::vector<EvalRecord> run_eval(const std::filesystem::path& image_dir,
                                 const EvalOptions& options, std::ostream* log) {
  const auto images = list_images(image_dir);
  std::vector<int> settings = options.settings;
  std::vector<std::uint16_t> seeds = options.seeds;
  std::sort(settings.begin(), settings.end());
  std::sort(seeds.begin(), seeds.end());
  const std::string dataset = std::filesystem::absolute(image_dir).lexically_normal().filename().string();

  struct Job {
    std::filesystem::path path;
    int setting;
    std::uint16_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& path : images) {
    for (int s : settings) {
      for (std::uint16_t seed : seeds) jobs.push_back({path, s, seed});
    }
  }
  if (options.convergence_dir) std::filesystem::create_directories(*options.convergence_dir);

  std::vector<EvalRecord> records(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const Job& job = jobs[k];
      EvalRecord& r = records[k];
      r.dataset = dataset;
      r.image = job.path.stem().string();
      r.setting = job.setting;
      r.seed = job.seed;
      try {
        const Image8 source = read_image(job.path);
        EncodeOptions enc;
        enc.setting = job.setting;
        enc.flags = options.flags;
        enc.seed = Seed{job.seed};
        enc.train = options.train;
        enc.lambda = options.lambda;
        const EncodeResult encoded = encode_image(source, enc);
        const DecodedImage decoded = decode_stream(encoded.stream);
        r.params = count_params(encoded.config);
        r.bpp = bits_per_pixel(encoded.stream.size(), source.height, source.width);
        r.psnr_db = psnr8(decoded.image, source);
        r.train_psnr_db = encoded.train.final_psnr_db;
        r.encode_seconds = encoded.encode_seconds;
        r.decode_ms = decoded.decode_ms;
        if (options.convergence_dir) {
          std::ofstream csv(*options.convergence_dir /
                            convergence_csv_name(r.image, r.setting, r.seed));
          encoded.train.write_csv(csv);
        }
      } catch (const std::exception& e) {
        r.status = std::string("error: ") + e.what();
      }
      if (log != nullptr) {
        std::lock_guard<std::mutex> lock(log_mutex);
        *log << r.image << " setting " << r.setting << " seed " << r.seed << ": " << r.status;
        if (r.status == "ok") *log << "  bpp " << r.bpp << "  psnr " << r.psnr_db << " dB";
        *log << '\n';
      }
    }
  };
  const int width = std::max(1, std::min<int>(options.jobs, static_cast<int>(jobs.size())));
  std::vector<std::jthread> pool;
  for (int t = 1; t < width; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  return records;
}

void write_eval_csv(std::ostream& out, std::span<const EvalRecord> records) {
  out << "dataset,image,setting,seed,params,bpp,psnr_db,train_psnr_db,encode_s,decode_ms,status\n";
  out << std::setprecision(8);
  for (const EvalRecord& r : records) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << r.dataset << ',' << r.image << ',' << r.setting << ',' << r.seed << ',' << r.params
        << ',' << r.bpp << ',' << r.psnr_db << ',' << r.train_psnr_db << ','
        << r.encode_seconds << ',' << r.decode_ms << ',' << status << '\n';
  }
}

void write_rd_data(std::ostream& out, std::span<const EvalRecord> records) {
  std::map<int, std::pair<RdPoint, int>> sums;
  for (const EvalRecord& r : records) {
    if (r.status != "ok") continue;
    auto& [point, n] = sums[r.setting];
    point.bpp += r.bpp;
    point.psnr_db += r.psnr_db;
    ++n;
  }
  out << "# setting bpp psnr_db\n" << std::setprecision(8);
  for (const auto& [setting, acc] : sums) {
    out << setting << ' ' << acc.first.bpp / acc.second << ' ' << acc.first.psnr_db / acc.second
        << '\n';
  }
}

std::vector<RdPoint> read_rd_points(std::istream& in) {
  std::vector<RdPoint> points;
  std::string line;
  int bpp_col = -1;
  int psnr_col = -1;
  bool csv = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!csv && line.find("bpp") != std::string::npos && line.find(',') != std::string::npos) {
      csv = true;
      std::stringstream header(line);
      std::string name;
      for (int col = 0; std::getline(header, name, ','); ++col) {
        if (name == "bpp") bpp_col = col;
        if (name == "psnr_db" || name == "psnr") psnr_col = col;
      }
      if (bpp_col < 0 || psnr_col < 0) throw ContractViolation("RD CSV lacks bpp/psnr_db columns");
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream row(line);
    std::string field;
    if (csv) {
      while (std::getline(row, field, ',')) fields.push_back(field);
      if (fields.size() > 10 && fields.back() != "ok") continue;
    } else {
      while (row >> field) fields.push_back(field);
    }
    RdPoint p;
    try {
      if (csv) {
        p.bpp = std::stod(fields.at(bpp_col));
        p.psnr_db = std::stod(fields.at(psnr_col));
      } else if (fields.size() >= 3) {
        p.bpp = std::stod(fields[1]);
        p.psnr_db = std::stod(fields[2]);
      } else if (fields.size() == 2) {
        p.bpp = std::stod(fields[0]);
        p.psnr_db = std::stod(fields[1]);
      } else {
        throw ContractViolation("RD line needs at least two columns: " + line);
      }
    } catch (const std::logic_error&) {
      throw ContractViolation("cannot parse RD line: " + line);
    }
    points.push_back(p);
  }
  return points;
}

namespace {

// Least-squares polynomial in u = x - centre, coefficients lowest order first.
std::vector<double> polyfit(std::span<const RdPoint> pts, double centre, int degree) {
  const int n = degree + 1;
  std::vector<double> a(n * n, 0.0);
  std::vector<double> b(n, 0.0);
  for (const RdPoint& p : pts) {
    const double u = p.psnr_db - centre;
    const double y = std::log(p.bpp);
    std::vector<double> pw(2 * n, 1.0);
    for (int k = 1; k < 2 * n; ++k) pw[k] = pw[k - 1] * u;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) a[r * n + c] += pw[r + c];
      b[r] += pw[r] * y;
    }
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    if (std::abs(a[pivot * n + col]) < 1e-300) throw ContractViolation("bd_rate: degenerate RD points");
    for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
    std::swap(b[col], b[pivot]);
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r * n + col] / a[col * n + col];
      for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> coef(n);
  for (int k = 0; k < n; ++k) coef[k] = b[k] / a[k * n + k];
  return coef;
}

double integrate(const std::vector<double>& coef, double lo, double hi) {
  double total = 0.0;
  for (std::size_t k = 0; k < coef.size(); ++k) {
    const double e = static_cast<double>(k + 1);
    total += coef[k] * (std::pow(hi, e) - std::pow(lo, e)) / e;
  }
  return total;
}

}  // namespace

double bd_rate(std::span<const RdPoint> anchor, std::span<const RdPoint> test) {
  if (anchor.size() < 2 || test.size() < 2) {
    throw ContractViolation("bd_rate needs at least two RD points per curve");
  }
  for (const auto* curve : {&anchor, &test}) {
    for (const RdPoint& p : *curve) {
      if (!(p.bpp > 0.0) || !std::isfinite(p.psnr_db)) {
        throw ContractViolation("bd_rate: rates must be positive and PSNR finite");
      }
    }
  }
  auto range = [](std::span<const RdPoint> c) {
    auto [lo, hi] = std::minmax_element(c.begin(), c.end(), [](const RdPoint& a, const RdPoint& b) {
      return a.psnr_db < b.psnr_db;
    });
    return std::make_pair(lo->psnr_db, hi->psnr_db);
  };
  const auto [alo, ahi] = range(anchor);
  const auto [tlo, thi] = range(test);
  const double lo = std::max(alo, tlo);
  const double hi = std::min(ahi, thi);
  if (!(hi > lo)) throw ContractViolation("bd_rate: PSNR ranges do not overlap");
  const double centre = 0.5 * (lo + hi);
  const auto pa = polyfit(anchor, centre, std::min<int>(3, static_cast<int>(anchor.size()) - 1));
  const auto pt = polyfit(test, centre, std::min<int>(3, static_cast<int>(test.size()) - 1));
  const double avg_a = integrate(pa, lo - centre, hi - centre) / (hi - lo);
  const double avg_t = integrate(pt, lo - centre, hi - centre) / (hi - lo);
  return (std::exp(avg_t - avg_a) - 1.0) * 100.0;
}

void AblationReport::write(std::ostream& out) const {
  out << std::fixed << std::setprecision(4);
  out << "ablation " << (mode == AblationMode::kNoGpp ? "no-gpp" : "single-scale")
      << "  setting " << setting << "  steps " << steps << '\n';
  out << "variant,flags,params,train_psnr_db,bpp,psnr_db,gpp_step_exp,synth_step_exp\n";
  for (const AblationArm* arm : {&full, &ablated}) {
    out << arm->name << ',' << arm->flags.describe() << ',' << arm->params << ','
        << arm->train_psnr_db << ',' << arm->bpp << ',' << arm->psnr_db << ','
        << arm->gpp_step_exp << ',' << arm->synth_step_exp << '\n';
  }
  const double d = delta_train_psnr_db();
  out << "delta_train_psnr_db " << d << " (" << (d >= 0 ? "full >= ablated" : "full < ablated")
      << ")\n";
  out << "delta_psnr_db " << delta_psnr_db() << "  at bpp " << full.bpp << " vs " << ablated.bpp
      << '\n';
}

AblationReport run_ablation(const Image8& image, AblationMode mode, const EncodeOptions& base) {
  AblationReport report;
  report.mode = mode;
  report.setting = base.setting;
  report.steps = base.train.steps;
  auto run = [&](const std::string& name, AblationFlags flags) {
    EncodeOptions opts = base;
    opts.flags = flags;
    const EncodeResult r = encode_image(image, opts);
    AblationArm arm;
    arm.name = name;
    arm.flags = flags;
    arm.params = count_params(r.config);
    arm.train_psnr_db = r.train.final_psnr_db;
    arm.bpp = r.bpp;
    arm.psnr_db = r.psnr_post_quant_db;
    arm.gpp_step_exp = r.chosen.gpp_step_exp;
    arm.synth_step_exp = r.chosen.synth_step_exp;
    arm.stream = r.stream;
    return arm;
  };
  AblationFlags ablated = base.flags;
  if (mode == AblationMode::kNoGpp) {
    ablated.no_gpp = true;
  } else {
    ablated.single_scale = true;
  }
  AblationFlags full = base.flags;
  full.no_gpp = false;
  full.single_scale = false;
  report.full = run("full", full);
  report.ablated = run(mode == AblationMode::kNoGpp ? "no-gpp" : "single-scale", ablated);
  return report;
}

}  // namespace n2l
