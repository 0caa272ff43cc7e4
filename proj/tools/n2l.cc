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

// n2l: command-line front end for the codec.

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "n2l/codec.h"
#include "n2l/errors.h"
#include "n2l/eval.h"
#include "n2l/model.h"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kBadInput = 2,
  kMalformedStream = 3,
  kDivergence = 4,
  kUnsupportedFormat = 5,
  kUnreadableImage = 6,
  kImageTooSmall = 7,
};

constexpr const char* kExitCodeHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  1  internal error\n"
    "  2  bad arguments or contract violation (e.g. channel out of range)\n"
    "  3  malformed bitstream (diagnostic includes the bit offset)\n"
    "  4  training diverged (non-finite loss or gradient)\n"
    "  5  unsupported format (bad stream magic/version, unknown image type)\n"
    "  6  image unreadable or unwritable\n"
    "  7  image smaller than 8x8\n";

struct TrainArgs {
  int steps = n2l::TrainConfig{}.steps;
  std::uint16_t init_seed = 0;
  double lr = 8e-3;
  double lr_final = 1e-5;
  int log_every = 100;
  std::optional<double> lambda;
  bool no_gpp = false;
  bool single_scale = false;
  int setting = 0;

  void attach(CLI::App* cmd, bool with_setting = true) {
    if (with_setting) {
      cmd->add_option("--setting", setting, "Model size, 0 (smallest) to 4")
          ->check(CLI::Range(0, n2l::kNumSettings - 1))
          ->capture_default_str();
    }
    cmd->add_option("--steps", steps, "Overfitting steps")->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--init-seed", init_seed, "Weight initialization seed")->capture_default_str();
    cmd->add_option("--lr", lr, "Initial learning rate")->capture_default_str();
    cmd->add_option("--lr-final", lr_final, "Final learning rate (cosine schedule)")
        ->capture_default_str();
    cmd->add_option("--log-every", log_every, "Training log interval in steps")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--lambda", lambda, "Rate-distortion weight (default 0.02*H*W)");
  }

  void attach_flags(CLI::App* cmd) {
    cmd->add_flag("--no-gpp", no_gpp, "Ablation: drop the latent predictor");
    cmd->add_flag("--single-scale", single_scale, "Ablation: one full-resolution noise scale");
  }

  n2l::TrainConfig train() const {
    n2l::TrainConfig t;
    t.steps = steps;
    t.lr_init = lr;
    t.lr_final = lr_final;
    t.eval_every = log_every;
    t.init_seed = init_seed;
    return t;
  }
};

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(pos, end - pos);
    int v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw n2l::ContractViolation(std::string("bad ") + what + " list entry '" + item + "'");
    }
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

int cmd_encode(const fs::path& input, const fs::path& output, std::uint16_t seed,
               const TrainArgs& args, const std::optional<fs::path>& log_csv, bool quiet) {
  const n2l::Image8 image = n2l::read_image(input);
  n2l::EncodeOptions opts;
  opts.setting = args.setting;
  opts.flags = n2l::AblationFlags{args.no_gpp, args.single_scale};
  opts.seed = n2l::Seed{seed};
  opts.train = args.train();
  opts.lambda = args.lambda;
  n2l::ProgressFn progress;
  if (!quiet) {
    progress = [](const n2l::TrainRecord& r) {
      std::cerr << "step " << std::setw(6) << r.step << "  mse " << std::scientific
                << std::setprecision(4) << r.mse << std::defaultfloat << "  psnr "
                << std::fixed << std::setprecision(3) << r.psnr_db << " dB  lr "
                << std::scientific << std::setprecision(3) << r.lr << std::defaultfloat
                << '\n';
    };
  }
  const n2l::EncodeResult r = n2l::encode_image(image, opts, progress);
  n2l::write_file(output, r.stream);
  if (log_csv) {
    std::ofstream csv(*log_csv);
    if (!csv) throw n2l::ImageIoError("cannot write " + log_csv->string());
    r.train.write_csv(csv);
  }
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "image          " << image.width << "x" << image.height << "\n"
            << "setting        " << args.setting << " (" << n2l::count_params(r.config)
            << " params, flags " << r.header.flags.describe() << ")\n"
            << "seed           " << seed << "  init_seed " << args.init_seed << "\n"
            << "steps          " << args.steps << "\n"
            << "step exps      gpp " << static_cast<int>(r.header.gpp_step_exp) << "  synth "
            << static_cast<int>(r.header.synth_step_exp) << "\n"
            << "bytes          " << r.stream.size() << "\n"
            << "bpp            " << r.bpp << "\n"
            << "psnr pre-quant " << r.psnr_pre_quant_db << " dB\n"
            << "psnr post-quant " << r.psnr_post_quant_db << " dB (8-bit), "
            << r.psnr_post_quant_float_db << " dB (float)\n"
            << "encode time    " << std::setprecision(2) << r.encode_seconds << " s\n";
  if (!quiet) {
    std::cout << "mesh search    " << r.candidates.size() << " candidates, lambda "
              << std::setprecision(3) << r.lambda << "\n";
  }
  return kOk;
}

int cmd_decode(const fs::path& input, const fs::path& output,
               const std::optional<fs::path>& reference) {
  const auto bytes = n2l::read_file(input);
  const n2l::DecodedImage d = n2l::decode_stream(bytes);
  n2l::write_png(output, d.image);
  std::cout << std::fixed << std::setprecision(3) << "decoded " << d.image.width << "x"
            << d.image.height << " in " << d.decode_ms << " ms\n";
  if (reference) {
    const n2l::Image8 ref = n2l::read_image(*reference);
    std::cout << std::setprecision(4) << "psnr " << n2l::psnr8(d.image, ref) << " dB\n";
  }
  return kOk;
}

int cmd_info(const fs::path& input) {
  const auto bytes = n2l::read_file(input);
  const n2l::DecodedStream s = n2l::deserialize(bytes);
  const n2l::BitstreamHeader& h = s.header;
  const n2l::ModelConfig cfg = n2l::derive_config(h.setting_id, h.flags);
  const std::size_t total_bits = bytes.size() * 8;
  std::cout << "magic          " << std::string(h.kMagic.begin(), h.kMagic.end()) << "\n"
            << "version        " << static_cast<int>(h.kVersion) << "\n"
            << "setting        " << static_cast<int>(h.setting_id) << "\n"
            << "flags          " << h.flags.describe() << "\n"
            << "dims           " << h.width << "x" << h.height << "\n"
            << "seed           " << h.seed.value << "\n"
            << "init_seed      " << h.init_seed << "\n"
            << "gpp_step_exp   " << static_cast<int>(h.gpp_step_exp) << "\n"
            << "synth_step_exp " << static_cast<int>(h.synth_step_exp) << "\n"
            << "params         " << n2l::count_params(cfg) << " (gpp " << s.qmodel.gpp.size()
            << ", synth " << s.qmodel.synth.size() << ")\n"
            << "header_bits    " << n2l::BitstreamHeader::kSize * 8 << "\n"
            << "gpp_bits       " << s.gpp_bits << "\n"
            << "synth_bits     " << s.synth_bits << "\n"
            << "total_bits     " << total_bits << "\n"
            << "bpp            " << std::fixed << std::setprecision(6)
            << n2l::bits_per_pixel(bytes.size(), h.height, h.width) << "\n";
  return kOk;
}

int cmd_eval(const fs::path& dir, const std::string& settings, const std::string& seeds,
             const fs::path& out, std::optional<fs::path> rd_out,
             const std::optional<fs::path>& convergence_dir, const TrainArgs& args, int jobs) {
  n2l::EvalOptions opts;
  opts.settings = parse_int_list(settings, "settings");
  for (int s : opts.settings) {
    if (s < 0 || s >= n2l::kNumSettings) {
      throw n2l::ContractViolation("setting " + std::to_string(s) + " out of range");
    }
  }
  for (int s : parse_int_list(seeds, "seeds")) {
    if (s < 0 || s > 0xFFFF) throw n2l::ContractViolation("seed " + std::to_string(s) + " out of range");
    opts.seeds.push_back(static_cast<std::uint16_t>(s));
  }
  opts.train = args.train();
  opts.lambda = args.lambda;
  opts.flags = n2l::AblationFlags{args.no_gpp, args.single_scale};
  opts.jobs = jobs;
  opts.convergence_dir = convergence_dir;
  const auto records = n2l::run_eval(dir, opts, &std::cerr);

  std::ofstream csv(out);
  if (!csv) throw n2l::ImageIoError("cannot write " + out.string());
  n2l::write_eval_csv(csv, records);
  if (!rd_out) rd_out = fs::path(out).replace_extension(".rd.dat");
  std::ofstream rd(*rd_out);
  if (!rd) throw n2l::ImageIoError("cannot write " + rd_out->string());
  n2l::write_rd_data(rd, records);

  std::size_t failed = 0;
  for (const auto& r : records) failed += r.status != "ok";
  std::cout << records.size() << " runs, " << failed << " failed; wrote " << out.string()
            << " and " << rd_out->string() << "\n";

  // Seed spread per (image, setting) when sweeping more than one seed.
  if (opts.seeds.size() > 1) {
    std::map<std::pair<std::string, int>, std::pair<double, double>> spread;
    for (const auto& r : records) {
      if (r.status != "ok") continue;
      auto [it, fresh] = spread.try_emplace({r.image, r.setting}, r.psnr_db, r.psnr_db);
      if (!fresh) {
        it->second.first = std::min(it->second.first, r.psnr_db);
        it->second.second = std::max(it->second.second, r.psnr_db);
      }
    }
    std::cout << std::fixed << std::setprecision(4);
    for (const auto& [key, mm] : spread) {
      std::cout << key.first << " setting " << key.second << ": seed spread "
                << mm.second - mm.first << " dB (min " << mm.first << ", max " << mm.second
                << ")\n";
    }
  }
  return kOk;
}

int cmd_ablate(const fs::path& input, const std::string& mode, std::uint16_t seed,
               const TrainArgs& args, const std::optional<fs::path>& out) {
  const n2l::Image8 image = n2l::read_image(input);
  n2l::EncodeOptions base;
  base.setting = args.setting;
  base.seed = n2l::Seed{seed};
  base.train = args.train();
  base.lambda = args.lambda;
  const auto m = mode == "no-gpp" ? n2l::AblationMode::kNoGpp : n2l::AblationMode::kSingleScale;
  const n2l::AblationReport report = n2l::run_ablation(image, m, base);
  report.write(std::cout);
  if (out) {
    std::ofstream f(*out);
    if (!f) throw n2l::ImageIoError("cannot write " + out->string());
    report.write(f);
  }
  return kOk;
}

int cmd_dump_latent(const fs::path& input, int channel, const std::string& prefix) {
  const auto bytes = n2l::read_file(input);
  const n2l::DecodedImage d = n2l::decode_stream(bytes, /*keep_intermediates=*/true);
  if (d.latent.size() == 0) {
    throw n2l::ContractViolation("stream has no latent (no-gpp ablation)");
  }
  const int channels = d.noise.shape().c;
  if (channel < 0 || channel >= channels) {
    throw n2l::ContractViolation("channel " + std::to_string(channel) + " out of range [0, " +
                                 std::to_string(channels) + ")");
  }
  const int w = d.image.width;
  const int h = d.image.height;
  n2l::write_gray_png(prefix + "_noise.png", w, h, n2l::normalized_channel(d.noise, channel));
  n2l::write_gray_png(prefix + "_latent.png", w, h, n2l::normalized_channel(d.latent, channel));
  n2l::write_png(prefix + "_recon.png", d.image);
  std::cout << "wrote " << prefix << "_{noise,latent,recon}.png (" << w << "x" << h
            << ", channel " << channel << ")\n";
  return kOk;
}

std::vector<n2l::RdPoint> load_rd(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw n2l::ImageIoError("cannot open " + path.string());
  return n2l::read_rd_points(in);
}

int cmd_bdrate(const fs::path& anchor, const fs::path& test) {
  const double pct = n2l::bd_rate(load_rd(anchor), load_rd(test));
  std::cout << std::fixed << std::setprecision(3) << "BD-rate " << pct << " %\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"n2l: noise-to-latent neural image codec"};
  app.footer(kExitCodeHelp);
  app.require_subcommand(1);

  fs::path input, output, second;
  std::uint16_t seed = 0;
  TrainArgs targs;
  std::optional<fs::path> log_csv, reference, rd_out, conv_dir, report_out;
  bool quiet = false;
  std::string settings = "0", seeds = "0", mode = "no-gpp", prefix = "dump";
  int jobs = 1, channel = 0;

  auto* enc = app.add_subcommand("encode", "Overfit a model to an image and write a stream");
  enc->add_option("input", input, "8-bit RGB PNG or binary PPM")->required();
  enc->add_option("-o,--out", output, "Output stream")->required();
  enc->add_option("--seed", seed, "Noise seed (stored in the header)")->capture_default_str();
  enc->add_option("--log-csv", log_csv, "Write the training curve (step,mse,psnr,lr)");
  enc->add_flag("-q,--quiet", quiet, "No training progress");
  targs.attach(enc);
  targs.attach_flags(enc);

  auto* dec = app.add_subcommand("decode", "Decode a stream to PNG");
  dec->add_option("input", input, "Stream file")->required();
  dec->add_option("-o,--out", output, "Output PNG")->required();
  dec->add_option("--reference", reference, "Print PSNR against this image");

  auto* info = app.add_subcommand("info", "Print stream header and bit accounting");
  info->add_option("input", input, "Stream file")->required();

  auto* ev = app.add_subcommand("eval", "Encode+decode every image x setting x seed");
  ev->add_option("dir", input, "Directory of PNG/PPM images")->required();
  ev->add_option("--settings", settings, "Comma-separated settings (may be empty)")
      ->capture_default_str();
  ev->add_option("--seeds", seeds, "Comma-separated noise seeds")->capture_default_str();
  ev->add_option("-o,--out", output, "Results CSV")->required();
  ev->add_option("--rd", rd_out, "gnuplot RD data file (default <out>.rd.dat)");
  ev->add_option("--convergence-dir", conv_dir, "Per-run training-curve CSVs");
  ev->add_option("-j,--jobs", jobs, "Parallel encodes")->check(CLI::PositiveNumber)
      ->capture_default_str();
  targs.attach(ev, /*with_setting=*/false);
  targs.attach_flags(ev);

  auto* abl = app.add_subcommand("ablate", "Full model vs an ablated variant, equal steps");
  abl->add_option("input", input, "Image")->required();
  abl->add_option("--mode", mode, "no-gpp or single-scale")
      ->check(CLI::IsMember({"no-gpp", "single-scale"}))
      ->capture_default_str();
  abl->add_option("--seed", seed, "Noise seed")->capture_default_str();
  abl->add_option("-o,--out", report_out, "Also write the report here");
  targs.attach(abl);

  auto* dump = app.add_subcommand("dump-latent", "Write noise/latent/reconstruction PNGs");
  dump->add_option("input", input, "Stream file")->required();
  dump->add_option("-c,--channel", channel, "Latent channel")->capture_default_str();
  dump->add_option("-p,--prefix", prefix, "Output prefix")->capture_default_str();

  auto* bd = app.add_subcommand("bdrate", "BD-rate of test vs anchor RD curves, percent");
  bd->add_option("anchor", input, "Anchor RD file (gnuplot data or eval CSV)")->required();
  bd->add_option("test", second, "Test RD file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*enc) return cmd_encode(input, output, seed, targs, log_csv, quiet);
    if (*dec) return cmd_decode(input, output, reference);
    if (*info) return cmd_info(input);
    if (*ev) return cmd_eval(input, settings, seeds, output, rd_out, conv_dir, targs, jobs);
    if (*abl) return cmd_ablate(input, mode, seed, targs, report_out);
    if (*dump) return cmd_dump_latent(input, channel, prefix);
    if (*bd) return cmd_bdrate(input, second);
  } catch (const n2l::MalformedBitstream& e) {
    std::cerr << "n2l: malformed stream: " << e.what() << '\n';
    return kMalformedStream;
  } catch (const n2l::UnsupportedFormat& e) {
    std::cerr << "n2l: unsupported format: " << e.what() << '\n';
    return kUnsupportedFormat;
  } catch (const n2l::TrainingDivergence& e) {
    std::cerr << "n2l: training diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const n2l::ImageTooSmall& e) {
    std::cerr << "n2l: " << e.what() << '\n';
    return kImageTooSmall;
  } catch (const n2l::ImageIoError& e) {
    std::cerr << "n2l: " << e.what() << '\n';
    return kUnreadableImage;
  } catch (const n2l::ContractViolation& e) {
    std::cerr << "n2l: " << e.what() << '\n';
    return kBadInput;
  } catch (const n2l::ConfigError& e) {
    std::cerr << "n2l: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "n2l: internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
