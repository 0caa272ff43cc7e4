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

// conv2d: one generic direct kernel plus two fast paths (dense 1x1 and
// depthwise 3x3) that cover every convolution the codec networks run.
// All paths use edge-replicated padding and a fixed per-element summation
// order, so results are reproducible run to run.

#include <algorithm>
#include <string>

#include <Eigen/Core>

#include "kernels.h"
#include "n2l/autodiff.h"
#include "n2l/errors.h"

namespace n2l {
namespace {

using kernels::clamp_index;

// The dense 1x1 case is a plain matrix product over channel-major planes:
// out[cout x pixels] = W[cout x cin] * in[cin x pixels].
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;

void pointwise_forward(const double* in, const double* w, const double* bias, double* out,
                       int cin, int cout, std::size_t pixels) {
  const auto n = static_cast<Eigen::Index>(pixels);
  MatrixView o(out, cout, n);
  // Seeding with the bias saves a pass: the product accumulates in place.
  for (int c = 0; c < cout; ++c) o.row(c).setConstant(bias[c]);
  o.noalias() += ConstMatrixView(w, cout, cin) * ConstMatrixView(in, cin, n);
}

// gin (+)= W^T * gout; `overwrite` stores instead of accumulating.
void pointwise_input_grad(const double* gout, const double* w, double* gin, int cin, int cout,
                          std::size_t pixels, bool overwrite) {
  const auto n = static_cast<Eigen::Index>(pixels);
  MatrixView gi(gin, cin, n);
  const auto product = ConstMatrixView(w, cout, cin).transpose() * ConstMatrixView(gout, cout, n);
  if (overwrite) {
    gi.noalias() = product;
  } else {
    gi.noalias() += product;
  }
}

void pointwise_weight_grad(const double* gout, const double* in, double* gw, int cin, int cout,
                           std::size_t pixels) {
  const auto n = static_cast<Eigen::Index>(pixels);
  MatrixView(gw, cout, cin).noalias() +=
      ConstMatrixView(gout, cout, n) * ConstMatrixView(in, cin, n).transpose();
}

// Sum of the 3x3 taps at (y, x) with clamped coordinates, row-major tap order.
inline double depthwise_tap(const double* src, const double* w, int h, int width,
                            int y, int x) {
  double acc = 0.0;
  for (int ky = 0; ky < 3; ++ky) {
    const double* row = src + static_cast<std::size_t>(clamp_index(y + ky - 1, h)) * width;
    for (int kx = 0; kx < 3; ++kx) acc += w[ky * 3 + kx] * row[clamp_index(x + kx - 1, width)];
  }
  return acc;
}

void depthwise3_forward(const double* __restrict src, const double* __restrict w,
                        double bias, double* __restrict dst, int h, int width) {
  for (int y = 0; y < h; ++y) {
    const double* r0 = src + static_cast<std::size_t>(clamp_index(y - 1, h)) * width;
    const double* r1 = src + static_cast<std::size_t>(y) * width;
    const double* r2 = src + static_cast<std::size_t>(clamp_index(y + 1, h)) * width;
    double* out = dst + static_cast<std::size_t>(y) * width;
    out[0] = bias + depthwise_tap(src, w, h, width, y, 0);
    if (width > 1) out[width - 1] = bias + depthwise_tap(src, w, h, width, y, width - 1);
    for (int x = 1; x + 1 < width; ++x) {
      double acc = 0.0;
      acc += w[0] * r0[x - 1];
      acc += w[1] * r0[x];
      acc += w[2] * r0[x + 1];
      acc += w[3] * r1[x - 1];
      acc += w[4] * r1[x];
      acc += w[5] * r1[x + 1];
      acc += w[6] * r2[x - 1];
      acc += w[7] * r2[x];
      acc += w[8] * r2[x + 1];
      out[x] = bias + acc;
    }
  }
}

// One pass per (output row, tap row): the three horizontal taps of the input
// gradient and of the weight gradient are handled together.
void depthwise3_backward(const double* __restrict src, const double* __restrict w,
                         const double* __restrict gout, double* __restrict gin,
                         double* __restrict gw, int h, int width) {
  double wacc[9] = {};
  for (int y = 0; y < h; ++y) {
    const double* g = gout + static_cast<std::size_t>(y) * width;
    for (int ky = 0; ky < 3; ++ky) {
      const std::size_t row = static_cast<std::size_t>(clamp_index(y + ky - 1, h)) * width;
      const double w0 = w[ky * 3];
      const double w1 = w[ky * 3 + 1];
      const double w2 = w[ky * 3 + 2];
      if (gin != nullptr) {
        double* t = gin + row;
        if (width == 1) {
          t[0] += (w0 + w1 + w2) * g[0];
        } else {
          // Edge columns: tap 0 of x = 0 and tap 2 of x = width - 1 clamp.
          t[0] += w0 * g[0] + w1 * g[0] + w0 * g[1];
          for (int x = 1; x + 1 < width; ++x) {
            t[x] += w2 * g[x - 1] + w1 * g[x] + w0 * g[x + 1];
          }
          t[width - 1] += w2 * g[width - 2] + w1 * g[width - 1] + w2 * g[width - 1];
        }
      }
      if (gw != nullptr) {
        const double* r = src + row;
        double a0 = g[0] * r[0];
        double a1 = g[0] * r[0];
        double a2 = g[0] * r[width > 1 ? 1 : 0];
        for (int x = 1; x + 1 < width; ++x) {
          a0 += g[x] * r[x - 1];
          a1 += g[x] * r[x];
          a2 += g[x] * r[x + 1];
        }
        if (width > 1) {
          a0 += g[width - 1] * r[width - 2];
          a1 += g[width - 1] * r[width - 1];
          a2 += g[width - 1] * r[width - 1];
        }
        wacc[ky * 3] += a0;
        wacc[ky * 3 + 1] += a1;
        wacc[ky * 3 + 2] += a2;
      }
    }
  }
  if (gw != nullptr) {
    for (int k = 0; k < 9; ++k) gw[k] += wacc[k];
  }
}

struct ConvGeometry {
  int cin, cout, h, w, k, groups;
  int in_per_group() const { return cin / groups; }
  int out_per_group() const { return cout / groups; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
};

void generic_forward(const ConvGeometry& g, const double* in, const double* w,
                     const double* bias, double* out) {
  const int r = g.k / 2;
  const int ipg = g.in_per_group();
  const int opg = g.out_per_group();
  for (int o = 0; o < g.cout; ++o) {
    const int group = o / opg;
    for (int y = 0; y < g.h; ++y) {
      for (int x = 0; x < g.w; ++x) {
        double acc = 0.0;
        for (int i = 0; i < ipg; ++i) {
          const double* src = in + (group * ipg + i) * g.plane();
          const double* wk = w + (static_cast<std::size_t>(o) * ipg + i) * g.k * g.k;
          for (int ky = 0; ky < g.k; ++ky) {
            const double* row = src + static_cast<std::size_t>(clamp_index(y + ky - r, g.h)) * g.w;
            for (int kx = 0; kx < g.k; ++kx) {
              acc += wk[ky * g.k + kx] * row[clamp_index(x + kx - r, g.w)];
            }
          }
        }
        out[o * g.plane() + static_cast<std::size_t>(y) * g.w + x] = bias[o] + acc;
      }
    }
  }
}

void generic_backward(const ConvGeometry& g, const double* in, const double* w,
                      const double* gout, double* gin, double* gw) {
  const int r = g.k / 2;
  const int ipg = g.in_per_group();
  const int opg = g.out_per_group();
  for (int o = 0; o < g.cout; ++o) {
    const int group = o / opg;
    for (int y = 0; y < g.h; ++y) {
      for (int x = 0; x < g.w; ++x) {
        const double go = gout[o * g.plane() + static_cast<std::size_t>(y) * g.w + x];
        for (int i = 0; i < ipg; ++i) {
          const std::size_t channel = (group * ipg + i) * g.plane();
          const std::size_t wbase = (static_cast<std::size_t>(o) * ipg + i) * g.k * g.k;
          for (int ky = 0; ky < g.k; ++ky) {
            const std::size_t row =
                channel + static_cast<std::size_t>(clamp_index(y + ky - r, g.h)) * g.w;
            for (int kx = 0; kx < g.k; ++kx) {
              const std::size_t idx = row + clamp_index(x + kx - r, g.w);
              if (gw != nullptr) gw[wbase + ky * g.k + kx] += go * in[idx];
              if (gin != nullptr) gin[idx] += go * w[wbase + ky * g.k + kx];
            }
          }
        }
      }
    }
  }
}

enum class ConvPath { kGeneric, kPointwise, kDepthwise3 };

ConvPath select_path(const ConvGeometry& g) {
  if (g.k == 1 && g.groups == 1) return ConvPath::kPointwise;
  if (g.k == 3 && g.groups == g.cin && g.cout == g.cin) return ConvPath::kDepthwise3;
  return ConvPath::kGeneric;
}

}  // namespace

Var conv2d(Var input, Var weight, Var bias, int kernel, int groups) {
  if (input.graph == nullptr || input.graph != weight.graph || input.graph != bias.graph) {
    throw ContractViolation("conv2d: operands belong to different graphs");
  }
  Graph& graph = *input.graph;
  const Tensor& x = graph.value(input);
  const Tensor& wt = graph.value(weight);
  const Tensor& bt = graph.value(bias);
  if (kernel != 1 && kernel != 3 && kernel != 7) {
    throw ContractViolation("conv2d: kernel must be 1, 3 or 7, got " + std::to_string(kernel));
  }
  const Shape xs = x.shape();
  const Shape ws = wt.shape();
  if (xs.n != 1) throw ContractViolation("conv2d: batch must be 1, got " + xs.str());
  if (groups < 1 || xs.c % groups != 0 || ws.n % groups != 0) {
    throw ContractViolation("conv2d: groups " + std::to_string(groups) +
                            " must divide in (" + std::to_string(xs.c) + ") and out (" +
                            std::to_string(ws.n) + ") channels");
  }
  if (ws.c != xs.c / groups || ws.h != kernel || ws.w != kernel) {
    throw ContractViolation("conv2d: weight " + ws.str() + " does not match input " +
                            xs.str() + " with kernel " + std::to_string(kernel) +
                            " and groups " + std::to_string(groups));
  }
  if (bt.shape() != Shape{1, ws.n, 1, 1}) {
    throw ContractViolation("conv2d: bias " + bt.shape().str() + " does not match " +
                            std::to_string(ws.n) + " output channels");
  }
  const ConvGeometry geo{xs.c, ws.n, xs.h, xs.w, kernel, groups};
  const ConvPath path = select_path(geo);
  Tensor out = graph.make_uninit(Shape{1, geo.cout, geo.h, geo.w});
  switch (path) {
    case ConvPath::kPointwise:
      pointwise_forward(x.data().data(), wt.data().data(), bt.data().data(),
                        out.data().data(), geo.cin, geo.cout, geo.plane());
      break;
    case ConvPath::kDepthwise3:
      for (int c = 0; c < geo.cin; ++c) {
        depthwise3_forward(x.channel(c), wt.data().data() + c * 9, bt.data()[c],
                           out.channel(c), geo.h, geo.w);
      }
      break;
    case ConvPath::kGeneric:
      generic_forward(geo, x.data().data(), wt.data().data(), bt.data().data(),
                      out.data().data());
      break;
  }
  const Var inputs[] = {input, weight, bias};
  return graph.record(
      OpTag::kConv2d, inputs, std::move(out), {}, [geo, path](BackwardContext& ctx) {
        const double* in = ctx.input(0).data().data();
        const double* w = ctx.input(1).data().data();
        const double* gout = ctx.output_grad().data();
        // Only the 1x1 path stores a full input gradient; the others scatter.
        double* gin = nullptr;
        bool gin_fresh = false;
        if (ctx.wants_grad(0)) {
          if (path == ConvPath::kPointwise) {
            auto target = ctx.input_grad_target(0);
            gin = target.data.data();
            gin_fresh = target.fresh;
          } else {
            gin = ctx.input_grad(0).data();
          }
        }
        double* gw = ctx.wants_grad(1) ? ctx.input_grad(1).data() : nullptr;
        if (ctx.wants_grad(2)) {
          auto gb = ctx.input_grad(2);
          for (int o = 0; o < geo.cout; ++o) gb[o] += kernels::sum(gout + o * geo.plane(), geo.plane());
        }
        switch (path) {
          case ConvPath::kPointwise:
            if (gin) pointwise_input_grad(gout, w, gin, geo.cin, geo.cout, geo.plane(), gin_fresh);
            if (gw) pointwise_weight_grad(gout, in, gw, geo.cin, geo.cout, geo.plane());
            break;
          case ConvPath::kDepthwise3:
            for (int c = 0; c < geo.cin; ++c) {
              const std::size_t off = c * geo.plane();
              depthwise3_backward(in + off, w + c * 9, gout + off, gin ? gin + off : nullptr,
                                  gw ? gw + c * 9 : nullptr, geo.h, geo.w);
            }
            break;
          case ConvPath::kGeneric:
            generic_backward(geo, in, w, gout, gin, gw);
            break;
        }
      });
}

}  // namespace n2l
