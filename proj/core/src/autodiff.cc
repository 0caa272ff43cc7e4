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

#include "n2l/autodiff.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kernels.h"
#include "n2l/errors.h"

namespace n2l {

const char* op_name(OpTag tag) {
  switch (tag) {
    case OpTag::kLeaf: return "leaf";
    case OpTag::kConv2d: return "conv2d";
    case OpTag::kLayerNorm: return "layer_norm";
    case OpTag::kGelu: return "gelu";
    case OpTag::kUpsample: return "bilinear_upsample";
    case OpTag::kConcat: return "concat_channels";
    case OpTag::kSlice: return "slice_channels";
    case OpTag::kAdd: return "add";
    case OpTag::kMul: return "mul";
    case OpTag::kMse: return "mse_loss";
    case OpTag::kSigmoid: return "sigmoid";
    case OpTag::kGaussianScale: return "gaussian_scale";
  }
  return "?";
}

const Tensor& Var::value() const {
  if (graph == nullptr) throw ContractViolation("use of an unbound Var");
  return graph->value(*this);
}

// --- BackwardContext -------------------------------------------------------

const Tensor& BackwardContext::input(int k) const {
  return graph_.nodes_[graph_.nodes_[node_].inputs[k]].value();
}

const Tensor& BackwardContext::output() const {
  return graph_.nodes_[node_].value();
}

std::span<const double> BackwardContext::output_grad() const {
  return graph_.nodes_[node_].grad;
}

bool BackwardContext::wants_grad(int k) const {
  return graph_.nodes_[graph_.nodes_[node_].inputs[k]].needs_grad;
}

std::span<double> BackwardContext::input_grad(int k) {
  const int id = graph_.nodes_[node_].inputs[k];
  std::span<double> grad = graph_.grad_buffer(id);
  Graph::Node& node = graph_.nodes_[id];
  if (node.grad_fresh) {
    std::fill(grad.begin(), grad.end(), 0.0);
    node.grad_fresh = false;
  }
  return grad;
}

bool BackwardContext::donate_output_grad(int k) {
  Graph::Node& self = graph_.nodes_[node_];
  Graph::Node& in = graph_.nodes_[self.inputs[k]];
  if (!in.grad.empty() || in.value().size() != self.grad.size()) {
    return false;
  }
  in.grad = std::move(self.grad);
  in.grad_fresh = false;
  self.grad.clear();
  return true;
}

BackwardContext::GradTarget BackwardContext::input_grad_target(int k) {
  const int id = graph_.nodes_[node_].inputs[k];
  std::span<double> grad = graph_.grad_buffer(id);
  Graph::Node& node = graph_.nodes_[id];
  const bool fresh = node.grad_fresh;
  node.grad_fresh = false;
  return GradTarget{grad, fresh};
}

std::vector<double>& BackwardContext::saved(int k) {
  return graph_.nodes_[node_].saved[k];
}

// --- Graph -----------------------------------------------------------------

Var Graph::leaf(Tensor& tensor) {
  Node node;
  node.external = &tensor;
  node.needs_grad = tensor.requires_grad();
  node.grad_sink = node.needs_grad ? &tensor : nullptr;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::input(const Tensor& tensor) {
  Node node;
  node.external = &tensor;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(Tensor tensor) {
  Node node;
  node.owned = std::move(tensor);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::record(OpTag tag, std::span<const Var> inputs, Tensor output,
                  std::vector<std::vector<double>> saved, BackwardFn backward) {
  Node node;
  node.tag = tag;
  node.owned = std::move(output);
  for (const Var& v : inputs) {
    check(v);
    node.inputs.push_back(v.id);
    node.needs_grad = node.needs_grad || nodes_[v.id].needs_grad;
  }
  if (node.needs_grad) {
    node.saved = std::move(saved);
    node.backward = std::move(backward);
  } else {
    for (auto& buffer : saved) give(std::move(buffer));
  }
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::check(Var v) const {
  if (v.graph != this || v.id < 0 ||
      static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ContractViolation("Var does not belong to this graph");
  }
}

const Tensor& Graph::value(Var v) const {
  check(v);
  return nodes_[v.id].value();
}

OpTag Graph::op(Var v) const {
  check(v);
  return nodes_[v.id].tag;
}

bool Graph::requires_grad(Var v) const {
  check(v);
  return nodes_[v.id].needs_grad;
}

std::span<double> Graph::grad_buffer(int id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) {
    node.grad = take_uninit(node.value().size());
    node.grad_fresh = true;
  }
  return node.grad;
}

void Graph::backward(Var loss) {
  check(loss);
  if (nodes_[loss.id].value().size() != 1) {
    throw ContractViolation("backward() needs a scalar loss, got shape " +
                            nodes_[loss.id].value().shape().str());
  }
  for (Node& node : nodes_) {
    if (!node.grad.empty()) give(std::move(node.grad));
    node.grad.clear();
    node.grad_fresh = false;
  }
  if (!nodes_[loss.id].needs_grad) return;
  std::span<double> seed = grad_buffer(loss.id);
  if (nodes_[loss.id].grad_fresh) seed[0] = 0.0;
  nodes_[loss.id].grad_fresh = false;
  seed[0] += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.needs_grad || !node.backward || node.grad.empty()) continue;
    BackwardContext ctx(*this, id);
    node.backward(ctx);
  }
  // Leaf gradients are built up in the node and added to the tensor once, so
  // this call's contribution does not depend on what the tensor already held.
  for (Node& node : nodes_) {
    if (node.grad_sink == nullptr || node.grad.empty() || node.grad_fresh) continue;
    std::span<double> sink = node.grad_sink->grad();
    for (std::size_t i = 0; i < sink.size(); ++i) sink[i] += node.grad[i];
  }
}

void Graph::reset() {
  for (Node& node : nodes_) {
    if (node.external == nullptr) give(node.owned.release());
    if (!node.grad.empty()) give(std::move(node.grad));
    for (auto& buffer : node.saved) give(std::move(buffer));
  }
  nodes_.clear();
}

std::vector<double> Graph::take_uninit(std::size_t n) {
  auto it = pool_.find(n);
  if (it != pool_.end() && !it->second.empty()) {
    std::vector<double> buffer = std::move(it->second.back());
    it->second.pop_back();
    return buffer;
  }
  return std::vector<double>(n, 0.0);
}

std::vector<double> Graph::take(std::size_t n) {
  std::vector<double> buffer = take_uninit(n);
  std::fill(buffer.begin(), buffer.end(), 0.0);
  return buffer;
}

Tensor Graph::make(Shape shape) { return Tensor(shape, take(shape.numel())); }

Tensor Graph::make_uninit(Shape shape) { return Tensor(shape, take_uninit(shape.numel())); }

void Graph::give(std::vector<double>&& buffer) {
  if (buffer.empty()) return;
  const std::size_t n = buffer.size();
  pool_[n].push_back(std::move(buffer));
}

// --- Elementwise ops ---------------------------------------------------------

namespace {

Graph& common_graph(std::initializer_list<Var> vars) {
  Graph* graph = vars.begin()->graph;
  for (const Var& v : vars) {
    if (v.graph == nullptr || v.graph != graph) {
      throw ContractViolation("operands belong to different graphs");
    }
  }
  return *graph;
}

// Stores term(i) into a fresh gradient buffer or adds it to an existing one.
template <typename Term>
void emit_grad(BackwardContext& ctx, int k, std::size_t n, Term&& term) {
  auto [grad, fresh] = ctx.input_grad_target(k);
  if (fresh) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = term(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) grad[i] += term(i);
  }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " +
                            a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace

Var add(Var a, Var b) {
  Graph& g = common_graph({a, b});
  const Tensor& ta = g.value(a);
  const Tensor& tb = g.value(b);
  require_same_shape("add", ta, tb);
  Tensor out = g.make_uninit(ta.shape());
  auto o = out.data();
  auto x = ta.data();
  auto y = tb.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  const Var inputs[] = {a, b};
  return g.record(OpTag::kAdd, inputs, std::move(out), {},
                  [](BackwardContext& ctx) {
                    auto go = ctx.output_grad();
                    // The last input can usually take the buffer outright.
                    for (int k = 0; k < 2; ++k) {
                      if (!ctx.wants_grad(k)) continue;
                      const bool last = k == 1 || !ctx.wants_grad(1);
                      if (last && ctx.donate_output_grad(k)) continue;
                      emit_grad(ctx, k, go.size(), [&](std::size_t i) { return go[i]; });
                    }
                  });
}

Var mul(Var a, Var b) {
  Graph& g = common_graph({a, b});
  const Tensor& ta = g.value(a);
  const Tensor& tb = g.value(b);
  require_same_shape("mul", ta, tb);
  Tensor out = g.make_uninit(ta.shape());
  auto o = out.data();
  auto x = ta.data();
  auto y = tb.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  const Var inputs[] = {a, b};
  return g.record(OpTag::kMul, inputs, std::move(out), {},
                  [](BackwardContext& ctx) {
                    auto go = ctx.output_grad();
                    for (int k = 0; k < 2; ++k) {
                      if (!ctx.wants_grad(k)) continue;
                      auto other = ctx.input(1 - k).data();
                      emit_grad(ctx, k, go.size(),
                                [&](std::size_t i) { return go[i] * other[i]; });
                    }
                  });
}

Var sigmoid(Var input) {
  Graph& g = *input.graph;
  const Tensor& t = g.value(input);
  Tensor out = g.make_uninit(t.shape());
  auto o = out.data();
  auto x = t.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = -x[i];
  kernels::exp(o.data(), o.data(), o.size());
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = 1.0 / (1.0 + o[i]);
  const Var inputs[] = {input};
  return g.record(OpTag::kSigmoid, inputs, std::move(out), {},
                  [](BackwardContext& ctx) {
                    auto go = ctx.output_grad();
                    auto y = ctx.output().data();
                    emit_grad(ctx, 0, go.size(),
                              [&](std::size_t i) { return go[i] * y[i] * (1.0 - y[i]); });
                  });
}

Var gaussian_scale(Var input, double lo, double hi) {
  if (!(lo <= hi)) throw ContractViolation("gaussian_scale: lo > hi");
  Graph& g = *input.graph;
  const Tensor& t = g.value(input);
  Tensor out = g.make_uninit(t.shape());
  auto o = out.data();
  auto x = t.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(x[i], lo, hi);
  kernels::exp(o.data(), o.data(), o.size());
  const Var inputs[] = {input};
  return g.record(OpTag::kGaussianScale, inputs, std::move(out), {},
                  [lo, hi](BackwardContext& ctx) {
                    auto go = ctx.output_grad();
                    auto x = ctx.input(0).data();
                    auto y = ctx.output().data();
                    emit_grad(ctx, 0, go.size(), [&](std::size_t i) {
                      return x[i] >= lo && x[i] <= hi ? go[i] * y[i] : 0.0;
                    });
                  });
}

Var gelu(Var input) {
  Graph& g = *input.graph;
  const Tensor& t = g.value(input);
  const bool keep = g.requires_grad(input);
  Tensor out = g.make_uninit(t.shape());
  std::vector<std::vector<double>> saved;
  if (keep) saved.push_back(g.take_uninit(t.size()));
  auto o = out.data();
  auto x = t.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double cdf = 0.5 * (1.0 + std::erf(x[i] * std::numbers::sqrt2 * 0.5));
    o[i] = x[i] * cdf;
    if (keep) saved[0][i] = cdf;
  }
  const Var inputs[] = {input};
  return g.record(OpTag::kGelu, inputs, std::move(out), std::move(saved),
                  [](BackwardContext& ctx) {
                    constexpr double kInvSqrt2Pi =
                        0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
                    auto go = ctx.output_grad();
                    auto x = ctx.input(0).data();
                    const auto& cdf = ctx.saved(0);
                    auto [gi, fresh] = ctx.input_grad_target(0);
                    constexpr std::size_t kChunk = 4096;
                    double pdf[kChunk];
                    for (std::size_t i0 = 0; i0 < go.size(); i0 += kChunk) {
                      const std::size_t n = std::min(kChunk, go.size() - i0);
                      for (std::size_t i = 0; i < n; ++i) pdf[i] = -0.5 * x[i0 + i] * x[i0 + i];
                      kernels::exp(pdf, pdf, n);
                      for (std::size_t i = 0; i < n; ++i) {
                        const std::size_t k = i0 + i;
                        const double d = go[k] * (cdf[k] + x[k] * (kInvSqrt2Pi * pdf[i]));
                        gi[k] = fresh ? d : gi[k] + d;
                      }
                    }
                  });
}

Var mse_loss(Var a, Var b) {
  Graph& g = common_graph({a, b});
  const Tensor& ta = g.value(a);
  const Tensor& tb = g.value(b);
  require_same_shape("mse_loss", ta, tb);
  if (ta.size() == 0) throw ContractViolation("mse_loss: empty tensors");
  auto x = ta.data();
  auto y = tb.data();
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    total += d * d;
  }
  Tensor out = g.make(Shape{1, 1, 1, 1});
  out.data()[0] = total / static_cast<double>(x.size());
  const Var inputs[] = {a, b};
  return g.record(OpTag::kMse, inputs, std::move(out), {},
                  [](BackwardContext& ctx) {
                    auto x = ctx.input(0).data();
                    auto y = ctx.input(1).data();
                    const double scale =
                        2.0 * ctx.output_grad()[0] / static_cast<double>(x.size());
                    if (ctx.wants_grad(0)) {
                      emit_grad(ctx, 0, x.size(),
                                [&](std::size_t i) { return scale * (x[i] - y[i]); });
                    }
                    if (ctx.wants_grad(1)) {
                      emit_grad(ctx, 1, x.size(),
                                [&](std::size_t i) { return -(scale * (x[i] - y[i])); });
                    }
                  });
}

// --- Layer norm ---------------------------------------------------------------

namespace {
constexpr double kLayerNormEps = 1e-6;
}

Var layer_norm(Var input, Var gamma, Var beta) {
  Graph& g = common_graph({input, gamma, beta});
  const Tensor& x = g.value(input);
  const Tensor& tg = g.value(gamma);
  const Tensor& tb = g.value(beta);
  const Shape s = x.shape();
  const Shape affine{1, s.c, 1, 1};
  if (tg.shape() != affine || tb.shape() != affine) {
    throw ContractViolation("layer_norm: gamma/beta must be " + affine.str() +
                            ", got " + tg.shape().str() + " / " + tb.shape().str());
  }
  const std::size_t plane = s.plane();
  std::vector<double> mean = g.take(plane);
  std::vector<double> rstd = g.take(plane);
  for (int c = 0; c < s.c; ++c) {
    const double* xc = x.channel(c);
    for (std::size_t p = 0; p < plane; ++p) mean[p] += xc[p];
  }
  const double inv_c = 1.0 / s.c;
  for (std::size_t p = 0; p < plane; ++p) mean[p] *= inv_c;
  for (int c = 0; c < s.c; ++c) {
    const double* xc = x.channel(c);
    for (std::size_t p = 0; p < plane; ++p) {
      const double d = xc[p] - mean[p];
      rstd[p] += d * d;
    }
  }
  for (std::size_t p = 0; p < plane; ++p) {
    rstd[p] = 1.0 / std::sqrt(rstd[p] * inv_c + kLayerNormEps);
  }
  Tensor out = g.make_uninit(s);
  for (int c = 0; c < s.c; ++c) {
    const double* xc = x.channel(c);
    double* oc = out.channel(c);
    const double gc = tg.data()[c];
    const double bc = tb.data()[c];
    for (std::size_t p = 0; p < plane; ++p) {
      oc[p] = (xc[p] - mean[p]) * rstd[p] * gc + bc;
    }
  }
  std::vector<std::vector<double>> saved;
  saved.push_back(std::move(mean));
  saved.push_back(std::move(rstd));
  const Var inputs[] = {input, gamma, beta};
  return g.record(
      OpTag::kLayerNorm, inputs, std::move(out), std::move(saved),
      [](BackwardContext& ctx) {
        const Tensor& x = ctx.input(0);
        const Shape s = x.shape();
        const std::size_t plane = s.plane();
        const auto& mean = ctx.saved(0);
        const auto& rstd = ctx.saved(1);
        auto go = ctx.output_grad();
        auto gamma = ctx.input(1).data();
        std::vector<double> xhat(plane);
        if (ctx.wants_grad(1) || ctx.wants_grad(2)) {
          for (int c = 0; c < s.c; ++c) {
            const double* xc = x.channel(c);
            const double* gc = go.data() + c * plane;
            for (std::size_t p = 0; p < plane; ++p) xhat[p] = (xc[p] - mean[p]) * rstd[p];
            if (ctx.wants_grad(1)) ctx.input_grad(1)[c] += kernels::dot(gc, xhat.data(), plane);
            if (ctx.wants_grad(2)) ctx.input_grad(2)[c] += kernels::sum(gc, plane);
          }
        }
        if (!ctx.wants_grad(0)) return;
        std::vector<double> sum_g(plane, 0.0);
        std::vector<double> sum_gx(plane, 0.0);
        for (int c = 0; c < s.c; ++c) {
          const double* xc = x.channel(c);
          const double* gc = go.data() + c * plane;
          for (std::size_t p = 0; p < plane; ++p) {
            const double gh = gc[p] * gamma[c];
            sum_g[p] += gh;
            sum_gx[p] += gh * (xc[p] - mean[p]) * rstd[p];
          }
        }
        const double inv_c = 1.0 / s.c;
        auto [gx, fresh] = ctx.input_grad_target(0);
        for (int c = 0; c < s.c; ++c) {
          const double* xc = x.channel(c);
          const double* gc = go.data() + c * plane;
          double* dc = gx.data() + c * plane;
          for (std::size_t p = 0; p < plane; ++p) {
            const double xh = (xc[p] - mean[p]) * rstd[p];
            const double gh = gc[p] * gamma[c];
            const double d = rstd[p] * (gh - sum_g[p] * inv_c - xh * sum_gx[p] * inv_c);
            dc[p] = fresh ? d : dc[p] + d;
          }
        }
      });
}

// --- Resampling and channel plumbing -------------------------------------

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double src = (d + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const int hi = std::min(lo + 1, in - 1);
    taps[d] = Tap{lo, hi, src - lo};
  }
  return taps;
}

}  // namespace

Var bilinear_upsample(Var input, int out_h, int out_w) {
  Graph& g = *input.graph;
  const Tensor& x = g.value(input);
  const Shape s = x.shape();
  if (out_h <= 0 || out_w <= 0) {
    throw ContractViolation("bilinear_upsample: zero-size output");
  }
  if (out_h < s.h || out_w < s.w) {
    throw ContractViolation("bilinear_upsample: output smaller than input");
  }
  const auto rows = bilinear_taps(s.h, out_h);
  const auto cols = bilinear_taps(s.w, out_w);
  Tensor out = g.make_uninit(Shape{1, s.c, out_h, out_w});
  for (int c = 0; c < s.c; ++c) {
    const double* src = x.channel(c);
    double* dst = out.channel(c);
    for (int y = 0; y < out_h; ++y) {
      const double* r0 = src + static_cast<std::size_t>(rows[y].lo) * s.w;
      const double* r1 = src + static_cast<std::size_t>(rows[y].hi) * s.w;
      const double fy = rows[y].frac;
      for (int xo = 0; xo < out_w; ++xo) {
        const Tap& t = cols[xo];
        const double top = (1.0 - t.frac) * r0[t.lo] + t.frac * r0[t.hi];
        const double bot = (1.0 - t.frac) * r1[t.lo] + t.frac * r1[t.hi];
        dst[static_cast<std::size_t>(y) * out_w + xo] = (1.0 - fy) * top + fy * bot;
      }
    }
  }
  const Var inputs[] = {input};
  return g.record(OpTag::kUpsample, inputs, std::move(out), {},
                  [rows, cols](BackwardContext& ctx) {
                    const Shape in = ctx.input(0).shape();
                    const Shape os = ctx.output().shape();
                    auto go = ctx.output_grad();
                    auto gi = ctx.input_grad(0);
                    for (int c = 0; c < in.c; ++c) {
                      const double* gc = go.data() + c * os.plane();
                      double* dc = gi.data() + c * in.plane();
                      for (int y = 0; y < os.h; ++y) {
                        double* r0 = dc + static_cast<std::size_t>(rows[y].lo) * in.w;
                        double* r1 = dc + static_cast<std::size_t>(rows[y].hi) * in.w;
                        const double fy = rows[y].frac;
                        for (int xo = 0; xo < os.w; ++xo) {
                          const Tap& t = cols[xo];
                          const double v = gc[static_cast<std::size_t>(y) * os.w + xo];
                          const double top = (1.0 - fy) * v;
                          const double bot = fy * v;
                          r0[t.lo] += (1.0 - t.frac) * top;
                          r0[t.hi] += t.frac * top;
                          r1[t.lo] += (1.0 - t.frac) * bot;
                          r1[t.hi] += t.frac * bot;
                        }
                      }
                    }
                  });
}

Var concat_channels(std::span<const Var> inputs) {
  if (inputs.empty()) throw ContractViolation("concat_channels: no inputs");
  Graph& g = *inputs[0].graph;
  const Shape first = g.value(inputs[0]).shape();
  int channels = 0;
  for (const Var& v : inputs) {
    if (v.graph != &g) throw ContractViolation("operands belong to different graphs");
    const Shape s = g.value(v).shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ContractViolation("concat_channels: spatial mismatch " + first.str() +
                              " vs " + s.str());
    }
    channels += s.c;
  }
  Tensor out = g.make_uninit(Shape{first.n, channels, first.h, first.w});
  std::size_t offset = 0;
  for (const Var& v : inputs) {
    auto src = g.value(v).data();
    std::copy(src.begin(), src.end(), out.data().begin() + offset);
    offset += src.size();
  }
  return g.record(OpTag::kConcat, inputs, std::move(out), {},
                  [n = static_cast<int>(inputs.size())](BackwardContext& ctx) {
                    auto go = ctx.output_grad();
                    std::size_t offset = 0;
                    for (int k = 0; k < n; ++k) {
                      const std::size_t len = ctx.input(k).size();
                      if (ctx.wants_grad(k)) {
                        emit_grad(ctx, k, len, [&](std::size_t i) { return go[offset + i]; });
                      }
                      offset += len;
                    }
                  });
}

Var slice_channels(Var input, int begin, int count) {
  Graph& g = *input.graph;
  const Tensor& x = g.value(input);
  const Shape s = x.shape();
  if (begin < 0 || count < 0 || begin + count > s.c) {
    throw ContractViolation("slice_channels: range [" + std::to_string(begin) + ", " +
                            std::to_string(begin + count) + ") outside " + s.str());
  }
  Tensor out = g.make_uninit(Shape{1, count, s.h, s.w});
  const std::size_t offset = begin * s.plane();
  std::copy_n(x.data().begin() + offset, out.size(), out.data().begin());
  const Var inputs[] = {input};
  return g.record(OpTag::kSlice, inputs, std::move(out), {},
                  [offset](BackwardContext& ctx) {
                    auto go = ctx.output_grad();
                    auto [gi, fresh] = ctx.input_grad_target(0);
                    if (fresh) {
                      std::fill(gi.begin(), gi.begin() + offset, 0.0);
                      std::fill(gi.begin() + offset + go.size(), gi.end(), 0.0);
                      std::copy(go.begin(), go.end(), gi.begin() + offset);
                    } else {
                      for (std::size_t i = 0; i < go.size(); ++i) gi[offset + i] += go[i];
                    }
                  });
}

}  // namespace n2l
