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

#ifndef N2L_AUTODIFF_H_
#define N2L_AUTODIFF_H_

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "n2l/tensor.h"

namespace n2l {

class Graph;

enum class OpTag {
  kLeaf,
  kConv2d,
  kLayerNorm,
  kGelu,
  kUpsample,
  kConcat,
  kSlice,
  kAdd,
  kMul,
  kMse,
  kSigmoid,
  kGaussianScale,
};

const char* op_name(OpTag tag);

// Handle to a node of a Graph. Cheap to copy; valid until Graph::reset().
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// View handed to a node's backward closure.
class BackwardContext {
 public:
  const Tensor& input(int k) const;
  const Tensor& output() const;
  std::span<const double> output_grad() const;
  bool wants_grad(int k) const;
  // Zero-initialized on first access; closures accumulate with +=.
  std::span<double> input_grad(int k);
  // Like input_grad(), but skips the zero fill on first access: when `fresh`
  // is set the contents are unspecified and the closure must store every
  // element instead of accumulating.
  struct GradTarget {
    std::span<double> data;
    bool fresh;
  };
  GradTarget input_grad_target(int k);
  // Moves this node's output gradient into input k when that input has no
  // gradient buffer yet. Returns false and leaves everything untouched
  // otherwise. Spans from output_grad() stay valid; they now alias the
  // input's gradient.
  bool donate_output_grad(int k);
  std::vector<double>& saved(int k);

 private:
  friend class Graph;
  BackwardContext(Graph& graph, int node) : graph_(graph), node_(node) {}
  Graph& graph_;
  int node_;
};

using BackwardFn = std::function<void(BackwardContext&)>;

// Tape of tensor operations, recorded in construction order and replayed in
// exact reverse order by backward(). Intermediate buffers are pooled and
// recycled by reset(), so one Graph can be rebuilt every training step
// without touching the allocator.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf referencing an external tensor. If the tensor requires grad, its
  // grad() accumulates during backward. The tensor must outlive the graph's
  // current recording.
  Var leaf(Tensor& tensor);
  // Leaf referencing an external tensor that never receives gradient.
  Var input(const Tensor& tensor);
  // Leaf owning its tensor; never receives gradient.
  Var constant(Tensor tensor);

  // Appends an op node. Inputs must already belong to this graph.
  Var record(OpTag tag, std::span<const Var> inputs, Tensor output,
             std::vector<std::vector<double>> saved, BackwardFn backward);

  const Tensor& value(Var v) const;
  OpTag op(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable leaf that
  // requires grad. Leaf grads accumulate across calls; intermediate grads
  // are cleared first so repeated calls add exactly one gradient each.
  void backward(Var loss);

  // Drops every node, returning buffers to the pool.
  void reset();

  // Pooled zero-filled buffer of exactly n doubles.
  std::vector<double> take(std::size_t n);
  Tensor make(Shape shape);
  // As make(), but the contents are unspecified; for outputs the op overwrites.
  std::vector<double> take_uninit(std::size_t n);
  Tensor make_uninit(Shape shape);

 private:
  friend class BackwardContext;

  struct Node {
    OpTag tag = OpTag::kLeaf;
    std::vector<int> inputs;
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor* grad_sink = nullptr;  // external leaf; receives `grad` after backward()
    std::vector<double> grad;
    std::vector<std::vector<double>> saved;
    BackwardFn backward;
    bool needs_grad = false;
    bool grad_fresh = false;  // grad allocated but not yet written

    const Tensor& value() const { return external ? *external : owned; }
  };

  void give(std::vector<double>&& buffer);
  void check(Var v) const;
  std::span<double> grad_buffer(int id);

  std::vector<Node> nodes_;
  std::map<std::size_t, std::vector<std::vector<double>>> pool_;
};

// 2-D convolution, stride 1, "same" output size with edge-replicated padding.
// weight: [out, in / groups, k, k]; bias: [1, out, 1, 1]. kernel in {1, 3, 7}.
Var conv2d(Var input, Var weight, Var bias, int kernel, int groups);

// Normalizes across channels at every spatial position (eps = 1e-6), then
// applies per-channel gamma and beta, each [1, C, 1, 1].
Var layer_norm(Var input, Var gamma, Var beta);

// Exact erf form: x * Phi(x).
Var gelu(Var input);

// Half-pixel-centre bilinear resampling with edge clamping.
Var bilinear_upsample(Var input, int out_h, int out_w);

Var concat_channels(std::span<const Var> inputs);
Var slice_channels(Var input, int begin, int count);

// Elementwise, shapes must match exactly.
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var sigmoid(Var input);
// exp(clamp(x, lo, hi)); zero gradient where x lies outside [lo, hi].
Var gaussian_scale(Var input, double lo, double hi);

// Mean of squared differences, returned as a [1, 1, 1, 1] tensor.
Var mse_loss(Var a, Var b);

}  // namespace n2l

#endif  // N2L_AUTODIFF_H_
