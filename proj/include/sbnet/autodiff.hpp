#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "sbnet/tensor.hpp"

namespace sbnet {

/// Handle to a node on a Tape.
struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;
  bool valid() const { return id != kInvalid; }
};

using ParamId = std::size_t;
using Gradients = std::map<ParamId, Tensor>;

/// Append-only record of a computation. Node ids are assigned in creation
/// order and every input id precedes its consumer, so reverse id order is a
/// valid topological order for backward().
///
/// Ops with branches (relu masks, abs signs, top-k selections) feed the
/// branch signature; two evaluations with equal signatures ran on the same
/// linear piece of the function, which the finite-difference harness uses to
/// discard probes that straddle a kink.
class Tape {
 public:
  /// Receives the gradient of the node's output and pushes contributions to
  /// its inputs via Tape::accumulate.
  using Backward = std::function<void(Tape&, const Tensor& grad_out)>;

  explicit Tape(bool record_backward = true) : record_(record_backward) {}

  Var constant(Tensor value);
  Var parameter(Tensor value, ParamId id);
  Var push(Tensor value, std::span<const Var> inputs, Backward backward);

  const Tensor& value(Var v) const;
  bool needs_grad(Var v) const;
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds g into the gradient slot of v (no-op when v needs no gradient).
  void accumulate(Var v, const Tensor& g);

  /// Reverse sweep from a scalar loss. Every registered parameter receives an
  /// entry; parameters not on a path to the loss get zeros.
  Gradients backward(Var loss);

  void note_branch(bool taken);
  void note_token(std::uint64_t token);
  std::uint64_t branch_signature() const { return signature_; }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    Backward backward;
    bool needs_grad = false;
    bool is_param = false;
    ParamId param = 0;
  };

  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool record_;
  std::uint64_t signature_ = 1469598103934665603ULL;
};

// Differentiable primitives.

Var add(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
/// Sum of all elements, shape (1,1,1,1).
Var sum(Tape& t, Var a);
/// sum(a * weights) with a constant weight tensor; a smooth scalar probe.
Var dot_constant(Tape& t, Var a, const Tensor& weights);
Var relu(Tape& t, Var x);
Var concat_channels(Tape& t, std::span<const Var> parts);
std::vector<Var> split_channels(Tape& t, Var x, std::span<const std::size_t> sizes);

/// Cross-correlation. weight is (c_out, c_in, kh, kw), bias is (1, c_out, 1, 1).
/// Output spatial size (h + 2 pad - k) / stride + 1 must divide exactly.
Var conv2d(Tape& t, Var x, Var weight, Var bias, std::size_t stride, std::size_t pad);

/// Non-recording tensor-level convolution with the same semantics.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad);

/// Builds the scalar function under test on a fresh tape from parameter Vars.
using GraphFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Entries whose +eps / -eps probes landed on different linear pieces.
  std::size_t skipped_kinks = 0;
};

/// Compares backward() against central differences for every entry of every
/// parameter. Error per entry is |analytic - numeric| / max(1, |numeric|).
GradCheckReport finite_diff_check(const GraphFn& f, std::span<const Tensor> params, double eps = 1e-6);

}  // namespace sbnet
