#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sbnet/autodiff.hpp"
#include "sbnet/tensor.hpp"

namespace sbnet {

/// Ordered, named storage for every trainable tensor of a network. The
/// insertion order is the enumeration order used by checkpoints and the
/// optimizer.
class ParameterSet {
 public:
  /// fan_in > 0 marks a weight for He initialization; 0 marks a bias.
  ParamId add(std::string name, Shape shape, std::size_t fan_in);

  std::size_t size() const { return values_.size(); }
  const std::string& name(ParamId id) const { return names_.at(id); }
  std::size_t fan_in(ParamId id) const { return fan_in_.at(id); }
  Tensor& operator[](ParamId id) { return values_.at(id); }
  const Tensor& operator[](ParamId id) const { return values_.at(id); }
  std::span<Tensor> values() { return values_; }
  std::span<const Tensor> values() const { return values_; }

  /// Total trainable scalars.
  std::size_t scalar_count() const;

  /// Weights ~ N(0, 2 / fan_in), biases zero. Draw order follows ParamId.
  void init_he_normal(std::uint64_t seed);
  void zero();

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<std::size_t> fan_in_;
};

/// Parameters of a ParameterSet registered on one tape.
struct Binding {
  Tape& tape;
  std::vector<Var> vars;

  Var operator[](ParamId id) const { return vars.at(id); }
};

Binding bind(Tape& tape, const ParameterSet& params);
/// Registers parameters as constants: forward only, no gradient bookkeeping.
Binding bind_frozen(Tape& tape, const ParameterSet& params);

/// Same-padded, stride-1 convolution with odd kernel.
struct Conv {
  ParamId weight = 0;
  ParamId bias = 0;
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::size_t kernel = 3;
};

Conv make_conv(ParameterSet& ps, const std::string& prefix, std::size_t c_in, std::size_t c_out,
               std::size_t kernel);
Var conv_forward(const Binding& b, const Conv& conv, Var x);
std::size_t conv_param_count(std::size_t c_in, std::size_t c_out, std::size_t kernel);

/// Densely connected 3x3 convs with ReLU; layer i sees c_in + i*growth
/// channels. The output is the concatenation of the input and every layer's
/// features; there is no fusion conv and no residual inside.
struct DenseBlock {
  std::size_t c_in = 0;
  std::size_t growth = 0;
  std::vector<Conv> layers;

  std::size_t c_out() const { return c_in + layers.size() * growth; }
};

DenseBlock make_dense_block(ParameterSet& ps, const std::string& prefix, std::size_t c_in,
                            std::size_t layers, std::size_t growth);
Var dense_block_forward(const Binding& b, const DenseBlock& block, Var x);
std::size_t dense_block_param_count(std::size_t c_in, std::size_t layers, std::size_t growth);

enum class BottleneckKind { SDWT, ConcatDWT, NoDWT };

const char* bottleneck_name(BottleneckKind kind);
BottleneckKind parse_bottleneck_kind(const std::string& name);

struct BottleneckConfig {
  BottleneckKind kind = BottleneckKind::SDWT;
  std::size_t channels = 16;
  std::size_t layers = 4;
  /// Dense-block growth: per sub-band for SDWT, for the single block otherwise.
  std::size_t growth = 4;
};

struct Bottleneck {
  BottleneckConfig config;
  /// SDWT: one block per sub-band, indexed by Band, no sharing.
  std::array<DenseBlock, 4> bands;
  /// ConcatDWT / NoDWT: one block over the 4*c stacked channels.
  DenseBlock block;
  /// ConcatDWT / NoDWT: 1x1 conv back to exactly 4*c channels.
  Conv squeeze;
  /// 3x3 conv back to c channels, applied in the original domain.
  Conv fusion;
};

Bottleneck make_bottleneck(ParameterSet& ps, const std::string& prefix, const BottleneckConfig& cfg);

/// DWT -> per-band dense blocks -> IDWT -> fusion conv -> + x.
Var rsdb_forward(const Binding& b, const Bottleneck& p, Var x);
/// DWT -> concat(LL, LH, HL, HH) -> dense block -> 1x1 -> split -> IDWT -> fusion -> + x.
Var concat_dwt_block_forward(const Binding& b, const Bottleneck& p, Var x);
/// s2d -> dense block -> 1x1 -> d2s -> fusion -> + x.
Var s2d_block_forward(const Binding& b, const Bottleneck& p, Var x);
/// Dispatches on p.config.kind.
Var bottleneck_forward(const Binding& b, const Bottleneck& p, Var x);

/// Exact scalar count of the block's tensors in ps.
std::size_t param_count(const Bottleneck& p, const ParameterSet& ps);
/// Closed-form count for a configuration, equal to param_count of the built block.
std::size_t bottleneck_param_count(const BottleneckConfig& cfg);

/// Growth for a ConcatDWT / NoDWT block whose parameter count is closest to an
/// SDWT block with the given channels, layers and per-band growth.
std::size_t parity_growth(std::size_t channels, std::size_t layers, std::size_t sdwt_growth);

}  // namespace sbnet
