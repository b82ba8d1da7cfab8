#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sbnet/blocks.hpp"

namespace sbnet {

struct ModelConfig {
  BottleneckKind bottleneck = BottleneckKind::SDWT;
  std::size_t blocks = 2;
  std::size_t filters = 16;
  std::size_t in_channels = 4;
  std::size_t dense_layers = 4;
  std::uint64_t seed = 1;

  void validate() const;
  /// Dense-block growth for head, tail and SDWT sub-band blocks.
  std::size_t growth() const { return filters / 4; }
  /// Growth of the bottleneck dense block for this kind; baselines use the
  /// parity-matched value.
  std::size_t bottleneck_growth() const;
  BottleneckConfig bottleneck_config() const;
};

/// head: conv(in -> F), dense block, conv(-> F)
/// body: `blocks` bottlenecks of the configured kind
/// tail: dense block, conv(-> in)
/// output = tail + input
struct Model {
  ModelConfig config;
  ParameterSet params;
  Conv head_in;
  DenseBlock head_block;
  Conv head_out;
  std::vector<Bottleneck> body;
  DenseBlock tail_block;
  Conv tail_out;
};

/// Architecture with all parameters zero.
Model build_model(const ModelConfig& cfg);
/// Architecture with He-normal weights and zero biases drawn from cfg.seed.
Model init_params(const ModelConfig& cfg);

Var model_forward(const Binding& b, const Model& m, Var x4);
/// Inference without gradient bookkeeping.
Tensor model_forward(const Model& m, const Tensor& x4);

struct Checkpoint {
  Model model;
  int epoch = 0;
};

// Text manifest (one key=value per line, terminated by "end") followed by one
// SBT1 record per parameter in ParamId order.
void save_checkpoint(const std::filesystem::path& path, const Model& m, int epoch);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sbnet
