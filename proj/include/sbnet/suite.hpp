#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sbnet/train.hpp"
#include "sbnet/transforms.hpp"

namespace sbnet {

// Verification harnesses shared by the CLI and the acceptance suite.

struct GradCheckRow {
  std::string name;
  GradCheckReport report;
  std::size_t entries = 0;
  bool pass = false;
};

inline constexpr double kGradCheckEps = 1e-6;
inline constexpr double kGradCheckTolerance = 1e-5;
/// A row fails if more than this fraction of entries straddle a kink.
inline constexpr double kMaxKinkFraction = 0.01;

/// Central-difference checks over every differentiable op, block, the model
/// (B=1, F=8, 8x8) and both losses.
std::vector<GradCheckRow> run_gradient_suite(std::uint64_t seed = 7);
std::string format_gradient_table(const std::vector<GradCheckRow>& rows);

struct SubbandFlow {
  /// Gradient norm of each dense-block bundle, in creation order LL, LH, HL, HH.
  std::array<double, 4> bundle_grad_norm{};
  double fusion_grad_norm = 0.0;
};

/// Builds an RSDB (c=8, L=4, g=2, He init), routes bundle i to band
/// assignment[i], feeds a constant 8x8 image and backpropagates a random
/// projection of the output.
SubbandFlow subband_gradient_flow(const std::array<Band, 4>& assignment, std::uint64_t seed = 11);

struct BenchConfig {
  ModelConfig model;
  TrainConfig train;
  DatasetConfig train_data;
  DatasetConfig val_data;
  std::vector<std::uint64_t> seeds{7};
  bool ensemble_eval = true;
};

/// Desk-scale defaults: B=2, F=16, 30 epochs on 64 synthetic 64x64 pairs,
/// 16 held-out pairs, noise a=0.01, b=0.0001.
BenchConfig toy_bench_config();

struct BenchVariant {
  std::string label;
  BottleneckKind kind;
  LossKind loss;
};

/// No DWT, DWT, SDWT with L1, and SDWT with the top-k DCT loss.
std::vector<BenchVariant> bench_variants();

struct BenchRow {
  std::uint64_t seed = 0;
  std::string label;
  BottleneckKind kind = BottleneckKind::SDWT;
  LossKind loss = LossKind::L1;
  std::size_t model_params = 0;
  std::size_t bottleneck_params = 0;
  double noisy_psnr = 0.0;
  double val_psnr = 0.0;
  double balance = 0.0;
  int best_epoch = -1;
};

/// Per seed, trains every variant from the same seed and data, evaluates the
/// best-validation model on the held-out set.
std::vector<BenchRow> run_bench(const BenchConfig& cfg,
                                const std::function<void(const BenchRow&)>& on_row = nullptr);
std::string format_bench_table(const std::vector<BenchRow>& rows);

/// Datasets for one seed (disjoint train/validation seeds).
Dataset bench_train_set(const BenchConfig& cfg, std::uint64_t seed);
Dataset bench_val_set(const BenchConfig& cfg, std::uint64_t seed);

}  // namespace sbnet
