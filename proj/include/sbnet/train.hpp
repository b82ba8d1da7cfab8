#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbnet/data.hpp"
#include "sbnet/loss.hpp"
#include "sbnet/model.hpp"

namespace sbnet {

enum class OptimizerKind { Adam, RAdam };

const char* optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& name);

struct OptimizerState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool rectify = true;
};

OptimizerState make_optimizer(const ParameterSet& params, OptimizerKind kind);

/// Adam with bias correction. With rectify set, the adaptive step is scaled by
/// the RAdam variance-rectification term once it is defined (rho_t > 5) and a
/// bias-corrected momentum step is taken before that.
void optimizer_step(OptimizerState& state, ParameterSet& params, const Gradients& grads, double lr);

struct TrainConfig {
  int epochs = 30;
  int steps_per_epoch = 8;
  std::size_t batch_size = 8;
  /// Bayer patch edge; the network sees patch/2 after space-to-depth.
  std::size_t patch_size = 64;
  double lr0 = 2e-4;
  int lr_drop_epoch = 20;
  double lr_drop_factor = 10.0;
  LossSpec loss{LossKind::L1, 100.0, 10.0, 3.0};
  OptimizerKind optimizer = OptimizerKind::RAdam;
  std::uint64_t seed = 1;

  void validate() const;
  double learning_rate(int epoch) const;
};

struct EpochRecord {
  int epoch = 0;
  std::int64_t step = 0;
  double train_loss = 0.0;
  double k_percent = 100.0;
  double val_psnr = 0.0;
  double best_val_psnr = 0.0;
};

struct TrainResult {
  Model best;
  Model last;
  int best_epoch = -1;
  std::vector<EpochRecord> epochs;
  /// Loss of every optimizer step in order.
  std::vector<double> step_losses;
};

struct TrainOptions {
  /// When set, metrics.csv and checkpoint.sbc (best validation PSNR) go here.
  std::optional<std::filesystem::path> out_dir;
  std::function<void(const EpochRecord&)> on_epoch;
};

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg, const Dataset& train_set,
                  const Dataset& val_set, const TrainOptions& options = {});

/// Column order: epoch,step,train_loss,k_percent,val_psnr,best_val_psnr.
void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochRecord> rows);

/// 10 log10(peak^2 / MSE); +infinity when MSE is zero.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

/// Single pass over a Bayer plane: phase-preserving pad to a multiple of 4,
/// space-to-depth, model, depth-to-space, crop.
Tensor denoise_plane(const Model& m, const Tensor& plane);

/// Average of the model over the given dihedral variants, each made
/// phase-preserving and mapped back to the input grid. Interior pixels
/// average all variants; border pixels average those that reach them, and
/// pixels no variant reaches take the single-pass output.
BayerImage ensemble_denoise(const Model& m, const BayerImage& noisy, std::span<const AugmentFlags> combos);
BayerImage ensemble_denoise(const Model& m, const BayerImage& noisy);

/// max |DCT error| / mean |DCT error| of the 4-channel space-to-depth tensors
/// (1 when the error is identically zero).
double frequency_balance(const Tensor& denoised_plane, const Tensor& clean_plane);

struct EvalRow {
  std::string id;
  double psnr_noisy = 0.0;
  double psnr_denoised = 0.0;
  double balance = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mean_psnr = 0.0;
  double mean_psnr_noisy = 0.0;
  double mean_balance = 0.0;
};

EvalReport evaluate(const Model& m, const Dataset& data, bool use_ensemble = false);
void write_eval_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace sbnet
