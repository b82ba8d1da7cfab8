#pragma once

#include <string>
#include <vector>

#include "sbnet/autodiff.hpp"
#include "sbnet/tensor.hpp"

namespace sbnet {

enum class LossKind { L1, TopKDCT };

const char* loss_name(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

/// Training objective. k fields are percentages and only matter for TopKDCT.
struct LossSpec {
  LossKind kind = LossKind::L1;
  double k_start = 100.0;
  double k_min = 10.0;
  double k_decay_per_epoch = 1.0;

  /// Requires 0 < k_min <= k_start <= 100 and a non-negative decay.
  void validate() const;
};

/// max(k_min, k_start - k_decay_per_epoch * epoch).
double k_schedule(int epoch, const LossSpec& spec);

/// Mean absolute error over all elements.
double l1_loss(const Tensor& pred, const Tensor& gt);
Var l1_loss(Tape& t, Var pred, Var gt);

/// Number of coefficients kept out of m_total at k percent: ceil(k/100 * m_total),
/// at least 1.
std::size_t topk_count(std::size_t m_total, double k_percent);

/// Indices of the topk_count(errors.size(), k) largest errors, ordered by
/// descending error with ties broken by ascending index.
std::vector<std::size_t> topk_select(std::span<const double> errors, double k_percent);

/// |DCT(gt) - DCT(pred)| for sample n, flattened over (c, h, w).
std::vector<double> dct_error(const Tensor& pred, const Tensor& gt, std::size_t n);

/// Per sample: mean of the top k% entries of |DCT(gt) - DCT(pred)| taken over
/// all channels and coefficients; the batch value is the mean over samples.
/// The selected set is held constant when differentiating.
double topk_dct_loss(const Tensor& pred, const Tensor& gt, double k_percent);
Var topk_dct_loss(Tape& t, Var pred, Var gt, double k_percent);

/// Loss for the given epoch (k taken from k_schedule for TopKDCT).
Var training_loss(Tape& t, Var pred, Var gt, const LossSpec& spec, int epoch);

}  // namespace sbnet
