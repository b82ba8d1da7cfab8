#include "sbnet/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sbnet/transforms.hpp"

namespace sbnet {

const char* loss_name(LossKind kind) { return kind == LossKind::L1 ? "l1" : "topk"; }

LossKind parse_loss_kind(const std::string& name) {
  if (name == "l1") return LossKind::L1;
  if (name == "topk") return LossKind::TopKDCT;
  throw ShapeError("unknown loss kind '" + name + "' (expected l1 or topk)");
}

void LossSpec::validate() const {
  if (!(k_min > 0.0 && k_min <= k_start && k_start <= 100.0)) {
    throw ShapeError("loss spec requires 0 < k_min <= k_start <= 100");
  }
  if (!(k_decay_per_epoch >= 0.0)) throw ShapeError("loss spec requires k_decay_per_epoch >= 0");
}

double k_schedule(int epoch, const LossSpec& spec) {
  if (epoch < 0) throw ShapeError("k_schedule: epoch must be >= 0");
  return std::max(spec.k_min, spec.k_start - spec.k_decay_per_epoch * epoch);
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Quad-precision sum rounded once, so the result is a monotone function of the
// exact mean.
double rounded_mean(std::span<const double> values, std::span<const std::size_t> idx) {
  __float128 acc = 0;
  for (std::size_t i : idx) acc += values[i];
  return static_cast<double>(acc / static_cast<__float128>(idx.size()));
}

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw ShapeError(std::string(op) + ": shape " + to_string(a) + " vs " + to_string(b));
}

void check_k(double k) {
  if (!(k > 0.0 && k <= 100.0)) throw ShapeError("top-k loss: k must lie in (0, 100], got " + std::to_string(k));
}

}  // namespace

double l1_loss(const Tensor& pred, const Tensor& gt) {
  require_same(pred.shape(), gt.shape(), "l1_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - gt[i]);
  return acc / static_cast<double>(pred.size());
}

Var l1_loss(Tape& t, Var pred, Var gt) {
  const Tensor& p = t.value(pred);
  const Tensor& g = t.value(gt);
  require_same(p.shape(), g.shape(), "l1_loss");
  for (std::size_t i = 0; i < p.size(); ++i) t.note_token(static_cast<std::uint64_t>(sign(p[i] - g[i]) + 1.0));
  const Var ins[] = {pred, gt};
  return t.push(Tensor::scalar(l1_loss(p, g)), ins, [pred, gt](Tape& tp, const Tensor& grad) {
    const Tensor& pv = tp.value(pred);
    const Tensor& gv = tp.value(gt);
    const double s = grad[0] / static_cast<double>(pv.size());
    Tensor gp(pv.shape());
    for (std::size_t i = 0; i < pv.size(); ++i) gp[i] = s * sign(pv[i] - gv[i]);
    tp.accumulate(pred, gp);
    gp *= -1.0;
    tp.accumulate(gt, gp);
  });
}

std::size_t topk_count(std::size_t m_total, double k_percent) {
  check_k(k_percent);
  // k * M / 100 is exact for integral k; the guard absorbs rounding noise for
  // fractional k so an exact product does not round up by one.
  const double raw = k_percent * static_cast<double>(m_total) / 100.0;
  const auto m = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(m_total, 1));
}

std::vector<std::size_t> topk_select(std::span<const double> errors, double k_percent) {
  const std::size_t m = topk_count(errors.size(), k_percent);
  std::vector<std::size_t> idx(errors.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto by_rank = [&](std::size_t a, std::size_t b) {
    return errors[a] > errors[b] || (errors[a] == errors[b] && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(m, idx.size())), idx.end(),
                    by_rank);
  idx.resize(std::min(m, idx.size()));
  return idx;
}

std::vector<double> dct_error(const Tensor& pred, const Tensor& gt, std::size_t n) {
  require_same(pred.shape(), gt.shape(), "dct_error");
  const Tensor dp = dct2(slice_batch(pred, n, 1));
  const Tensor dg = dct2(slice_batch(gt, n, 1));
  std::vector<double> e(dp.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::abs(dg[i] - dp[i]);
  return e;
}

namespace {

struct TopKEval {
  double loss = 0.0;
  // Per-sample DCT-domain gradient of the batch loss w.r.t. DCT(pred).
  Tensor coeff_grad;
};

TopKEval topk_eval(const Tensor& pred, const Tensor& gt, double k, Tape* tape) {
  require_same(pred.shape(), gt.shape(), "topk_dct_loss");
  check_k(k);
  const Shape& s = pred.shape();
  const Tensor dp = dct2(pred);
  const Tensor dg = dct2(gt);
  TopKEval out{0.0, Tensor(s)};
  const std::size_t per = s.c * s.plane();
  std::vector<double> err(per);
  for (std::size_t n = 0; n < s.n; ++n) {
    auto p = dp.sample(n);
    auto g = dg.sample(n);
    for (std::size_t i = 0; i < per; ++i) err[i] = std::abs(g[i] - p[i]);
    const std::vector<std::size_t> chosen = topk_select(err, k);
    out.loss += rounded_mean(err, chosen);
    const double w = 1.0 / (static_cast<double>(chosen.size()) * static_cast<double>(s.n));
    auto cg = out.coeff_grad.sample(n);
    for (std::size_t i : chosen) {
      cg[i] = w * sign(p[i] - g[i]);
      if (tape) tape->note_token((static_cast<std::uint64_t>(i) << 2) | static_cast<std::uint64_t>(sign(p[i] - g[i]) + 1.0));
    }
  }
  out.loss /= static_cast<double>(s.n);
  return out;
}

}  // namespace

double topk_dct_loss(const Tensor& pred, const Tensor& gt, double k_percent) {
  return topk_eval(pred, gt, k_percent, nullptr).loss;
}

Var topk_dct_loss(Tape& t, Var pred, Var gt, double k_percent) {
  TopKEval ev = topk_eval(t.value(pred), t.value(gt), k_percent, &t);
  const Var ins[] = {pred, gt};
  // The orthonormal DCT's adjoint is its inverse.
  Tensor pixel_grad = idct2(ev.coeff_grad);
  return t.push(Tensor::scalar(ev.loss), ins, [pred, gt, pixel_grad](Tape& tp, const Tensor& grad) {
    Tensor gp = pixel_grad;
    gp *= grad[0];
    tp.accumulate(pred, gp);
    gp *= -1.0;
    tp.accumulate(gt, gp);
  });
}

Var training_loss(Tape& t, Var pred, Var gt, const LossSpec& spec, int epoch) {
  if (spec.kind == LossKind::L1) return l1_loss(t, pred, gt);
  return topk_dct_loss(t, pred, gt, k_schedule(epoch, spec));
}

}  // namespace sbnet
