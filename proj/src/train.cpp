#include "sbnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "sbnet/tensor_io.hpp"
#include "sbnet/transforms.hpp"

namespace sbnet {

const char* optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "radam"; }

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "radam") return OptimizerKind::RAdam;
  throw ShapeError("unknown optimizer '" + name + "' (expected adam or radam)");
}

OptimizerState make_optimizer(const ParameterSet& params, OptimizerKind kind) {
  OptimizerState s;
  s.rectify = kind == OptimizerKind::RAdam;
  for (const Tensor& p : params.values()) {
    s.m.emplace_back(p.shape());
    s.v.emplace_back(p.shape());
  }
  return s;
}

void optimizer_step(OptimizerState& state, ParameterSet& params, const Gradients& grads, double lr) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ShapeError("optimizer_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto it = grads.find(i);
    if (it == grads.end() || it->second.shape() != params[i].shape()) {
      throw ShapeError("optimizer_step: gradient for parameter " + params.name(i) + " missing or misshaped");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double b1 = state.beta1, b2 = state.beta2;
  const double bc1 = 1.0 - std::pow(b1, t);
  const double bc2 = 1.0 - std::pow(b2, t);

  bool adaptive = true;
  double rect = 1.0;
  if (state.rectify) {
    const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
    const double rho_t = rho_inf - 2.0 * t * std::pow(b2, t) / bc2;
    adaptive = rho_t > 5.0;
    if (adaptive) {
      rect = std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
    }
  }

  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& g = grads.at(i);
    Tensor& p = params[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      if (adaptive) {
        const double v_hat = v[j] / bc2;
        p[j] -= lr * rect * m_hat / (std::sqrt(v_hat) + state.eps);
      } else {
        p[j] -= lr * m_hat;
      }
    }
  }
}

void TrainConfig::validate() const {
  if (epochs <= 0 || steps_per_epoch <= 0 || batch_size == 0) {
    throw ShapeError("train config: epochs, steps per epoch and batch size must be positive");
  }
  if (patch_size == 0 || patch_size % 4 != 0) throw ShapeError("train config: patch size must be a multiple of 4");
  if (!(lr0 > 0.0) || !(lr_drop_factor > 0.0)) throw ShapeError("train config: learning rates must be positive");
  loss.validate();
}

double TrainConfig::learning_rate(int epoch) const {
  return epoch >= lr_drop_epoch ? lr0 / lr_drop_factor : lr0;
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  if (a.shape() != b.shape()) throw ShapeError("psnr: shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

// Appends copies of the last two rows / columns until both dims are multiples
// of 4. Copying a full 2-sample period keeps the RGGB phase of padded sites.
Tensor pad_bayer_to_4(const Tensor& plane) {
  const Shape& s = plane.shape();
  const std::size_t h = (s.h + 3) / 4 * 4;
  const std::size_t w = (s.w + 3) / 4 * 4;
  if (h == s.h && w == s.w) return plane;
  Tensor out({s.n, s.c, h, w});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const std::size_t sy = y < s.h ? y : y - 2;
          const std::size_t sx = x < s.w ? x : x - 2;
          out.at(n, c, y, x) = plane.at(n, c, sy, sx);
        }
  return out;
}

}  // namespace

Tensor denoise_plane(const Model& m, const Tensor& plane) {
  const Shape& s = plane.shape();
  if (s.c != 1 || s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("denoise_plane: expected a 1-channel plane with even dims, got " + to_string(s));
  }
  const Tensor padded = pad_bayer_to_4(plane);
  const Tensor out = depth_to_space(model_forward(m, space_to_depth(padded, 2)), 2);
  return crop_spatial(out, 0, 0, s.h, s.w);
}

BayerImage ensemble_denoise(const Model& m, const BayerImage& noisy, std::span<const AugmentFlags> combos) {
  if (combos.empty()) throw ShapeError("ensemble_denoise: no augmentation combos");
  const std::size_t h = noisy.height(), w = noisy.width();
  if (h < 4 || w < 4) {
    throw ShapeError("ensemble_denoise: image must be at least 4x4 for phase-shift crops, got " + std::to_string(h) +
                     "x" + std::to_string(w));
  }
  // long double keeps sums of up to 8 equal doubles exact.
  std::vector<long double> acc(h * w, 0.0L);
  std::vector<int> count(h * w, 0);
  for (const AugmentFlags& f : combos) {
    const Tensor aug = augment_plane(noisy.plane, f);
    const Tensor back = invert_augment(denoise_plane(m, aug), f);
    const Rect r = augment_coverage(f, h, w);
    for (std::size_t y = r.row0; y < r.row0 + r.h; ++y)
      for (std::size_t x = r.col0; x < r.col0 + r.w; ++x) {
        acc[y * w + x] += back.at(0, 0, y, x);
        ++count[y * w + x];
      }
  }
  Tensor out({1, 1, h, w});
  Tensor single;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (count[i] > 0) {
      out[i] = static_cast<double>(acc[i] / count[i]);
      continue;
    }
    // Reached by no combo: fall back to the plain pass.
    if (single.empty()) single = denoise_plane(m, noisy.plane);
    out[i] = single[i];
  }
  return BayerImage(std::move(out));
}

BayerImage ensemble_denoise(const Model& m, const BayerImage& noisy) {
  const auto combos = all_augment_flags();
  return ensemble_denoise(m, noisy, combos);
}

double frequency_balance(const Tensor& denoised_plane, const Tensor& clean_plane) {
  const std::vector<double> err =
      dct_error(space_to_depth(denoised_plane, 2), space_to_depth(clean_plane, 2), 0);
  double mx = 0.0, total = 0.0;
  for (double e : err) {
    mx = std::max(mx, e);
    total += e;
  }
  if (total == 0.0) return 1.0;
  return mx / (total / static_cast<double>(err.size()));
}

namespace {

struct Batch {
  Tensor noisy4;
  Tensor clean4;
};

Batch sample_batch(const Dataset& data, const TrainConfig& cfg, std::mt19937_64& rng) {
  const std::size_t window = cfg.patch_size + 2;
  std::vector<Tensor> noisy, clean;
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::uniform_int_distribution<int> flag_pick(0, 7);
  for (std::size_t i = 0; i < cfg.batch_size; ++i) {
    const SamplePair& p = data[pick(rng)];
    const std::size_t h = p.clean.height(), w = p.clean.width();
    if (h < window || w < window) {
      throw ShapeError("training image " + p.id + " (" + std::to_string(h) + "x" + std::to_string(w) +
                       ") is smaller than patch + 2 = " + std::to_string(window));
    }
    std::uniform_int_distribution<std::size_t> ys(0, (h - window) / 2), xs(0, (w - window) / 2);
    const std::size_t y0 = 2 * ys(rng), x0 = 2 * xs(rng);
    const BayerImage n(crop_spatial(p.noisy.plane, y0, x0, window, window));
    const BayerImage c(crop_spatial(p.clean.plane, y0, x0, window, window));
    const auto [an, ac] =
        augment_pair(n, c, AugmentFlags::from_index(flag_pick(rng)), cfg.patch_size, cfg.patch_size);
    noisy.push_back(space_to_depth(an.plane, 2));
    clean.push_back(space_to_depth(ac.plane, 2));
  }
  return {stack_batch(noisy), stack_batch(clean)};
}

double mean_val_psnr(const Model& m, const Dataset& val) {
  if (val.empty()) return 0.0;
  double acc = 0.0;
  for (const SamplePair& p : val) acc += psnr(denoise_plane(m, p.noisy.plane), p.clean.plane);
  return acc / static_cast<double>(val.size());
}

}  // namespace

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg, const Dataset& train_set,
                  const Dataset& val_set, const TrainOptions& options) {
  cfg.validate();
  if (train_set.empty()) throw ShapeError("train: training set is empty");
  Model model = init_params(model_cfg);
  OptimizerState opt = make_optimizer(model.params, cfg.optimizer);
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x7261696eULL));

  if (options.out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*options.out_dir, ec);
    if (ec) throw IoError("cannot create " + options.out_dir->string() + ": " + ec.message());
  }

  TrainResult result;
  result.best = model;
  double best = -std::numeric_limits<double>::infinity();
  std::int64_t global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate(epoch);
    double epoch_loss = 0.0;
    for (int s = 0; s < cfg.steps_per_epoch; ++s) {
      const Batch batch = sample_batch(train_set, cfg, rng);
      Tape tape;
      const Binding b = bind(tape, model.params);
      const Var x = tape.constant(batch.noisy4);
      const Var target = tape.constant(batch.clean4);
      const Var loss = training_loss(tape, model_forward(b, model, x), target, cfg.loss, epoch);
      const double value = tape.value(loss).scalar_value();
      if (!std::isfinite(value)) {
        throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                                 std::to_string(global_step));
      }
      optimizer_step(opt, model.params, tape.backward(loss), lr);
      result.step_losses.push_back(value);
      epoch_loss += value;
      ++global_step;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = global_step;
    rec.train_loss = epoch_loss / cfg.steps_per_epoch;
    rec.k_percent = cfg.loss.kind == LossKind::TopKDCT ? k_schedule(epoch, cfg.loss) : 100.0;
    rec.val_psnr = mean_val_psnr(model, val_set);
    if (rec.val_psnr > best) {
      best = rec.val_psnr;
      result.best = model;
      result.best_epoch = epoch;
      if (options.out_dir) save_checkpoint(*options.out_dir / "checkpoint.sbc", model, epoch);
    }
    rec.best_val_psnr = best;
    result.epochs.push_back(rec);
    if (options.out_dir) write_metrics_csv(*options.out_dir / "metrics.csv", result.epochs);
    if (options.on_epoch) options.on_epoch(rec);
  }
  result.last = std::move(model);
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochRecord> rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "epoch,step,train_loss,k_percent,val_psnr,best_val_psnr\n" << std::setprecision(10);
  for (const EpochRecord& r : rows) {
    os << r.epoch << ',' << r.step << ',' << r.train_loss << ',' << r.k_percent << ',' << r.val_psnr << ','
       << r.best_val_psnr << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

EvalReport evaluate(const Model& m, const Dataset& data, bool use_ensemble) {
  EvalReport report;
  for (const SamplePair& p : data) {
    const Tensor out = use_ensemble ? ensemble_denoise(m, p.noisy).plane : denoise_plane(m, p.noisy.plane);
    EvalRow row;
    row.id = p.id;
    row.psnr_noisy = psnr(p.noisy.plane, p.clean.plane);
    row.psnr_denoised = psnr(out, p.clean.plane);
    row.balance = frequency_balance(out, p.clean.plane);
    report.mean_psnr += row.psnr_denoised;
    report.mean_psnr_noisy += row.psnr_noisy;
    report.mean_balance += row.balance;
    report.rows.push_back(std::move(row));
  }
  if (!data.empty()) {
    const auto n = static_cast<double>(data.size());
    report.mean_psnr /= n;
    report.mean_psnr_noisy /= n;
    report.mean_balance /= n;
  }
  return report;
}

void write_eval_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "id,psnr_noisy,psnr_denoised,balance\n" << std::setprecision(10);
  for (const EvalRow& r : report.rows) {
    os << r.id << ',' << r.psnr_noisy << ',' << r.psnr_denoised << ',' << r.balance << '\n';
  }
  os << "mean," << report.mean_psnr_noisy << ',' << report.mean_psnr << ',' << report.mean_balance << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace sbnet
