#include "sbnet/suite.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "sbnet/transforms.hpp"

namespace sbnet {
namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Random weights and small random biases so every parameter is generic.
void randomize(ParameterSet& ps, std::mt19937_64& rng) {
  ps.init_he_normal(rng());
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (ps.fan_in(i) == 0)
      for (double& v : ps[i].data()) v = u(rng);
}

GradCheckRow check(std::string name, const GraphFn& f, const std::vector<Tensor>& params) {
  GradCheckRow row;
  row.name = std::move(name);
  row.report = finite_diff_check(f, params, kGradCheckEps);
  for (const Tensor& p : params) row.entries += p.size();
  row.pass = row.report.checked > 0 && row.report.max_rel_error <= kGradCheckTolerance &&
             static_cast<double>(row.report.skipped_kinks) <= kMaxKinkFraction * static_cast<double>(row.entries);
  return row;
}

// Checks a block: parameters of `ps` followed by the input tensor, probed by a
// fixed random projection of the output.
GradCheckRow check_block(std::string name, const ParameterSet& ps, const Tensor& input, const Tensor& projection,
                         const std::function<Var(const Binding&, Var)>& forward) {
  std::vector<Tensor> params(ps.values().begin(), ps.values().end());
  params.push_back(input);
  const std::size_t n_params = ps.size();
  return check(
      std::move(name),
      [&, n_params](Tape& t, std::span<const Var> vars) {
        Binding b{t, std::vector<Var>(vars.begin(), vars.begin() + static_cast<std::ptrdiff_t>(n_params))};
        return dot_constant(t, forward(b, vars[n_params]), projection);
      },
      params);
}

}  // namespace

std::vector<GradCheckRow> run_gradient_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckRow> rows;

  {
    const Tensor x = random_tensor({2, 3, 6, 6}, rng);
    const Tensor w = random_tensor({4, 3, 3, 3}, rng);
    const Tensor b = random_tensor({1, 4, 1, 1}, rng);
    const Tensor proj = random_tensor({2, 4, 6, 6}, rng);
    rows.push_back(check("conv2d 3x3 pad 1", [&](Tape& t, std::span<const Var> v) {
      return dot_constant(t, conv2d(t, v[0], v[1], v[2], 1, 1), proj);
    }, {x, w, b}));
  }
  {
    const Tensor x = random_tensor({1, 2, 7, 7}, rng);
    const Tensor w = random_tensor({3, 2, 3, 3}, rng);
    const Tensor b = random_tensor({1, 3, 1, 1}, rng);
    const Tensor proj = random_tensor({1, 3, 4, 4}, rng);
    rows.push_back(check("conv2d 3x3 stride 2", [&](Tape& t, std::span<const Var> v) {
      return dot_constant(t, conv2d(t, v[0], v[1], v[2], 2, 1), proj);
    }, {x, w, b}));
  }
  {
    // Entries kept at least 0.1 away from the kink.
    Tensor x = random_tensor({1, 2, 5, 5}, rng);
    for (double& v : x.data()) v = v >= 0.0 ? v + 0.1 : v - 0.1;
    const Tensor proj = random_tensor(x.shape(), rng);
    rows.push_back(check("relu", [&](Tape& t, std::span<const Var> v) {
      return dot_constant(t, relu(t, v[0]), proj);
    }, {x}));
  }
  {
    const Tensor x = random_tensor({1, 3, 6, 8}, rng);
    const Tensor p1 = random_tensor({1, 3, 3, 4}, rng);
    const Tensor p2 = random_tensor({1, 3, 3, 4}, rng);
    const Tensor p3 = random_tensor({1, 3, 3, 4}, rng);
    const Tensor p4 = random_tensor({1, 3, 3, 4}, rng);
    rows.push_back(check("haar dwt2 / idwt2", [&](Tape& t, std::span<const Var> v) {
      const SubBandVars sb = dwt2_haar(t, v[0]);
      const Var parts[] = {dot_constant(t, sb.ll, p1), dot_constant(t, sb.lh, p2), dot_constant(t, sb.hl, p3),
                           dot_constant(t, sb.hh, p4)};
      const Var scaled = scale(t, v[0], 0.5);
      const SubBandVars sb2 = dwt2_haar(t, scaled);
      const Var back = idwt2_haar(t, SubBandVars{sb2.hh, sb2.hl, sb2.lh, sb2.ll});
      Var acc = sum(t, mul(t, back, back));
      for (Var p : parts) acc = add(t, acc, p);
      return acc;
    }, {x}));
  }
  {
    const Tensor x = random_tensor({2, 2, 5, 7}, rng);
    const Tensor proj = random_tensor(x.shape(), rng);
    rows.push_back(check("dct2", [&](Tape& t, std::span<const Var> v) {
      const Var d = dct2(t, v[0]);
      return add(t, dot_constant(t, d, proj), scale(t, sum(t, mul(t, d, d)), 0.25));
    }, {x}));
  }
  {
    const Tensor x = random_tensor({1, 2, 4, 6}, rng);
    const Tensor proj = random_tensor({1, 8, 2, 3}, rng);
    const Tensor proj2 = random_tensor({1, 2, 4, 6}, rng);
    rows.push_back(check("space_to_depth / depth_to_space", [&](Tape& t, std::span<const Var> v) {
      const Var s2d = space_to_depth(t, v[0], 2);
      const Var d2s = depth_to_space(t, mul(t, s2d, s2d), 2);
      return add(t, dot_constant(t, s2d, proj), dot_constant(t, d2s, proj2));
    }, {x}));
  }
  {
    ParameterSet ps;
    const DenseBlock db = make_dense_block(ps, "db", 4, 2, 4);
    randomize(ps, rng);
    const Tensor x = random_tensor({1, 4, 8, 8}, rng);
    const Tensor proj = random_tensor({1, db.c_out(), 8, 8}, rng);
    rows.push_back(check_block("dense block L=2 g=4", ps, x, proj,
                               [&](const Binding& b, Var in) { return dense_block_forward(b, db, in); }));
  }
  for (BottleneckKind kind : {BottleneckKind::SDWT, BottleneckKind::ConcatDWT, BottleneckKind::NoDWT}) {
    const std::size_t c = 8, layers = 4, g = 2;
    const std::size_t growth = kind == BottleneckKind::SDWT ? g : parity_growth(c, layers, g);
    ParameterSet ps;
    const Bottleneck bn = make_bottleneck(ps, "bn", {kind, c, layers, growth});
    randomize(ps, rng);
    const Tensor x = random_tensor({1, c, 8, 8}, rng);
    const Tensor proj = random_tensor({1, c, 8, 8}, rng);
    rows.push_back(check_block(std::string("bottleneck ") + bottleneck_name(kind) + " c=8 8x8", ps, x, proj,
                               [&](const Binding& b, Var in) { return bottleneck_forward(b, bn, in); }));
  }
  {
    ModelConfig cfg;
    cfg.blocks = 1;
    cfg.filters = 8;
    cfg.seed = rng();
    Model m = build_model(cfg);
    randomize(m.params, rng);
    const Tensor x = random_tensor({1, 4, 8, 8}, rng, 0.0, 1.0);
    const Tensor proj = random_tensor({1, 4, 8, 8}, rng);
    rows.push_back(check_block("model sdwt B=1 F=8 8x8", m.params, x, proj,
                               [&](const Binding& b, Var in) { return model_forward(b, m, in); }));
  }
  {
    const Tensor gt = random_tensor({2, 4, 4, 4}, rng);
    Tensor pred = gt;
    std::uniform_real_distribution<double> mag(0.05, 0.5);
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] += (i % 2 == 0 ? 1.0 : -1.0) * mag(rng);
    rows.push_back(check("l1_loss", [&](Tape& t, std::span<const Var> v) {
      return l1_loss(t, v[0], t.constant(gt));
    }, {pred}));
  }
  for (double k : {100.0, 30.0}) {
    // DCT-domain errors with magnitudes 0.5 + 0.05 * rank: every gap between
    // neighbouring errors is far larger than the probe step.
    const Shape s{2, 2, 4, 4};
    const Tensor gt = random_tensor(s, rng);
    Tensor delta(s);
    const std::size_t per = s.c * s.plane();
    for (std::size_t n = 0; n < s.n; ++n) {
      std::vector<std::size_t> order(per);
      for (std::size_t i = 0; i < per; ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t r = 0; r < per; ++r) {
        delta.sample(n)[order[r]] = (rng() % 2 == 0 ? 1.0 : -1.0) * (0.5 + 0.05 * static_cast<double>(r));
      }
    }
    Tensor dpred = dct2(gt);
    dpred += delta;
    const Tensor pred = idct2(dpred);
    std::ostringstream name;
    name << "topk_dct_loss k=" << k;
    rows.push_back(check(name.str(), [&, k](Tape& t, std::span<const Var> v) {
      return topk_dct_loss(t, v[0], t.constant(gt), k);
    }, {pred}));
  }
  return rows;
}

std::string format_gradient_table(const std::vector<GradCheckRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(36) << "check" << std::right << std::setw(10) << "entries" << std::setw(10)
     << "skipped" << std::setw(14) << "max rel err" << "  result\n";
  for (const GradCheckRow& r : rows) {
    os << std::left << std::setw(36) << r.name << std::right << std::setw(10) << r.entries << std::setw(10)
       << r.report.skipped_kinks << std::setw(14) << std::scientific << std::setprecision(3)
       << r.report.max_rel_error << std::defaultfloat << "  " << (r.pass ? "PASS" : "FAIL") << '\n';
  }
  return os.str();
}

SubbandFlow subband_gradient_flow(const std::array<Band, 4>& assignment, std::uint64_t seed) {
  const std::size_t c = 8;
  ParameterSet ps;
  const Bottleneck built = make_bottleneck(ps, "rsdb", {BottleneckKind::SDWT, c, 4, 2});
  ps.init_he_normal(seed);
  Bottleneck routed = built;
  for (std::size_t i = 0; i < 4; ++i) routed.bands[static_cast<std::size_t>(assignment[i])] = built.bands[i];

  std::mt19937_64 rng(mix_seed(seed, 1));
  const Tensor proj = random_tensor({1, c, 8, 8}, rng);
  Tape tape;
  const Binding b = bind(tape, ps);
  const Var out = rsdb_forward(b, routed, tape.constant(Tensor({1, c, 8, 8}, 0.7)));
  const Gradients g = tape.backward(dot_constant(tape, out, proj));

  auto norm = [&](const Conv& conv) { return g.at(conv.weight).squared_norm() + g.at(conv.bias).squared_norm(); };
  SubbandFlow flow;
  for (std::size_t i = 0; i < 4; ++i) {
    double acc = 0.0;
    for (const Conv& conv : built.bands[i].layers) acc += norm(conv);
    flow.bundle_grad_norm[i] = std::sqrt(acc);
  }
  flow.fusion_grad_norm = std::sqrt(norm(built.fusion));
  return flow;
}

BenchConfig toy_bench_config() {
  BenchConfig cfg;
  cfg.model.bottleneck = BottleneckKind::SDWT;
  cfg.model.blocks = 2;
  cfg.model.filters = 16;
  cfg.model.dense_layers = 4;
  cfg.train.epochs = 30;
  cfg.train.steps_per_epoch = 96;
  cfg.train.batch_size = 8;
  cfg.train.patch_size = 32;
  cfg.train.lr0 = 5e-3;
  cfg.train.lr_drop_epoch = 20;
  cfg.train.lr_drop_factor = 10.0;
  cfg.train.loss = {LossKind::L1, 100.0, 10.0, 3.0};
  cfg.train.optimizer = OptimizerKind::RAdam;
  cfg.train_data = {64, 64, {0.01, 0.0001}, 1};
  cfg.val_data = {16, 64, {0.01, 0.0001}, 2};
  return cfg;
}

std::vector<BenchVariant> bench_variants() {
  return {{"No DWT", BottleneckKind::NoDWT, LossKind::L1},
          {"DWT", BottleneckKind::ConcatDWT, LossKind::L1},
          {"SDWT", BottleneckKind::SDWT, LossKind::L1},
          {"SDWT_top-k", BottleneckKind::SDWT, LossKind::TopKDCT}};
}

Dataset bench_train_set(const BenchConfig& cfg, std::uint64_t seed) {
  DatasetConfig d = cfg.train_data;
  d.seed = mix_seed(seed, mix_seed(cfg.train_data.seed, 0x747261696eULL));
  return generate_dataset(d);
}

Dataset bench_val_set(const BenchConfig& cfg, std::uint64_t seed) {
  DatasetConfig d = cfg.val_data;
  d.seed = mix_seed(seed, mix_seed(cfg.val_data.seed, 0x76616cULL));
  return generate_dataset(d);
}

std::vector<BenchRow> run_bench(const BenchConfig& cfg, const std::function<void(const BenchRow&)>& on_row) {
  std::vector<BenchRow> rows;
  for (std::uint64_t seed : cfg.seeds) {
    const Dataset train_set = bench_train_set(cfg, seed);
    const Dataset val_set = bench_val_set(cfg, seed);
    for (const BenchVariant& v : bench_variants()) {
      ModelConfig mc = cfg.model;
      mc.bottleneck = v.kind;
      mc.seed = seed;
      TrainConfig tc = cfg.train;
      tc.loss.kind = v.loss;
      tc.seed = seed;
      const TrainResult tr = train(mc, tc, train_set, val_set);
      const EvalReport ev = evaluate(tr.best, val_set, cfg.ensemble_eval);
      BenchRow row;
      row.seed = seed;
      row.label = v.label;
      row.kind = v.kind;
      row.loss = v.loss;
      row.model_params = tr.best.params.scalar_count();
      row.bottleneck_params = bottleneck_param_count(mc.bottleneck_config());
      row.noisy_psnr = ev.mean_psnr_noisy;
      row.val_psnr = ev.mean_psnr;
      row.balance = ev.mean_balance;
      row.best_epoch = tr.best_epoch;
      if (on_row) on_row(row);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string format_bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << std::fixed;
  os << std::left << std::setw(8) << "seed" << std::setw(12) << "variant" << std::right << std::setw(10) << "params"
     << std::setw(12) << "bneck" << std::setw(12) << "noisy dB" << std::setw(12) << "val dB" << std::setw(10)
     << "balance" << std::setw(6) << "best" << '\n';
  for (const BenchRow& r : rows) {
    os << std::left << std::setw(8) << r.seed << std::setw(12) << r.label << std::right << std::setw(10)
       << r.model_params << std::setw(12) << r.bottleneck_params << std::setprecision(3) << std::setw(12)
       << r.noisy_psnr << std::setw(12) << r.val_psnr << std::setw(10) << r.balance << std::setw(6) << r.best_epoch
       << '\n';
  }
  // Mean per variant across seeds, in first-seen order.
  std::vector<std::string> order;
  std::map<std::string, std::pair<double, int>> acc;
  for (const BenchRow& r : rows) {
    if (!acc.count(r.label)) order.push_back(r.label);
    acc[r.label].first += r.val_psnr;
    acc[r.label].second += 1;
  }
  os << "mean val dB:";
  for (const std::string& label : order) {
    os << "  " << label << ' ' << std::setprecision(3) << acc[label].first / acc[label].second;
  }
  os << '\n';
  return os.str();
}

}  // namespace sbnet
