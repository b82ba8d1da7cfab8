#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sbnet/loss.hpp"
#include "sbnet/suite.hpp"
#include "sbnet/transforms.hpp"
#include "test_util.hpp"

using namespace sbnet;
using sbnet::testing::random_tensor;

namespace {

// Full sort of (error, index) pairs; first m entries form the reference set.
std::vector<std::size_t> sort_oracle(const std::vector<double>& e, std::size_t m) {
  std::vector<std::pair<double, std::size_t>> v;
  for (std::size_t i = 0; i < e.size(); ++i) v.emplace_back(-e[i], i);
  std::sort(v.begin(), v.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back(v[i].second);
  return out;
}

// Exact per-sample sum, rounded once.
double dct_l1(const Tensor& pred, const Tensor& gt) {
  double acc = 0.0;
  for (std::size_t n = 0; n < pred.shape().n; ++n) {
    const auto e = dct_error(pred, gt, n);
    __float128 sum = 0;
    for (double v : e) sum += v;
    acc += static_cast<double>(sum / static_cast<__float128>(e.size()));
  }
  return acc / static_cast<double>(pred.shape().n);
}

}  // namespace

TEST_CASE("l1 examples") {
  std::mt19937_64 rng(1);
  const Tensor gt = random_tensor({2, 3, 4, 4}, rng);
  CHECK(l1_loss(gt, gt) == 0.0);
  Tensor shifted = gt;
  for (double& v : shifted.data()) v += 1.0;
  CHECK(l1_loss(shifted, gt) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(l1_loss(gt, Tensor({2, 3, 4, 5})), ShapeError);
}

TEST_CASE("l1 gradient is sign over N with sign(0) = 0") {
  Tape t;
  const Var p = t.parameter(Tensor({1, 1, 1, 4}, std::vector<double>{1.0, -1.0, 0.5, 2.0}), 0);
  const Var g = t.constant(Tensor({1, 1, 1, 4}, std::vector<double>{0.0, 0.0, 0.5, 3.0}));
  const Gradients grads = t.backward(l1_loss(t, p, g));
  CHECK(grads.at(0).values() == std::vector<double>{0.25, -0.25, 0.0, -0.25});
}

TEST_CASE("l1 gradient at nonzero residuals") {
  std::mt19937_64 rng(2);
  const Tensor gt = random_tensor({2, 2, 3, 3}, rng);
  Tensor pred = gt;
  for (std::size_t i = 0; i < pred.size(); ++i) pred[i] += (i % 3 == 0 ? -1.0 : 1.0) * (0.1 + 0.01 * i);
  const Tensor params[] = {pred};
  const GradCheckReport r =
      finite_diff_check([&](Tape& t, std::span<const Var> v) { return l1_loss(t, v[0], t.constant(gt)); }, params);
  CHECK(r.skipped_kinks == 0);
  CHECK(r.max_rel_error <= 1e-6);
}

TEST_CASE("topk count") {
  CHECK(topk_count(4, 100) == 4);
  CHECK(topk_count(4, 25) == 1);
  CHECK(topk_count(4, 26) == 2);
  CHECK(topk_count(1000, 10) == 100);
  CHECK(topk_count(7, 0.001) == 1);
  CHECK(topk_count(3, 100.0 / 3.0 * 2.0) == 2);
}

TEST_CASE("topk on the multiset {4,0,0,0}") {
  std::mt19937_64 rng(3);
  const Tensor gt = random_tensor({1, 1, 2, 2}, rng);
  Tensor coeffs = dct2(gt);
  coeffs[2] += 4.0;
  const Tensor pred = idct2(coeffs);
  CHECK(topk_dct_loss(pred, gt, 100) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(topk_dct_loss(pred, gt, 25) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("topk of identical tensors is zero for any k") {
  std::mt19937_64 rng(4);
  const Tensor gt = random_tensor({2, 4, 5, 5}, rng);
  for (double k : {1.0, 10.0, 50.0, 100.0}) CHECK(topk_dct_loss(gt, gt, k) == 0.0);
}

TEST_CASE("topk at k=100 equals L1 in the DCT domain") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Tensor gt = random_tensor({1 + rng() % 3, 1 + rng() % 4, 1 + rng() % 8, 1 + rng() % 8}, rng);
    const Tensor pred = random_tensor(gt.shape(), rng);
    CHECK(topk_dct_loss(pred, gt, 100) == dct_l1(pred, gt));
  }
}

TEST_CASE("topk rejects bad arguments") {
  const Tensor a({1, 1, 2, 2});
  CHECK_THROWS_AS(topk_dct_loss(a, a, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(topk_dct_loss(a, a, 100.5), std::invalid_argument);
  CHECK_THROWS_AS(topk_dct_loss(a, Tensor({1, 1, 2, 4}), 50), ShapeError);
}

TEST_CASE("selection matches a full sort") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> k_dist(0.5, 100.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> e(1 + rng() % 200);
    for (double& v : e) v = static_cast<double>(rng() % 50) / 7.0;  // plenty of ties
    const double k = k_dist(rng);
    CHECK(topk_select(e, k) == sort_oracle(e, topk_count(e.size(), k)));
  }
}

TEST_CASE("topk is non-increasing in k") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const Tensor gt = random_tensor({1 + rng() % 2, 1 + rng() % 3, 2 + rng() % 6, 2 + rng() % 6}, rng);
    Tensor pred = random_tensor(gt.shape(), rng);
    if (i % 2 == 0) {
      // Quantised coefficient offsets give near-ties in the error ranking.
      Tensor c = dct2(gt);
      for (double& v : c.data()) v += static_cast<double>(rng() % 5) / 4.0;
      pred = idct2(c);
    }
    double prev = topk_dct_loss(pred, gt, 1.0);
    for (int k = 2; k <= 100; ++k) {
      const double cur = topk_dct_loss(pred, gt, k);
      CHECK(cur <= prev);
      prev = cur;
    }
  }
}

TEST_CASE("scaling pred and gt scales the loss and keeps the selection") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    const Tensor gt = random_tensor({1, 2, 6, 6}, rng);
    const Tensor pred = random_tensor(gt.shape(), rng);
    for (double s : {2.0, 3.7, 0.125}) {
      Tensor sg = gt, sp = pred;
      sg *= s;
      sp *= s;
      CHECK(topk_dct_loss(sp, sg, 30) == doctest::Approx(s * topk_dct_loss(pred, gt, 30)).epsilon(1e-12));
      CHECK(topk_select(dct_error(sp, sg, 0), 30) == topk_select(dct_error(pred, gt, 0), 30));
    }
  }
}

TEST_CASE("selection is per sample") {
  // Sample 0 carries much larger errors; pooled selection would ignore sample 1.
  std::mt19937_64 rng(9);
  const Tensor gt = random_tensor({2, 1, 4, 4}, rng);
  Tensor pred = gt;
  for (std::size_t i = 0; i < 16; ++i) pred[i] += 10.0;
  for (std::size_t i = 16; i < 32; ++i) pred[i] += 0.01 * static_cast<double>(i);
  const double per_sample = (topk_dct_loss(slice_batch(pred, 0, 1), slice_batch(gt, 0, 1), 25) +
                             topk_dct_loss(slice_batch(pred, 1, 1), slice_batch(gt, 1, 1), 25)) / 2.0;
  CHECK(topk_dct_loss(pred, gt, 25) == doctest::Approx(per_sample).epsilon(1e-14));
}

TEST_CASE("tape topk loss matches the tensor version") {
  std::mt19937_64 rng(10);
  const Tensor gt = random_tensor({2, 4, 6, 6}, rng), pred = random_tensor({2, 4, 6, 6}, rng);
  Tape t;
  CHECK(t.value(topk_dct_loss(t, t.constant(pred), t.constant(gt), 40)).scalar_value() ==
        doctest::Approx(topk_dct_loss(pred, gt, 40)).epsilon(1e-14));
}

TEST_CASE("topk gradient at strict separation") {
  const auto rows = run_gradient_suite();
  std::size_t found = 0;
  for (const GradCheckRow& r : rows)
    if (r.name.rfind("topk", 0) == 0) {
      ++found;
      CHECK(r.report.skipped_kinks == 0);
      CHECK(r.report.max_rel_error <= 1e-5);
    }
  CHECK(found == 2);
}

TEST_CASE("k schedule") {
  const LossSpec full{LossKind::TopKDCT, 100, 10, 1};
  CHECK(k_schedule(0, full) == 100.0);
  CHECK(k_schedule(90, full) == 10.0);
  CHECK(k_schedule(300, full) == 10.0);
  CHECK(k_schedule(37, full) == 63.0);
  const LossSpec desk{LossKind::TopKDCT, 100, 10, 3};
  CHECK(k_schedule(10, desk) == 70.0);
  CHECK(k_schedule(30, desk) == 10.0);
}

TEST_CASE("loss spec validation and names") {
  CHECK_THROWS_AS((LossSpec{LossKind::TopKDCT, 50, 60, 1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((LossSpec{LossKind::TopKDCT, 100, 0, 1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((LossSpec{LossKind::TopKDCT, 120, 10, 1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((LossSpec{LossKind::TopKDCT, 100, 10, -1}.validate()), std::invalid_argument);
  CHECK_NOTHROW((LossSpec{LossKind::TopKDCT, 100, 10, 1}.validate()));
  CHECK(parse_loss_kind(loss_name(LossKind::TopKDCT)) == LossKind::TopKDCT);
  CHECK(parse_loss_kind("l1") == LossKind::L1);
  CHECK_THROWS_AS(parse_loss_kind("mse"), std::invalid_argument);
}

TEST_CASE("training loss follows the schedule") {
  std::mt19937_64 rng(11);
  const Tensor gt = random_tensor({1, 2, 4, 4}, rng), pred = random_tensor({1, 2, 4, 4}, rng);
  const LossSpec spec{LossKind::TopKDCT, 100, 10, 3};
  Tape t;
  const Var l = training_loss(t, t.constant(pred), t.constant(gt), spec, 20);
  CHECK(t.value(l).scalar_value() == doctest::Approx(topk_dct_loss(pred, gt, 40)).epsilon(1e-14));
  const Var l1 = training_loss(t, t.constant(pred), t.constant(gt), LossSpec{}, 20);
  CHECK(t.value(l1).scalar_value() == doctest::Approx(l1_loss(pred, gt)).epsilon(1e-14));
}
