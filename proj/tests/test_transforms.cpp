#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sbnet/transforms.hpp"
#include "test_util.hpp"

using namespace sbnet;
using sbnet::testing::random_tensor;

namespace {

// Defining sum of the orthonormal 2-D DCT-II for one plane.
double dct_oracle(const Tensor& x, std::size_t n, std::size_t c, std::size_t u, std::size_t v) {
  const std::size_t h = x.shape().h, w = x.shape().w;
  const double au = u == 0 ? std::sqrt(1.0 / h) : std::sqrt(2.0 / h);
  const double av = v == 0 ? std::sqrt(1.0 / w) : std::sqrt(2.0 / w);
  double acc = 0.0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx)
      acc += x.at(n, c, y, xx) * std::cos(std::numbers::pi * (2.0 * y + 1.0) * u / (2.0 * h)) *
             std::cos(std::numbers::pi * (2.0 * xx + 1.0) * v / (2.0 * w));
  return au * av * acc;
}

double band_energy(const SubBands& sb) {
  return sb.ll.squared_norm() + sb.lh.squared_norm() + sb.hl.squared_norm() + sb.hh.squared_norm();
}

Shape random_even_shape(std::mt19937_64& rng) {
  return {1 + rng() % 2, 1 + rng() % 8, 2 * (1 + rng() % 16), 2 * (1 + rng() % 16)};
}

}  // namespace

TEST_CASE("dwt of a constant") {
  const SubBands sb = dwt2_haar(Tensor({1, 2, 4, 6}, 1.5));
  for (double v : sb.ll.data()) CHECK(v == 3.0);
  CHECK(sb.lh.squared_norm() == 0.0);
  CHECK(sb.hl.squared_norm() == 0.0);
  CHECK(sb.hh.squared_norm() == 0.0);
  CHECK(sb.ll.shape() == Shape{1, 2, 2, 3});
}

TEST_CASE("dwt of a single patch") {
  const Tensor x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const SubBands sb = dwt2_haar(x);
  CHECK(sb[Band::LL][0] == 5.0);
  CHECK(sb[Band::LH][0] == -2.0);
  CHECK(sb[Band::HL][0] == -1.0);
  CHECK(sb[Band::HH][0] == 0.0);
  CHECK(idwt2_haar(sb) == x);
  CHECK(std::string(band_name(Band::HL)) == "HL");
}

TEST_CASE("idwt of a pure LL band") {
  SubBands sb{Tensor({1, 1, 2, 2}, 4.0), Tensor({1, 1, 2, 2}), Tensor({1, 1, 2, 2}), Tensor({1, 1, 2, 2})};
  const Tensor x = idwt2_haar(sb);
  for (double v : x.data()) CHECK(v == 2.0);
}

TEST_CASE("dwt rejects odd sizes and mismatched bands") {
  CHECK_THROWS_AS(dwt2_haar(Tensor({1, 1, 3, 4})), ShapeError);
  CHECK_THROWS_AS(dwt2_haar(Tensor({1, 1, 4, 5})), ShapeError);
  SubBands sb{Tensor({1, 1, 2, 2}), Tensor({1, 1, 2, 2}), Tensor({1, 1, 2, 3}), Tensor({1, 1, 2, 2})};
  CHECK_THROWS_AS(idwt2_haar(sb), ShapeError);
}

TEST_CASE("dwt energy and round trip on random tensors") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const Tensor x = random_tensor(random_even_shape(rng), rng);
    const SubBands sb = dwt2_haar(x);
    CHECK(std::abs(band_energy(sb) - x.squared_norm()) <= 1e-9);
    CHECK(max_abs_diff(idwt2_haar(sb), x) <= 1e-9);
  }
}

TEST_CASE("dct of a 2x2 constant") {
  const Tensor X = dct2(Tensor({1, 1, 2, 2}, 1.0));
  CHECK(X[0] == doctest::Approx(2.0).epsilon(1e-15));
  for (std::size_t i = 1; i < 4; ++i) CHECK(std::abs(X[i]) < 1e-15);
}

TEST_CASE("dct matches the defining sum") {
  std::mt19937_64 rng(12);
  for (Shape s : {Shape{1, 1, 1, 1}, Shape{1, 2, 3, 5}, Shape{2, 1, 8, 4}, Shape{1, 1, 7, 1}}) {
    const Tensor x = random_tensor(s, rng);
    const Tensor X = dct2(x);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t u = 0; u < s.h; ++u)
          for (std::size_t v = 0; v < s.w; ++v) CHECK(std::abs(X.at(n, c, u, v) - dct_oracle(x, n, c, u, v)) < 1e-12);
  }
}

TEST_CASE("single cosine has one nonzero coefficient") {
  const std::size_t h = 6, w = 8, u0 = 2, v0 = 5;
  Tensor x({1, 1, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx)
      x.at(0, 0, y, xx) = std::cos(std::numbers::pi * (2.0 * y + 1.0) * u0 / (2.0 * h)) *
                          std::cos(std::numbers::pi * (2.0 * xx + 1.0) * v0 / (2.0 * w));
  const Tensor X = dct2(x);
  std::size_t nonzero = 0;
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v)
      if (std::abs(X.at(0, 0, u, v)) > 1e-12) {
        ++nonzero;
        CHECK(u == u0);
        CHECK(v == v0);
      }
  CHECK(nonzero == 1);
}

TEST_CASE("dct Parseval and round trip on random tensors") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const Tensor x = random_tensor({1 + rng() % 2, 1 + rng() % 8, 1 + rng() % 32, 1 + rng() % 32}, rng);
    const Tensor X = dct2(x);
    CHECK(std::abs(X.squared_norm() - x.squared_norm()) <= 1e-9);
    CHECK(max_abs_diff(idct2(X), x) <= 1e-9);
  }
}

TEST_CASE("space_to_depth of an RGGB mosaic") {
  Tensor m({1, 1, 4, 6});
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 6; ++x) m.at(0, 0, y, x) = (y % 2 == 0) ? (x % 2 == 0 ? 1.0 : 2.0) : (x % 2 == 0 ? 2.0 : 3.0);
  const Tensor s = space_to_depth(m);
  CHECK(s.shape() == Shape{1, 4, 2, 3});
  const double expect[] = {1.0, 2.0, 2.0, 3.0};
  for (std::size_t c = 0; c < 4; ++c)
    for (double v : s.plane(0, c)) CHECK(v == expect[c]);
}

TEST_CASE("depth_to_space permutes elements") {
  std::mt19937_64 rng(14);
  const Tensor x = random_tensor({1, 4, 3, 5}, rng);
  const Tensor y = depth_to_space(x);
  CHECK(y.shape() == Shape{1, 1, 6, 10});
  std::vector<double> a = x.values(), b = y.values();
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
  CHECK(space_to_depth(y) == x);
}

TEST_CASE("space_to_depth round trip is bit-exact") {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 100; ++i) {
    const std::size_t r = 1 + rng() % 3;
    const Tensor x = random_tensor({1 + rng() % 2, 1 + rng() % 4, r * (1 + rng() % 6), r * (1 + rng() % 6)}, rng);
    CHECK(depth_to_space(space_to_depth(x, r), r) == x);
  }
}

TEST_CASE("space_to_depth divisibility errors") {
  CHECK_THROWS_AS(space_to_depth(Tensor({1, 1, 3, 4})), ShapeError);
  CHECK_THROWS_AS(depth_to_space(Tensor({1, 3, 2, 2})), ShapeError);
}

TEST_CASE("transforms are linear") {
  std::mt19937_64 rng(16);
  const Tensor x = random_tensor({2, 3, 6, 8}, rng), y = random_tensor({2, 3, 6, 8}, rng);
  const double a = 0.3, b = -2.1;
  Tensor ax = x;
  ax *= a;
  Tensor by = y;
  by *= b;
  Tensor mix = ax;
  mix += by;
  auto combine = [&](Tensor tx, Tensor ty) {
    tx *= a;
    ty *= b;
    tx += ty;
    return tx;
  };
  CHECK(max_abs_diff(dct2(mix), combine(dct2(x), dct2(y))) <= 1e-9);
  CHECK(max_abs_diff(space_to_depth(mix), combine(space_to_depth(x), space_to_depth(y))) <= 1e-9);
  const SubBands sm = dwt2_haar(mix), sx = dwt2_haar(x), sy = dwt2_haar(y);
  for (Band band : kBands) CHECK(max_abs_diff(sm[band], combine(sx[band], sy[band])) <= 1e-9);
}

TEST_CASE("tape transforms agree with tensor transforms") {
  std::mt19937_64 rng(17);
  const Tensor x = random_tensor({1, 2, 4, 6}, rng);
  Tape t;
  const Var v = t.constant(x);
  const SubBandVars sv = dwt2_haar(t, v);
  const SubBands sb = dwt2_haar(x);
  for (Band band : kBands) CHECK(t.value(sv[band]) == sb[band]);
  CHECK(t.value(idwt2_haar(t, sv)) == idwt2_haar(sb));
  CHECK(t.value(dct2(t, v)) == dct2(x));
  CHECK(t.value(space_to_depth(t, v)) == space_to_depth(x));
}

TEST_CASE("transform gradients against central differences") {
  std::mt19937_64 rng(18);
  const Tensor x = random_tensor({1, 2, 4, 4}, rng);
  const Tensor p1 = random_tensor({1, 2, 2, 2}, rng), p2 = random_tensor({1, 2, 2, 2}, rng);
  const Tensor p3 = random_tensor({1, 2, 4, 4}, rng), p4 = random_tensor({1, 8, 2, 2}, rng);
  const Tensor params[] = {x};
  const GradCheckReport r = finite_diff_check(
      [&](Tape& t, std::span<const Var> v) {
        const SubBandVars sb = dwt2_haar(t, v[0]);
        Var acc = add(t, dot_constant(t, sb.lh, p1), dot_constant(t, sb.hh, p2));
        acc = add(t, acc, dot_constant(t, dct2(t, v[0]), p3));
        acc = add(t, acc, dot_constant(t, space_to_depth(t, v[0]), p4));
        const SubBandVars swapped{sb.hh, sb.ll, sb.lh, sb.hl};
        return add(t, acc, dot_constant(t, depth_to_space(t, space_to_depth(t, idwt2_haar(t, swapped))), p3));
      },
      params);
  CHECK(r.max_rel_error <= 1e-8);
}
