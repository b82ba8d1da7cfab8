#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <sstream>

#include "sbnet/tensor.hpp"
#include "sbnet/tensor_io.hpp"
#include "test_util.hpp"

using namespace sbnet;
using sbnet::testing::random_tensor;

TEST_CASE("shape basics") {
  const Shape s{2, 3, 4, 5};
  CHECK(s.numel() == 120);
  CHECK(s.plane() == 20);
  CHECK(s == Shape{2, 3, 4, 5});
  CHECK_FALSE(s == Shape{2, 3, 5, 4});
  CHECK(to_string(s) == "(2,3,4,5)");
}

TEST_CASE("tensor construction and indexing") {
  Tensor t({1, 2, 2, 3});
  CHECK(t.size() == 12);
  t.at(0, 1, 1, 2) = 7.0;
  CHECK(t[11] == 7.0);
  CHECK(t.sum() == 7.0);
  CHECK_THROWS_AS(Tensor({1, 1, 2, 2}, std::vector<double>(3)), ShapeError);
  CHECK(Tensor::scalar(2.5).scalar_value() == 2.5);
  CHECK_THROWS_AS(t.scalar_value(), ShapeError);
}

TEST_CASE("concat two parts keeps order") {
  const Tensor a({1, 2, 2, 2}, 1.0);
  const Tensor b({1, 2, 2, 2}, 2.0);
  const Tensor parts[] = {a, b};
  const Tensor out = concat_channels(parts);
  CHECK(out.shape() == Shape{1, 4, 2, 2});
  for (std::size_t c = 0; c < 4; ++c)
    for (double v : out.plane(0, c)) CHECK(v == (c < 2 ? 1.0 : 2.0));
}

TEST_CASE("concat single part is identity") {
  std::mt19937_64 rng(1);
  const Tensor a = random_tensor({2, 3, 4, 4}, rng);
  const Tensor parts[] = {a};
  CHECK(concat_channels(parts) == a);
}

TEST_CASE("concat mismatch names the offending part") {
  const Tensor parts[] = {Tensor({1, 1, 2, 2}), Tensor({1, 1, 2, 2}), Tensor({1, 1, 3, 2})};
  try {
    concat_channels(parts);
    FAIL("expected rejection");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
    CHECK(std::string(e.what()).find("part") != std::string::npos);
  }
}

TEST_CASE("split examples") {
  std::mt19937_64 rng(2);
  const Tensor t = random_tensor({1, 4, 2, 2}, rng);
  const std::size_t halves[] = {2, 2};
  const auto parts = split_channels(t, halves);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].shape() == Shape{1, 2, 2, 2});
  CHECK(parts[1].at(0, 1, 1, 1) == t.at(0, 3, 1, 1));
  const std::size_t all[] = {4};
  const auto one = split_channels(t, all);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == t);
  const std::size_t bad[] = {1, 2};
  CHECK_THROWS_AS(split_channels(t, bad), ShapeError);
}

TEST_CASE("split then concat round trip over random tensors") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t c = 1 + rng() % 9;
    const Tensor t = random_tensor({1 + rng() % 3, c, 1 + rng() % 6, 1 + rng() % 6}, rng);
    std::vector<std::size_t> sizes;
    std::size_t left = c;
    while (left > 0) {
      const std::size_t s = 1 + rng() % left;
      sizes.push_back(s);
      left -= s;
    }
    const auto parts = split_channels(t, sizes);
    CHECK(concat_channels(parts) == t);
  }
}

TEST_CASE("pad_spatial") {
  std::mt19937_64 rng(4);
  const Tensor t = random_tensor({2, 2, 3, 5}, rng);
  CHECK(pad_spatial(t, 0) == t);

  const Tensor ones({1, 1, 2, 2}, 1.0);
  const Tensor p = pad_spatial(ones, 1);
  CHECK(p.shape() == Shape{1, 1, 4, 4});
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      const bool interior = y >= 1 && y <= 2 && x >= 1 && x <= 2;
      CHECK(p.at(0, 0, y, x) == (interior ? 1.0 : 0.0));
    }

  for (std::size_t pad = 0; pad < 4; ++pad) {
    const Tensor q = pad_spatial(t, pad);
    double direct = 0.0;
    for (double v : t.data()) direct += v;
    double padded = 0.0;
    for (double v : q.data()) padded += v;
    CHECK(padded == doctest::Approx(direct).epsilon(1e-14));
    CHECK(crop_spatial(q, pad, pad, 3, 5) == t);
  }
}

TEST_CASE("crop, slice and stack") {
  std::mt19937_64 rng(5);
  const Tensor t = random_tensor({3, 2, 4, 4}, rng);
  CHECK_THROWS_AS(crop_spatial(t, 2, 0, 3, 4), ShapeError);
  const Tensor s = slice_batch(t, 1, 2);
  CHECK(s.shape() == Shape{2, 2, 4, 4});
  CHECK(s.at(0, 1, 2, 3) == t.at(1, 1, 2, 3));
  CHECK_THROWS_AS(slice_batch(t, 2, 2), ShapeError);
  const Tensor items[] = {slice_batch(t, 0, 1), slice_batch(t, 1, 1), slice_batch(t, 2, 1)};
  CHECK(stack_batch(items) == t);
}

TEST_CASE("arithmetic and reductions") {
  Tensor a({1, 1, 1, 3}, std::vector<double>{1.0, -2.0, 3.0});
  const Tensor b({1, 1, 1, 3}, std::vector<double>{0.5, 0.5, 0.5});
  a += b;
  CHECK(a[1] == -1.5);
  a *= 2.0;
  CHECK(a[2] == 7.0);
  CHECK(a.squared_norm() == doctest::Approx(9.0 + 9.0 + 49.0));
  CHECK(max_abs_diff(a, b) == doctest::Approx(6.5));
  CHECK(a.all_finite());
  CHECK_THROWS_AS(a += Tensor({1, 1, 1, 2}), ShapeError);
}

TEST_CASE("SBT1 layout") {
  const Tensor t({1, 2, 1, 2}, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  std::stringstream ss;
  write_tensor(ss, t);
  const std::string bytes = ss.str();
  REQUIRE(bytes.size() == 4 + 16 + 1 + 4 * 8);
  CHECK(bytes.substr(0, 4) == "SBT1");
  CHECK(static_cast<unsigned char>(bytes[8]) == 2);   // c, little-endian
  CHECK(static_cast<unsigned char>(bytes[16]) == 2);  // w
  CHECK(bytes[20] == 0);
  double first = 0.0;
  std::memcpy(&first, bytes.data() + 21, sizeof first);
  CHECK(first == 1.0);
  CHECK(read_tensor(ss) == t);
}

TEST_CASE("SBT1 f32 round trip and errors") {
  const Tensor t({1, 1, 1, 3}, std::vector<double>{0.25, -1.5, 3.0});
  std::stringstream ss;
  write_tensor(ss, t, DType::F32);
  CHECK(ss.str().size() == 21 + 12);
  CHECK(read_tensor(ss) == t);

  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(read_tensor(bad), IoError);
  std::stringstream truncated(std::string("SBT1\x01\x00\x00\x00", 8));
  CHECK_THROWS_AS(read_tensor(truncated), IoError);
  CHECK_THROWS_AS(load_tensor("/nonexistent/dir/x.sbt"), IoError);
}
