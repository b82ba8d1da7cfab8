#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sbnet/blocks.hpp"
#include "sbnet/suite.hpp"
#include "test_util.hpp"

using namespace sbnet;
using sbnet::testing::random_tensor;

namespace {

constexpr BottleneckKind kKinds[] = {BottleneckKind::SDWT, BottleneckKind::ConcatDWT, BottleneckKind::NoDWT};

BottleneckConfig parity_config(BottleneckKind kind, std::size_t c, std::size_t layers, std::size_t g) {
  return {kind, c, layers, kind == BottleneckKind::SDWT ? g : parity_growth(c, layers, g)};
}

Tensor run_block(const ParameterSet& ps, const Bottleneck& bn, const Tensor& x) {
  Tape t(false);
  const Binding b = bind(t, ps);
  return t.value(bottleneck_forward(b, bn, t.constant(x)));
}

}  // namespace

TEST_CASE("conv parameter count") {
  CHECK(conv_param_count(4, 4, 3) == 4 * 4 * 9 + 4);
  CHECK(conv_param_count(4, 4, 3) == 148);
  ParameterSet ps;
  make_conv(ps, "c", 4, 4, 3);
  CHECK(ps.scalar_count() == 148);
  CHECK(ps.name(0) == "c.weight");
  CHECK(ps.name(1) == "c.bias");
}

TEST_CASE("empty dense block is the identity and has no parameters") {
  std::mt19937_64 rng(1);
  ParameterSet ps;
  const DenseBlock db = make_dense_block(ps, "db", 5, 0, 4);
  CHECK(ps.scalar_count() == 0);
  CHECK(dense_block_param_count(5, 0, 4) == 0);
  const Tensor x = random_tensor({1, 5, 4, 4}, rng);
  Tape t(false);
  CHECK(t.value(dense_block_forward(bind(t, ps), db, t.constant(x))) == x);
}

TEST_CASE("dense block concatenates input first") {
  std::mt19937_64 rng(2);
  ParameterSet ps;
  const DenseBlock db = make_dense_block(ps, "db", 4, 1, 2);
  ps.init_he_normal(3);
  const Tensor x = random_tensor({2, 4, 6, 6}, rng);
  Tape t(false);
  const Tensor y = t.value(dense_block_forward(bind(t, ps), db, t.constant(x)));
  REQUIRE(y.shape() == Shape{2, 6, 6, 6});
  const std::size_t sizes[] = {4, 2};
  CHECK(split_channels(y, sizes)[0] == x);
  for (double v : split_channels(y, sizes)[1].data()) CHECK(v >= 0.0);
}

TEST_CASE("dense block layer widths and parameter count") {
  ParameterSet ps;
  const DenseBlock db = make_dense_block(ps, "db", 4, 3, 4);
  REQUIRE(db.layers.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(db.layers[i].c_in == 4 + i * 4);
    CHECK(db.layers[i].c_out == 4);
    CHECK(db.layers[i].kernel == 3);
  }
  CHECK(db.c_out() == 16);
  CHECK(ps.scalar_count() == dense_block_param_count(4, 3, 4));
  CHECK(ps.scalar_count() == 148 + (8 * 4 * 9 + 4) + (12 * 4 * 9 + 4));
}

TEST_CASE("dense block rejects channel mismatch") {
  ParameterSet ps;
  const DenseBlock db = make_dense_block(ps, "db", 4, 1, 2);
  Tape t(false);
  CHECK_THROWS_AS(dense_block_forward(bind(t, ps), db, t.constant(Tensor({1, 3, 4, 4}))), ShapeError);
}

TEST_CASE("zero-initialised bottlenecks are the identity") {
  std::mt19937_64 rng(4);
  for (BottleneckKind kind : kKinds) {
    ParameterSet ps;
    const Bottleneck bn = make_bottleneck(ps, "bn", parity_config(kind, 8, 4, 2));
    const Tensor x = random_tensor({2, 8, 8, 12}, rng);
    CHECK(run_block(ps, bn, x) == x);
  }
}

TEST_CASE("bottlenecks preserve shape") {
  std::mt19937_64 rng(5);
  for (BottleneckKind kind : kKinds)
    for (std::size_t c : {4u, 8u})
      for (std::size_t layers : {1u, 3u}) {
        ParameterSet ps;
        const Bottleneck bn = make_bottleneck(ps, "bn", parity_config(kind, c, layers, 2));
        ps.init_he_normal(rng());
        const Tensor x = random_tensor({1 + rng() % 2, c, 2 * (1 + rng() % 5), 2 * (1 + rng() % 5)}, rng);
        CHECK(run_block(ps, bn, x).shape() == x.shape());
      }
}

TEST_CASE("bottlenecks reject odd spatial sizes and the wrong forward") {
  ParameterSet ps;
  const Bottleneck bn = make_bottleneck(ps, "bn", {BottleneckKind::SDWT, 4, 2, 2});
  CHECK_THROWS_AS(run_block(ps, bn, Tensor({1, 4, 5, 6})), ShapeError);
  Tape t(false);
  const Binding b = bind(t, ps);
  CHECK_THROWS_AS(concat_dwt_block_forward(b, bn, t.constant(Tensor({1, 4, 4, 4}))), ShapeError);
  CHECK_THROWS_AS(s2d_block_forward(b, bn, t.constant(Tensor({1, 4, 4, 4}))), ShapeError);
}

TEST_CASE("closed-form parameter counts match the built blocks") {
  for (BottleneckKind kind : kKinds)
    for (std::size_t c : {4u, 8u, 16u}) {
      const BottleneckConfig cfg = parity_config(kind, c, 4, c / 4);
      ParameterSet ps;
      const Bottleneck bn = make_bottleneck(ps, "bn", cfg);
      CHECK(param_count(bn, ps) == ps.scalar_count());
      CHECK(bottleneck_param_count(cfg) == ps.scalar_count());
    }
}

TEST_CASE("rsdb parameter count by hand") {
  // Four dense blocks over c=16 with L=4, g=4 plus a 3x3 fusion from 32 to 16.
  const std::size_t db = (16 * 4 * 9 + 4) + (20 * 4 * 9 + 4) + (24 * 4 * 9 + 4) + (28 * 4 * 9 + 4);
  const std::size_t fusion = 32 * 16 * 9 + 16;
  CHECK(bottleneck_param_count({BottleneckKind::SDWT, 16, 4, 4}) == 4 * db + fusion);
  CHECK(bottleneck_param_count({BottleneckKind::SDWT, 16, 4, 4}) == 17360);
}

TEST_CASE("parameter parity across kinds") {
  for (std::size_t c : {8u, 16u, 32u}) {
    const double sdwt = static_cast<double>(bottleneck_param_count({BottleneckKind::SDWT, c, 4, c / 4}));
    for (BottleneckKind kind : {BottleneckKind::ConcatDWT, BottleneckKind::NoDWT}) {
      const double other = static_cast<double>(bottleneck_param_count(parity_config(kind, c, 4, c / 4)));
      CHECK(std::abs(other - sdwt) / sdwt <= 0.05);
    }
  }
}

TEST_CASE("parity growth minimises the gap") {
  const std::size_t c = 16, layers = 4, g = 4;
  const long target = static_cast<long>(bottleneck_param_count({BottleneckKind::SDWT, c, layers, g}));
  const std::size_t best = parity_growth(c, layers, g);
  const long best_gap =
      std::abs(static_cast<long>(bottleneck_param_count({BottleneckKind::ConcatDWT, c, layers, best})) - target);
  for (std::size_t cand = 1; cand <= 64; ++cand) {
    const long gap =
        std::abs(static_cast<long>(bottleneck_param_count({BottleneckKind::ConcatDWT, c, layers, cand})) - target);
    CHECK(best_gap <= gap);
  }
}

TEST_CASE("kind names round trip") {
  for (BottleneckKind kind : kKinds) CHECK(parse_bottleneck_kind(bottleneck_name(kind)) == kind);
  CHECK_THROWS_AS(parse_bottleneck_kind("wavelet"), std::invalid_argument);
}

TEST_CASE("constant input drives only the LL dense block") {
  const SubbandFlow flow = subband_gradient_flow({Band::LL, Band::LH, Band::HL, Band::HH});
  CHECK(flow.bundle_grad_norm[0] > 1e-3);
  CHECK(flow.bundle_grad_norm[1] == 0.0);
  CHECK(flow.bundle_grad_norm[2] == 0.0);
  CHECK(flow.bundle_grad_norm[3] == 0.0);
  CHECK(flow.fusion_grad_norm > 0.0);
}

TEST_CASE("permuting the dense blocks permutes which one sees LL") {
  const std::array<Band, 4> perms[] = {{Band::HH, Band::HL, Band::LH, Band::LL},
                                       {Band::LH, Band::LL, Band::HH, Band::HL},
                                       {Band::HL, Band::HH, Band::LL, Band::LH}};
  for (const auto& perm : perms) {
    const SubbandFlow flow = subband_gradient_flow(perm);
    for (std::size_t i = 0; i < 4; ++i) {
      if (perm[i] == Band::LL) {
        CHECK(flow.bundle_grad_norm[i] > 1e-3);
      } else {
        CHECK(flow.bundle_grad_norm[i] == 0.0);
      }
    }
  }
}

TEST_CASE("block gradient checks") {
  const auto rows = run_gradient_suite();
  std::size_t blocks = 0;
  for (const GradCheckRow& r : rows) {
    if (r.name.find("bottleneck") == std::string::npos && r.name.find("dense block") == std::string::npos) continue;
    ++blocks;
    INFO(r.name);
    CHECK(r.pass);
    CHECK(r.report.max_rel_error <= 1e-5);
  }
  CHECK(blocks == 4);
}
