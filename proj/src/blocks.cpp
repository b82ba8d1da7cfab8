#include "sbnet/blocks.hpp"

#include <cmath>
#include <random>

#include "sbnet/transforms.hpp"

namespace sbnet {

ParamId ParameterSet::add(std::string name, Shape shape, std::size_t fan_in) {
  names_.push_back(std::move(name));
  values_.emplace_back(shape);
  fan_in_.push_back(fan_in);
  return values_.size() - 1;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : values_) n += t.size();
  return n;
}

void ParameterSet::init_he_normal(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    Tensor& t = values_[i];
    if (fan_in_[i] == 0) {
      for (double& v : t.data()) v = 0.0;
      continue;
    }
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in_[i])));
    for (double& v : t.data()) v = dist(rng);
  }
}

void ParameterSet::zero() {
  for (Tensor& t : values_)
    for (double& v : t.data()) v = 0.0;
}

Binding bind(Tape& tape, const ParameterSet& params) {
  Binding b{tape, {}};
  b.vars.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) b.vars.push_back(tape.parameter(params[i], i));
  return b;
}

Binding bind_frozen(Tape& tape, const ParameterSet& params) {
  Binding b{tape, {}};
  b.vars.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) b.vars.push_back(tape.constant(params[i]));
  return b;
}

Conv make_conv(ParameterSet& ps, const std::string& prefix, std::size_t c_in, std::size_t c_out,
               std::size_t kernel) {
  if (kernel % 2 == 0) throw ShapeError("conv " + prefix + ": kernel must be odd");
  Conv c;
  c.c_in = c_in;
  c.c_out = c_out;
  c.kernel = kernel;
  c.weight = ps.add(prefix + ".weight", {c_out, c_in, kernel, kernel}, c_in * kernel * kernel);
  c.bias = ps.add(prefix + ".bias", {1, c_out, 1, 1}, 0);
  return c;
}

Var conv_forward(const Binding& b, const Conv& conv, Var x) {
  return conv2d(b.tape, x, b[conv.weight], b[conv.bias], 1, conv.kernel / 2);
}

std::size_t conv_param_count(std::size_t c_in, std::size_t c_out, std::size_t kernel) {
  return c_out * c_in * kernel * kernel + c_out;
}

DenseBlock make_dense_block(ParameterSet& ps, const std::string& prefix, std::size_t c_in,
                            std::size_t layers, std::size_t growth) {
  DenseBlock db;
  db.c_in = c_in;
  db.growth = growth;
  for (std::size_t i = 0; i < layers; ++i) {
    db.layers.push_back(make_conv(ps, prefix + ".conv" + std::to_string(i), c_in + i * growth, growth, 3));
  }
  return db;
}

Var dense_block_forward(const Binding& b, const DenseBlock& block, Var x) {
  const std::size_t c = b.tape.value(x).shape().c;
  if (c != block.c_in) {
    throw ShapeError("dense block expects " + std::to_string(block.c_in) + " channels, got " + std::to_string(c));
  }
  std::vector<Var> features{x};
  Var current = x;
  for (const Conv& layer : block.layers) {
    features.push_back(relu(b.tape, conv_forward(b, layer, current)));
    current = concat_channels(b.tape, features);
  }
  return current;
}

std::size_t dense_block_param_count(std::size_t c_in, std::size_t layers, std::size_t growth) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < layers; ++i) n += conv_param_count(c_in + i * growth, growth, 3);
  return n;
}

const char* bottleneck_name(BottleneckKind kind) {
  switch (kind) {
    case BottleneckKind::SDWT: return "sdwt";
    case BottleneckKind::ConcatDWT: return "dwt";
    case BottleneckKind::NoDWT: return "nodwt";
  }
  return "?";
}

BottleneckKind parse_bottleneck_kind(const std::string& name) {
  if (name == "sdwt") return BottleneckKind::SDWT;
  if (name == "dwt") return BottleneckKind::ConcatDWT;
  if (name == "nodwt") return BottleneckKind::NoDWT;
  throw ShapeError("unknown bottleneck '" + name + "' (expected sdwt, dwt or nodwt)");
}

Bottleneck make_bottleneck(ParameterSet& ps, const std::string& prefix, const BottleneckConfig& cfg) {
  if (cfg.channels == 0) throw ShapeError("bottleneck " + prefix + ": channels must be positive");
  Bottleneck p;
  p.config = cfg;
  const std::size_t c = cfg.channels;
  if (cfg.kind == BottleneckKind::SDWT) {
    for (Band band : kBands) {
      p.bands[static_cast<std::size_t>(band)] =
          make_dense_block(ps, prefix + ".db_" + band_name(band), c, cfg.layers, cfg.growth);
    }
    p.fusion = make_conv(ps, prefix + ".fusion", p.bands[0].c_out(), c, 3);
  } else {
    p.block = make_dense_block(ps, prefix + ".db", 4 * c, cfg.layers, cfg.growth);
    p.squeeze = make_conv(ps, prefix + ".squeeze", p.block.c_out(), 4 * c, 1);
    p.fusion = make_conv(ps, prefix + ".fusion", c, c, 3);
  }
  return p;
}

namespace {

void require_kind(const Bottleneck& p, BottleneckKind kind) {
  if (p.config.kind != kind) {
    throw ShapeError(std::string("bottleneck kind mismatch: have ") + bottleneck_name(p.config.kind) + ", need " +
                     bottleneck_name(kind));
  }
}

void require_input(const Tape& t, const Bottleneck& p, Var x) {
  const Shape& s = t.value(x).shape();
  if (s.c != p.config.channels) {
    throw ShapeError("bottleneck expects " + std::to_string(p.config.channels) + " channels, got " + to_string(s));
  }
  if (s.h % 2 != 0 || s.w % 2 != 0) throw ShapeError("bottleneck input needs even h, w, got " + to_string(s));
}

}  // namespace

Var rsdb_forward(const Binding& b, const Bottleneck& p, Var x) {
  require_kind(p, BottleneckKind::SDWT);
  require_input(b.tape, p, x);
  const SubBandVars bands = dwt2_haar(b.tape, x);
  SubBandVars processed;
  for (Band band : kBands) {
    processed[band] = dense_block_forward(b, p.bands[static_cast<std::size_t>(band)], bands[band]);
  }
  const Var merged = idwt2_haar(b.tape, processed);
  return add(b.tape, conv_forward(b, p.fusion, merged), x);
}

Var concat_dwt_block_forward(const Binding& b, const Bottleneck& p, Var x) {
  require_kind(p, BottleneckKind::ConcatDWT);
  require_input(b.tape, p, x);
  const std::size_t c = p.config.channels;
  const SubBandVars bands = dwt2_haar(b.tape, x);
  const Var stacked[] = {bands.ll, bands.lh, bands.hl, bands.hh};
  Var y = concat_channels(b.tape, stacked);
  y = conv_forward(b, p.squeeze, dense_block_forward(b, p.block, y));
  const std::size_t sizes[] = {c, c, c, c};
  const std::vector<Var> parts = split_channels(b.tape, y, sizes);
  const Var merged = idwt2_haar(b.tape, SubBandVars{parts[0], parts[1], parts[2], parts[3]});
  return add(b.tape, conv_forward(b, p.fusion, merged), x);
}

Var s2d_block_forward(const Binding& b, const Bottleneck& p, Var x) {
  require_kind(p, BottleneckKind::NoDWT);
  require_input(b.tape, p, x);
  Var y = space_to_depth(b.tape, x, 2);
  y = conv_forward(b, p.squeeze, dense_block_forward(b, p.block, y));
  y = depth_to_space(b.tape, y, 2);
  return add(b.tape, conv_forward(b, p.fusion, y), x);
}

Var bottleneck_forward(const Binding& b, const Bottleneck& p, Var x) {
  switch (p.config.kind) {
    case BottleneckKind::SDWT: return rsdb_forward(b, p, x);
    case BottleneckKind::ConcatDWT: return concat_dwt_block_forward(b, p, x);
    case BottleneckKind::NoDWT: return s2d_block_forward(b, p, x);
  }
  throw ShapeError("unknown bottleneck kind");
}

namespace {

std::size_t conv_count(const Conv& c, const ParameterSet& ps) { return ps[c.weight].size() + ps[c.bias].size(); }

std::size_t block_count(const DenseBlock& db, const ParameterSet& ps) {
  std::size_t n = 0;
  for (const Conv& c : db.layers) n += conv_count(c, ps);
  return n;
}

}  // namespace

std::size_t param_count(const Bottleneck& p, const ParameterSet& ps) {
  std::size_t n = conv_count(p.fusion, ps);
  if (p.config.kind == BottleneckKind::SDWT) {
    for (const DenseBlock& db : p.bands) n += block_count(db, ps);
  } else {
    n += block_count(p.block, ps) + conv_count(p.squeeze, ps);
  }
  return n;
}

std::size_t bottleneck_param_count(const BottleneckConfig& cfg) {
  const std::size_t c = cfg.channels;
  if (cfg.kind == BottleneckKind::SDWT) {
    return 4 * dense_block_param_count(c, cfg.layers, cfg.growth) +
           conv_param_count(c + cfg.layers * cfg.growth, c, 3);
  }
  return dense_block_param_count(4 * c, cfg.layers, cfg.growth) +
         conv_param_count(4 * c + cfg.layers * cfg.growth, 4 * c, 1) + conv_param_count(c, c, 3);
}

std::size_t parity_growth(std::size_t channels, std::size_t layers, std::size_t sdwt_growth) {
  const auto target = static_cast<double>(
      bottleneck_param_count({BottleneckKind::SDWT, channels, layers, sdwt_growth}));
  std::size_t best = 1;
  double best_gap = INFINITY;
  for (std::size_t g = 1; g <= 8 * channels; ++g) {
    const auto count = static_cast<double>(bottleneck_param_count({BottleneckKind::ConcatDWT, channels, layers, g}));
    const double gap = std::abs(count - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = g;
    }
    if (count > target) break;
  }
  return best;
}

}  // namespace sbnet
