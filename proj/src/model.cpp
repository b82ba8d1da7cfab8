#include "sbnet/model.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "sbnet/tensor_io.hpp"

namespace sbnet {

void ModelConfig::validate() const {
  if (blocks < 1) throw ShapeError("model: blocks must be >= 1");
  if (filters == 0 || filters % 4 != 0) throw ShapeError("model: filters must be a positive multiple of 4");
  if (in_channels == 0) throw ShapeError("model: in_channels must be positive");
}

std::size_t ModelConfig::bottleneck_growth() const {
  if (bottleneck == BottleneckKind::SDWT) return growth();
  return parity_growth(filters, dense_layers, growth());
}

BottleneckConfig ModelConfig::bottleneck_config() const {
  return {bottleneck, filters, dense_layers, bottleneck_growth()};
}

Model build_model(const ModelConfig& cfg) {
  cfg.validate();
  Model m;
  m.config = cfg;
  ParameterSet& ps = m.params;
  const std::size_t f = cfg.filters;
  m.head_in = make_conv(ps, "head.conv_in", cfg.in_channels, f, 3);
  m.head_block = make_dense_block(ps, "head.db", f, cfg.dense_layers, cfg.growth());
  m.head_out = make_conv(ps, "head.conv_out", m.head_block.c_out(), f, 3);
  const BottleneckConfig bc = cfg.bottleneck_config();
  for (std::size_t i = 0; i < cfg.blocks; ++i) {
    m.body.push_back(make_bottleneck(ps, "body" + std::to_string(i), bc));
  }
  m.tail_block = make_dense_block(ps, "tail.db", f, cfg.dense_layers, cfg.growth());
  m.tail_out = make_conv(ps, "tail.conv_out", m.tail_block.c_out(), cfg.in_channels, 3);
  return m;
}

Model init_params(const ModelConfig& cfg) {
  Model m = build_model(cfg);
  m.params.init_he_normal(cfg.seed);
  return m;
}

Var model_forward(const Binding& b, const Model& m, Var x4) {
  const Shape& s = b.tape.value(x4).shape();
  if (s.c != m.config.in_channels) {
    throw ShapeError("model expects " + std::to_string(m.config.in_channels) + " input channels, got " + to_string(s));
  }
  if (s.h % 2 != 0 || s.w % 2 != 0) throw ShapeError("model input needs even h, w, got " + to_string(s));
  Var y = conv_forward(b, m.head_in, x4);
  y = conv_forward(b, m.head_out, dense_block_forward(b, m.head_block, y));
  for (const Bottleneck& block : m.body) y = bottleneck_forward(b, block, y);
  y = conv_forward(b, m.tail_out, dense_block_forward(b, m.tail_block, y));
  return add(b.tape, y, x4);
}

Tensor model_forward(const Model& m, const Tensor& x4) {
  Tape tape(false);
  const Binding b = bind_frozen(tape, m.params);
  const Var x = tape.constant(x4);
  return tape.value(model_forward(b, m, x));
}

void save_checkpoint(const std::filesystem::path& path, const Model& m, int epoch) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  const ModelConfig& c = m.config;
  os << "sbnet-checkpoint 1\n"
     << "bottleneck=" << bottleneck_name(c.bottleneck) << '\n'
     << "blocks=" << c.blocks << '\n'
     << "filters=" << c.filters << '\n'
     << "in_channels=" << c.in_channels << '\n'
     << "dense_layers=" << c.dense_layers << '\n'
     << "seed=" << c.seed << '\n'
     << "epoch=" << epoch << '\n'
     << "params=" << m.params.size() << '\n'
     << "end\n";
  for (const Tensor& t : m.params.values()) write_tensor(os, t);
  if (!os) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "sbnet-checkpoint 1") {
    throw IoError(path.string() + ": not an sbnet checkpoint");
  }
  std::map<std::string, std::string> kv;
  while (std::getline(is, line) && line != "end") {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(path.string() + ": malformed manifest line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (line != "end") throw IoError(path.string() + ": truncated manifest");
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw IoError(path.string() + ": manifest lacks '" + key + "'");
    return it->second;
  };
  ModelConfig cfg;
  cfg.bottleneck = parse_bottleneck_kind(field("bottleneck"));
  cfg.blocks = std::stoull(field("blocks"));
  cfg.filters = std::stoull(field("filters"));
  cfg.in_channels = std::stoull(field("in_channels"));
  cfg.dense_layers = std::stoull(field("dense_layers"));
  cfg.seed = std::stoull(field("seed"));
  Checkpoint ck{build_model(cfg), std::stoi(field("epoch"))};
  if (std::stoull(field("params")) != ck.model.params.size()) {
    throw IoError(path.string() + ": parameter count does not match architecture");
  }
  for (std::size_t i = 0; i < ck.model.params.size(); ++i) {
    Tensor t = read_tensor(is);
    if (t.shape() != ck.model.params[i].shape()) {
      throw IoError(path.string() + ": parameter " + ck.model.params.name(i) + " has shape " + to_string(t.shape()));
    }
    ck.model.params[i] = std::move(t);
  }
  return ck;
}

}  // namespace sbnet
