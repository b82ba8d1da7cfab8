#include "sbnet/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "sbnet/parallel.hpp"

namespace sbnet {
namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

}  // namespace

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw ShapeError("tape: unknown node id " + std::to_string(v.id));
  return nodes_[v.id];
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, false, false, 0});
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(Tensor value, ParamId id) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, record_, true, id});
  return Var{nodes_.size() - 1};
}

Var Tape::push(Tensor value, std::span<const Var> inputs, Backward backward) {
  const std::size_t id = nodes_.size();
  Node n;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (Var in : inputs) {
    if (in.id >= id) throw ShapeError("tape: input id does not precede its consumer");
    n.inputs.push_back(in.id);
    n.needs_grad = n.needs_grad || nodes_[in.id].needs_grad;
  }
  if (record_ && n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{id};
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::needs_grad(Var v) const { return node(v).needs_grad; }

void Tape::accumulate(Var v, const Tensor& g) {
  if (!node(v).needs_grad) return;
  Tensor& slot = grads_.at(v.id);
  if (slot.empty() && !nodes_[v.id].value.empty()) {
    slot = g;
  } else {
    slot += g;
  }
}

Gradients Tape::backward(Var loss) {
  const Node& root = node(loss);
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + to_string(root.value.shape()));
  }
  grads_.assign(nodes_.size(), Tensor{});
  grads_[loss.id] = Tensor(root.value.shape(), 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || grads_[i].empty()) continue;
    n.backward(*this, grads_[i]);
    if (!n.is_param) grads_[i] = Tensor{};
  }
  Gradients out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (!n.is_param) continue;
    const Tensor& g = grads_[i].empty() ? Tensor::zeros_like(n.value) : grads_[i];
    auto [it, inserted] = out.try_emplace(n.param, g);
    if (!inserted) it->second += g;
  }
  grads_.clear();
  return out;
}

void Tape::note_branch(bool taken) {
  signature_ ^= taken ? 0x9e3779b97f4a7c15ULL : 0x6a09e667f3bcc909ULL;
  signature_ *= 1099511628211ULL;
}

void Tape::note_token(std::uint64_t token) {
  signature_ ^= token + 0x9e3779b97f4a7c15ULL + (signature_ << 6) + (signature_ >> 2);
  signature_ *= 1099511628211ULL;
}

Var add(Tape& t, Var a, Var b) {
  const Tensor& va = t.value(a);
  const Tensor& vb = t.value(b);
  require_same(va, vb, "add");
  Tensor out = va;
  out += vb;
  const Var ins[] = {a, b};
  return t.push(std::move(out), ins, [a, b](Tape& tp, const Tensor& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var mul(Tape& t, Var a, Var b) {
  const Tensor& va = t.value(a);
  const Tensor& vb = t.value(b);
  require_same(va, vb, "mul");
  Tensor out(va.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  const Var ins[] = {a, b};
  return t.push(std::move(out), ins, [a, b](Tape& tp, const Tensor& g) {
    const Tensor& xa = tp.value(a);
    const Tensor& xb = tp.value(b);
    Tensor ga(g.shape()), gb(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] = g[i] * xb[i];
      gb[i] = g[i] * xa[i];
    }
    tp.accumulate(a, ga);
    tp.accumulate(b, gb);
  });
}

Var scale(Tape& t, Var a, double s) {
  Tensor out = t.value(a);
  out *= s;
  const Var ins[] = {a};
  return t.push(std::move(out), ins, [a, s](Tape& tp, const Tensor& g) {
    Tensor ga = g;
    ga *= s;
    tp.accumulate(a, ga);
  });
}

Var sum(Tape& t, Var a) {
  const Var ins[] = {a};
  return t.push(Tensor::scalar(t.value(a).sum()), ins, [a](Tape& tp, const Tensor& g) {
    tp.accumulate(a, Tensor(tp.value(a).shape(), g[0]));
  });
}

Var dot_constant(Tape& t, Var a, const Tensor& weights) {
  const Tensor& va = t.value(a);
  require_same(va, weights, "dot_constant");
  double acc = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * weights[i];
  const Var ins[] = {a};
  return t.push(Tensor::scalar(acc), ins, [a, weights](Tape& tp, const Tensor& g) {
    Tensor ga = weights;
    ga *= g[0];
    tp.accumulate(a, ga);
  });
}

Var relu(Tape& t, Var x) {
  const Tensor& vx = t.value(x);
  Tensor out(vx.shape());
  for (std::size_t i = 0; i < vx.size(); ++i) {
    const bool on = vx[i] > 0.0;
    out[i] = on ? vx[i] : 0.0;
    t.note_branch(on);
  }
  const Var ins[] = {x};
  return t.push(std::move(out), ins, [x](Tape& tp, const Tensor& g) {
    const Tensor& in = tp.value(x);
    Tensor gx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = in[i] > 0.0 ? g[i] : 0.0;
    tp.accumulate(x, gx);
  });
}

Var concat_channels(Tape& t, std::span<const Var> parts) {
  std::vector<Tensor> values;
  std::vector<std::size_t> sizes;
  values.reserve(parts.size());
  for (Var p : parts) {
    values.push_back(t.value(p));
    sizes.push_back(values.back().shape().c);
  }
  Tensor out = concat_channels(values);
  std::vector<Var> ins(parts.begin(), parts.end());
  return t.push(std::move(out), ins, [ins, sizes](Tape& tp, const Tensor& g) {
    std::vector<Tensor> pieces = split_channels(g, sizes);
    for (std::size_t i = 0; i < ins.size(); ++i) tp.accumulate(ins[i], pieces[i]);
  });
}

std::vector<Var> split_channels(Tape& t, Var x, std::span<const std::size_t> sizes) {
  std::vector<Tensor> pieces = split_channels(t.value(x), sizes);
  std::vector<std::size_t> sz(sizes.begin(), sizes.end());
  std::vector<Var> out;
  out.reserve(pieces.size());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const Var ins[] = {x};
    const std::size_t first = offset;
    out.push_back(t.push(std::move(pieces[i]), ins, [x, first](Tape& tp, const Tensor& g) {
      const Shape& xs = tp.value(x).shape();
      Tensor gx(xs);
      const std::size_t plane = xs.plane();
      for (std::size_t n = 0; n < xs.n; ++n) {
        auto src = g.sample(n);
        std::copy(src.begin(), src.end(), gx.sample(n).begin() + static_cast<std::ptrdiff_t>(first * plane));
      }
      tp.accumulate(x, gx);
    }));
    offset += sz[i];
  }
  return out;
}

namespace {

struct ConvGeom {
  std::size_t c_in, c_out, kh, kw, h, w, oh, ow, stride, pad;
  std::size_t patch() const { return c_in * kh * kw; }
  std::size_t opix() const { return oh * ow; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

ConvGeom conv_geometry(const Shape& x, const Shape& w, const Shape& b, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  if (x.c != w.c) {
    throw ShapeError("conv2d: input has " + std::to_string(x.c) + " channels, weight expects " +
                     std::to_string(w.c));
  }
  if (b.numel() != w.n) throw ShapeError("conv2d: bias length does not match output channels");
  const std::size_t ph = x.h + 2 * pad;
  const std::size_t pw = x.w + 2 * pad;
  if (ph < w.h || pw < w.w) throw ShapeError("conv2d: kernel larger than padded input");
  if ((ph - w.h) % stride != 0 || (pw - w.w) % stride != 0) {
    throw ShapeError("conv2d: output size (h + 2 pad - k) / stride + 1 is not integral for input " +
                     to_string(x));
  }
  return {x.c, w.n, w.h, w.w, x.h, x.w, (ph - w.h) / stride + 1, (pw - w.w) / stride + 1, stride, pad};
}

// cols is (c_in*kh*kw) x (oh*ow), row-major.
void im2col(const ConvGeom& g, const double* x, double* cols) {
  for (std::size_t c = 0; c < g.c_in; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        double* row = cols + ((c * g.kh + ky) * g.kw + kx) * g.opix();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          double* dst = row + oy * g.ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + g.ow, 0.0);
            continue;
          }
          const double* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? 0.0 : src[ix];
          }
        }
      }
}

void col2im(const ConvGeom& g, const double* cols, double* x) {
  for (std::size_t c = 0; c < g.c_in; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const double* row = cols + ((c * g.kh + ky) * g.kw + kx) * g.opix();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          double* dst = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const double* src = row + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) dst[ix] += src[ox];
          }
        }
      }
}

Tensor conv_forward(const ConvGeom& g, const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t batch = x.shape().n;
  Tensor out({batch, g.c_out, g.oh, g.ow});
  CMapR wm(w.data().data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.patch()));
  parallel_for(batch, [&](std::size_t n) {
    MapR om(out.sample(n).data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.opix()));
    if (g.pointwise()) {
      CMapR xm(x.sample(n).data(), static_cast<Eigen::Index>(g.c_in), static_cast<Eigen::Index>(g.opix()));
      om.noalias() = wm * xm;
    } else {
      MatR cols(static_cast<Eigen::Index>(g.patch()), static_cast<Eigen::Index>(g.opix()));
      im2col(g, x.sample(n).data(), cols.data());
      om.noalias() = wm * cols;
    }
    for (std::size_t co = 0; co < g.c_out; ++co) om.row(static_cast<Eigen::Index>(co)).array() += b[co];
  });
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t pad) {
  const ConvGeom g = conv_geometry(x.shape(), weight.shape(), bias.shape(), stride, pad);
  return conv_forward(g, x, weight, bias);
}

Var conv2d(Tape& t, Var x, Var weight, Var bias, std::size_t stride, std::size_t pad) {
  const Tensor& vx = t.value(x);
  const Tensor& vw = t.value(weight);
  const Tensor& vb = t.value(bias);
  const ConvGeom g = conv_geometry(vx.shape(), vw.shape(), vb.shape(), stride, pad);
  Tensor out = conv_forward(g, vx, vw, vb);
  const Var ins[] = {x, weight, bias};
  return t.push(std::move(out), ins, [x, weight, bias, g](Tape& tp, const Tensor& grad) {
    const Tensor& in = tp.value(x);
    const Tensor& w = tp.value(weight);
    const std::size_t batch = in.shape().n;
    const bool want_x = tp.needs_grad(x);
    const bool want_w = tp.needs_grad(weight);
    const auto rows = static_cast<Eigen::Index>(g.patch());
    const auto cols_n = static_cast<Eigen::Index>(g.opix());
    const auto cout = static_cast<Eigen::Index>(g.c_out);
    CMapR wm(w.data().data(), cout, rows);

    Tensor gx(in.shape());
    std::vector<MatR> gw_parts(want_w ? batch : 0);
    parallel_for(batch, [&](std::size_t n) {
      CMapR gm(grad.sample(n).data(), cout, cols_n);
      MatR cols;
      const double* colp = nullptr;
      if (want_w) {
        if (g.pointwise()) {
          colp = in.sample(n).data();
        } else {
          cols.resize(rows, cols_n);
          im2col(g, in.sample(n).data(), cols.data());
          colp = cols.data();
        }
        CMapR cm(colp, rows, cols_n);
        gw_parts[n].noalias() = gm * cm.transpose();
      }
      if (want_x) {
        if (g.pointwise()) {
          MapR gxm(gx.sample(n).data(), rows, cols_n);
          gxm.noalias() = wm.transpose() * gm;
        } else {
          MatR gcols = wm.transpose() * gm;
          col2im(g, gcols.data(), gx.sample(n).data());
        }
      }
    });
    if (want_x) tp.accumulate(x, gx);
    if (want_w) {
      Tensor gw(w.shape());
      MapR gwm(gw.data().data(), cout, rows);
      for (std::size_t n = 0; n < batch; ++n) gwm += gw_parts[n];
      tp.accumulate(weight, gw);
    }
    if (tp.needs_grad(bias)) {
      Tensor gb(tp.value(bias).shape());
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t co = 0; co < g.c_out; ++co) {
          double acc = 0.0;
          for (double v : grad.plane(n, co)) acc += v;
          gb[co] += acc;
        }
      tp.accumulate(bias, gb);
    }
  });
}

GradCheckReport finite_diff_check(const GraphFn& f, std::span<const Tensor> params, double eps) {
  if (!(eps > 0.0)) throw ShapeError("finite_diff_check: eps must be positive");
  Gradients analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(tape.parameter(params[i], i));
    analytic = tape.backward(f(tape, vars));
  }

  std::vector<Tensor> probe(params.begin(), params.end());
  auto evaluate = [&](std::uint64_t& signature) {
    Tape tape(false);
    std::vector<Var> vars;
    for (std::size_t i = 0; i < probe.size(); ++i) vars.push_back(tape.parameter(probe[i], i));
    const double v = tape.value(f(tape, vars)).scalar_value();
    signature = tape.branch_signature();
    return v;
  };

  GradCheckReport report;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (std::size_t i = 0; i < probe[p].size(); ++i) {
      const double base = probe[p][i];
      std::uint64_t sig_plus = 0, sig_minus = 0;
      // Divide by the steps as represented, not the nominal ones.
      const double hi = base + eps, lo = base - eps;
      probe[p][i] = hi;
      const double up = evaluate(sig_plus);
      probe[p][i] = lo;
      const double down = evaluate(sig_minus);
      probe[p][i] = base;
      if (sig_plus != sig_minus) {
        ++report.skipped_kinks;
        continue;
      }
      const double numeric = (up - down) / (hi - lo);
      const double err = std::abs(analytic.at(p)[i] - numeric) / std::max(1.0, std::abs(numeric));
      report.max_rel_error = std::max(report.max_rel_error, err);
      ++report.checked;
    }
  }
  return report;
}

}  // namespace sbnet
