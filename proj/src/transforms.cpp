#include "sbnet/transforms.hpp"

#include <cmath>
#include <numbers>

namespace sbnet {

const char* band_name(Band b) {
  switch (b) {
    case Band::LL: return "LL";
    case Band::LH: return "LH";
    case Band::HL: return "HL";
    case Band::HH: return "HH";
  }
  return "?";
}

Tensor& SubBands::operator[](Band b) {
  switch (b) {
    case Band::LL: return ll;
    case Band::LH: return lh;
    case Band::HL: return hl;
    case Band::HH: break;
  }
  return hh;
}

const Tensor& SubBands::operator[](Band b) const { return const_cast<SubBands&>(*this)[b]; }

Var& SubBandVars::operator[](Band b) {
  switch (b) {
    case Band::LL: return ll;
    case Band::LH: return lh;
    case Band::HL: return hl;
    case Band::HH: break;
  }
  return hh;
}

Var SubBandVars::operator[](Band b) const { return const_cast<SubBandVars&>(*this)[b]; }

namespace {

// Sign of each filter tap for cell positions (0,0), (0,1), (1,0), (1,1).
constexpr double kHaar[4][4] = {
    {1, 1, 1, 1},    // LL
    {1, 1, -1, -1},  // LH
    {1, -1, 1, -1},  // HL
    {1, -1, -1, 1},  // HH
};

void check_even(const Shape& s) {
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("dwt2_haar: spatial dims must be even, got " + to_string(s));
  }
}

Tensor analyze_band(const Tensor& x, std::size_t band) {
  const Shape& s = x.shape();
  check_even(s);
  Tensor out({s.n, s.c, s.h / 2, s.w / 2});
  const double* f = kHaar[band];
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h / 2; ++y)
        for (std::size_t xx = 0; xx < s.w / 2; ++xx) {
          const double a = x.at(n, c, 2 * y, 2 * xx);
          const double b = x.at(n, c, 2 * y, 2 * xx + 1);
          const double cc = x.at(n, c, 2 * y + 1, 2 * xx);
          const double d = x.at(n, c, 2 * y + 1, 2 * xx + 1);
          out.at(n, c, y, xx) = 0.5 * (f[0] * a + f[1] * b + f[2] * cc + f[3] * d);
        }
  return out;
}

// Transpose of analyze_band, accumulated into dst.
void synthesize_band(const Tensor& band_values, std::size_t band, Tensor& dst) {
  const Shape& s = band_values.shape();
  const double* f = kHaar[band];
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t xx = 0; xx < s.w; ++xx) {
          const double v = 0.5 * band_values.at(n, c, y, xx);
          dst.at(n, c, 2 * y, 2 * xx) += f[0] * v;
          dst.at(n, c, 2 * y, 2 * xx + 1) += f[1] * v;
          dst.at(n, c, 2 * y + 1, 2 * xx) += f[2] * v;
          dst.at(n, c, 2 * y + 1, 2 * xx + 1) += f[3] * v;
        }
}

Shape check_bands(const SubBands& b) {
  const Shape& s = b.ll.shape();
  if (b.lh.shape() != s || b.hl.shape() != s || b.hh.shape() != s) {
    throw ShapeError("idwt2_haar: band shapes differ (LL " + to_string(s) + ", LH " + to_string(b.lh.shape()) +
                     ", HL " + to_string(b.hl.shape()) + ", HH " + to_string(b.hh.shape()) + ")");
  }
  return s;
}

}  // namespace

SubBands dwt2_haar(const Tensor& x) {
  return {analyze_band(x, 0), analyze_band(x, 1), analyze_band(x, 2), analyze_band(x, 3)};
}

Tensor idwt2_haar(const SubBands& bands) {
  const Shape s = check_bands(bands);
  Tensor out({s.n, s.c, 2 * s.h, 2 * s.w});
  for (Band b : kBands) synthesize_band(bands[b], static_cast<std::size_t>(b), out);
  return out;
}

SubBandVars dwt2_haar(Tape& t, Var x) {
  check_even(t.value(x).shape());
  SubBandVars out;
  for (Band b : kBands) {
    const auto idx = static_cast<std::size_t>(b);
    const Var ins[] = {x};
    out[b] = t.push(analyze_band(t.value(x), idx), ins, [x, idx](Tape& tp, const Tensor& g) {
      Tensor gx(tp.value(x).shape());
      synthesize_band(g, idx, gx);
      tp.accumulate(x, gx);
    });
  }
  return out;
}

Var idwt2_haar(Tape& t, const SubBandVars& bands) {
  SubBands values{t.value(bands.ll), t.value(bands.lh), t.value(bands.hl), t.value(bands.hh)};
  Tensor out = idwt2_haar(values);
  const Var ins[] = {bands.ll, bands.lh, bands.hl, bands.hh};
  return t.push(std::move(out), ins, [bands](Tape& tp, const Tensor& g) {
    for (Band b : kBands) tp.accumulate(bands[b], analyze_band(g, static_cast<std::size_t>(b)));
  });
}

namespace {

// Row k holds the k-th orthonormal DCT-II basis vector of length n.
std::vector<double> dct_matrix(std::size_t n) {
  std::vector<double> m(n * n);
  const double nn = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double alpha = k == 0 ? std::sqrt(1.0 / nn) : std::sqrt(2.0 / nn);
    for (std::size_t i = 0; i < n; ++i) {
      m[k * n + i] = alpha * std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) *
                                      static_cast<double>(k) / (2.0 * nn));
    }
  }
  return m;
}

// forward: out = Ch * x * Cw^T ; inverse: out = Ch^T * X * Cw.
Tensor dct_apply(const Tensor& x, bool inverse) {
  const Shape& s = x.shape();
  const std::vector<double> ch = dct_matrix(s.h);
  const std::vector<double> cw = dct_matrix(s.w);
  Tensor out(s);
  std::vector<double> tmp(s.plane());
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      auto in = x.plane(n, c);
      auto dst = out.plane(n, c);
      // Rows: tmp[y][k] = sum_i in[y][i] * M(k, i) with M = Cw (forward) or Cw^T (inverse).
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t k = 0; k < s.w; ++k) {
          double acc = 0.0;
          for (std::size_t i = 0; i < s.w; ++i) {
            acc += in[y * s.w + i] * (inverse ? cw[i * s.w + k] : cw[k * s.w + i]);
          }
          tmp[y * s.w + k] = acc;
        }
      for (std::size_t k = 0; k < s.h; ++k)
        for (std::size_t xx = 0; xx < s.w; ++xx) {
          double acc = 0.0;
          for (std::size_t i = 0; i < s.h; ++i) {
            acc += (inverse ? ch[i * s.h + k] : ch[k * s.h + i]) * tmp[i * s.w + xx];
          }
          dst[k * s.w + xx] = acc;
        }
    }
  return out;
}

}  // namespace

Tensor dct2(const Tensor& x) { return dct_apply(x, false); }

Tensor idct2(const Tensor& coeffs) { return dct_apply(coeffs, true); }

Var dct2(Tape& t, Var x) {
  const Var ins[] = {x};
  return t.push(dct2(t.value(x)), ins, [x](Tape& tp, const Tensor& g) { tp.accumulate(x, idct2(g)); });
}

Tensor space_to_depth(const Tensor& x, std::size_t r) {
  const Shape& s = x.shape();
  if (r == 0 || s.h % r != 0 || s.w % r != 0) {
    throw ShapeError("space_to_depth: h and w must be divisible by " + std::to_string(r) + ", got " + to_string(s));
  }
  Tensor out({s.n, s.c * r * r, s.h / r, s.w / r});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t dy = 0; dy < r; ++dy)
      for (std::size_t dx = 0; dx < r; ++dx)
        for (std::size_t c = 0; c < s.c; ++c) {
          const std::size_t oc = (dy * r + dx) * s.c + c;
          for (std::size_t y = 0; y < s.h / r; ++y)
            for (std::size_t xx = 0; xx < s.w / r; ++xx) out.at(n, oc, y, xx) = x.at(n, c, y * r + dy, xx * r + dx);
        }
  return out;
}

Tensor depth_to_space(const Tensor& x, std::size_t r) {
  const Shape& s = x.shape();
  if (r == 0 || s.c % (r * r) != 0) {
    throw ShapeError("depth_to_space: channels must be divisible by " + std::to_string(r * r) + ", got " +
                     to_string(s));
  }
  const std::size_t c_out = s.c / (r * r);
  Tensor out({s.n, c_out, s.h * r, s.w * r});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t dy = 0; dy < r; ++dy)
      for (std::size_t dx = 0; dx < r; ++dx)
        for (std::size_t c = 0; c < c_out; ++c) {
          const std::size_t ic = (dy * r + dx) * c_out + c;
          for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t xx = 0; xx < s.w; ++xx) out.at(n, c, y * r + dy, xx * r + dx) = x.at(n, ic, y, xx);
        }
  return out;
}

Var space_to_depth(Tape& t, Var x, std::size_t r) {
  const Var ins[] = {x};
  return t.push(space_to_depth(t.value(x), r), ins,
                [x, r](Tape& tp, const Tensor& g) { tp.accumulate(x, depth_to_space(g, r)); });
}

Var depth_to_space(Tape& t, Var x, std::size_t r) {
  const Var ins[] = {x};
  return t.push(depth_to_space(t.value(x), r), ins,
                [x, r](Tape& tp, const Tensor& g) { tp.accumulate(x, space_to_depth(g, r)); });
}

}  // namespace sbnet
