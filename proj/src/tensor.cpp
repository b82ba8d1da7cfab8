#include "sbnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace sbnet {

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << s;
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Shape& s) {
  return os << '(' << s.n << ',' << s.c << ',' << s.h << ',' << s.w << ')';
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape_));
  }
}

double Tensor::scalar_value() const {
  if (data_.size() != 1) {
    throw ShapeError("expected a scalar tensor, got shape " + to_string(shape_));
  }
  return data_[0];
}

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Tensor::squared_norm() const {
  double acc = 0.0;
  for (double v : data_) acc += v * v;
  return acc;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ShapeError("add: shape " + to_string(other.shape_) + " vs " + to_string(shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no parts");
  const Shape& first = parts[0].shape();
  std::size_t channels = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Shape& s = parts[i].shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: part " + std::to_string(i) + " has shape " + to_string(s) +
                       ", expected n,h,w of " + to_string(first));
    }
    channels += s.c;
  }
  Tensor out({first.n, channels, first.h, first.w});
  const std::size_t plane = first.plane();
  for (std::size_t n = 0; n < first.n; ++n) {
    double* dst = out.sample(n).data();
    for (const Tensor& p : parts) {
      auto src = p.sample(n);
      std::copy(src.begin(), src.end(), dst);
      dst += p.shape().c * plane;
    }
  }
  return out;
}

std::vector<Tensor> split_channels(const Tensor& t, std::span<const std::size_t> sizes) {
  const Shape& s = t.shape();
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total != s.c) {
    throw ShapeError("split_channels: sizes sum to " + std::to_string(total) + " but tensor has " +
                     std::to_string(s.c) + " channels");
  }
  std::vector<Tensor> out;
  out.reserve(sizes.size());
  for (std::size_t c : sizes) out.emplace_back(Shape{s.n, c, s.h, s.w});
  const std::size_t plane = s.plane();
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* src = t.sample(n).data();
    for (Tensor& part : out) {
      auto dst = part.sample(n);
      std::copy(src, src + dst.size(), dst.begin());
      src += part.shape().c * plane;
    }
  }
  return out;
}

Tensor pad_spatial(const Tensor& t, std::size_t pad) {
  if (pad == 0) return t;
  const Shape& s = t.shape();
  Tensor out({s.n, s.c, s.h + 2 * pad, s.w + 2 * pad});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y) {
        auto src = t.plane(n, c).subspan(y * s.w, s.w);
        std::copy(src.begin(), src.end(), &out.at(n, c, y + pad, pad));
      }
  return out;
}

Tensor crop_spatial(const Tensor& t, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  const Shape& s = t.shape();
  if (y0 + h > s.h || x0 + w > s.w) {
    throw ShapeError("crop_spatial: window exceeds shape " + to_string(s));
  }
  Tensor out({s.n, s.c, h, w});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < h; ++y) {
        const double* src = t.data().data() + t.offset(n, c, y0 + y, x0);
        std::copy(src, src + w, &out.at(n, c, y, 0));
      }
  return out;
}

Tensor slice_batch(const Tensor& t, std::size_t first, std::size_t count) {
  const Shape& s = t.shape();
  if (first + count > s.n) throw ShapeError("slice_batch: range exceeds batch of " + to_string(s));
  const std::size_t len = s.c * s.plane();
  auto src = t.data().subspan(first * len, count * len);
  return Tensor({count, s.c, s.h, s.w}, std::vector<double>(src.begin(), src.end()));
}

Tensor stack_batch(std::span<const Tensor> items) {
  if (items.empty()) throw ShapeError("stack_batch: no items");
  const Shape& s = items[0].shape();
  std::vector<double> data;
  data.reserve(items.size() * s.numel());
  std::size_t n = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Shape& si = items[i].shape();
    if (si.c != s.c || si.h != s.h || si.w != s.w) {
      throw ShapeError("stack_batch: item " + std::to_string(i) + " has shape " + to_string(si));
    }
    data.insert(data.end(), items[i].values().begin(), items[i].values().end());
    n += si.n;
  }
  return Tensor({n, s.c, s.h, s.w}, std::move(data));
}

}  // namespace sbnet
