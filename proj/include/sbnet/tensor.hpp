#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbnet {

/// Rejected input: shape, range or configuration violations.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Filesystem or stream failure. Carries the offending path in the message.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);
std::ostream& operator<<(std::ostream& os, const Shape& s);

/// Dense NCHW tensor of doubles, row-major with w fastest.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }
  static Tensor scalar(double v) { return Tensor({1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data_[offset(n, c, y, x)];
  }
  double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[offset(n, c, y, x)];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Contiguous h*w plane of channel c in sample n.
  std::span<double> plane(std::size_t n, std::size_t c) {
    return std::span<double>(data_).subspan(offset(n, c, 0, 0), shape_.plane());
  }
  std::span<const double> plane(std::size_t n, std::size_t c) const {
    return std::span<const double>(data_).subspan(offset(n, c, 0, 0), shape_.plane());
  }
  /// All channels of sample n.
  std::span<double> sample(std::size_t n) {
    const std::size_t len = shape_.c * shape_.plane();
    return std::span<double>(data_).subspan(n * len, len);
  }
  std::span<const double> sample(std::size_t n) const {
    const std::size_t len = shape_.c * shape_.plane();
    return std::span<const double>(data_).subspan(n * len, len);
  }

  double scalar_value() const;
  double sum() const;
  double squared_norm() const;
  bool all_finite() const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);

/// Channel-wise concatenation. All parts must share n, h, w.
Tensor concat_channels(std::span<const Tensor> parts);

/// Inverse of concat_channels; sizes must sum to t.c.
std::vector<Tensor> split_channels(const Tensor& t, std::span<const std::size_t> sizes);

/// Zero padding by `pad` on all four spatial borders.
Tensor pad_spatial(const Tensor& t, std::size_t pad);

/// Spatial window [y0, y0+h) x [x0, x0+w) of every channel.
Tensor crop_spatial(const Tensor& t, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);

/// Samples [first, first+count) of a batch.
Tensor slice_batch(const Tensor& t, std::size_t first, std::size_t count);

/// Stack equally shaped tensors along n.
Tensor stack_batch(std::span<const Tensor> items);

}  // namespace sbnet
