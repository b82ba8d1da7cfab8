#include "sbnet/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace sbnet {
namespace {

constexpr std::array<char, 4> kMagic{'S', 'B', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "SBT1 I/O assumes a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

std::uint32_t checked_dim(std::size_t d) {
  if (d > std::numeric_limits<std::uint32_t>::max()) throw ShapeError("SBT1: dimension exceeds u32");
  return static_cast<std::uint32_t>(d);
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t, DType dtype) {
  const Shape& s = t.shape();
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, checked_dim(s.n));
  put_u32(os, checked_dim(s.c));
  put_u32(os, checked_dim(s.h));
  put_u32(os, checked_dim(s.w));
  const auto tag = static_cast<std::uint8_t>(dtype);
  os.write(reinterpret_cast<const char*>(&tag), 1);
  if (dtype == DType::F64) {
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  } else {
    for (double v : t.data()) {
      const auto f = static_cast<float>(v);
      os.write(reinterpret_cast<const char*>(&f), sizeof f);
    }
  }
  if (!os) throw IoError("SBT1: write failed");
}

Tensor read_tensor(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw IoError("SBT1: bad magic");
  Shape s;
  s.n = get_u32(is);
  s.c = get_u32(is);
  s.h = get_u32(is);
  s.w = get_u32(is);
  std::uint8_t tag = 0xff;
  is.read(reinterpret_cast<char*>(&tag), 1);
  if (!is) throw IoError("SBT1: truncated header");
  Tensor t(s);
  if (tag == static_cast<std::uint8_t>(DType::F64)) {
    is.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
  } else if (tag == static_cast<std::uint8_t>(DType::F32)) {
    std::vector<float> buf(t.size());
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    for (std::size_t i = 0; i < buf.size(); ++i) t[i] = buf[i];
  } else {
    throw IoError("SBT1: unknown dtype tag " + std::to_string(tag));
  }
  if (!is) throw IoError("SBT1: truncated payload");
  return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  try {
    write_tensor(os, t, dtype);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  try {
    return read_tensor(is);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace sbnet
