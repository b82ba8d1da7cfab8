#pragma once

#include <filesystem>
#include <iosfwd>

#include "sbnet/tensor.hpp"

namespace sbnet {

// SBT1 record layout (all little-endian):
//   "SBT1" | u32 n | u32 c | u32 h | u32 w | u8 dtype | values row-major
// dtype 0 stores f64, dtype 1 stores f32.
enum class DType : std::uint8_t { F64 = 0, F32 = 1 };

void write_tensor(std::ostream& os, const Tensor& t, DType dtype = DType::F64);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype = DType::F64);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace sbnet
