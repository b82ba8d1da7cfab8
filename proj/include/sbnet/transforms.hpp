#pragma once

#include <array>

#include "sbnet/autodiff.hpp"
#include "sbnet/tensor.hpp"

namespace sbnet {

enum class Band : std::size_t { LL = 0, LH = 1, HL = 2, HH = 3 };

inline constexpr std::array<Band, 4> kBands{Band::LL, Band::LH, Band::HL, Band::HH};
const char* band_name(Band b);

/// The four outputs of a 2x2 Haar analysis, each (n, c, h/2, w/2).
struct SubBands {
  Tensor ll, lh, hl, hh;

  Tensor& operator[](Band b);
  const Tensor& operator[](Band b) const;
};

struct SubBandVars {
  Var ll, lh, hl, hh;

  Var& operator[](Band b);
  Var operator[](Band b) const;
};

// Orthonormal 2x2 Haar with filters (row-major over the 2x2 cell)
//   LL = 1/2 [[1, 1], [ 1,  1]]   LH = 1/2 [[1,  1], [-1, -1]]
//   HL = 1/2 [[1,-1], [ 1, -1]]   HH = 1/2 [[1, -1], [-1,  1]]
// applied per channel with stride 2.
SubBands dwt2_haar(const Tensor& x);
Tensor idwt2_haar(const SubBands& bands);

SubBandVars dwt2_haar(Tape& t, Var x);
Var idwt2_haar(Tape& t, const SubBandVars& bands);

// Orthonormal 2-D DCT-II over each full h x w plane.
Tensor dct2(const Tensor& x);
Tensor idct2(const Tensor& coeffs);

Var dct2(Tape& t, Var x);

// (n, c, h, w) -> (n, c*r*r, h/r, w/r). Output channel (dy*r + dx)*c + ci holds
// input channel ci at cell phase (dy, dx); for a 1-channel RGGB mosaic the
// four channels are R, G1, G2, B.
Tensor space_to_depth(const Tensor& x, std::size_t r = 2);
Tensor depth_to_space(const Tensor& x, std::size_t r = 2);

Var space_to_depth(Tape& t, Var x, std::size_t r = 2);
Var depth_to_space(Tape& t, Var x, std::size_t r = 2);

}  // namespace sbnet
