#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sbnet/tensor.hpp"

namespace sbnet {

enum class SceneKind { Flat, Gradient, Checker, Star, Edges };

inline constexpr std::array<SceneKind, 5> kSceneKinds{SceneKind::Flat, SceneKind::Gradient, SceneKind::Checker,
                                                      SceneKind::Star, SceneKind::Edges};
const char* scene_name(SceneKind kind);
SceneKind parse_scene_kind(const std::string& name);

/// Procedural RGB scene (1, 3, size, size) with values in [0, 1]. Checker
/// scenes alternate 0/1 blocks of `checker_period` pixels (0 picks a period
/// from the seed). Star scenes are Siemens stars whose spokes get denser
/// toward the centre.
Tensor gen_clean_scene(SceneKind kind, std::size_t size, std::uint64_t seed, std::size_t checker_period = 0);

/// Single-plane mosaic (1, 1, h, w) in RGGB phase: R at (even, even), G at
/// (even, odd) and (odd, even), B at (odd, odd). h and w are even.
struct BayerImage {
  Tensor plane;

  BayerImage() = default;
  explicit BayerImage(Tensor p);
  std::size_t height() const { return plane.shape().h; }
  std::size_t width() const { return plane.shape().w; }
};

BayerImage mosaic_rggb(const Tensor& rgb);

/// Bilinear demosaic to (1, 3, h, w); used only for previews.
Tensor demosaic_bilinear(const BayerImage& img);

/// Gaussian noise with variance a*x + b.
struct NoiseModel {
  double a = 0.01;
  double b = 0.0001;

  void validate() const;
  double variance(double x) const { return a * x + b; }
};

/// clip(clean + N(0, a*clean + b), 0, 1) per pixel.
BayerImage add_noise(const BayerImage& clean, const NoiseModel& nm, std::uint64_t seed);

/// One element of the 8-way dihedral group: flip_h, then flip_v, then a
/// 90-degree counter-clockwise rotation.
struct AugmentFlags {
  bool flip_h = false;
  bool flip_v = false;
  bool rot90 = false;

  static AugmentFlags from_index(int index);
  int index() const { return (flip_h ? 1 : 0) | (flip_v ? 2 : 0) | (rot90 ? 4 : 0); }
  bool identity() const { return !flip_h && !flip_v && !rot90; }
  friend bool operator==(const AugmentFlags&, const AugmentFlags&) = default;
};

std::array<AugmentFlags, 8> all_augment_flags();

/// Where the phase-corrected window of a transformed plane sits. Any axis
/// whose first sample would not be an R-site is shifted by one and loses two
/// samples.
struct AugmentWindow {
  std::size_t src_h = 0, src_w = 0;  // original plane
  std::size_t row0 = 0, col0 = 0;    // window origin in transformed coordinates
  std::size_t h = 0, w = 0;          // window size
};

AugmentWindow augment_window(AugmentFlags flags, std::size_t h, std::size_t w);

/// Original-plane coordinates of window pixel (i, j).
std::pair<std::size_t, std::size_t> augment_source(const AugmentWindow& win, AugmentFlags flags, std::size_t i,
                                                   std::size_t j);

/// Geometric transform plus phase-restoring crop of a (1, 1, h, w) plane.
Tensor augment_plane(const Tensor& plane, AugmentFlags flags);

/// Applies the same transform and window to both images. With target_h and
/// target_w non-zero the results are further cropped at the origin to that
/// even size (the sampler's common patch size).
std::pair<BayerImage, BayerImage> augment_pair(const BayerImage& noisy, const BayerImage& clean, AugmentFlags flags,
                                               std::size_t target_h = 0, std::size_t target_w = 0);

/// Maps an augmented plane back onto the original (src_h, src_w) grid. Pixels
/// outside the window's footprint are zero; see augment_coverage.
Tensor invert_augment(const Tensor& t, AugmentFlags flags);

struct Rect {
  std::size_t row0 = 0, col0 = 0, h = 0, w = 0;
};

/// Region of the original plane reached by the augmented window.
Rect augment_coverage(AugmentFlags flags, std::size_t h, std::size_t w);

struct DatasetConfig {
  std::size_t count = 64;
  std::size_t size = 64;
  NoiseModel noise;
  std::uint64_t seed = 1;
};

struct SamplePair {
  std::string id;
  SceneKind kind = SceneKind::Flat;
  std::uint64_t scene_seed = 0;
  NoiseModel noise;
  BayerImage noisy;
  BayerImage clean;
};

using Dataset = std::vector<SamplePair>;

/// In-memory generation; pair i uses kind kSceneKinds[i % 5] and seeds
/// derived from (cfg.seed, i).
Dataset generate_dataset(const DatasetConfig& cfg);

/// Writes manifest.txt ("id kind seed a b" per line) plus {id}.noisy.sbt and
/// {id}.clean.sbt into dir.
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset make_dataset(const DatasetConfig& cfg, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// 8-bit RGB PNG; values clipped to [0, 1] then scaled by 255.
void write_png(const std::filesystem::path& path, const Tensor& rgb);

/// Deterministic 64-bit mixer for seed derivation.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace sbnet
