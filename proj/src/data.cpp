#include "sbnet/data.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include "sbnet/tensor_io.hpp"

namespace sbnet {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined state.
  std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

const char* scene_name(SceneKind kind) {
  switch (kind) {
    case SceneKind::Flat: return "flat";
    case SceneKind::Gradient: return "gradient";
    case SceneKind::Checker: return "checker";
    case SceneKind::Star: return "star";
    case SceneKind::Edges: return "edges";
  }
  return "?";
}

SceneKind parse_scene_kind(const std::string& name) {
  for (SceneKind k : kSceneKinds)
    if (name == scene_name(k)) return k;
  throw ShapeError("unknown scene kind '" + name + "'");
}

namespace {

using Rgb = std::array<double, 3>;

Rgb random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  return {u(rng), u(rng), u(rng)};
}

void set_pixel(Tensor& img, std::size_t y, std::size_t x, const Rgb& c) {
  for (std::size_t ch = 0; ch < 3; ++ch) img.at(0, ch, y, x) = c[ch];
}

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

}  // namespace

Tensor gen_clean_scene(SceneKind kind, std::size_t size, std::uint64_t seed, std::size_t checker_period) {
  if (size == 0 || size % 2 != 0) throw ShapeError("gen_clean_scene: size must be even and positive");
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(kind)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tensor img({1, 3, size, size});
  const double s = static_cast<double>(size);

  switch (kind) {
    case SceneKind::Flat: {
      const Rgb c = random_color(rng);
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) set_pixel(img, y, x, c);
      break;
    }
    case SceneKind::Gradient: {
      const Rgb c0 = random_color(rng);
      const Rgb c1 = random_color(rng);
      const double theta = 2.0 * std::numbers::pi * unit(rng);
      const double dx = std::cos(theta), dy = std::sin(theta);
      const double span = (std::abs(dx) + std::abs(dy)) * (s - 1.0);
      const double lo = std::min(0.0, dx * (s - 1.0)) + std::min(0.0, dy * (s - 1.0));
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
          const double proj = dx * static_cast<double>(x) + dy * static_cast<double>(y);
          set_pixel(img, y, x, lerp(c0, c1, span > 0.0 ? (proj - lo) / span : 0.0));
        }
      break;
    }
    case SceneKind::Checker: {
      const std::size_t period = checker_period > 0 ? checker_period : 2 + rng() % 7;
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
          const double v = ((y / period + x / period) % 2 == 0) ? 0.0 : 1.0;
          set_pixel(img, y, x, {v, v, v});
        }
      break;
    }
    case SceneKind::Star: {
      const Rgb dark = lerp(random_color(rng), Rgb{0, 0, 0}, 0.6);
      const Rgb light = lerp(random_color(rng), Rgb{1, 1, 1}, 0.6);
      const double spokes = static_cast<double>(8 + rng() % 17);
      const double phase = 2.0 * std::numbers::pi * unit(rng);
      const double cy = s / 2.0 + (unit(rng) - 0.5) * s / 4.0;
      const double cx = s / 2.0 + (unit(rng) - 0.5) * s / 4.0;
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
          const double a = std::atan2(static_cast<double>(y) + 0.5 - cy, static_cast<double>(x) + 0.5 - cx);
          set_pixel(img, y, x, std::sin(spokes * a + phase) >= 0.0 ? light : dark);
        }
      break;
    }
    case SceneKind::Edges: {
      const Rgb bg = random_color(rng);
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) set_pixel(img, y, x, bg);
      const int shapes = 3 + static_cast<int>(rng() % 4);
      for (int k = 0; k < shapes; ++k) {
        const Rgb c = random_color(rng);
        if (rng() % 2 == 0) {
          // Axis-aligned rectangle.
          const double y0 = unit(rng) * s, y1 = unit(rng) * s, x0 = unit(rng) * s, x1 = unit(rng) * s;
          for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
              const double fy = static_cast<double>(y), fx = static_cast<double>(x);
              if (fy >= std::min(y0, y1) && fy < std::max(y0, y1) && fx >= std::min(x0, x1) && fx < std::max(x0, x1)) {
                set_pixel(img, y, x, c);
              }
            }
        } else {
          // Oblique half-plane.
          const double theta = 2.0 * std::numbers::pi * unit(rng);
          const double px = unit(rng) * s, py = unit(rng) * s;
          for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
              const double d = (static_cast<double>(x) - px) * std::cos(theta) + (static_cast<double>(y) - py) * std::sin(theta);
              if (d > 0.0) set_pixel(img, y, x, c);
            }
        }
      }
      break;
    }
  }
  return img;
}

BayerImage::BayerImage(Tensor p) : plane(std::move(p)) {
  const Shape& s = plane.shape();
  if (s.n != 1 || s.c != 1 || s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("Bayer plane must be (1,1,even,even), got " + to_string(s));
  }
}

BayerImage mosaic_rggb(const Tensor& rgb) {
  const Shape& s = rgb.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError("mosaic_rggb: expected (1,3,h,w), got " + to_string(s));
  if (s.h % 2 != 0 || s.w % 2 != 0) throw ShapeError("mosaic_rggb: dims must be even, got " + to_string(s));
  Tensor plane({1, 1, s.h, s.w});
  for (std::size_t y = 0; y < s.h; ++y)
    for (std::size_t x = 0; x < s.w; ++x) {
      const std::size_t ch = (y % 2 == 0 && x % 2 == 0) ? 0 : (y % 2 == 1 && x % 2 == 1) ? 2 : 1;
      plane.at(0, 0, y, x) = rgb.at(0, ch, y, x);
    }
  return BayerImage(std::move(plane));
}

Tensor demosaic_bilinear(const BayerImage& img) {
  const std::size_t h = img.height(), w = img.width();
  Tensor rgb({1, 3, h, w});
  auto color_at = [](std::size_t y, std::size_t x) -> std::size_t {
    return (y % 2 == 0 && x % 2 == 0) ? 0 : (y % 2 == 1 && x % 2 == 1) ? 2 : 1;
  };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < 3; ++ch) {
        if (color_at(y, x) == ch) {
          rgb.at(0, ch, y, x) = img.plane.at(0, 0, y, x);
          continue;
        }
        double acc = 0.0;
        int count = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const auto yy = static_cast<std::ptrdiff_t>(y) + dy;
            const auto xx = static_cast<std::ptrdiff_t>(x) + dx;
            if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(h) || xx >= static_cast<std::ptrdiff_t>(w)) continue;
            const auto uy = static_cast<std::size_t>(yy), ux = static_cast<std::size_t>(xx);
            if (color_at(uy, ux) != ch) continue;
            // Greens: only 4-neighbours.
            if (ch == 1 && dy != 0 && dx != 0) continue;
            acc += img.plane.at(0, 0, uy, ux);
            ++count;
          }
        rgb.at(0, ch, y, x) = count > 0 ? acc / count : 0.0;
      }
  return rgb;
}

void NoiseModel::validate() const {
  if (!(a >= 0.0 && b >= 0.0)) throw ShapeError("noise model requires a >= 0 and b >= 0");
}

BayerImage add_noise(const BayerImage& clean, const NoiseModel& nm, std::uint64_t seed) {
  nm.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Tensor out = clean.plane;
  for (double& v : out.data()) {
    const double sd = std::sqrt(std::max(0.0, nm.variance(v)));
    v = std::clamp(v + sd * gauss(rng), 0.0, 1.0);
  }
  return BayerImage(std::move(out));
}

AugmentFlags AugmentFlags::from_index(int index) {
  if (index < 0 || index > 7) throw ShapeError("augment flags index must be in [0, 8), got " + std::to_string(index));
  return {(index & 1) != 0, (index & 2) != 0, (index & 4) != 0};
}

std::array<AugmentFlags, 8> all_augment_flags() {
  std::array<AugmentFlags, 8> out;
  for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = AugmentFlags::from_index(i);
  return out;
}

namespace {

// Source pixel of transformed (full, uncropped) coordinate (i, j).
std::pair<std::size_t, std::size_t> full_source(AugmentFlags f, std::size_t h, std::size_t w, std::size_t i,
                                                std::size_t j) {
  std::size_t r = i, c = j;
  if (f.rot90) {
    r = j;
    c = w - 1 - i;
  }
  if (f.flip_v) r = h - 1 - r;
  if (f.flip_h) c = w - 1 - c;
  return {r, c};
}

void require_even(std::size_t h, std::size_t w, const char* op) {
  if (h < 2 || w < 2 || h % 2 != 0 || w % 2 != 0) {
    throw ShapeError(std::string(op) + ": plane must have even dims >= 2, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
}

}  // namespace

AugmentWindow augment_window(AugmentFlags flags, std::size_t h, std::size_t w) {
  require_even(h, w, "augment");
  AugmentWindow win;
  win.src_h = h;
  win.src_w = w;
  const std::size_t th = flags.rot90 ? w : h;
  const std::size_t tw = flags.rot90 ? h : w;
  const auto [r0, c0] = full_source(flags, h, w, 0, 0);
  // With rot90 the transformed row axis walks original columns and vice versa.
  const bool row_odd = flags.rot90 ? (c0 % 2 == 1) : (r0 % 2 == 1);
  const bool col_odd = flags.rot90 ? (r0 % 2 == 1) : (c0 % 2 == 1);
  win.row0 = row_odd ? 1 : 0;
  win.col0 = col_odd ? 1 : 0;
  win.h = th - 2 * win.row0;
  win.w = tw - 2 * win.col0;
  if (win.h == 0 || win.w == 0) {
    throw ShapeError("augment: plane too small for phase-shift crop (minimum 4x4), got " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  return win;
}

std::pair<std::size_t, std::size_t> augment_source(const AugmentWindow& win, AugmentFlags flags, std::size_t i,
                                                   std::size_t j) {
  return full_source(flags, win.src_h, win.src_w, i + win.row0, j + win.col0);
}

Tensor augment_plane(const Tensor& plane, AugmentFlags flags) {
  const Shape& s = plane.shape();
  if (s.n != 1 || s.c != 1) throw ShapeError("augment_plane: expected (1,1,h,w), got " + to_string(s));
  const AugmentWindow win = augment_window(flags, s.h, s.w);
  Tensor out({1, 1, win.h, win.w});
  for (std::size_t i = 0; i < win.h; ++i)
    for (std::size_t j = 0; j < win.w; ++j) {
      const auto [r, c] = augment_source(win, flags, i, j);
      out.at(0, 0, i, j) = plane.at(0, 0, r, c);
    }
  return out;
}

std::pair<BayerImage, BayerImage> augment_pair(const BayerImage& noisy, const BayerImage& clean, AugmentFlags flags,
                                               std::size_t target_h, std::size_t target_w) {
  if (noisy.plane.shape() != clean.plane.shape()) {
    throw ShapeError("augment_pair: noisy " + to_string(noisy.plane.shape()) + " vs clean " +
                     to_string(clean.plane.shape()));
  }
  Tensor a = augment_plane(noisy.plane, flags);
  Tensor b = augment_plane(clean.plane, flags);
  if (target_h != 0 || target_w != 0) {
    const Shape& s = a.shape();
    if (target_h % 2 != 0 || target_w % 2 != 0 || target_h > s.h || target_w > s.w) {
      throw ShapeError("augment_pair: target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                       " must be even and fit in " + to_string(s));
    }
    a = crop_spatial(a, 0, 0, target_h, target_w);
    b = crop_spatial(b, 0, 0, target_h, target_w);
  }
  return {BayerImage(std::move(a)), BayerImage(std::move(b))};
}

Tensor invert_augment(const Tensor& t, AugmentFlags flags) {
  const Shape& s = t.shape();
  if (s.n != 1 || s.c != 1) throw ShapeError("invert_augment: expected (1,1,h,w), got " + to_string(s));
  // Shifts depend only on the flags for even planes.
  const AugmentWindow probe = augment_window(flags, 4, 4);
  const std::size_t th = s.h + 2 * probe.row0;
  const std::size_t tw = s.w + 2 * probe.col0;
  const std::size_t h = flags.rot90 ? tw : th;
  const std::size_t w = flags.rot90 ? th : tw;
  const AugmentWindow win = augment_window(flags, h, w);
  Tensor out({1, 1, h, w});
  for (std::size_t i = 0; i < win.h; ++i)
    for (std::size_t j = 0; j < win.w; ++j) {
      const auto [r, c] = augment_source(win, flags, i, j);
      out.at(0, 0, r, c) = t.at(0, 0, i, j);
    }
  return out;
}

Rect augment_coverage(AugmentFlags flags, std::size_t h, std::size_t w) {
  const AugmentWindow win = augment_window(flags, h, w);
  // A shifted transformed axis drops the first and last sample of the
  // original axis it walks.
  const bool rows_cut = flags.rot90 ? win.col0 == 1 : win.row0 == 1;
  const bool cols_cut = flags.rot90 ? win.row0 == 1 : win.col0 == 1;
  Rect r;
  r.row0 = rows_cut ? 1 : 0;
  r.col0 = cols_cut ? 1 : 0;
  r.h = h - 2 * r.row0;
  r.w = w - 2 * r.col0;
  return r;
}

Dataset generate_dataset(const DatasetConfig& cfg) {
  cfg.noise.validate();
  if (cfg.size < 4 || cfg.size % 2 != 0) throw ShapeError("dataset: image size must be even and >= 4");
  Dataset out;
  out.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    SamplePair p;
    char id[16];
    std::snprintf(id, sizeof id, "%06zu", i);
    p.id = id;
    p.kind = kSceneKinds[i % kSceneKinds.size()];
    p.scene_seed = mix_seed(cfg.seed, 2 * i);
    p.noise = cfg.noise;
    p.clean = mosaic_rggb(gen_clean_scene(p.kind, cfg.size, p.scene_seed));
    p.noisy = add_noise(p.clean, cfg.noise, mix_seed(cfg.seed, 2 * i + 1));
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw IoError("cannot write " + (dir / "manifest.txt").string());
  for (const SamplePair& p : data) {
    manifest << p.id << ' ' << scene_name(p.kind) << ' ' << p.scene_seed << ' ' << format_double(p.noise.a) << ' '
             << format_double(p.noise.b) << '\n';
    save_tensor(dir / (p.id + ".noisy.sbt"), p.noisy.plane);
    save_tensor(dir / (p.id + ".clean.sbt"), p.clean.plane);
  }
  if (!manifest) throw IoError("write failed: " + (dir / "manifest.txt").string());
}

Dataset make_dataset(const DatasetConfig& cfg, const std::filesystem::path& dir) {
  Dataset data = generate_dataset(cfg);
  write_dataset(dir, data);
  return data;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw IoError("cannot open " + (dir / "manifest.txt").string());
  Dataset out;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    SamplePair p;
    std::string kind;
    if (!(ls >> p.id >> kind >> p.scene_seed >> p.noise.a >> p.noise.b)) {
      throw IoError((dir / "manifest.txt").string() + ": malformed line '" + line + "'");
    }
    p.kind = parse_scene_kind(kind);
    p.noisy = BayerImage(load_tensor(dir / (p.id + ".noisy.sbt")));
    p.clean = BayerImage(load_tensor(dir / (p.id + ".clean.sbt")));
    out.push_back(std::move(p));
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Tensor& rgb) {
  const Shape& s = rgb.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError("write_png: expected (1,3,h,w), got " + to_string(s));
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed for " + path.string());
  }
  std::vector<png_byte> row(s.w * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(s.w), static_cast<png_uint_32>(s.h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < s.h; ++y) {
    for (std::size_t x = 0; x < s.w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(rgb.at(0, c, y, x), 0.0, 1.0);
        row[x * 3 + c] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace sbnet
