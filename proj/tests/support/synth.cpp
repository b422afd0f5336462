#include "support/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "unip/errors.hpp"
#include "unip/rng.hpp"

namespace unip::test {

namespace {

using Point = std::pair<double, double>;
using Polyline = std::vector<Point>;

Polyline ellipse(double cx, double cy, double rx, double ry, int k) {
  Polyline p;
  for (int i = 0; i <= k; ++i) {
    const double a = 2.0 * 3.14159265358979323846 * i / k;
    p.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return p;
}

// Skeletons live in a 20x20 box (x right, y down), centered at (10,10).
const std::vector<std::vector<Polyline>>& digit_strokes() {
  static const std::vector<std::vector<Polyline>> strokes = [] {
    std::vector<std::vector<Polyline>> d(10);
    d[0] = {ellipse(10, 10, 5.5, 7.5, 12)};
    d[1] = {{{10, 2.5}, {10, 17.5}},
            {{10, 2.5}, {6.5, 6}},
            {{6.5, 17.5}, {13.5, 17.5}}};
    d[2] = {{{4.5, 6}, {5.5, 3.5}, {8, 2.2}, {12, 2.2}, {14.5, 3.5},
             {15.5, 6}, {14.5, 9}, {4, 17.8}},
            {{4, 17.8}, {16, 17.8}}};
    d[3] = {{{5, 3.5}, {8, 2.2}, {12, 2.2}, {14.5, 4}, {14.5, 7}, {12, 9.5},
             {9, 9.8}},
            {{12, 9.5}, {15, 12}, {15, 15}, {12.5, 17.5}, {8, 17.8},
             {5, 16.5}}};
    d[4] = {{{13, 2.2}, {4, 13}}, {{4, 13}, {17, 13}}, {{13, 2.2}, {13, 17.8}}};
    d[5] = {{{15.5, 2.2}, {5, 2.2}, {5, 9}},
            {{5, 9}, {10, 8}, {14, 9.5}, {15.5, 12.5}, {14, 15.8}, {10, 17.8},
             {5, 16.5}}};
    d[6] = {{{14, 2.2}, {9.5, 4}, {6.5, 8}, {5.2, 12.5}},
            ellipse(10, 13, 4.8, 4.8, 10)};
    d[7] = {{{4, 2.5}, {16, 2.5}}, {{16, 2.5}, {8, 17.8}}};
    d[8] = {ellipse(10, 6.2, 4.2, 3.8, 10), ellipse(10, 13.8, 5.2, 4.2, 10)};
    d[9] = {ellipse(9.8, 7, 4.8, 4.8, 10), {{14.6, 7}, {14, 12}, {11, 17.8}}};
    return d;
  }();
  return strokes;
}

double seg_dist(double px, double py, const Point& a, const Point& b) {
  const double dx = b.first - a.first, dy = b.second - a.second;
  const double l2 = dx * dx + dy * dy;
  double t = l2 > 0.0
                 ? ((px - a.first) * dx + (py - a.second) * dy) / l2
                 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double qx = a.first + t * dx - px;
  const double qy = a.second + t * dy - py;
  return std::sqrt(qx * qx + qy * qy);
}

void put_be32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset make_synth_digits(std::size_t n, std::uint64_t seed, Split split) {
  constexpr std::size_t kSize = 28;
  Dataset ds;
  ds.images = Tensor({n, 1, kSize, kSize});
  ds.labels.resize(n);
  ds.split = split;
  ds.name = "synth-digits";
  Rng rng(seed);

  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 10);
    ds.labels[i] = label;

    const double rot = rng.uniform(-0.40, 0.40);
    const double scale = rng.uniform(0.70, 1.20);
    const double shear = rng.uniform(-0.20, 0.20);
    const double tx = rng.uniform(-3.0, 3.0);
    const double ty = rng.uniform(-3.0, 3.0);
    const double width = rng.uniform(1.0, 2.6);
    const double bright = rng.uniform(0.60, 1.0);
    const double soft = rng.uniform(0.55, 1.25);  // edge falloff sharpness
    // smooth elastic displacement field, two sinusoids per axis
    const double ax1 = rng.uniform(0.3, 1.1), ax2 = rng.uniform(0.2, 0.8);
    const double ay1 = rng.uniform(0.3, 1.1), ay2 = rng.uniform(0.2, 0.8);
    const double fx1 = rng.uniform(0.25, 0.6), fx2 = rng.uniform(0.5, 1.0);
    const double fy1 = rng.uniform(0.25, 0.6), fy2 = rng.uniform(0.5, 1.0);
    const double ph1 = rng.uniform(0.0, 6.2832), ph2 = rng.uniform(0.0, 6.2832);
    const double ph3 = rng.uniform(0.0, 6.2832), ph4 = rng.uniform(0.0, 6.2832);
    // low-frequency ink gradient across the canvas
    const double gx = rng.uniform(-0.012, 0.012);
    const double gy = rng.uniform(-0.012, 0.012);
    const double ca = std::cos(rot), sa = std::sin(rot);

    float* img = ds.images.data() + i * kSize * kSize;
    const auto& strokes = digit_strokes()[label];

    // transform skeleton points into image space once per sample, with
    // per-point wobble so strokes vary in shape, not just in pose
    std::vector<Polyline> placed;
    placed.reserve(strokes.size());
    for (const Polyline& line : strokes) {
      Polyline out;
      out.reserve(line.size());
      for (const Point& p : line) {
        double x = (p.first - 10.0) * scale;
        double y = (p.second - 10.0) * scale;
        x += shear * y;
        const double rx = ca * x - sa * y;
        const double ry = sa * x + ca * y;
        out.push_back({rx + 14.0 + tx + rng.uniform(-0.8, 0.8),
                       ry + 14.0 + ty + rng.uniform(-0.8, 0.8)});
      }
      placed.push_back(std::move(out));
    }

    for (std::size_t py = 0; py < kSize; ++py) {
      for (std::size_t px = 0; px < kSize; ++px) {
        const double cx = px + 0.5, cy = py + 0.5;
        const double ex =
            ax1 * std::sin(fy1 * cy + ph1) + ax2 * std::cos(fx2 * cx + ph2);
        const double ey =
            ay1 * std::sin(fx1 * cx + ph3) + ay2 * std::cos(fy2 * cy + ph4);
        const double sx = cx + ex, sy = cy + ey;
        double d = 1e9;
        for (const Polyline& line : placed) {
          for (std::size_t s = 0; s + 1 < line.size(); ++s) {
            d = std::min(d, seg_dist(sx, sy, line[s], line[s + 1]));
          }
        }
        // solid core of half the stroke width, linear falloff outside
        const double v =
            std::clamp(1.0 - (d - width / 2.0) / (0.9 * soft), 0.0, 1.0);
        const double shade =
            bright * (1.0 - gx * (cx - 14.0) - gy * (cy - 14.0));
        const double pixel = shade * v + 0.045 * rng.normal();
        img[py * kSize + px] =
            static_cast<float>(std::clamp(pixel, 0.0, 1.0));
      }
    }
  }
  return ds;
}

void write_idx_images(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  put_be32(os, 0x00000803);
  put_be32(os, static_cast<std::uint32_t>(ds.size()));
  put_be32(os, static_cast<std::uint32_t>(ds.images.dim(2)));
  put_be32(os, static_cast<std::uint32_t>(ds.images.dim(3)));
  std::vector<unsigned char> bytes(ds.images.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(
        std::lround(std::clamp(ds.images[i], 0.0f, 1.0f) * 255.0f));
  }
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("image write failed: " + path);
}

void write_idx_labels(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  put_be32(os, 0x00000801);
  put_be32(os, static_cast<std::uint32_t>(ds.size()));
  std::vector<unsigned char> bytes(ds.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(ds.labels[i]);
  }
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("label write failed: " + path);
}

std::string ensure_synth_mnist_dir(const std::string& dir,
                                   std::size_t n_train, std::size_t n_val,
                                   std::uint64_t seed) {
  namespace fs = std::filesystem;
  // generator revision; a mismatch wipes the directory, including any model
  // fixtures cached next to the data, so everything regenerates coherently
  constexpr const char* kSynthVersion = "synth-digits v2\n";
  const fs::path root(dir);
  const fs::path marker = root / "VERSION";
  bool fresh = !fs::exists(marker);
  if (!fresh) {
    std::ifstream is(marker);
    std::string text((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
    fresh = text != kSynthVersion;
  }
  if (fresh && fs::exists(root)) fs::remove_all(root);
  fs::create_directories(root);
  const fs::path names[4] = {
      root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte",
      root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte"};
  bool all_present = true;
  for (const fs::path& p : names) {
    if (!fs::exists(p)) all_present = false;
  }
  if (!all_present) {
    const Dataset train = make_synth_digits(n_train, seed, Split::kTrain);
    const Dataset val =
        make_synth_digits(n_val, mix_seed(seed, 0x7e57), Split::kVal);
    write_idx_images(names[0].string(), train);
    write_idx_labels(names[1].string(), train);
    write_idx_images(names[2].string(), val);
    write_idx_labels(names[3].string(), val);
    std::ofstream os(marker);
    os << kSynthVersion;
  }
  return dir;
}

}  // namespace unip::test
