#include "unip/netpbm.hpp"

#include <cmath>
#include <fstream>

#include "unip/errors.hpp"

namespace unip {

namespace {

std::uint8_t quantize(float v, double eps) {
  if (eps <= 0.0) return 128;  // zero ball: delta is identically zero
  const double t = 255.0 * (static_cast<double>(v) + eps) / (2.0 * eps);
  const double r = std::floor(t + 0.5);  // round half up
  if (r <= 0.0) return 0;
  if (r >= 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

int next_token(std::istream& is) {
  // skip whitespace and '#' comments, return next int
  for (;;) {
    int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
      continue;
    }
    if (std::isspace(c)) {
      is.get();
      continue;
    }
    break;
  }
  int v = -1;
  if (!(is >> v)) throw DataError("netpbm: malformed header token");
  return v;
}

}  // namespace

void export_perturbation_image(const Tensor& delta, const NormBall& ball,
                               const std::string& path) {
  if (delta.rank() != 3 || (delta.dim(0) != 1 && delta.dim(0) != 3)) {
    throw UsageError("image export expects (C,H,W) with C in {1,3}, got " +
                     shape_str(delta.shape()));
  }
  const std::size_t c = delta.dim(0), h = delta.dim(1), w = delta.dim(2);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << (c == 1 ? "P5" : "P6") << '\n' << w << ' ' << h << '\n' << 255 << '\n';
  std::vector<std::uint8_t> row(c * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {  // planar -> interleaved
        row[x * c + ch] = quantize(delta[(ch * h + y) * w + x], ball.eps);
      }
    }
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size()));
  }
  os.flush();
  if (!os) throw DataError("image write failed: " + path);
}

NetpbmImage read_netpbm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  std::string magic;
  is >> magic;
  NetpbmImage img;
  if (magic == "P5") {
    img.channels = 1;
  } else if (magic == "P6") {
    img.channels = 3;
  } else {
    throw DataError("netpbm: unsupported magic '" + magic + "' in " + path);
  }
  const int w = next_token(is);
  const int h = next_token(is);
  const int maxval = next_token(is);
  if (w <= 0 || h <= 0) throw DataError("netpbm: bad dimensions in " + path);
  if (maxval != 255) {
    throw DataError("netpbm: expected maxval 255, got " +
                    std::to_string(maxval) + " in " + path);
  }
  is.get();  // single whitespace byte after maxval
  img.width = static_cast<std::size_t>(w);
  img.height = static_cast<std::size_t>(h);
  img.bytes.resize(img.channels * img.width * img.height);
  if (!is.read(reinterpret_cast<char*>(img.bytes.data()),
               static_cast<std::streamsize>(img.bytes.size()))) {
    throw DataError("netpbm: truncated pixel data in " + path);
  }
  return img;
}

Tensor delta_from_image(const NetpbmImage& img, double eps) {
  Tensor out({img.channels, img.height, img.width});
  const std::size_t c = img.channels, h = img.height, w = img.width;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double b = img.bytes[(y * w + x) * c + ch];
        out[(ch * h + y) * w + x] =
            static_cast<float>(b / 255.0 * 2.0 * eps - eps);
      }
    }
  }
  return out;
}

}  // namespace unip
