#include "unip/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "unip/errors.hpp"

namespace unip {

namespace {
constexpr char kMagic[4] = {'U', 'N', 'I', 'P'};
constexpr std::size_t kMaxElems = std::size_t{1} << 30;  // sanity cap

[[noreturn]] void truncated() { throw DataError("checkpoint: truncated file"); }
}  // namespace

void put_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint8_t get_u8(std::istream& is) {
  int c = is.get();
  if (c == std::char_traits<char>::eof()) truncated();
  return static_cast<std::uint8_t>(c);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) truncated();
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) truncated();
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

void write_tensor_block(std::ostream& os, const std::vector<Tensor>& tensors) {
  os.write(kMagic, 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  std::vector<unsigned char> buf;
  for (const Tensor& t : tensors) {
    put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(os, static_cast<std::uint32_t>(d));
    buf.resize(t.size() * 4);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::uint32_t u = std::bit_cast<std::uint32_t>(t[i]);
      buf[4 * i] = static_cast<unsigned char>(u);
      buf[4 * i + 1] = static_cast<unsigned char>(u >> 8);
      buf[4 * i + 2] = static_cast<unsigned char>(u >> 16);
      buf[4 * i + 3] = static_cast<unsigned char>(u >> 24);
    }
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size()));
  }
  if (!os) throw DataError("checkpoint: write failed");
}

std::vector<Tensor> read_tensor_block(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4)) truncated();
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("checkpoint: bad magic (not a UNIP file)");
  }
  const std::uint32_t version = get_u32(is);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " +
                    std::to_string(version));
  }
  const std::uint32_t count = get_u32(is);
  std::vector<Tensor> out;
  out.reserve(count);
  std::vector<unsigned char> buf;
  for (std::uint32_t ti = 0; ti < count; ++ti) {
    const std::uint32_t rank = get_u32(is);
    if (rank > 8) throw DataError("checkpoint: implausible tensor rank");
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape[r] = get_u32(is);
      if (shape[r] == 0 || n > kMaxElems / std::max<std::size_t>(shape[r], 1)) {
        throw DataError("checkpoint: implausible tensor shape");
      }
      n *= shape[r];
    }
    buf.resize(n * 4);
    if (!is.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size()))) {
      truncated();
    }
    Tensor t(shape);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t u = static_cast<std::uint32_t>(buf[4 * i]) |
                              (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                              (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                              (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
      t[i] = std::bit_cast<float>(u);
    }
    out.push_back(std::move(t));
  }
  return out;
}

void save_params(const std::string& path, const std::vector<Tensor>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  write_tensor_block(os, tensors);
  os.flush();
  if (!os) throw DataError("checkpoint: write failed: " + path);
}

std::vector<Tensor> load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  return read_tensor_block(is);
}

void save_model_params(const std::string& path, const Model& m) {
  save_params(path, m.params);
}

void load_model_params(const std::string& path, Model& m) {
  std::vector<Tensor> loaded = load_params(path);
  if (loaded.size() != m.params.size()) {
    throw DataError("checkpoint: has " + std::to_string(loaded.size()) +
                    " tensors, model expects " +
                    std::to_string(m.params.size()));
  }
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    if (!loaded[i].same_shape(m.params[i])) {
      throw DataError("checkpoint: tensor " + std::to_string(i) + " shape " +
                      shape_str(loaded[i].shape()) + ", model expects " +
                      shape_str(m.params[i].shape()));
    }
  }
  m.params = std::move(loaded);
}

}  // namespace unip
