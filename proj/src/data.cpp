#include "unip/data.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "unip/errors.hpp"

namespace unip {

namespace {

std::uint32_t get_be32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError("truncated file while reading " + what);
  }
  return (static_cast<std::uint32_t>(b[0]) << 24) |
         (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) |
         static_cast<std::uint32_t>(b[3]);
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  return is;
}

}  // namespace

Dataset load_mnist(const std::string& images_path,
                   const std::string& labels_path, Split split,
                   const std::string& name) {
  std::ifstream imgs = open_binary(images_path);
  const std::uint32_t img_magic = get_be32(imgs, "image magic");
  if (img_magic != 0x00000803) {
    throw DataError("IDX magic mismatch in " + images_path + ": got " +
                    std::to_string(img_magic) + ", expected 2051 (images)");
  }
  const std::uint32_t n = get_be32(imgs, "image count");
  const std::uint32_t rows = get_be32(imgs, "row count");
  const std::uint32_t cols = get_be32(imgs, "column count");
  if (n == 0 || rows == 0 || cols == 0) {
    throw DataError("IDX header with zero dimension in " + images_path);
  }

  std::ifstream labs = open_binary(labels_path);
  const std::uint32_t lab_magic = get_be32(labs, "label magic");
  if (lab_magic != 0x00000801) {
    throw DataError("IDX magic mismatch in " + labels_path + ": got " +
                    std::to_string(lab_magic) + ", expected 2049 (labels)");
  }
  const std::uint32_t n_lab = get_be32(labs, "label count");
  if (n_lab != n) {
    throw DataError("IDX count mismatch: " + std::to_string(n) + " images vs " +
                    std::to_string(n_lab) + " labels");
  }

  const std::size_t px = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> raw(static_cast<std::size_t>(n) * px);
  if (!imgs.read(reinterpret_cast<char*>(raw.data()),
                 static_cast<std::streamsize>(raw.size()))) {
    throw DataError("truncated image data in " + images_path);
  }
  std::vector<unsigned char> raw_labels(n);
  if (!labs.read(reinterpret_cast<char*>(raw_labels.data()), n)) {
    throw DataError("truncated label data in " + labels_path);
  }

  Dataset ds;
  ds.images = Tensor({n, 1, rows, cols});
  for (std::size_t i = 0; i < raw.size(); ++i) {
    ds.images[i] = static_cast<float>(raw[i]) / 255.0f;
  }
  ds.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (raw_labels[i] > 9) {
      throw DataError("label byte " + std::to_string(raw_labels[i]) +
                      " out of range at example " + std::to_string(i));
    }
    ds.labels[i] = raw_labels[i];
  }
  ds.split = split;
  ds.name = name;
  return ds;
}

Dataset load_cifar10(const std::string& dir, Split split) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  if (split == Split::kTrain) {
    for (int i = 1; i <= 5; ++i) {
      files.push_back((fs::path(dir) / ("data_batch_" + std::to_string(i) +
                                        ".bin")).string());
    }
  } else {
    files.push_back((fs::path(dir) / "test_batch.bin").string());
  }

  constexpr std::size_t kRecord = 3073;  // label + 3*32*32
  constexpr std::size_t kPixels = 3072;
  std::vector<unsigned char> raw;
  for (const std::string& f : files) {
    std::ifstream is = open_binary(f);
    is.seekg(0, std::ios::end);
    const std::streamoff sz = is.tellg();
    if (sz <= 0 || static_cast<std::size_t>(sz) % kRecord != 0) {
      throw DataError("CIFAR batch size " + std::to_string(sz) +
                      " is not a multiple of 3073-byte records: " + f);
    }
    is.seekg(0, std::ios::beg);
    const std::size_t off = raw.size();
    raw.resize(off + static_cast<std::size_t>(sz));
    if (!is.read(reinterpret_cast<char*>(raw.data() + off), sz)) {
      throw DataError("truncated CIFAR batch: " + f);
    }
  }

  const std::size_t n = raw.size() / kRecord;
  Dataset ds;
  ds.images = Tensor({n, 3, 32, 32});
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* rec = raw.data() + i * kRecord;
    if (rec[0] > 9) {
      throw DataError("CIFAR label byte " + std::to_string(rec[0]) +
                      " out of range at record " + std::to_string(i));
    }
    ds.labels[i] = rec[0];
    float* dst = ds.images.data() + i * kPixels;
    for (std::size_t j = 0; j < kPixels; ++j) {
      dst[j] = static_cast<float>(rec[1 + j]) / 255.0f;
    }
  }
  ds.split = split;
  ds.name = "cifar10";
  return ds;
}

Batch gather(const Dataset& ds, const std::vector<std::size_t>& indices) {
  const std::size_t ex = ds.images.size() / ds.size();
  Batch b;
  std::vector<std::size_t> shape = ds.images.shape();
  shape[0] = indices.size();
  b.images = Tensor(shape);
  b.labels.resize(indices.size());
  b.indices = indices;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= ds.size()) {
      throw UsageError("batch index " + std::to_string(src) +
                       " out of range (dataset size " +
                       std::to_string(ds.size()) + ")");
    }
    std::copy(ds.images.data() + src * ex, ds.images.data() + (src + 1) * ex,
              b.images.data() + i * ex);
    b.labels[i] = ds.labels[src];
  }
  return b;
}

Dataset subset(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  if (n > ds.size()) {
    throw UsageError("subset of " + std::to_string(n) + " from dataset of " +
                     std::to_string(ds.size()));
  }
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(
                                  static_cast<std::uint64_t>(idx.size() - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);

  Batch b = gather(ds, idx);
  Dataset out;
  out.images = std::move(b.images);
  out.labels = std::move(b.labels);
  out.split = ds.split;
  out.name = ds.name;
  return out;
}

BatchStream::BatchStream(const Dataset& ds, BatchPlan plan)
    : ds_(&ds), plan_(plan) {
  if (plan_.batch_size == 0 || plan_.batch_size > ds.size()) {
    throw UsageError("batch size " + std::to_string(plan_.batch_size) +
                     " invalid for dataset of " + std::to_string(ds.size()));
  }
  if (plan_.epochs == 0) throw UsageError("epochs must be positive");
  start_epoch();
}

void BatchStream::start_epoch() {
  order_.resize(ds_->size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (plan_.shuffle) {
    Rng rng(plan_.seed + static_cast<std::uint64_t>(epoch_));
    rng.shuffle(order_);
  }
  pos_ = 0;
}

std::size_t BatchStream::batches_per_epoch() const {
  return (ds_->size() + plan_.batch_size - 1) / plan_.batch_size;
}

bool BatchStream::done() const { return epoch_ >= plan_.epochs; }

Batch BatchStream::next() {
  if (done()) throw UsageError("batch stream exhausted");
  const std::size_t end = std::min(pos_ + plan_.batch_size, order_.size());
  std::vector<std::size_t> idx(order_.begin() + pos_, order_.begin() + end);
  Batch b = gather(*ds_, idx);
  pos_ = end;
  if (pos_ >= order_.size()) {
    ++epoch_;
    if (!done()) start_epoch();
  }
  return b;
}

}  // namespace unip
