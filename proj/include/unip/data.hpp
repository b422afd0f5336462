#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unip/rng.hpp"
#include "unip/tensor.hpp"

namespace unip {

enum class Split { kTrain, kVal };

struct Dataset {
  Tensor images;            // (N,C,H,W), values in [0,1]
  std::vector<int> labels;  // length N
  Split split = Split::kTrain;
  std::string name;

  std::size_t size() const { return labels.size(); }
  std::vector<std::size_t> example_shape() const {
    return {images.dim(1), images.dim(2), images.dim(3)};
  }
};

// MNIST IDX pair (big-endian, magic 2051 images / 2049 labels).
Dataset load_mnist(const std::string& images_path,
                   const std::string& labels_path, Split split = Split::kTrain,
                   const std::string& name = "mnist");

// CIFAR-10 binary batches in dir: data_batch_{1..5}.bin for train,
// test_batch.bin for val. 3073-byte records, label byte then RGB planes.
Dataset load_cifar10(const std::string& dir, Split split = Split::kTrain);

// Uniform sample of n examples without replacement; deterministic in seed.
Dataset subset(const Dataset& ds, std::size_t n, std::uint64_t seed);

struct BatchPlan {
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  bool shuffle = true;
  std::size_t epochs = 1;
};

struct Batch {
  Tensor images;                     // (B,C,H,W)
  std::vector<int> labels;           // length B
  std::vector<std::size_t> indices;  // positions in the source dataset
};

// Deterministic minibatch sequence over plan.epochs epochs. Each epoch is a
// fresh shuffle seeded with plan.seed + epoch index; the short final batch is
// kept.
class BatchStream {
 public:
  BatchStream(const Dataset& ds, BatchPlan plan);

  bool done() const;
  Batch next();  // throws UsageError when exhausted
  std::size_t batches_per_epoch() const;
  std::size_t epoch() const { return epoch_; }

 private:
  void start_epoch();

  const Dataset* ds_;
  BatchPlan plan_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::size_t epoch_ = 0;
};

// Gather rows into a batch tensor (also used by eval and the attacks).
Batch gather(const Dataset& ds, const std::vector<std::size_t>& indices);

}  // namespace unip
