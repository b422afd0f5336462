#pragma once

#include <cstdint>
#include <string>

#include "unip/data.hpp"

namespace unip::test {

// Deterministic 28x28 grayscale digit dataset: ten fixed stroke skeletons
// rendered with per-sample affine jitter, stroke width, brightness and noise.
// Stands in for MNIST when the real files are absent; learnable by the small
// conv nets to high accuracy yet non-trivial.
Dataset make_synth_digits(std::size_t n, std::uint64_t seed, Split split);

void write_idx_images(const std::string& path, const Dataset& ds);
void write_idx_labels(const std::string& path, const Dataset& ds);

// Writes the four canonical MNIST-format files under dir if missing, so the
// normal IDX loading path is exercised end to end. Returns dir.
std::string ensure_synth_mnist_dir(const std::string& dir,
                                   std::size_t n_train = 12000,
                                   std::size_t n_val = 2000,
                                   std::uint64_t seed = 20260815ull);

}  // namespace unip::test
