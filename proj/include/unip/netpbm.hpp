#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unip/attacks.hpp"
#include "unip/tensor.hpp"

namespace unip {

// Binary PGM (P5) for 1-channel deltas, PPM (P6) for 3-channel, maxval 255.
// Affine map [-eps, eps] -> [0, 255], round half up, so a zero delta is
// mid-gray 128 and +eps saturates at 255.
void export_perturbation_image(const Tensor& delta, const NormBall& ball,
                               const std::string& path);

struct NetpbmImage {
  std::size_t channels = 0;  // 1 or 3
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bytes;  // interleaved for 3 channels
};

NetpbmImage read_netpbm(const std::string& path);

// Inverse of the export map; recovers delta up to quantization (within
// eps/127.5 of the original).
Tensor delta_from_image(const NetpbmImage& img, double eps);

}  // namespace unip
