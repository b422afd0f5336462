#pragma once

#include <string>

#include "unip/data.hpp"
#include "unip/nn.hpp"

namespace unip::test {

// Shared test data, materialized once per build directory (tests run with
// the build dir as cwd, so artifacts land next to the binaries).

struct DataFixture {
  Dataset train;
  Dataset val;
  std::string dir;   // IDX files live here, usable as --data-dir
  bool real = false; // true when loaded from a real MNIST under UNIP_DATA_DIR
};

// Synthetic digits written+loaded through the IDX path (12000/2000).
const DataFixture& synth_fixture();

// Real MNIST when UNIP_DATA_DIR points at it, otherwise the synthetic set.
const DataFixture& acceptance_fixture();

// LeNet trained briefly on the synthetic set (cached on disk); accurate
// enough for attack and evaluation tests.
const Model& fixture_model();

// A narrower conv net for trend tests where many runs are needed.
Model make_narrow_net(std::uint64_t seed);
const Model& narrow_fixture_model();

}  // namespace unip::test
