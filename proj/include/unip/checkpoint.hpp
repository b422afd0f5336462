#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "unip/nn.hpp"
#include "unip/tensor.hpp"

namespace unip {

// Binary tensor container: magic "UNIP", u32 version (=1), u32 tensor count,
// then per tensor u32 rank, u32 dims[rank], f32 data. All integers and floats
// little-endian. Perturbation files append a u8 norm tag and f64 epsilon.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_tensor_block(std::ostream& os, const std::vector<Tensor>& tensors);
std::vector<Tensor> read_tensor_block(std::istream& is);  // throws DataError

void save_params(const std::string& path, const std::vector<Tensor>& tensors);
std::vector<Tensor> load_params(const std::string& path);

// Shape-checked helpers for model checkpoints.
void save_model_params(const std::string& path, const Model& m);
void load_model_params(const std::string& path, Model& m);

// Low-level little-endian scalar I/O, shared with the perturbation trailer.
void put_u8(std::ostream& os, std::uint8_t v);
void put_u32(std::ostream& os, std::uint32_t v);
void put_f64(std::ostream& os, double v);
std::uint8_t get_u8(std::istream& is);
std::uint32_t get_u32(std::istream& is);
double get_f64(std::istream& is);

}  // namespace unip
