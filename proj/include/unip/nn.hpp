#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "unip/rng.hpp"
#include "unip/tensor.hpp"

namespace unip {

enum class LayerKind { kDense, kConv2d, kRelu, kMaxPool2x2, kFlatten };

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  // dense
  std::size_t in = 0;
  std::size_t out = 0;
  // conv2d
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec conv2d(std::size_t in_channels, std::size_t out_channels,
                          std::size_t kernel, std::size_t stride = 1,
                          std::size_t padding = 0);
  static LayerSpec relu();
  static LayerSpec maxpool2x2();
  static LayerSpec flatten();

  bool parametric() const {
    return kind == LayerKind::kDense || kind == LayerKind::kConv2d;
  }
};

struct PixelDomain {
  float lo = 0.0f;
  float hi = 1.0f;
};

// Feed-forward stack. Parameter layout per parametric layer is a single
// 2-d tensor with the bias as the last column:
//   dense  (out, in+1)
//   conv2d (out_channels, in_channels*kernel*kernel + 1)
template <typename T>
struct ModelT {
  std::vector<LayerSpec> layers;
  std::vector<TensorT<T>> params;  // one per parametric layer, in order
  std::size_t num_classes = 0;
  PixelDomain pixel_domain{};
  std::vector<std::size_t> input_shape;  // (C, H, W)

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.size();
    return n;
  }
};

using Model = ModelT<float>;

// Validates layer chaining against input_shape; returns the shape after each
// layer (without the batch dimension). Throws UsageError naming the
// offending layer.
std::vector<std::vector<std::size_t>> layer_output_shapes(
    const std::vector<LayerSpec>& layers,
    const std::vector<std::size_t>& input_shape);

// Builds a model with He-uniform initialized weights and zero biases.
template <typename T>
ModelT<T> make_model(std::vector<LayerSpec> layers,
                     std::vector<std::size_t> input_shape,
                     std::size_t num_classes, Rng& rng);

template <typename T>
ModelT<T> make_model(std::vector<LayerSpec> layers,
                     std::vector<std::size_t> input_shape,
                     std::size_t num_classes, std::uint64_t seed);

// Cross-entropy capped at beta per example; beta = +inf recovers plain CE.
struct ClippedLoss {
  double beta = std::numeric_limits<double>::infinity();
};

template <typename T>
struct ForwardCacheT {
  // acts[0] is the input; acts[i+1] is the output of layer i.
  std::vector<TensorT<T>> acts;
  // one entry per maxpool layer: winning input index per output element
  std::vector<std::vector<std::uint32_t>> pool_argmax;
};

template <typename T>
TensorT<T> forward(const ModelT<T>& m, const TensorT<T>& x);

template <typename T>
TensorT<T> forward(const ModelT<T>& m, const TensorT<T>& x,
                   ForwardCacheT<T>& cache);

template <typename T>
struct LossValueT {
  double mean = 0.0;
  std::vector<T> per_example;
};

template <typename T>
LossValueT<T> loss(const ModelT<T>& m, const TensorT<T>& x,
                   const std::vector<int>& labels, const ClippedLoss& clip);

struct BackwardOptions {
  bool param_grads = true;
  bool input_grad = true;
};

template <typename T>
struct BackwardResultT {
  LossValueT<T> loss;
  TensorT<T> logits;                  // (B, num_classes)
  std::vector<TensorT<T>> grad_params;  // empty unless requested
  TensorT<T> grad_input;              // empty unless requested
};

// Single backward pass producing the gradients of the clipped mean loss with
// respect to parameters and/or the input. Examples at or above the clip
// contribute exactly zero gradient.
template <typename T>
BackwardResultT<T> backward(const ModelT<T>& m, const TensorT<T>& x,
                            const std::vector<int>& labels,
                            const ClippedLoss& clip,
                            const BackwardOptions& opts = {});

// Backprop an arbitrary logit cotangent through a cached forward pass.
template <typename T>
BackwardResultT<T> backward_from(const ModelT<T>& m,
                                 const ForwardCacheT<T>& cache,
                                 const TensorT<T>& dlogits,
                                 const BackwardOptions& opts);

// Row-wise stable softmax over the trailing dimension of a (B, C) tensor.
template <typename T>
TensorT<T> softmax_rows(const TensorT<T>& logits);

template <typename T>
std::vector<int> argmax_rows(const TensorT<T>& logits);

// Per-example cross-entropy of (B, C) logits, numerically stable.
template <typename T>
std::vector<T> cross_entropy_rows(const TensorT<T>& logits,
                                  const std::vector<int>& labels);

template <typename T>
TensorT<T> clamp_to_domain(const TensorT<T>& x, const PixelDomain& d);

using ForwardCache = ForwardCacheT<float>;
using BackwardResult = BackwardResultT<float>;
using LossValue = LossValueT<float>;

}  // namespace unip
