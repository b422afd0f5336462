#include "unip/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "unip/errors.hpp"

namespace unip {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool2x2: return "maxpool2x2";
    case LayerKind::kFlatten: return "flatten";
  }
  return "?";
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.in = in;
  s.out = out;
  return s;
}

LayerSpec LayerSpec::conv2d(std::size_t in_channels, std::size_t out_channels,
                            std::size_t kernel, std::size_t stride,
                            std::size_t padding) {
  LayerSpec s;
  s.kind = LayerKind::kConv2d;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{LayerKind::kRelu}; }
LayerSpec LayerSpec::maxpool2x2() { return LayerSpec{LayerKind::kMaxPool2x2}; }
LayerSpec LayerSpec::flatten() { return LayerSpec{LayerKind::kFlatten}; }

namespace {

[[noreturn]] void layer_error(std::size_t idx, LayerKind kind,
                              const std::string& msg) {
  throw UsageError("layer " + std::to_string(idx) + " (" +
                   layer_kind_name(kind) + "): " + msg);
}

// Row-major GEMM kernels with explicit leading dimensions.
// C(m x n) += A(m x k) * B(k x n)
template <typename T>
void gemm_nn(const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * lda + p];
      if (aip == T{0}) continue;
      const T* brow = b + p * ldb;
      T* crow = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C(m x n) += A(m x k) * B(n x k)^T
template <typename T>
void gemm_nt(const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * lda;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * ldb;
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * ldc + j] += acc;
    }
  }
}

// C(m x n) += A(k x m)^T * B(k x n)
template <typename T>
void gemm_tn(const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * lda;
    const T* brow = b + p * ldb;
    for (std::size_t i = 0; i < m; ++i) {
      const T api = arow[i];
      if (api == T{0}) continue;
      T* crow = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

struct ConvDims {
  std::size_t c, h, w, oc, oh, ow, k, s, p, ckk, ohw;
};

ConvDims conv_dims(const LayerSpec& l, const std::vector<std::size_t>& in) {
  ConvDims d{};
  d.c = in[0];
  d.h = in[1];
  d.w = in[2];
  d.oc = l.out_channels;
  d.k = l.kernel;
  d.s = l.stride;
  d.p = l.padding;
  d.oh = (d.h + 2 * d.p - d.k) / d.s + 1;
  d.ow = (d.w + 2 * d.p - d.k) / d.s + 1;
  d.ckk = d.c * d.k * d.k;
  d.ohw = d.oh * d.ow;
  return d;
}

template <typename T>
void im2col(const T* x, const ConvDims& d, T* col) {
  // col is (ckk x ohw)
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ki = 0; ki < d.k; ++ki) {
      for (std::size_t kj = 0; kj < d.k; ++kj) {
        T* crow = col + ((c * d.k + ki) * d.k + kj) * d.ohw;
        for (std::size_t oh = 0; oh < d.oh; ++oh) {
          const std::ptrdiff_t ih =
              static_cast<std::ptrdiff_t>(oh * d.s + ki) -
              static_cast<std::ptrdiff_t>(d.p);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) {
            std::fill(crow + oh * d.ow, crow + (oh + 1) * d.ow, T{0});
            continue;
          }
          const T* xrow = x + (c * d.h + static_cast<std::size_t>(ih)) * d.w;
          for (std::size_t ow = 0; ow < d.ow; ++ow) {
            const std::ptrdiff_t iw =
                static_cast<std::ptrdiff_t>(ow * d.s + kj) -
                static_cast<std::ptrdiff_t>(d.p);
            crow[oh * d.ow + ow] =
                (iw < 0 || iw >= static_cast<std::ptrdiff_t>(d.w))
                    ? T{0}
                    : xrow[iw];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_acc(const T* col, const ConvDims& d, T* dx) {
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ki = 0; ki < d.k; ++ki) {
      for (std::size_t kj = 0; kj < d.k; ++kj) {
        const T* crow = col + ((c * d.k + ki) * d.k + kj) * d.ohw;
        for (std::size_t oh = 0; oh < d.oh; ++oh) {
          const std::ptrdiff_t ih =
              static_cast<std::ptrdiff_t>(oh * d.s + ki) -
              static_cast<std::ptrdiff_t>(d.p);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
          T* xrow = dx + (c * d.h + static_cast<std::size_t>(ih)) * d.w;
          for (std::size_t ow = 0; ow < d.ow; ++ow) {
            const std::ptrdiff_t iw =
                static_cast<std::ptrdiff_t>(ow * d.s + kj) -
                static_cast<std::ptrdiff_t>(d.p);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(d.w)) continue;
            xrow[iw] += crow[oh * d.ow + ow];
          }
        }
      }
    }
  }
}

std::vector<std::size_t> param_shape(const LayerSpec& l) {
  if (l.kind == LayerKind::kDense) return {l.out, l.in + 1};
  return {l.out_channels, l.in_channels * l.kernel * l.kernel + 1};
}

}  // namespace

std::vector<std::vector<std::size_t>> layer_output_shapes(
    const std::vector<LayerSpec>& layers,
    const std::vector<std::size_t>& input_shape) {
  std::vector<std::vector<std::size_t>> shapes;
  std::vector<std::size_t> cur = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerKind::kDense: {
        if (cur.size() != 1) {
          layer_error(i, l.kind,
                      "expects a flat input, got " + shape_str(cur) +
                          " (missing flatten?)");
        }
        if (cur[0] != l.in) {
          layer_error(i, l.kind,
                      "expects " + std::to_string(l.in) + " inputs, got " +
                          std::to_string(cur[0]));
        }
        cur = {l.out};
        break;
      }
      case LayerKind::kConv2d: {
        if (cur.size() != 3) {
          layer_error(i, l.kind, "expects (C,H,W) input, got " + shape_str(cur));
        }
        if (cur[0] != l.in_channels) {
          layer_error(i, l.kind,
                      "expects " + std::to_string(l.in_channels) +
                          " input channels, got " + std::to_string(cur[0]));
        }
        if (l.kernel == 0 || l.stride == 0) {
          layer_error(i, l.kind, "kernel and stride must be positive");
        }
        if (cur[1] + 2 * l.padding < l.kernel ||
            cur[2] + 2 * l.padding < l.kernel) {
          layer_error(i, l.kind, "kernel larger than padded input");
        }
        ConvDims d = conv_dims(l, cur);
        cur = {d.oc, d.oh, d.ow};
        break;
      }
      case LayerKind::kRelu:
        break;
      case LayerKind::kMaxPool2x2: {
        if (cur.size() != 3 || cur[1] < 2 || cur[2] < 2) {
          layer_error(i, l.kind,
                      "expects (C,H>=2,W>=2) input, got " + shape_str(cur));
        }
        cur = {cur[0], cur[1] / 2, cur[2] / 2};
        break;
      }
      case LayerKind::kFlatten: {
        std::size_t n = 1;
        for (std::size_t d : cur) n *= d;
        cur = {n};
        break;
      }
    }
    shapes.push_back(cur);
  }
  return shapes;
}

template <typename T>
ModelT<T> make_model(std::vector<LayerSpec> layers,
                     std::vector<std::size_t> input_shape,
                     std::size_t num_classes, Rng& rng) {
  auto shapes = layer_output_shapes(layers, input_shape);
  if (shapes.empty() || shapes.back() != std::vector<std::size_t>{num_classes}) {
    throw UsageError("model output shape " +
                     (shapes.empty() ? std::string("()") : shape_str(shapes.back())) +
                     " does not produce " + std::to_string(num_classes) +
                     " classes");
  }
  ModelT<T> m;
  m.layers = std::move(layers);
  m.num_classes = num_classes;
  m.input_shape = std::move(input_shape);
  for (const LayerSpec& l : m.layers) {
    if (!l.parametric()) continue;
    TensorT<T> p(param_shape(l));
    const std::size_t fan_in =
        l.kind == LayerKind::kDense ? l.in : l.in_channels * l.kernel * l.kernel;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    const std::size_t cols = p.dim(1);
    for (std::size_t r = 0; r < p.dim(0); ++r) {
      for (std::size_t c = 0; c + 1 < cols; ++c) {
        p[r * cols + c] = static_cast<T>(rng.uniform(-limit, limit));
      }
      p[r * cols + cols - 1] = T{0};  // bias
    }
    m.params.push_back(std::move(p));
  }
  return m;
}

template <typename T>
ModelT<T> make_model(std::vector<LayerSpec> layers,
                     std::vector<std::size_t> input_shape,
                     std::size_t num_classes, std::uint64_t seed) {
  Rng rng(seed);
  return make_model<T>(std::move(layers), std::move(input_shape), num_classes,
                       rng);
}

template <typename T>
TensorT<T> forward(const ModelT<T>& m, const TensorT<T>& x,
                   ForwardCacheT<T>& cache) {
  if (x.rank() != m.input_shape.size() + 1 ||
      std::vector<std::size_t>(x.shape().begin() + 1, x.shape().end()) !=
          m.input_shape) {
    throw UsageError("forward: input shape " + shape_str(x.shape()) +
                     " does not match model input (B," +
                     shape_str(m.input_shape).substr(1));
  }
  const std::size_t batch = x.dim(0);
  cache.acts.clear();
  cache.pool_argmax.clear();
  cache.acts.reserve(m.layers.size() + 1);
  cache.acts.push_back(x);

  std::vector<std::size_t> cur(m.input_shape);
  std::size_t param_idx = 0;
  std::vector<T> col;  // im2col scratch, reused across layers/examples

  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const LayerSpec& l = m.layers[li];
    const TensorT<T>& in = cache.acts.back();
    switch (l.kind) {
      case LayerKind::kDense: {
        if (cur.size() != 1 || cur[0] != l.in) {
          layer_error(li, l.kind, "input shape " + shape_str(cur));
        }
        const TensorT<T>& w = m.params[param_idx++];
        TensorT<T> out({batch, l.out});
        gemm_nt(in.data(), l.in, w.data(), l.in + 1, out.data(), l.out, batch,
                l.in, l.out);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t o = 0; o < l.out; ++o) {
            out[b * l.out + o] += w[o * (l.in + 1) + l.in];
          }
        }
        cur = {l.out};
        cache.acts.push_back(std::move(out));
        break;
      }
      case LayerKind::kConv2d: {
        ConvDims d = conv_dims(l, cur);
        const TensorT<T>& w = m.params[param_idx++];
        TensorT<T> out({batch, d.oc, d.oh, d.ow});
        col.assign(d.ckk * d.ohw, T{0});
        const std::size_t in_sz = d.c * d.h * d.w;
        const std::size_t out_sz = d.oc * d.ohw;
        for (std::size_t b = 0; b < batch; ++b) {
          im2col(in.data() + b * in_sz, d, col.data());
          T* yb = out.data() + b * out_sz;
          gemm_nn(w.data(), d.ckk + 1, col.data(), d.ohw, yb, d.ohw, d.oc,
                  d.ckk, d.ohw);
          for (std::size_t oc = 0; oc < d.oc; ++oc) {
            const T bias = w[oc * (d.ckk + 1) + d.ckk];
            T* row = yb + oc * d.ohw;
            for (std::size_t j = 0; j < d.ohw; ++j) row[j] += bias;
          }
        }
        cur = {d.oc, d.oh, d.ow};
        cache.acts.push_back(std::move(out));
        break;
      }
      case LayerKind::kRelu: {
        TensorT<T> out = in;
        for (std::size_t i = 0; i < out.size(); ++i) {
          if (out[i] < T{0}) out[i] = T{0};
        }
        cache.acts.push_back(std::move(out));
        break;
      }
      case LayerKind::kMaxPool2x2: {
        const std::size_t c = cur[0], h = cur[1], w = cur[2];
        const std::size_t oh = h / 2, ow = w / 2;
        TensorT<T> out({batch, c, oh, ow});
        std::vector<std::uint32_t> arg(batch * c * oh * ow);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const T* plane = in.data() + (b * c + ch) * h * w;
            T* oplane = out.data() + (b * c + ch) * oh * ow;
            std::uint32_t* aplane = arg.data() + (b * c + ch) * oh * ow;
            for (std::size_t i = 0; i < oh; ++i) {
              for (std::size_t j = 0; j < ow; ++j) {
                const std::size_t r = 2 * i, cc = 2 * j;
                std::size_t best = r * w + cc;
                T bv = plane[best];
                const std::size_t cand[3] = {r * w + cc + 1, (r + 1) * w + cc,
                                             (r + 1) * w + cc + 1};
                for (std::size_t q : cand) {
                  if (plane[q] > bv) {
                    bv = plane[q];
                    best = q;
                  }
                }
                oplane[i * ow + j] = bv;
                aplane[i * ow + j] = static_cast<std::uint32_t>(best);
              }
            }
          }
        }
        cur = {c, oh, ow};
        cache.pool_argmax.push_back(std::move(arg));
        cache.acts.push_back(std::move(out));
        break;
      }
      case LayerKind::kFlatten: {
        std::size_t n = 1;
        for (std::size_t d : cur) n *= d;
        cache.acts.push_back(in.reshaped({batch, n}));
        cur = {n};
        break;
      }
    }
  }
  check_finite(cache.acts.back(), "logits");
  return cache.acts.back();
}

template <typename T>
TensorT<T> forward(const ModelT<T>& m, const TensorT<T>& x) {
  ForwardCacheT<T> cache;
  return forward(m, x, cache);
}

template <typename T>
TensorT<T> softmax_rows(const TensorT<T>& logits) {
  TensorT<T> out = logits;
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  for (std::size_t i = 0; i < b; ++i) {
    T* row = out.data() + i * c;
    T mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      row[j] = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)));
      sum += static_cast<double>(row[j]);
    }
    for (std::size_t j = 0; j < c; ++j) {
      row[j] = static_cast<T>(static_cast<double>(row[j]) / sum);
    }
  }
  return out;
}

template <typename T>
std::vector<int> argmax_rows(const TensorT<T>& logits) {
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  std::vector<int> out(b);
  for (std::size_t i = 0; i < b; ++i) {
    const T* row = logits.data() + i * c;
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

template <typename T>
std::vector<T> cross_entropy_rows(const TensorT<T>& logits,
                                  const std::vector<int>& labels) {
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  if (labels.size() != b) {
    throw UsageError("label count " + std::to_string(labels.size()) +
                     " does not match batch " + std::to_string(b));
  }
  std::vector<T> ce(b);
  for (std::size_t i = 0; i < b; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw UsageError("label " + std::to_string(y) + " out of range [0," +
                       std::to_string(c) + ") at example " + std::to_string(i));
    }
    const T* row = logits.data() + i * c;
    double mx = static_cast<double>(row[0]);
    for (std::size_t j = 1; j < c; ++j) {
      mx = std::max(mx, static_cast<double>(row[j]));
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      sum += std::exp(static_cast<double>(row[j]) - mx);
    }
    ce[i] = static_cast<T>(std::log(sum) + mx - static_cast<double>(row[y]));
  }
  return ce;
}

template <typename T>
LossValueT<T> loss(const ModelT<T>& m, const TensorT<T>& x,
                   const std::vector<int>& labels, const ClippedLoss& clip) {
  TensorT<T> logits = forward(m, x);
  LossValueT<T> out;
  out.per_example = cross_entropy_rows(logits, labels);
  double sum = 0.0;
  for (T& v : out.per_example) {
    if (static_cast<double>(v) > clip.beta) v = static_cast<T>(clip.beta);
    sum += static_cast<double>(v);
  }
  out.mean = sum / static_cast<double>(out.per_example.size());
  if (!std::isfinite(out.mean)) throw NumericError("non-finite loss");
  return out;
}

template <typename T>
BackwardResultT<T> backward_from(const ModelT<T>& m,
                                 const ForwardCacheT<T>& cache,
                                 const TensorT<T>& dlogits,
                                 const BackwardOptions& opts) {
  BackwardResultT<T> res;
  res.logits = cache.acts.back();
  if (opts.param_grads) {
    res.grad_params.reserve(m.params.size());
    for (const auto& p : m.params) res.grad_params.emplace_back(p.shape());
  }

  const std::size_t batch = cache.acts[0].dim(0);
  TensorT<T> delta = dlogits;  // cotangent flowing backward
  std::size_t param_idx = m.params.size();
  std::size_t pool_idx = cache.pool_argmax.size();
  std::vector<T> col, dcol;

  for (std::size_t li = m.layers.size(); li-- > 0;) {
    const LayerSpec& l = m.layers[li];
    const TensorT<T>& in = cache.acts[li];
    switch (l.kind) {
      case LayerKind::kDense: {
        --param_idx;
        const TensorT<T>& w = m.params[param_idx];
        if (opts.param_grads) {
          TensorT<T>& dw = res.grad_params[param_idx];
          gemm_tn(delta.data(), l.out, in.data(), l.in, dw.data(), l.in + 1,
                  l.out, batch, l.in);
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < l.out; ++o) {
              dw[o * (l.in + 1) + l.in] += delta[b * l.out + o];
            }
          }
        }
        if (li > 0 || opts.input_grad) {
          TensorT<T> dx({batch, l.in});
          gemm_nn(delta.data(), l.out, w.data(), l.in + 1, dx.data(), l.in,
                  batch, l.out, l.in);
          delta = std::move(dx);
        }
        break;
      }
      case LayerKind::kConv2d: {
        --param_idx;
        const TensorT<T>& w = m.params[param_idx];
        std::vector<std::size_t> in_shape(in.shape().begin() + 1,
                                          in.shape().end());
        ConvDims d = conv_dims(l, in_shape);
        const std::size_t in_sz = d.c * d.h * d.w;
        const std::size_t out_sz = d.oc * d.ohw;
        const bool need_dx =
            (li > 0) || opts.input_grad;  // first layer only if requested
        TensorT<T> dx;
        if (need_dx) dx = TensorT<T>(in.shape());
        if (opts.param_grads || need_dx) {
          col.assign(d.ckk * d.ohw, T{0});
          if (need_dx) dcol.assign(d.ckk * d.ohw, T{0});
          for (std::size_t b = 0; b < batch; ++b) {
            const T* dyb = delta.data() + b * out_sz;
            if (opts.param_grads) {
              im2col(in.data() + b * in_sz, d, col.data());
              TensorT<T>& dw = res.grad_params[param_idx];
              gemm_nt(dyb, d.ohw, col.data(), d.ohw, dw.data(), d.ckk + 1,
                      d.oc, d.ohw, d.ckk);
              for (std::size_t oc = 0; oc < d.oc; ++oc) {
                T s{0};
                const T* row = dyb + oc * d.ohw;
                for (std::size_t j = 0; j < d.ohw; ++j) s += row[j];
                dw[oc * (d.ckk + 1) + d.ckk] += s;
              }
            }
            if (need_dx) {
              std::fill(dcol.begin(), dcol.end(), T{0});
              gemm_tn(w.data(), d.ckk + 1, dyb, d.ohw, dcol.data(), d.ohw,
                      d.ckk, d.oc, d.ohw);
              col2im_acc(dcol.data(), d, dx.data() + b * in_sz);
            }
          }
        }
        if (need_dx) delta = std::move(dx);
        break;
      }
      case LayerKind::kRelu: {
        TensorT<T> dx = std::move(delta);
        for (std::size_t i = 0; i < dx.size(); ++i) {
          if (in[i] <= T{0}) dx[i] = T{0};
        }
        delta = std::move(dx);
        break;
      }
      case LayerKind::kMaxPool2x2: {
        --pool_idx;
        const std::vector<std::uint32_t>& arg = cache.pool_argmax[pool_idx];
        const std::size_t c = in.dim(1), h = in.dim(2), w = in.dim(3);
        const std::size_t oh = h / 2, ow = w / 2;
        TensorT<T> dx(in.shape());
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t base = (b * c + ch) * oh * ow;
            T* plane = dx.data() + (b * c + ch) * h * w;
            for (std::size_t q = 0; q < oh * ow; ++q) {
              plane[arg[base + q]] += delta[base + q];
            }
          }
        }
        delta = std::move(dx);
        break;
      }
      case LayerKind::kFlatten: {
        delta = delta.reshaped(in.shape());
        break;
      }
    }
  }

  if (opts.input_grad) {
    res.grad_input = std::move(delta);
    check_finite(res.grad_input, "input gradient");
  }
  if (opts.param_grads) {
    for (const auto& g : res.grad_params) check_finite(g, "parameter gradient");
  }
  return res;
}

template <typename T>
BackwardResultT<T> backward(const ModelT<T>& m, const TensorT<T>& x,
                            const std::vector<int>& labels,
                            const ClippedLoss& clip,
                            const BackwardOptions& opts) {
  ForwardCacheT<T> cache;
  TensorT<T> logits = forward(m, x, cache);
  const std::size_t batch = x.dim(0), c = m.num_classes;

  std::vector<T> ce = cross_entropy_rows(logits, labels);
  LossValueT<T> lv;
  lv.per_example = ce;
  double sum = 0.0;
  for (T& v : lv.per_example) {
    if (static_cast<double>(v) > clip.beta) v = static_cast<T>(clip.beta);
    sum += static_cast<double>(v);
  }
  lv.mean = sum / static_cast<double>(batch);
  if (!std::isfinite(lv.mean)) throw NumericError("non-finite loss");

  // d(mean clipped CE)/dlogits; clipped-out examples contribute zero
  // (zero also at the kink ce == beta).
  TensorT<T> dlogits = softmax_rows(logits);
  const T inv_b = static_cast<T>(1.0 / static_cast<double>(batch));
  for (std::size_t i = 0; i < batch; ++i) {
    T* row = dlogits.data() + i * c;
    if (static_cast<double>(ce[i]) >= clip.beta) {
      std::fill(row, row + c, T{0});
      continue;
    }
    row[labels[i]] -= T{1};
    for (std::size_t j = 0; j < c; ++j) row[j] *= inv_b;
  }

  BackwardResultT<T> res = backward_from(m, cache, dlogits, opts);
  res.loss = std::move(lv);
  return res;
}

template <typename T>
TensorT<T> clamp_to_domain(const TensorT<T>& x, const PixelDomain& d) {
  TensorT<T> out = x;
  const T lo = static_cast<T>(d.lo), hi = static_cast<T>(d.hi);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::min(hi, std::max(lo, out[i]));
  }
  return out;
}

// explicit instantiations: float for the pipeline, double for gradient checks
template struct ModelT<float>;
template struct ModelT<double>;

template ModelT<float> make_model<float>(std::vector<LayerSpec>,
                                         std::vector<std::size_t>, std::size_t,
                                         Rng&);
template ModelT<double> make_model<double>(std::vector<LayerSpec>,
                                           std::vector<std::size_t>,
                                           std::size_t, Rng&);
template ModelT<float> make_model<float>(std::vector<LayerSpec>,
                                         std::vector<std::size_t>, std::size_t,
                                         std::uint64_t);
template ModelT<double> make_model<double>(std::vector<LayerSpec>,
                                           std::vector<std::size_t>,
                                           std::size_t, std::uint64_t);
template TensorT<float> forward(const ModelT<float>&, const TensorT<float>&);
template TensorT<double> forward(const ModelT<double>&, const TensorT<double>&);
template TensorT<float> forward(const ModelT<float>&, const TensorT<float>&,
                                ForwardCacheT<float>&);
template TensorT<double> forward(const ModelT<double>&, const TensorT<double>&,
                                 ForwardCacheT<double>&);
template TensorT<float> softmax_rows(const TensorT<float>&);
template TensorT<double> softmax_rows(const TensorT<double>&);
template std::vector<int> argmax_rows(const TensorT<float>&);
template std::vector<int> argmax_rows(const TensorT<double>&);
template std::vector<float> cross_entropy_rows(const TensorT<float>&,
                                               const std::vector<int>&);
template std::vector<double> cross_entropy_rows(const TensorT<double>&,
                                                const std::vector<int>&);
template LossValueT<float> loss(const ModelT<float>&, const TensorT<float>&,
                                const std::vector<int>&, const ClippedLoss&);
template LossValueT<double> loss(const ModelT<double>&, const TensorT<double>&,
                                 const std::vector<int>&, const ClippedLoss&);
template BackwardResultT<float> backward_from(const ModelT<float>&,
                                              const ForwardCacheT<float>&,
                                              const TensorT<float>&,
                                              const BackwardOptions&);
template BackwardResultT<double> backward_from(const ModelT<double>&,
                                               const ForwardCacheT<double>&,
                                               const TensorT<double>&,
                                               const BackwardOptions&);
template BackwardResultT<float> backward(const ModelT<float>&,
                                         const TensorT<float>&,
                                         const std::vector<int>&,
                                         const ClippedLoss&,
                                         const BackwardOptions&);
template BackwardResultT<double> backward(const ModelT<double>&,
                                          const TensorT<double>&,
                                          const std::vector<int>&,
                                          const ClippedLoss&,
                                          const BackwardOptions&);
template TensorT<float> clamp_to_domain(const TensorT<float>&,
                                        const PixelDomain&);
template TensorT<double> clamp_to_domain(const TensorT<double>&,
                                         const PixelDomain&);

}  // namespace unip
