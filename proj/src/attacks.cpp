#include "unip/attacks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "unip/checkpoint.hpp"
#include "unip/errors.hpp"

namespace unip {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Gradient of the (possibly domain-clamped) batch loss w.r.t. the shared
// delta: sum the per-example input-gradient rows, masking coordinates the
// clamp pushed strictly outside [lo,hi]. backward() already divides by the
// batch size, so the sum is the mean per-example gradient.
Tensor reduce_to_delta_grad(const Tensor& grad_input, const Tensor& preclamp,
                            const PixelDomain& dom, bool clamped,
                            const std::vector<std::size_t>& delta_shape) {
  Tensor g(delta_shape);
  const std::size_t ex = g.size();
  const std::size_t batch = grad_input.dim(0);
  const float lo = dom.lo, hi = dom.hi;
  for (std::size_t b = 0; b < batch; ++b) {
    const float* row = grad_input.data() + b * ex;
    if (clamped) {
      const float* v = preclamp.data() + b * ex;
      for (std::size_t j = 0; j < ex; ++j) {
        if (v[j] >= lo && v[j] <= hi) g[j] += row[j];
      }
    } else {
      for (std::size_t j = 0; j < ex; ++j) g[j] += row[j];
    }
  }
  return g;
}

Tensor add_like(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

double batch_accuracy(const Tensor& logits, const std::vector<int>& labels) {
  const std::vector<int> pred = argmax_rows(logits);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == labels[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

// Predictions over a dataset with optional shared delta, chunked to bound
// the activation memory.
std::vector<int> predict_all(const Model& m, const Dataset& ds,
                             const Tensor* delta, bool clamp_inputs) {
  constexpr std::size_t kChunk = 256;
  std::vector<int> pred;
  pred.reserve(ds.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += kChunk) {
    const std::size_t end = std::min(start + kChunk, ds.size());
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    Batch b = gather(ds, idx);
    Tensor x = delta ? add_delta(b.images, *delta) : b.images;
    if (delta && clamp_inputs) x = clamp_to_domain(x, m.pixel_domain);
    const std::vector<int> p = argmax_rows(forward(m, x));
    pred.insert(pred.end(), p.begin(), p.end());
  }
  return pred;
}

}  // namespace

const char* norm_name(NormP p) { return p == NormP::kInf ? "inf" : "2"; }

NormP parse_norm(const std::string& s) {
  if (s == "inf") return NormP::kInf;
  if (s == "2") return NormP::kL2;
  throw UsageError("unknown norm '" + s + "' (expected inf|2)");
}

bool NormBall::contains(const Tensor& delta, double tol) const {
  const double n = p == NormP::kInf ? linf_norm(delta) : l2_norm(delta);
  // the tolerance scales with eps: the projection clamps against float(eps),
  // which may round a hair above the double value
  return n <= eps + tol * std::max(1.0, std::abs(eps));
}

Tensor project(const Tensor& delta, const NormBall& ball) {
  Tensor out = delta;
  if (ball.p == NormP::kInf) {
    const float e = static_cast<float>(ball.eps);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = std::min(e, std::max(-e, out[i]));
    }
    return out;
  }
  // rescale only when the excess clears float rounding noise, so projecting
  // an already-projected tensor is a bitwise no-op
  const double n = l2_norm(out);
  if (n > ball.eps * (1.0 + 1e-7)) {
    const float s = static_cast<float>(ball.eps / n);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  }
  return out;
}

Tensor add_delta(const Tensor& x, const Tensor& delta) {
  const std::size_t ex = delta.size();
  if (x.rank() != delta.rank() + 1 || x.size() % ex != 0 ||
      !std::equal(delta.shape().begin(), delta.shape().end(),
                  x.shape().begin() + 1)) {
    throw UsageError("perturbation shape " + shape_str(delta.shape()) +
                     " does not broadcast over batch " + shape_str(x.shape()));
  }
  Tensor out = x;
  const std::size_t batch = x.dim(0);
  for (std::size_t b = 0; b < batch; ++b) {
    float* row = out.data() + b * ex;
    for (std::size_t j = 0; j < ex; ++j) row[j] += delta[j];
  }
  return out;
}

Tensor fgsm(const Model& m, const Tensor& x, const std::vector<int>& labels,
            double eps) {
  BackwardOptions opts;
  opts.param_grads = false;
  opts.input_grad = true;
  BackwardResult bw = backward(m, x, labels, ClippedLoss{}, opts);
  Tensor out = x;
  const float e = static_cast<float>(eps);
  const float lo = m.pixel_domain.lo, hi = m.pixel_domain.hi;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::min(hi, std::max(lo, out[i] + e * sign_of(bw.grad_input[i])));
  }
  return out;
}

Tensor rfgsm(const Model& m, const Tensor& x, const std::vector<int>& labels,
             double eps, double alpha, Rng& rng) {
  if (!(alpha > 0.0) || alpha >= eps) {
    throw UsageError("rfgsm requires 0 < alpha < eps, got alpha=" +
                     std::to_string(alpha) + " eps=" + std::to_string(eps));
  }
  Tensor noisy = x;
  const float a = static_cast<float>(alpha);
  const float lo = m.pixel_domain.lo, hi = m.pixel_domain.hi;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    noisy[i] = std::min(
        hi, std::max(lo, noisy[i] +
                             a * sign_of(static_cast<float>(rng.normal()))));
  }
  return fgsm(m, noisy, labels, eps - alpha);
}

Tensor pgd(const Model& m, const Tensor& x, const std::vector<int>& labels,
           double eps, int steps, double step_size, bool random_start,
           Rng& rng) {
  if (steps < 1) throw UsageError("pgd requires steps >= 1");
  Tensor d(x.shape());  // per-example perturbation, kept in the linf ball
  const float e = static_cast<float>(eps);
  if (random_start) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] = static_cast<float>(rng.uniform(-eps, eps));
    }
  }
  BackwardOptions opts;
  opts.param_grads = false;
  opts.input_grad = true;
  const float step = static_cast<float>(step_size);
  for (int t = 0; t < steps; ++t) {
    const Tensor z = clamp_to_domain(add_like(x, d), m.pixel_domain);
    BackwardResult bw = backward(m, z, labels, ClippedLoss{}, opts);
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] = std::min(e, std::max(-e, d[i] + step * sign_of(bw.grad_input[i])));
    }
  }
  return clamp_to_domain(add_like(x, d), m.pixel_domain);
}

DeepFoolResult deepfool(const Model& m, const Tensor& x, int max_iter,
                        double overshoot) {
  if (x.shape() != m.input_shape) {
    throw UsageError("deepfool expects a single example of shape " +
                     shape_str(m.input_shape) + ", got " +
                     shape_str(x.shape()));
  }
  const std::size_t ex = x.size();
  const std::size_t classes = m.num_classes;
  const float oh = static_cast<float>(1.0 + overshoot);

  // Replicate the current iterate into a batch of num_classes rows so one
  // forward plus one backward (identity cotangent) yields the full Jacobian.
  std::vector<std::size_t> rep_shape;
  rep_shape.push_back(classes);
  for (std::size_t dim : x.shape()) rep_shape.push_back(dim);
  Tensor rep(rep_shape);
  Tensor eye({classes, classes});
  for (std::size_t k = 0; k < classes; ++k) eye[k * classes + k] = 1.0f;
  BackwardOptions opts;
  opts.param_grads = false;
  opts.input_grad = true;

  DeepFoolResult res;
  res.r = Tensor(x.shape());
  Tensor r_tot(x.shape());
  int k0 = -1;

  for (;;) {
    for (std::size_t k = 0; k < classes; ++k) {
      float* row = rep.data() + k * ex;
      for (std::size_t j = 0; j < ex; ++j) row[j] = x[j] + oh * r_tot[j];
    }
    ForwardCache cache;
    const Tensor logits = forward(m, rep, cache);
    const float* l0 = logits.data();  // all rows identical
    std::size_t cur = 0;
    for (std::size_t k = 1; k < classes; ++k) {
      if (l0[k] > l0[cur]) cur = k;
    }
    if (k0 < 0) {
      k0 = static_cast<int>(cur);
      res.orig_label = k0;
    }
    res.final_label = static_cast<int>(cur);
    if (static_cast<int>(cur) != k0) {
      res.fooled = true;
      break;
    }
    if (res.iterations >= max_iter) break;

    const BackwardResult bw = backward_from(m, cache, eye, opts);
    const float* gk0 = bw.grad_input.data() + static_cast<std::size_t>(k0) * ex;

    double best_pert = std::numeric_limits<double>::infinity();
    std::size_t best_k = classes;
    double best_wnorm = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      if (static_cast<int>(k) == k0) continue;
      const float* gk = bw.grad_input.data() + k * ex;
      double wnorm2 = 0.0;
      for (std::size_t j = 0; j < ex; ++j) {
        const double w = static_cast<double>(gk[j]) - gk0[j];
        wnorm2 += w * w;
      }
      const double wnorm = std::sqrt(wnorm2);
      if (wnorm < 1e-12) continue;
      const double fk = static_cast<double>(l0[k]) - l0[k0];
      const double pert = std::abs(fk) / wnorm;
      if (pert < best_pert) {
        best_pert = pert;
        best_k = k;
        best_wnorm = wnorm;
      }
    }
    if (best_k == classes) break;  // degenerate: no usable boundary direction

    const float* gk = bw.grad_input.data() + best_k * ex;
    const double scale = (best_pert + 1e-4) / best_wnorm;
    for (std::size_t j = 0; j < ex; ++j) {
      r_tot[j] += static_cast<float>(
          scale * (static_cast<double>(gk[j]) - gk0[j]));
    }
    ++res.iterations;
  }

  for (std::size_t j = 0; j < ex; ++j) res.r[j] = oh * r_tot[j];
  return res;
}

UniversalAttackResult universal_attack(const Model& m, const Dataset& ds,
                                       const UniversalAttackConfig& cfg) {
  if (cfg.epochs < 1 || !(cfg.lr >= 0.0)) {
    throw UsageError("universal attack requires epochs >= 1 and lr >= 0");
  }
  const auto t0 = Clock::now();
  const std::vector<std::size_t> shape = ds.example_shape();

  UniversalAttackResult res;
  res.state.delta = Tensor(shape);
  res.state.ball = cfg.ball;
  switch (cfg.rule) {
    case UpdateRule::kSgd:
      res.state.opt = OptimizerState::sgd(cfg.lr);
      break;
    case UpdateRule::kMomentumSgd:
      res.state.opt = OptimizerState::momentum_sgd(cfg.lr, cfg.momentum, shape);
      break;
    case UpdateRule::kAdam:
      res.state.opt = OptimizerState::adam(cfg.lr, shape);
      break;
    case UpdateRule::kSign:
      res.state.opt = OptimizerState::sign(cfg.lr);
      break;
  }

  BatchPlan plan;
  plan.batch_size = std::min(cfg.batch_size, ds.size());
  plan.seed = cfg.seed;
  plan.shuffle = true;
  plan.epochs = cfg.epochs;
  BatchStream stream(ds, plan);

  BackwardOptions opts;
  opts.param_grads = false;
  opts.input_grad = true;
  const ClippedLoss clip{cfg.beta};
  std::size_t iter = 0;

  while (!stream.done()) {
    const Batch b = stream.next();
    const Tensor z = add_delta(b.images, res.state.delta);
    const Tensor zin = cfg.clamp_inputs ? clamp_to_domain(z, m.pixel_domain) : z;
    BackwardResult bw = backward(m, zin, b.labels, clip, opts);
    const Tensor g = reduce_to_delta_grad(bw.grad_input, z, m.pixel_domain,
                                          cfg.clamp_inputs, shape);
    apply_update(res.state.delta, g, res.state.opt, Direction::kAscent);
    res.state.delta = project(res.state.delta, res.state.ball);
    check_finite(res.state.delta, "delta");
    ++iter;
    res.trace.push_back(
        {iter, batch_accuracy(bw.logits, b.labels), bw.loss.mean});
  }
  res.wall_clock_s = seconds_since(t0);
  return res;
}

IDeepFoolResult ideepfool_universal(const Model& m, const Dataset& ds,
                                    const IDeepFoolConfig& cfg) {
  if (!(cfg.xi > 0.0 && cfg.xi < 1.0)) {
    throw UsageError("ideepfool requires xi in (0,1)");
  }
  const auto t0 = Clock::now();
  const std::vector<std::size_t> shape = ds.example_shape();
  const std::size_t ex = 1 * shape[0] * shape[1] * shape[2];

  IDeepFoolResult res;
  res.state.delta = Tensor(shape);
  res.state.ball = cfg.ball;

  // The model's own clean predictions, fixed for the whole run.
  const std::vector<int> clean_pred = predict_all(m, ds, nullptr, false);

  Tensor xi_plus(std::vector<std::size_t>{1, shape[0], shape[1], shape[2]});
  for (std::size_t pass = 0; pass < cfg.max_outer_passes; ++pass) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      float* row = xi_plus.data();
      const float* src = ds.images.data() + i * ex;
      for (std::size_t j = 0; j < ex; ++j) {
        row[j] = src[j] + res.state.delta[j];
      }
      const std::vector<int> p = argmax_rows(forward(m, xi_plus));
      if (p[0] != clean_pred[i]) continue;  // already fooled, skip

      const Tensor point = xi_plus.reshaped(shape);
      const DeepFoolResult df =
          deepfool(m, point, cfg.deepfool_max_iter, cfg.overshoot);
      if (!df.r.all_finite()) continue;
      for (std::size_t j = 0; j < ex; ++j) res.state.delta[j] += df.r[j];
      res.state.delta = project(res.state.delta, res.state.ball);
    }
    const double fr = fooling_ratio(m, ds, res.state.delta, false);
    res.pass_fooling_ratio.push_back(fr);
    if (fr >= 1.0 - cfg.xi) break;
  }
  res.wall_clock_s = seconds_since(t0);
  return res;
}

double fooling_ratio(const Model& m, const Dataset& ds, const Tensor& delta,
                     bool clamp_inputs) {
  const std::vector<int> clean = predict_all(m, ds, nullptr, false);
  const std::vector<int> pert = predict_all(m, ds, &delta, clamp_inputs);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i] != pert[i]) ++changed;
  }
  return static_cast<double>(changed) / static_cast<double>(clean.size());
}

double accuracy_under_delta(const Model& m, const Dataset& ds,
                            const Tensor& delta, bool clamp_inputs) {
  const Tensor* d = delta.size() ? &delta : nullptr;
  const std::vector<int> pred = predict_all(m, ds, d, clamp_inputs);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == ds.labels[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

void save_perturbation(const std::string& path, const PerturbationState& st) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  write_tensor_block(os, {st.delta});
  put_u8(os, static_cast<std::uint8_t>(st.ball.p));
  put_f64(os, st.ball.eps);
  os.flush();
  if (!os) throw DataError("perturbation write failed: " + path);
}

PerturbationState load_perturbation(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  std::vector<Tensor> block = read_tensor_block(is);
  if (block.size() != 1) {
    throw DataError("perturbation file holds " + std::to_string(block.size()) +
                    " tensors, expected 1: " + path);
  }
  PerturbationState st;
  st.delta = std::move(block[0]);
  const std::uint8_t p = get_u8(is);
  if (p != 0 && p != 2) {
    throw DataError("perturbation file has unknown norm tag " +
                    std::to_string(p) + ": " + path);
  }
  st.ball.p = static_cast<NormP>(p);
  st.ball.eps = get_f64(is);
  return st;
}

}  // namespace unip
