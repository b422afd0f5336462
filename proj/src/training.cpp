#include "unip/training.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "unip/checkpoint.hpp"
#include "unip/errors.hpp"

namespace unip {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double batch_accuracy(const Tensor& logits, const std::vector<int>& labels) {
  const std::vector<int> pred = argmax_rows(logits);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == labels[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

// Mean-over-batch delta gradient with pass-through clamp masking; mirrors the
// attack-side reduction (backward already divides by batch size).
Tensor reduce_delta_grad(const Tensor& grad_input, const Tensor& preclamp,
                         const PixelDomain& dom,
                         const std::vector<std::size_t>& shape) {
  Tensor g(shape);
  const std::size_t ex = g.size();
  const std::size_t batch = grad_input.dim(0);
  for (std::size_t b = 0; b < batch; ++b) {
    const float* row = grad_input.data() + b * ex;
    const float* v = preclamp.data() + b * ex;
    for (std::size_t j = 0; j < ex; ++j) {
      if (v[j] >= dom.lo && v[j] <= dom.hi) g[j] += row[j];
    }
  }
  return g;
}

bool is_universal(TrainMode m) {
  return m == TrainMode::kUniversalAlt || m == TrainMode::kUniversalSim;
}

bool is_adv_instance(TrainMode m) {
  return m == TrainMode::kAdvFgsm || m == TrainMode::kAdvRfgsm ||
         m == TrainMode::kAdvPgd;
}

}  // namespace

const char* train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::kNatural: return "natural";
    case TrainMode::kAdvFgsm: return "adv_fgsm";
    case TrainMode::kAdvRfgsm: return "adv_rfgsm";
    case TrainMode::kAdvPgd: return "adv_pgd";
    case TrainMode::kUniversalAlt: return "universal_alt";
    case TrainMode::kUniversalSim: return "universal_sim";
  }
  return "?";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "natural") return TrainMode::kNatural;
  if (s == "adv_fgsm") return TrainMode::kAdvFgsm;
  if (s == "adv_rfgsm") return TrainMode::kAdvRfgsm;
  if (s == "adv_pgd") return TrainMode::kAdvPgd;
  if (s == "universal_alt") return TrainMode::kUniversalAlt;
  if (s == "universal_sim") return TrainMode::kUniversalSim;
  throw UsageError("unknown training mode '" + s + "'");
}

double schedule_lr(const std::vector<LrPoint>& schedule, std::size_t step) {
  if (schedule.empty() || schedule.front().step != 0) {
    throw UsageError("lr schedule must start at step 0");
  }
  double lr = schedule.front().lr;
  std::size_t prev = 0;
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (schedule[i].step <= prev) {
      throw UsageError("lr schedule steps must be strictly increasing");
    }
    prev = schedule[i].step;
    if (schedule[i].step <= step) lr = schedule[i].lr;
  }
  return lr;
}

void write_trace_csv(const std::string& path, const TrainTrace& trace) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "step,lr,loss,acc_before,acc_after\n";
  for (const TrainStepRecord& r : trace.steps) {
    os << r.step << ',' << r.lr << ',' << r.loss << ',' << r.acc_before << ','
       << r.acc_after << '\n';
  }
  if (!os) throw DataError("trace write failed: " + path);
}

TrainResult train(const Model& init, const Dataset& ds,
                  const TrainConfig& cfg) {
  schedule_lr(cfg.lr_schedule, 0);  // validates shape of the schedule
  if (is_universal(cfg.mode) && cfg.delta_rule == UpdateRule::kMomentumSgd) {
    throw UsageError("universal training supports delta rules sign|sgd|adam");
  }
  if ((is_universal(cfg.mode) || is_adv_instance(cfg.mode)) &&
      cfg.ball.eps < 0.0) {
    throw UsageError("attack budget eps must be >= 0");
  }

  const auto t0 = Clock::now();
  TrainResult res;
  res.model = init;
  Model& model = res.model;

  std::vector<OptimizerState> wopt;
  wopt.reserve(model.params.size());
  for (const Tensor& p : model.params) {
    wopt.push_back(OptimizerState::momentum_sgd(0.0, cfg.momentum, p.shape()));
  }

  const std::vector<std::size_t> ex_shape = ds.example_shape();
  const bool universal = is_universal(cfg.mode);
  const float eps_f = static_cast<float>(cfg.ball.eps);
  Rng attack_rng(mix_seed(cfg.seed, 0xa77ac4));

  if (universal) {
    res.perturbation.delta = Tensor(ex_shape);
    res.perturbation.ball = cfg.ball;
    if (cfg.delta_random_init && cfg.ball.eps > 0.0) {
      for (std::size_t j = 0; j < res.perturbation.delta.size(); ++j) {
        res.perturbation.delta[j] =
            static_cast<float>(attack_rng.uniform(-cfg.ball.eps, cfg.ball.eps));
      }
      res.perturbation.delta = project(res.perturbation.delta, cfg.ball);
    }
    switch (cfg.delta_rule) {
      case UpdateRule::kSgd:
        res.perturbation.opt = OptimizerState::sgd(cfg.delta_lr);
        break;
      case UpdateRule::kAdam:
        res.perturbation.opt = OptimizerState::adam(cfg.delta_lr, ex_shape);
        break;
      default:
        res.perturbation.opt = OptimizerState::sign(cfg.ball.eps);
        break;
    }
  }
  Tensor& delta = res.perturbation.delta;

  BatchPlan plan;
  plan.batch_size = std::min(cfg.batch_size, ds.size());
  plan.seed = cfg.seed;
  plan.shuffle = true;
  const std::size_t bpe = (ds.size() + plan.batch_size - 1) / plan.batch_size;
  plan.epochs = std::max<std::size_t>(1, (cfg.total_steps + bpe - 1) / bpe);
  BatchStream stream(ds, plan);

  BackwardOptions w_only, x_only, shared;
  w_only.param_grads = true;
  w_only.input_grad = false;
  x_only.param_grads = false;
  x_only.input_grad = true;
  shared.param_grads = true;
  shared.input_grad = true;

  const double pgd_step = cfg.pgd_step_size > 0.0
                              ? cfg.pgd_step_size
                              : 2.5 * cfg.ball.eps /
                                    static_cast<double>(std::max(1, cfg.pgd_steps));
  const double rfgsm_alpha =
      cfg.rfgsm_alpha > 0.0 ? cfg.rfgsm_alpha : cfg.ball.eps / 2.0;

  auto descend = [&](const std::vector<Tensor>& grads, double lr) {
    for (std::size_t i = 0; i < model.params.size(); ++i) {
      wopt[i].lr = lr;
      apply_update(model.params[i], grads[i], wopt[i], Direction::kDescent);
    }
  };

  auto ascend_delta = [&](const Tensor& g) {
    if (cfg.delta_rule == UpdateRule::kSign) {
      for (std::size_t j = 0; j < delta.size(); ++j) {
        delta[j] += eps_f * sign_of(g[j]);
      }
    } else {
      apply_update(delta, g, res.perturbation.opt, Direction::kAscent);
    }
    delta = project(delta, cfg.ball);
    check_finite(delta, "delta");
  };

  auto save_checkpoint = [&](const std::string& name) {
    if (cfg.checkpoint_dir.empty()) return;
    std::filesystem::create_directories(cfg.checkpoint_dir);
    save_model_params(
        (std::filesystem::path(cfg.checkpoint_dir) / name).string(), model);
  };

  res.trace.steps.reserve(cfg.total_steps);
  for (std::size_t s = 0; s < cfg.total_steps; ++s) {
    if (stream.done()) break;  // defensive; plan covers total_steps
    const Batch b = stream.next();
    const double lr = schedule_lr(cfg.lr_schedule, s);
    TrainStepRecord rec;
    rec.step = s;
    rec.lr = lr;
    rec.acc_after = kNan;

    switch (cfg.mode) {
      case TrainMode::kNatural: {
        BackwardResult bw =
            backward(model, b.images, b.labels, ClippedLoss{}, w_only);
        rec.loss = bw.loss.mean;
        rec.acc_before = batch_accuracy(bw.logits, b.labels);
        descend(bw.grad_params, lr);
        break;
      }
      case TrainMode::kAdvFgsm:
      case TrainMode::kAdvRfgsm:
      case TrainMode::kAdvPgd: {
        Tensor x_adv = b.images;
        if (cfg.ball.eps > 0.0) {  // zero budget trains naturally, no rng use
          if (cfg.mode == TrainMode::kAdvFgsm) {
            x_adv = fgsm(model, b.images, b.labels, cfg.ball.eps);
          } else if (cfg.mode == TrainMode::kAdvRfgsm) {
            x_adv = rfgsm(model, b.images, b.labels, cfg.ball.eps, rfgsm_alpha,
                          attack_rng);
          } else {
            x_adv = pgd(model, b.images, b.labels, cfg.ball.eps, cfg.pgd_steps,
                        pgd_step, true, attack_rng);
          }
        }
        BackwardResult bw =
            backward(model, x_adv, b.labels, ClippedLoss{}, w_only);
        rec.loss = bw.loss.mean;
        rec.acc_before = batch_accuracy(bw.logits, b.labels);
        descend(bw.grad_params, lr);
        break;
      }
      case TrainMode::kUniversalAlt: {
        // w step at (w, delta)
        const Tensor z_pre = add_delta(b.images, delta);
        const Tensor z = clamp_to_domain(z_pre, model.pixel_domain);
        BackwardResult bw = backward(model, z, b.labels, ClippedLoss{}, w_only);
        rec.loss = bw.loss.mean;
        descend(bw.grad_params, lr);
        // fresh delta gradient at (w', delta)
        BackwardResult bx = backward(model, z, b.labels, ClippedLoss{}, x_only);
        rec.acc_before = batch_accuracy(bx.logits, b.labels);
        ascend_delta(reduce_delta_grad(bx.grad_input, z_pre,
                                       model.pixel_domain, ex_shape));
        const Tensor z2 = clamp_to_domain(add_delta(b.images, delta),
                                          model.pixel_domain);
        rec.acc_after = batch_accuracy(forward(model, z2), b.labels);
        break;
      }
      case TrainMode::kUniversalSim: {
        // one backward at (w, delta) feeds both updates
        const Tensor z_pre = add_delta(b.images, delta);
        const Tensor z = clamp_to_domain(z_pre, model.pixel_domain);
        BackwardResult bw = backward(model, z, b.labels, ClippedLoss{}, shared);
        rec.loss = bw.loss.mean;
        rec.acc_before = batch_accuracy(bw.logits, b.labels);
        descend(bw.grad_params, lr);
        ascend_delta(reduce_delta_grad(bw.grad_input, z_pre,
                                       model.pixel_domain, ex_shape));
        break;
      }
    }

    res.trace.steps.push_back(rec);
    for (std::size_t i = 1; i < cfg.lr_schedule.size(); ++i) {
      if (cfg.lr_schedule[i].step == s + 1) {
        save_checkpoint("model_step" + std::to_string(s + 1) + ".unip");
      }
    }
  }

  save_checkpoint("model_final.unip");
  res.trace.wall_clock_s =
      std::chrono::duration<double>(Clock::now() - t0).count();
  return res;
}

namespace {
TrainResult train_checked(const Model& init, const Dataset& ds,
                          const TrainConfig& cfg, bool ok,
                          const char* expected) {
  if (!ok) {
    throw UsageError(std::string("mode ") + train_mode_name(cfg.mode) +
                     " not valid here (expected " + expected + ")");
  }
  return train(init, ds, cfg);
}
}  // namespace

TrainResult train_natural(const Model& init, const Dataset& ds,
                          const TrainConfig& cfg) {
  return train_checked(init, ds, cfg, cfg.mode == TrainMode::kNatural,
                       "natural");
}

TrainResult train_adv_instance(const Model& init, const Dataset& ds,
                               const TrainConfig& cfg) {
  return train_checked(init, ds, cfg, is_adv_instance(cfg.mode),
                       "adv_fgsm|adv_rfgsm|adv_pgd");
}

TrainResult train_universal_alternating(const Model& init, const Dataset& ds,
                                        const TrainConfig& cfg) {
  return train_checked(init, ds, cfg, cfg.mode == TrainMode::kUniversalAlt,
                       "universal_alt");
}

TrainResult train_universal_simultaneous(const Model& init, const Dataset& ds,
                                         const TrainConfig& cfg) {
  return train_checked(init, ds, cfg, cfg.mode == TrainMode::kUniversalSim,
                       "universal_sim");
}

}  // namespace unip
