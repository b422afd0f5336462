#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unip/attacks.hpp"
#include "unip/data.hpp"
#include "unip/nn.hpp"
#include "unip/optim.hpp"

namespace unip {

enum class TrainMode {
  kNatural,
  kAdvFgsm,
  kAdvRfgsm,
  kAdvPgd,
  kUniversalAlt,
  kUniversalSim,
};

const char* train_mode_name(TrainMode m);
TrainMode parse_train_mode(const std::string& s);

struct LrPoint {
  std::size_t step = 0;
  double lr = 0.0;
};

// Piecewise-constant lookup: the last entry with step <= s. The schedule must
// start at step 0 and be strictly increasing.
double schedule_lr(const std::vector<LrPoint>& schedule, std::size_t step);

struct TrainConfig {
  std::size_t total_steps = 6000;
  std::size_t batch_size = 128;
  std::vector<LrPoint> lr_schedule = {{0, 0.05}, {4000, 0.005}};
  double momentum = 0.9;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::kNatural;

  // universal modes; the sign rule steps by exactly ball.eps, sgd/adam step
  // by delta_lr
  UpdateRule delta_rule = UpdateRule::kSign;
  double delta_lr = 1.0 / 255.0;
  bool delta_random_init = false;  // uniform in the ball instead of zero

  NormBall ball;  // attack budget for adversarial and universal modes

  int pgd_steps = 7;           // adv_pgd
  double pgd_step_size = 0.0;  // 0 picks 2.5 * eps / pgd_steps
  double rfgsm_alpha = 0.0;    // 0 picks eps / 2

  std::string checkpoint_dir;  // when set, written at lr drops and at the end
};

struct TrainStepRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double acc_before = 0.0;  // minibatch accuracy before the delta ascent
  double acc_after = 0.0;   // after; NaN where the mode does not measure it
};

struct TrainTrace {
  std::vector<TrainStepRecord> steps;
  double wall_clock_s = 0.0;
};

void write_trace_csv(const std::string& path, const TrainTrace& trace);

struct TrainResult {
  Model model;
  PerturbationState perturbation;  // universal modes; empty delta otherwise
  TrainTrace trace;
};

TrainResult train(const Model& init, const Dataset& ds, const TrainConfig& cfg);

// Mode-checked wrappers.
TrainResult train_natural(const Model& init, const Dataset& ds,
                          const TrainConfig& cfg);
TrainResult train_adv_instance(const Model& init, const Dataset& ds,
                               const TrainConfig& cfg);
TrainResult train_universal_alternating(const Model& init, const Dataset& ds,
                                        const TrainConfig& cfg);
TrainResult train_universal_simultaneous(const Model& init, const Dataset& ds,
                                         const TrainConfig& cfg);

}  // namespace unip
