#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unip/data.hpp"
#include "unip/nn.hpp"
#include "unip/optim.hpp"
#include "unip/rng.hpp"
#include "unip/tensor.hpp"

namespace unip {

enum class NormP : std::uint8_t { kInf = 0, kL2 = 2 };

const char* norm_name(NormP p);
NormP parse_norm(const std::string& s);  // "inf" | "2"

struct NormBall {
  NormP p = NormP::kInf;
  double eps = 0.0;

  bool contains(const Tensor& delta, double tol = 1e-6) const;
};

// linf: coordinate clamp to [-eps, eps]; l2: rescale iff norm exceeds eps.
Tensor project(const Tensor& delta, const NormBall& ball);

// Broadcast a (C,H,W) perturbation over a (B,C,H,W) batch.
Tensor add_delta(const Tensor& x, const Tensor& delta);

// ---- per-instance attacks (x is a batch, one perturbation per example) ----

Tensor fgsm(const Model& m, const Tensor& x, const std::vector<int>& labels,
            double eps);

// Random sign step of alpha, then an fgsm step of eps - alpha. 0 < alpha < eps.
Tensor rfgsm(const Model& m, const Tensor& x, const std::vector<int>& labels,
             double eps, double alpha, Rng& rng);

Tensor pgd(const Model& m, const Tensor& x, const std::vector<int>& labels,
           double eps, int steps, double step_size, bool random_start,
           Rng& rng);

// Multiclass l2 DeepFool on a single (C,H,W) example. Iterates on the
// linearized nearest-boundary step; the returned r already includes the
// (1+overshoot) factor, so x + r is the adversarial candidate.
struct DeepFoolResult {
  Tensor r;
  bool fooled = false;
  int iterations = 0;
  int orig_label = -1;
  int final_label = -1;
};

DeepFoolResult deepfool(const Model& m, const Tensor& x, int max_iter = 50,
                        double overshoot = 0.02);

// ---- universal perturbations ----

struct PerturbationState {
  Tensor delta;  // (C,H,W)
  NormBall ball;
  OptimizerState opt;
};

struct UniversalAttackConfig {
  NormBall ball;
  UpdateRule rule = UpdateRule::kSign;
  double lr = 1.0 / 255.0;   // ascent step for sgd/momentum_sgd/adam rules
  double momentum = 0.9;     // momentum_sgd rule only
  double beta = 9.0;         // loss clip; +inf disables
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  bool clamp_inputs = true;
};

struct AttackIterRecord {
  std::size_t iter = 0;   // 1-based minibatch update count
  double batch_acc = 0.0; // accuracy on the minibatch at the pre-update delta
  double mean_loss = 0.0;
};

struct UniversalAttackResult {
  PerturbationState state;
  std::vector<AttackIterRecord> trace;
  double wall_clock_s = 0.0;
};

// Stochastic gradient ascent on the clipped mean loss, one shared delta.
UniversalAttackResult universal_attack(const Model& m, const Dataset& ds,
                                       const UniversalAttackConfig& cfg);

struct IDeepFoolConfig {
  NormBall ball;
  double xi = 0.01;  // stop once fooling ratio >= 1 - xi
  std::size_t max_outer_passes = 10;
  int deepfool_max_iter = 50;
  double overshoot = 0.02;
};

struct IDeepFoolResult {
  PerturbationState state;
  std::vector<double> pass_fooling_ratio;  // measured after each full pass
  double wall_clock_s = 0.0;
};

// Per-sample DeepFool accumulation: for each x still classified like its
// clean self, add the instance perturbation found at x + delta, reproject.
IDeepFoolResult ideepfool_universal(const Model& m, const Dataset& ds,
                                    const IDeepFoolConfig& cfg);

// Fraction of examples whose predicted class changes under delta, measured
// against the model's own clean predictions.
double fooling_ratio(const Model& m, const Dataset& ds, const Tensor& delta,
                     bool clamp_inputs = true);

// Accuracy against ground-truth labels with delta applied (delta may be
// empty for clean accuracy).
double accuracy_under_delta(const Model& m, const Dataset& ds,
                            const Tensor& delta, bool clamp_inputs = true);

// Perturbation artifact: checkpoint tensor block holding delta, then a u8
// norm tag and f64 epsilon.
void save_perturbation(const std::string& path, const PerturbationState& st);
PerturbationState load_perturbation(const std::string& path);

}  // namespace unip
