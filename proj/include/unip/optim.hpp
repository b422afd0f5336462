#pragma once

#include <cstdint>
#include <string>

#include "unip/tensor.hpp"

namespace unip {

// Update rules shared by training (descent on w) and universal attacks
// (ascent on delta).
enum class UpdateRule { kSgd, kMomentumSgd, kAdam, kSign };

const char* update_rule_name(UpdateRule r);
UpdateRule parse_update_rule(const std::string& s);  // throws UsageError

enum class Direction { kDescent, kAscent };

// Per-variable state. velocity is used by momentum_sgd, m/v by adam.
struct OptimizerState {
  UpdateRule rule = UpdateRule::kSgd;
  double lr = 0.0;
  double momentum = 0.0;  // mu for momentum_sgd
  Tensor velocity;
  Tensor adam_m;
  Tensor adam_v;
  std::uint64_t step = 0;

  static OptimizerState sgd(double lr);
  static OptimizerState momentum_sgd(double lr, double mu,
                                     const std::vector<std::size_t>& shape);
  static OptimizerState adam(double lr, const std::vector<std::size_t>& shape);
  static OptimizerState sign(double lr);
};

// In-place step along grad (ascent) or -grad (descent).
//   sgd:          var += dir * lr * grad
//   momentum_sgd: g <- mu * g + dir * grad; var += lr * g
//   adam:         bias-corrected first/second moments (0.9, 0.999, 1e-8)
//   sign:         var += dir * lr * sign(grad), sign(0) = 0
void apply_update(Tensor& var, const Tensor& grad, OptimizerState& st,
                  Direction dir);

}  // namespace unip
