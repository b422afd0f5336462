#include "unip/optim.hpp"

#include <cmath>

#include "unip/errors.hpp"

namespace unip {

namespace {
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
}  // namespace

const char* update_rule_name(UpdateRule r) {
  switch (r) {
    case UpdateRule::kSgd: return "sgd";
    case UpdateRule::kMomentumSgd: return "momentum_sgd";
    case UpdateRule::kAdam: return "adam";
    case UpdateRule::kSign: return "sign";
  }
  return "?";
}

UpdateRule parse_update_rule(const std::string& s) {
  if (s == "sgd") return UpdateRule::kSgd;
  if (s == "momentum_sgd") return UpdateRule::kMomentumSgd;
  if (s == "adam") return UpdateRule::kAdam;
  if (s == "sign") return UpdateRule::kSign;
  throw UsageError("unknown update rule '" + s +
                   "' (expected sgd|momentum_sgd|adam|sign)");
}

OptimizerState OptimizerState::sgd(double lr) {
  OptimizerState st;
  st.rule = UpdateRule::kSgd;
  st.lr = lr;
  return st;
}

OptimizerState OptimizerState::momentum_sgd(
    double lr, double mu, const std::vector<std::size_t>& shape) {
  OptimizerState st;
  st.rule = UpdateRule::kMomentumSgd;
  st.lr = lr;
  st.momentum = mu;
  st.velocity = Tensor(shape);
  return st;
}

OptimizerState OptimizerState::adam(double lr,
                                    const std::vector<std::size_t>& shape) {
  OptimizerState st;
  st.rule = UpdateRule::kAdam;
  st.lr = lr;
  st.adam_m = Tensor(shape);
  st.adam_v = Tensor(shape);
  return st;
}

OptimizerState OptimizerState::sign(double lr) {
  OptimizerState st;
  st.rule = UpdateRule::kSign;
  st.lr = lr;
  return st;
}

void apply_update(Tensor& var, const Tensor& grad, OptimizerState& st,
                  Direction dir) {
  if (!var.same_shape(grad)) {
    throw UsageError("update: variable shape " + shape_str(var.shape()) +
                     " vs gradient shape " + shape_str(grad.shape()));
  }
  const double s = dir == Direction::kAscent ? 1.0 : -1.0;
  const std::size_t n = var.size();
  ++st.step;
  switch (st.rule) {
    case UpdateRule::kSgd: {
      const float c = static_cast<float>(s * st.lr);
      for (std::size_t i = 0; i < n; ++i) var[i] += c * grad[i];
      break;
    }
    case UpdateRule::kMomentumSgd: {
      if (!st.velocity.same_shape(var)) {
        throw UsageError("momentum state shape mismatch");
      }
      const float mu = static_cast<float>(st.momentum);
      const float sd = static_cast<float>(s);
      const float lr = static_cast<float>(st.lr);
      for (std::size_t i = 0; i < n; ++i) {
        st.velocity[i] = mu * st.velocity[i] + sd * grad[i];
        var[i] += lr * st.velocity[i];
      }
      break;
    }
    case UpdateRule::kAdam: {
      if (!st.adam_m.same_shape(var)) {
        throw UsageError("adam state shape mismatch");
      }
      const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(st.step));
      const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(st.step));
      for (std::size_t i = 0; i < n; ++i) {
        const double g = static_cast<double>(grad[i]);
        const double m = kAdamBeta1 * st.adam_m[i] + (1.0 - kAdamBeta1) * g;
        const double v = kAdamBeta2 * st.adam_v[i] + (1.0 - kAdamBeta2) * g * g;
        st.adam_m[i] = static_cast<float>(m);
        st.adam_v[i] = static_cast<float>(v);
        var[i] += static_cast<float>(s * st.lr * (m / c1) /
                                     (std::sqrt(v / c2) + kAdamEps));
      }
      break;
    }
    case UpdateRule::kSign: {
      const float c = static_cast<float>(s * st.lr);
      for (std::size_t i = 0; i < n; ++i) var[i] += c * sign_of(grad[i]);
      break;
    }
  }
}

}  // namespace unip
