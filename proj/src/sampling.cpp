#include "netlocal/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace netlocal::localmodel {

void validate(const SamplingController& ctrl) {
  if (!(ctrl.bias >= SamplingController::kBiasMin && ctrl.bias <= ctrl.bias_max))
    throw std::invalid_argument("bias parameter must lie in [2, bias_max]");
  if (ctrl.n_min < 1 || ctrl.n_min > ctrl.n_max) throw std::invalid_argument("need 1 <= n_min <= n_max");
  if (ctrl.n_outcomes < 1) throw std::invalid_argument("controller needs the number of joint outcomes");
  if (ctrl.stagnation_window < 1) throw std::invalid_argument("stagnation window must be positive");
}

std::size_t next_sample_count(const SamplingController& ctrl, double last_loss) {
  if (!(last_loss > 0.0)) return ctrl.n_max;
  double n = 0.0;
  if (ctrl.loss_kind == LossKind::Euclidean) {
    const double ratio = ctrl.bias / last_loss;
    n = ratio * ratio;
  } else {
    n = ctrl.bias * static_cast<double>(ctrl.n_outcomes) / last_loss;
  }
  // guard against ceil(25600.000000000004) style round-up
  n = std::ceil(n * (1.0 - 1e-12));
  if (!(n < static_cast<double>(ctrl.n_max))) return ctrl.n_max;
  return std::max(ctrl.n_min, static_cast<std::size_t>(n));
}

SamplingController bump_bias(SamplingController ctrl, int iterations_since_improvement) {
  if (iterations_since_improvement < ctrl.stagnation_mark) ctrl.stagnation_mark = 0;
  if (iterations_since_improvement - ctrl.stagnation_mark > ctrl.stagnation_window) {
    ctrl.bias = std::min(ctrl.bias + 1.0, ctrl.bias_max);
    ctrl.stagnation_mark = iterations_since_improvement;
  }
  return ctrl;
}

}  // namespace netlocal::localmodel
