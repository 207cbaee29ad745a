#pragma once

#include <cstddef>

#include "netlocal/local_model.hpp"

namespace netlocal::localmodel {

/// Adaptive sample-count rule. The next iteration uses enough samples that
/// the expected sampling error sits a factor B below the last loss:
/// N_s = (B / L)^2 for the Euclidean distance and N_s = B * N_o / L for KL.
struct SamplingController {
  double bias = 4.0;
  double bias_max = 10.0;
  LossKind loss_kind = LossKind::KL;
  std::size_t n_outcomes = 0;
  std::size_t n_min = 1'000;
  std::size_t n_max = 10'000'000;
  /// Iterations without improvement before B goes up by one.
  int stagnation_window = 100;
  /// Value of the stagnation counter at the last bump.
  int stagnation_mark = 0;

  static constexpr double kBiasMin = 2.0;
};

/// Throws if bias is outside [2, bias_max] or the clamps are inconsistent.
void validate(const SamplingController& ctrl);

/// Non-positive (or NaN) losses are below resolution and get n_max.
std::size_t next_sample_count(const SamplingController& ctrl, double last_loss);

/// `iterations_since_improvement` is reset to 0 by the caller on every
/// improvement. Once it runs more than `stagnation_window` past the last
/// bump, B increments (capped at bias_max) and the window restarts.
SamplingController bump_bias(SamplingController ctrl, int iterations_since_improvement);

}  // namespace netlocal::localmodel
