#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "netlocal/local_model.hpp"
#include "netlocal/sampling.hpp"

namespace netlocal::localmodel {

struct TrainConfig {
  int max_iters = 10'000;
  /// Stop after this many iterations without improvement of the smoothed loss.
  int patience = 1'000;
  /// Euclidean fine-tuning iterations after the KL stage; 0 disables it.
  int stage2_euclid_iters = 0;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t eval_samples = 1'000'000;
  /// Window of the moving average used to detect improvement.
  int smoothing_window = 50;
  /// Independent seeds tried by fit; the best is kept.
  int restarts = 1;
  bool record_history = false;
};

void validate(const TrainConfig& tcfg);

struct IterationRecord {
  int iteration = 0;
  int stage = 1;
  double loss = 0.0;
  std::size_t samples = 0;
  double bias = 0.0;
};

struct TrainResult {
  double final_kl = 0.0;
  double final_euclid = 0.0;
  /// Smallest raw (sampling-noise affected) loss seen in the last stage.
  double best_during_training = 0.0;
  LossKind best_loss_kind = LossKind::KL;
  int iterations_run = 0;
  int stage1_iterations = 0;
  int stage2_iterations = 0;
  std::size_t end_sample_count = 0;
  double end_bias = 0.0;
  std::uint64_t seed = 0;
  /// Which restart produced this result.
  int restart = 0;
  std::vector<IterationRecord> history;
};

/// Adam with default moments.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  void step(LocalModelNet& net, const NetGradient& grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  NetGradient m_, v_;
};

struct Distances {
  double kl = 0.0;
  double euclid = 0.0;
};

/// Both distances from one fresh sample of `n_eval` hidden-variable draws.
Distances evaluate(const LocalModelNet& net, const Distribution& target, std::size_t n_eval, std::uint64_t seed);

using ProgressFn = std::function<void(const IterationRecord&)>;

/// Stage 1 minimizes KL, the optional stage 2 the Euclidean distance. Each
/// iteration draws a fresh hidden sample sized by the controller and takes
/// one Adam step. Deterministic in tcfg.seed. The net is left at its final
/// parameters; `ctrl` is left in its final state.
TrainResult train(LocalModelNet& net, const Distribution& target, const TrainConfig& tcfg, SamplingController& ctrl,
                  const ProgressFn& progress = {});

struct FitOutcome {
  LocalModelNet net;
  SamplingController controller;
  TrainResult result;
};

/// Seed for restart r of a run with base seed `seed`.
std::uint64_t restart_seed(std::uint64_t seed, int restart);

/// Runs tcfg.restarts fresh initializations and keeps the one with the
/// smallest final distance (Euclidean when stage 2 runs, KL otherwise).
FitOutcome fit(const NetworkConfig& config, const Distribution& target, int width, int depth, const TrainConfig& tcfg,
               const SamplingController& ctrl, const ProgressFn& progress = {});

/// Default controller for `target` (KL, B = 4, N_o from the target).
SamplingController default_controller(const Distribution& target);

}  // namespace netlocal::localmodel
