#include "netlocal/trainer.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>

#include "netlocal/seeding.hpp"

namespace netlocal::localmodel {

namespace {
constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kEvalStream = 2;
constexpr std::size_t kEvalChunk = 1 << 16;
}  // namespace

void validate(const TrainConfig& tcfg) {
  if (tcfg.max_iters < 1 || tcfg.patience < 1 || tcfg.stage2_euclid_iters < 0 || !(tcfg.learning_rate > 0.0) ||
      tcfg.eval_samples < 1 || tcfg.smoothing_window < 1 || tcfg.restarts < 1)
    throw std::invalid_argument("training configuration values must be positive");
}

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

void Adam::step(LocalModelNet& net, const NetGradient& grad) {
  if (m_.empty()) {
    m_ = net.zero_gradient();
    v_ = net.zero_gradient();
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step = lr_ * std::sqrt(c2) / c1;
  const double eps = eps_ * std::sqrt(c2);
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseAbs2();
    param.array() -= step * m.array() / (v.array().sqrt() + eps);
  };
  for (std::size_t b = 0; b < grad.size(); ++b) {
    auto& layers = net.blocks()[b].layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weight, grad[b][l].weight, m_[b][l].weight, v_[b][l].weight);
      update(layers[l].bias, grad[b][l].bias, m_[b][l].bias, v_[b][l].bias);
    }
  }
}

Distances evaluate(const LocalModelNet& net, const Distribution& target, std::size_t n_eval, std::uint64_t seed) {
  if (n_eval < 1) throw std::invalid_argument("evaluation needs at least one sample");
  Rng rng(seed);
  std::vector<double> q(target.size(), 0.0);
  for (std::size_t done = 0; done < n_eval; done += kEvalChunk) {
    const std::size_t count = std::min(kEvalChunk, n_eval - done);
    const auto chunk = forward_empirical(net, HiddenSample::draw(count, net.config().n_sources(), rng));
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += chunk[i] * static_cast<double>(count);
  }
  for (auto& v : q) v /= static_cast<double>(n_eval);
  return {kl_divergence(target.probs(), q), euclidean_distance(target.probs(), q)};
}

namespace {

struct StageOutcome {
  int iterations = 0;
  double best_raw = std::numeric_limits<double>::infinity();
  std::size_t last_samples = 0;
};

StageOutcome run_stage(LocalModelNet& net, const Distribution& target, const TrainConfig& tcfg,
                       SamplingController& ctrl, LossKind kind, int stage, int max_iters, Adam& adam, Rng& rng,
                       TrainResult& result, const ProgressFn& progress) {
  ctrl.loss_kind = kind;
  ctrl.stagnation_mark = 0;
  StageOutcome out;
  std::size_t n_samples = ctrl.n_min;
  std::deque<double> window;
  double window_sum = 0.0;
  double best_smoothed = std::numeric_limits<double>::infinity();
  int since_improvement = 0;

  for (int it = 0; it < max_iters; ++it) {
    const auto sample = HiddenSample::draw(n_samples, net.config().n_sources(), rng);
    auto step = loss_and_gradient(net, target, sample, kind);
    adam.step(net, step.gradient);

    const double raw = step.loss;
    out.best_raw = std::min(out.best_raw, raw);
    window.push_back(raw);
    window_sum += raw;
    if (static_cast<int>(window.size()) > tcfg.smoothing_window) {
      window_sum -= window.front();
      window.pop_front();
    }
    const double smoothed = window_sum / static_cast<double>(window.size());
    if (smoothed < best_smoothed) {
      best_smoothed = smoothed;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    ctrl = bump_bias(ctrl, since_improvement);

    IterationRecord rec{result.iterations_run + 1, stage, raw, n_samples, ctrl.bias};
    if (tcfg.record_history) result.history.push_back(rec);
    if (progress) progress(rec);
    ++result.iterations_run;
    ++out.iterations;
    out.last_samples = n_samples;

    n_samples = next_sample_count(ctrl, raw);
    if (since_improvement >= tcfg.patience) break;
  }
  return out;
}

}  // namespace

TrainResult train(LocalModelNet& net, const Distribution& target, const TrainConfig& tcfg, SamplingController& ctrl,
                  const ProgressFn& progress) {
  validate(tcfg);
  if (!(target.indexer() == net.indexer())) throw std::invalid_argument("target shape does not match the network");
  ctrl.n_outcomes = target.size();
  validate(ctrl);

  TrainResult result;
  result.seed = tcfg.seed;
  Rng rng(derive_seed(tcfg.seed, {kSampleStream}));
  Adam adam(tcfg.learning_rate);

  const auto s1 = run_stage(net, target, tcfg, ctrl, LossKind::KL, 1, tcfg.max_iters, adam, rng, result, progress);
  result.stage1_iterations = s1.iterations;
  result.best_during_training = s1.best_raw;
  result.best_loss_kind = LossKind::KL;
  result.end_sample_count = s1.last_samples;
  if (tcfg.stage2_euclid_iters > 0) {
    const auto s2 = run_stage(net, target, tcfg, ctrl, LossKind::Euclidean, 2, tcfg.stage2_euclid_iters, adam, rng,
                              result, progress);
    result.stage2_iterations = s2.iterations;
    result.best_during_training = s2.best_raw;
    result.best_loss_kind = LossKind::Euclidean;
    result.end_sample_count = s2.last_samples;
  }
  result.end_bias = ctrl.bias;
  const auto d = evaluate(net, target, tcfg.eval_samples, derive_seed(tcfg.seed, {kEvalStream}));
  result.final_kl = d.kl;
  result.final_euclid = d.euclid;
  return result;
}

std::uint64_t restart_seed(std::uint64_t seed, int restart) {
  return restart == 0 ? seed : derive_seed(seed, {0x7265737461727473ULL, static_cast<std::uint64_t>(restart)});
}

SamplingController default_controller(const Distribution& target) {
  SamplingController ctrl;
  ctrl.n_outcomes = target.size();
  return ctrl;
}

FitOutcome fit(const NetworkConfig& config, const Distribution& target, int width, int depth, const TrainConfig& tcfg,
               const SamplingController& ctrl, const ProgressFn& progress) {
  validate(tcfg);
  std::optional<FitOutcome> best;
  auto score = [&](const TrainResult& r) { return tcfg.stage2_euclid_iters > 0 ? r.final_euclid : r.final_kl; };
  for (int r = 0; r < tcfg.restarts; ++r) {
    TrainConfig run_cfg = tcfg;
    run_cfg.seed = restart_seed(tcfg.seed, r);
    FitOutcome attempt{init_net(config, width, depth, run_cfg.seed), ctrl, {}};
    attempt.result = train(attempt.net, target, run_cfg, attempt.controller, progress);
    attempt.result.restart = r;
    if (!best || score(attempt.result) < score(best->result)) best = std::move(attempt);
  }
  return std::move(*best);
}

}  // namespace netlocal::localmodel
