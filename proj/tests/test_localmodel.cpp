#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "netlocal/checkpoint.hpp"
#include "netlocal/trainer.hpp"

using namespace netlocal;
using namespace netlocal::localmodel;

namespace {

Distribution random_target(const OutcomeIndexer& idx, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(idx.total());
  double s = 0;
  for (auto& v : p) s += (v = e(rng));
  for (auto& v : p) v /= s;
  return Distribution(idx, p);
}

void zero_all(LocalModelNet& net) {
  for (auto& block : net.blocks())
    for (auto& layer : block.layers()) {
      layer.weight.setZero();
      layer.bias.setZero();
    }
}

/// Party outputs 2 * [lambda_first > t_first] + [lambda_second > t_second],
/// realized with steep ReLU ramps so the softmax is effectively one-hot.
ResponseBlock threshold_block(double t_first, double t_second) {
  constexpr double K = 1e6;
  ResponseBlock block(2, 4, 1, 4);
  auto& hidden = block.layers()[0];
  hidden.weight << K, 0, -K, 0, 0, K, 0, -K;
  hidden.bias << -K * t_first, K * t_first, -K * t_second, K * t_second;
  auto& out = block.layers()[1];
  for (int o = 0; o < 4; ++o) {
    const int hi = o / 2, lo = o % 2;
    out.weight(o, 0) = hi;
    out.weight(o, 1) = 1 - hi;
    out.weight(o, 2) = lo;
    out.weight(o, 3) = 1 - lo;
  }
  return block;
}

/// Exact distribution of the threshold strategy: each source is cut by the
/// two thresholds of its two parties, and sources are independent.
std::vector<double> threshold_distribution(const NetworkConfig& cfg, const std::vector<std::array<double, 2>>& t) {
  const OutcomeIndexer idx(cfg.outcome_shape());
  std::vector<double> p(idx.total(), 0.0);
  for (std::size_t i = 0; i < idx.total(); ++i) {
    const auto tuple = idx.tuple(i);
    double prob = 1.0;
    for (const auto& source : cfg.sources()) {
      double lo = 0.0, hi = 1.0;
      for (std::size_t party = 0; party < cfg.n_parties(); ++party) {
        const auto& srcs = cfg.parties()[party].sources;
        for (std::size_t k = 0; k < srcs.size(); ++k) {
          if (srcs[k] != source) continue;
          const int bit = k == 0 ? tuple[party] / 2 : tuple[party] % 2;
          if (bit) lo = std::max(lo, t[party][k]);
          else hi = std::min(hi, t[party][k]);
        }
      }
      prob *= std::max(0.0, hi - lo);
    }
    p[i] = prob;
  }
  return p;
}

}  // namespace

TEST_CASE("init_net shapes and determinism") {
  const auto cfg = triangle_network(4);
  const auto net = init_net(cfg, 60, 4, 1);
  REQUIRE(net.blocks().size() == 3);
  for (const auto& b : net.blocks()) {
    CHECK(b.input_dim() == 2);
    CHECK(b.output_dim() == 4);
    CHECK(b.layers().size() == 5);
  }
  CHECK(net.flat_parameters() == init_net(cfg, 60, 4, 1).flat_parameters());
  CHECK(net.flat_parameters() != init_net(cfg, 60, 4, 2).flat_parameters());
  const auto tiny = init_net(cfg, 1, 1, 3);
  Rng rng(1);
  const auto q = forward_empirical(tiny, HiddenSample::draw(10, 3, rng));
  CHECK(q.size() == 64);
}

TEST_CASE("hidden samples are prefix-stable and in [0, 1)") {
  Rng a(9), b(9);
  const auto big = HiddenSample::draw(100, 3, a);
  const auto small = HiddenSample::draw(40, 3, b);
  CHECK(big.slice(0, 40).values() == small.values());
  CHECK(big.values().minCoeff() >= 0.0);
  CHECK(big.values().maxCoeff() < 1.0);
}

TEST_CASE("forward_empirical special cases") {
  const auto cfg = triangle_network(4);
  auto net = init_net(cfg, 8, 2, 5);
  zero_all(net);
  Rng rng(2);
  const auto q = forward_empirical(net, HiddenSample::draw(37, 3, rng));
  for (double v : q.probs()) CHECK(v == doctest::Approx(1.0 / 64).epsilon(1e-14));

  // one-hot outputs: party i always answers i
  for (std::size_t i = 0; i < 3; ++i) net.blocks()[i].layers().back().bias[static_cast<Eigen::Index>(i)] = 800.0;
  const auto point = forward_empirical(net, HiddenSample::draw(1, 3, rng));
  CHECK(point.at(std::vector<int>{0, 1, 2}) == doctest::Approx(1.0));
  CHECK_THROWS(forward_empirical(net, HiddenSample::draw(5, 2, rng)));
}

TEST_CASE("threshold responders reproduce their exact distribution") {
  const auto cfg = triangle_network(4);
  const std::vector<std::array<double, 2>> t{{0.3, 0.6}, {0.5, 0.2}, {0.7, 0.45}};
  std::vector<ResponseBlock> blocks;
  for (const auto& th : t) blocks.push_back(threshold_block(th[0], th[1]));
  const LocalModelNet net(cfg, std::move(blocks));
  const auto exact = threshold_distribution(cfg, t);
  double total = 0;
  for (double v : exact) total += v;
  CHECK(total == doctest::Approx(1.0));
  const std::size_t n = 1'000'000;
  Rng rng(17);
  const auto q = forward_empirical(net, HiddenSample::draw(n, 3, rng));
  for (std::size_t i = 0; i < exact.size(); ++i) CHECK(std::abs(q[i] - exact[i]) < 3.0 / std::sqrt(double(n)));

  const Distribution target(OutcomeIndexer(cfg.outcome_shape()), exact);
  const auto d = evaluate(net, target, n, 99);
  CHECK(d.euclid <= 3.0 * std::sqrt((1.0 - 1.0 / 64) / double(n)));
}

TEST_CASE("loss examples") {
  const OutcomeIndexer idx({4});
  const auto u = Distribution::uniform(idx);
  const Distribution point(idx, {1, 0, 0, 0});
  CHECK(loss(u, u, LossKind::KL) == 0.0);
  CHECK(loss(u, u, LossKind::Euclidean) == 0.0);
  CHECK(loss(u, point, LossKind::Euclidean) == doctest::Approx(std::sqrt(0.75)));
  CHECK(loss(u, point, LossKind::KL) != doctest::Approx(loss(point, u, LossKind::KL)));
  CHECK(parse_loss_kind("kl") == LossKind::KL);
  CHECK(parse_loss_kind("euclid") == LossKind::Euclidean);
  CHECK_THROWS(parse_loss_kind("l1"));
}

TEST_CASE("analytic gradient matches central finite differences") {
  std::mt19937_64 rng(2024);
  const auto cfg = triangle_network(4);
  const OutcomeIndexer idx(cfg.outcome_shape());
  for (int trial = 0; trial < 20; ++trial) {
    const int width = 2 + trial % 7;
    const int depth = 1 + trial % 2;
    const std::size_t n = 20 + static_cast<std::size_t>(trial) * 4;
    const auto kind = trial % 2 ? LossKind::Euclidean : LossKind::KL;
    auto net = init_net(cfg, width, depth, static_cast<std::uint64_t>(trial));
    // random biases so ReLUs are not all tied at zero
    for (auto& b : net.blocks())
      for (auto& l : b.layers()) l.bias = Vector::Random(l.bias.size()) * 0.3;
    const auto target = random_target(idx, rng);
    Rng srng(static_cast<std::uint64_t>(trial));
    const auto sample = HiddenSample::draw(n, 3, srng);
    const auto analytic = LocalModelNet::flatten(gradient(net, target, sample, kind));

    auto params = net.flat_parameters();
    auto central = [&](std::size_t k, double h) {
      const double saved = params[k];
      params[k] = saved + h;
      net.set_flat_parameters(params);
      const double up = loss(target, forward_empirical(net, sample), kind);
      params[k] = saved - h;
      net.set_flat_parameters(params);
      const double down = loss(target, forward_empirical(net, sample), kind);
      params[k] = saved;
      return (up - down) / (2 * h);
    };
    auto rel_error = [&](std::size_t k, double fd) {
      return std::abs(fd - analytic[k]) / std::max({std::abs(fd), std::abs(analytic[k]), 1e-6});
    };
    double worst = 0.0;
    std::size_t kinks = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      double err = rel_error(k, central(k, 1e-5));
      // A ReLU kink inside the stencil makes the 1e-5 difference meaningless;
      // it shows up as disagreement with a much finer stencil.
      if (err >= 1e-4) {
        const double fine = rel_error(k, central(k, 1e-7));
        if (fine < 1e-4) {
          ++kinks;
          err = fine;
        }
      }
      worst = std::max(worst, err);
    }
    net.set_flat_parameters(params);
    CAPTURE(trial);
    CHECK(worst < 1e-4);
    CHECK(kinks * 50 <= params.size());
  }
}

TEST_CASE("uniform blocks are stationary for a uniform target") {
  const auto cfg = triangle_network(4);
  auto net = init_net(cfg, 6, 2, 1);
  zero_all(net);
  Rng rng(4);
  const auto sample = HiddenSample::draw(50, 3, rng);
  const auto u = Distribution::uniform(OutcomeIndexer(cfg.outcome_shape()));
  for (auto kind : {LossKind::KL, LossKind::Euclidean})
    for (double g : LocalModelNet::flatten(gradient(net, u, sample, kind))) CHECK(std::abs(g) < 1e-14);
}

TEST_CASE("sample-count rule") {
  SamplingController c;
  c.n_outcomes = 64;
  CHECK(next_sample_count(c, 0.01) == 25600);
  c.loss_kind = LossKind::Euclidean;
  CHECK(next_sample_count(c, 0.02) == 40000);
  CHECK(next_sample_count(c, 10.0) == c.n_min);
  CHECK(next_sample_count(c, 0.0) == c.n_max);
  CHECK(next_sample_count(c, -1.0) == c.n_max);
  CHECK(next_sample_count(c, std::nan("")) == c.n_max);
  CHECK(next_sample_count(c, 1e-6) == c.n_max);
  c.bias = 1.0;
  CHECK_THROWS(validate(c));
}

TEST_CASE("bias bumps") {
  SamplingController c;
  c.n_outcomes = 4;
  CHECK(bump_bias(c, 50).bias == 4.0);
  auto bumped = bump_bias(c, c.stagnation_window + 1);
  CHECK(bumped.bias == 5.0);
  // the window restarts after a bump
  CHECK(bump_bias(bumped, c.stagnation_window + 2).bias == 5.0);
  CHECK(bump_bias(bumped, 2 * c.stagnation_window + 2).bias == 6.0);
  c.bias = 10.0;
  CHECK(bump_bias(c, c.stagnation_window + 1).bias == 10.0);
}

TEST_CASE("training a small net on the uniform target") {
  const auto cfg = triangle_network(4);
  const auto u = Distribution::uniform(OutcomeIndexer(cfg.outcome_shape()));
  TrainConfig t;
  t.max_iters = 2000;
  t.seed = 3;
  t.eval_samples = 100'000;
  auto ctrl = default_controller(u);
  ctrl.n_max = 20'000;
  auto out = fit(cfg, u, 16, 2, t, ctrl);
  CHECK(out.result.final_kl < 1e-3);
  CHECK(out.result.iterations_run <= 2000);

  // same seed, same result
  auto again = fit(cfg, u, 16, 2, t, ctrl);
  CHECK(again.result.final_kl == out.result.final_kl);
  CHECK(again.result.best_during_training == out.result.best_during_training);
  CHECK(again.net.flat_parameters() == out.net.flat_parameters());
}

TEST_CASE("two-stage schedule and restarts") {
  std::mt19937_64 rng(8);
  const auto cfg = triangle_network(2);
  const auto target = random_target(OutcomeIndexer(cfg.outcome_shape()), rng);
  TrainConfig t;
  t.max_iters = 60;
  t.stage2_euclid_iters = 40;
  t.restarts = 3;
  t.eval_samples = 20'000;
  t.record_history = true;
  auto ctrl = default_controller(target);
  ctrl.n_max = 5'000;
  const auto out = fit(cfg, target, 8, 1, t, ctrl);
  CHECK(out.result.stage1_iterations + out.result.stage2_iterations == out.result.iterations_run);
  CHECK(out.result.best_loss_kind == LossKind::Euclidean);
  CHECK(out.result.history.back().stage == 2);
  CHECK(out.result.restart >= 0);
  CHECK(out.result.restart < 3);
  CHECK(restart_seed(5, 0) == 5);
  CHECK(restart_seed(5, 1) != restart_seed(5, 2));
}

TEST_CASE("evaluation floor shrinks with more samples") {
  const auto cfg = triangle_network(4);
  const auto net = init_net(cfg, 8, 2, 12);
  Rng rng(1);
  const auto exact = forward_empirical(net, HiddenSample::draw(4'000'000, 3, rng));
  double small = 0, large = 0;
  for (std::uint64_t s = 0; s < 8; ++s) {
    small += evaluate(net, exact, 10'000, s).euclid;
    large += evaluate(net, exact, 100'000, s + 100).euclid;
  }
  CHECK(small / large == doctest::Approx(std::sqrt(10.0)).epsilon(0.3));
}

TEST_CASE("checkpoint round trip") {
  const auto cfg = triangle_network(4);
  Checkpoint ckpt{init_net(cfg, 5, 2, 77), SamplingController{}, TrainConfig{}, std::nullopt};
  ckpt.controller.n_outcomes = 64;
  ckpt.controller.bias = 6;
  ckpt.train_config.seed = 77;
  TrainResult r;
  r.final_kl = 0.125;
  r.iterations_run = 10;
  r.seed = 77;
  ckpt.result = r;
  const auto path = std::filesystem::temp_directory_path() / "netlocal_ckpt_test.json";
  save_checkpoint(ckpt, path);
  const auto back = load_checkpoint(path);
  std::filesystem::remove(path);
  CHECK(back.net.flat_parameters() == ckpt.net.flat_parameters());
  CHECK(back.net.config() == cfg);
  CHECK(back.controller.bias == 6.0);
  CHECK(back.train_config.seed == 77);
  REQUIRE(back.result);
  CHECK(back.result->final_kl == 0.125);

  auto j = checkpoint_to_json(ckpt);
  j["version"] = kCheckpointVersion + 1;
  CHECK_THROWS(checkpoint_from_json(j));
  j = checkpoint_to_json(ckpt);
  j["format"] = "other";
  CHECK_THROWS(checkpoint_from_json(j));
}

TEST_CASE("strategy export") {
  const auto cfg = triangle_network(3);
  auto net = init_net(cfg, 8, 2, 4);
  const auto grid = export_strategies(net, "a2", 10);
  CHECK(grid.probs.rows() == 100);
  CHECK(grid.probs.cols() == 3);
  for (Eigen::Index r = 0; r < grid.probs.rows(); ++r) CHECK(std::abs(grid.probs.row(r).sum() - 1.0) < 1e-9);
  zero_all(net);
  const auto flat = export_strategies(net, "a1", 4);
  CHECK((flat.probs.array() - 1.0 / 3).abs().maxCoeff() < 1e-15);
  const auto csv = strategy_csv(flat);
  CHECK(csv.rfind("lambda_a,lambda_b,p_0,p_1,p_2\n", 0) == 0);
  CHECK_THROWS(export_strategies(net, "nobody", 4));
  const auto single = parse_config(R"({"parties": {"a": {"sources": ["x"], "outcomes": 2}}})");
  CHECK_THROWS(export_strategies(init_net(single, 2, 1, 0), "a", 4));
}
