#include <cmath>
#include <numeric>

#include <doctest.h>

#include "netlocal/calibrate.hpp"

using namespace netlocal;
using namespace netlocal::calibrate;

TEST_CASE("random references lie on the simplex with Dirichlet(1) marginals") {
  localmodel::Rng rng(3);
  constexpr std::size_t kOutcomes = 16;
  constexpr int kDraws = 20000;
  double mean0 = 0.0, sq0 = 0.0;
  for (int t = 0; t < kDraws; ++t) {
    const auto p = random_reference(kOutcomes, rng);
    REQUIRE(p.size() == kOutcomes);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : p) CHECK(v >= 0.0);
    mean0 += p[0];
    sq0 += p[0] * p[0];
  }
  mean0 /= kDraws;
  const double var0 = sq0 / kDraws - mean0 * mean0;
  // Beta(1, N_o - 1): mean 1/N_o, variance (N_o - 1) / (N_o^2 (N_o + 1))
  const double n = kOutcomes;
  const double want_var = (n - 1) / (n * n * (n + 1));
  CHECK(std::abs(mean0 - 1.0 / n) < 4.0 * std::sqrt(want_var / kDraws));
  CHECK(var0 == doctest::Approx(want_var).epsilon(0.05));
}

TEST_CASE("multinomial estimates are count fractions with the right mean") {
  localmodel::Rng rng(5);
  const std::vector<double> p{0.5, 0.25, 0.125, 0.125, 0.0};
  constexpr std::size_t kSamples = 200;
  constexpr int kTrials = 5000;
  std::vector<double> mean(p.size(), 0.0);
  for (int t = 0; t < kTrials; ++t) {
    const auto q = multinomial_estimate(p, kSamples, rng);
    double total = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double count = q[i] * kSamples;
      CHECK(count == doctest::Approx(std::round(count)).epsilon(1e-9));
      total += q[i];
      mean[i] += q[i] / kTrials;
    }
    CHECK(total == doctest::Approx(1.0));
    CHECK(q.back() == 0.0);
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double se = std::sqrt(p[i] * (1 - p[i]) / kSamples / kTrials);
    CHECK(std::abs(mean[i] - p[i]) <= 4.0 * se + 1e-15);
  }
}

TEST_CASE("mean squared Euclidean sampling distance follows sum p(1-p)/N_s") {
  localmodel::Rng rng(11);
  const auto p = random_reference(32, rng);
  constexpr std::size_t kSamples = 500;
  const auto stats = sampling_stats(p, kSamples, 2000, 7);
  double expected = 0.0;
  for (double v : p) expected += v * (1 - v);
  expected /= kSamples;
  CHECK(std::abs(stats.sq_euclid_mean - expected) < 3.0 * stats.sq_euclid_se);
  CHECK(stats.sq_euclid_mean < (1.0 - 1.0 / 32) / kSamples + 3.0 * stats.sq_euclid_se);
  CHECK(stats.kl_mean > 0.0);
  CHECK(stats.euclid_mean * stats.euclid_mean <= stats.sq_euclid_mean + 1e-15);
}

TEST_CASE("sampling_stats is deterministic in its seed") {
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  const auto a = sampling_stats(p, 100, 50, 9);
  const auto b = sampling_stats(p, 100, 50, 9);
  const auto c = sampling_stats(p, 100, 50, 10);
  CHECK(a.kl_mean == b.kl_mean);
  CHECK(a.euclid_mean == b.euclid_mean);
  CHECK(a.kl_mean != c.kl_mean);
}

TEST_CASE("study layout, bounds and CSV") {
  const auto report = sampling_error_study({4, 16}, {100, 1000}, 20, 1);
  REQUIRE(report.cells.size() == 4);
  for (const auto& cell : report.cells) {
    CHECK(cell.stats.trials == 20);
    CHECK(cell.uniform_bound_sq_euclid ==
          doctest::Approx((1.0 - 1.0 / static_cast<double>(cell.n_outcomes)) / static_cast<double>(cell.n_samples)));
    CHECK(cell.expected_sq_euclid <= cell.uniform_bound_sq_euclid + 1e-15);
  }
  const auto parallel = sampling_error_study({4, 16}, {100, 1000}, 20, 1, 3);
  for (std::size_t i = 0; i < report.cells.size(); ++i) CHECK(parallel.cells[i].stats.kl_mean == report.cells[i].stats.kl_mean);

  const auto csv = report_csv(report);
  CHECK(csv.substr(0, csv.find('\n')) ==
        "n_outcomes,n_samples,trials,kl_mean,kl_se,euclid_mean,euclid_se,sq_euclid_mean,sq_euclid_se,"
        "expected_sq_euclid,uniform_bound_sq_euclid");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

namespace {

CalibrationReport synthetic(const std::vector<std::size_t>& outcomes, const std::vector<std::size_t>& samples,
                            double c_e, double c_k) {
  CalibrationReport r;
  for (auto no : outcomes)
    for (auto ns : samples) {
      CalibrationCell cell;
      cell.n_outcomes = no;
      cell.n_samples = ns;
      cell.stats.euclid_mean = c_e / std::sqrt(static_cast<double>(ns));
      cell.stats.kl_mean = c_k * static_cast<double>(no) / static_cast<double>(ns);
      r.cells.push_back(cell);
    }
  return r;
}

}  // namespace

TEST_CASE("scaling fit recovers exact power laws") {
  const auto fit = fit_scalings(synthetic({4, 64, 256}, {1000, 10000, 100000}, 0.9, 0.55));
  REQUIRE(fit.has_no_axis);
  CHECK(fit.euclid_slope_ns.value == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(std::abs(fit.euclid_slope_no.value) < 1e-9);
  CHECK(fit.kl_slope_ns.value == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(fit.kl_slope_no.value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(fit.c_euclid.value - 0.9) < 1e-6);
  CHECK(std::abs(fit.c_kl.value - 0.55) < 1e-6);
  CHECK(fit.c_kl.ci_low <= fit.c_kl.value);
  CHECK(fit.c_kl.ci_high >= fit.c_kl.value);

  const auto single = fit_scalings(synthetic({64}, {1000, 10000}, 1.0, 0.5));
  CHECK_FALSE(single.has_no_axis);
  CHECK(single.kl_slope_ns.value == doctest::Approx(-1.0));
  CHECK(fit_json(single).contains("kl_slope_vs_samples"));
}

TEST_CASE("degenerate scaling fits are rejected") {
  CHECK_THROWS_AS(fit_scalings(synthetic({4, 64}, {1000}, 1.0, 0.5)), std::invalid_argument);
  auto zero = synthetic({4}, {100, 1000}, 1.0, 0.5);
  zero.cells[0].stats.kl_mean = 0.0;
  CHECK_THROWS_AS(fit_scalings(zero), std::invalid_argument);
  CHECK_THROWS_AS(fit_scalings(CalibrationReport{}), std::invalid_argument);
}
