#include "netlocal/calibrate.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "netlocal/seeding.hpp"

namespace netlocal::calibrate {

using localmodel::Rng;

namespace {

constexpr std::uint64_t kReferenceStream = 1;
constexpr std::uint64_t kTrialStream = 2;
constexpr double kZ95 = 1.959963984540054;

struct Moments {
  double sum = 0.0, sum_sq = 0.0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
  }
  std::pair<double, double> mean_se(int n) const {
    const double mean = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1)) : 0.0;
    return {mean, std::sqrt(var / n)};
  }
};

LineFit interval(double value, double se) { return {value, value - kZ95 * se, value + kZ95 * se}; }

/// Ordinary least squares y ~ X b with normal-approximation intervals.
std::vector<LineFit> ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols()) throw std::invalid_argument("degenerate fit: design matrix is rank deficient");
  const Eigen::VectorXd b = qr.solve(y);
  const auto dof = X.rows() - X.cols();
  const double s2 = dof > 0 ? (y - X * b).squaredNorm() / static_cast<double>(dof) : 0.0;
  const Eigen::MatrixXd cov = s2 * (X.transpose() * X).inverse();
  std::vector<LineFit> out;
  for (Eigen::Index k = 0; k < b.size(); ++k) out.push_back(interval(b[k], std::sqrt(cov(k, k))));
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::vector<double> random_reference(std::size_t n_outcomes, Rng& rng) {
  if (n_outcomes < 1) throw std::invalid_argument("need at least one outcome");
  std::vector<double> p(n_outcomes);
  double total = 0.0;
  for (auto& v : p) {
    // Exp(1) by inversion; 1 - U lies in (0, 1]
    v = -std::log(1.0 - localmodel::uniform01(rng));
    total += v;
  }
  for (auto& v : p) v /= total;
  return p;
}

std::vector<double> multinomial_estimate(const std::vector<double>& p, std::size_t n_samples, Rng& rng) {
  std::vector<double> q(p.size(), 0.0);
  long long remaining = static_cast<long long>(n_samples);
  double mass = 1.0;
  for (std::size_t i = 0; i + 1 < p.size() && remaining > 0; ++i) {
    const double prob = mass > 0.0 ? std::clamp(p[i] / mass, 0.0, 1.0) : 1.0;
    const long long k = std::binomial_distribution<long long>(remaining, prob)(rng);
    q[i] = static_cast<double>(k);
    remaining -= k;
    mass -= p[i];
  }
  q.back() += static_cast<double>(remaining);
  for (auto& v : q) v /= static_cast<double>(n_samples);
  return q;
}

SamplingStats sampling_stats(const std::vector<double>& reference, std::size_t n_samples, int trials,
                             std::uint64_t seed) {
  if (n_samples < 1 || trials < 1) throw std::invalid_argument("samples and trials must be positive");
  Moments kl, eu, sq;
  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    const auto q = multinomial_estimate(reference, n_samples, rng);
    const double d = euclidean_distance(reference, q);
    kl.add(kl_divergence(reference, q));
    eu.add(d);
    sq.add(d * d);
  }
  SamplingStats s;
  s.trials = trials;
  std::tie(s.kl_mean, s.kl_se) = kl.mean_se(trials);
  std::tie(s.euclid_mean, s.euclid_se) = eu.mean_se(trials);
  std::tie(s.sq_euclid_mean, s.sq_euclid_se) = sq.mean_se(trials);
  return s;
}

CalibrationReport sampling_error_study(const std::vector<std::size_t>& outcomes,
                                       const std::vector<std::size_t>& samples, int trials, std::uint64_t seed,
                                       int jobs) {
  if (outcomes.empty() || samples.empty()) throw std::invalid_argument("calibration grid is empty");
  if (trials < 1 || jobs < 1) throw std::invalid_argument("trials and jobs must be positive");
  CalibrationReport report;
  report.seed = seed;
  report.trials = trials;
  for (auto o : outcomes)
    for (auto n : samples) {
      if (o < 1 || n < 1) throw std::invalid_argument("outcome and sample counts must be positive");
      report.cells.push_back({o, n, {}, 0.0, 0.0});
    }

  auto run_cell = [&](CalibrationCell& cell) {
    Rng ref_rng(derive_seed(seed, {kReferenceStream, cell.n_outcomes, cell.n_samples}));
    const auto p = random_reference(cell.n_outcomes, ref_rng);
    cell.stats = sampling_stats(p, cell.n_samples, trials, derive_seed(seed, {kTrialStream, cell.n_outcomes, cell.n_samples}));
    double spread = 0.0;
    for (double v : p) spread += v * (1.0 - v);
    const auto ns = static_cast<double>(cell.n_samples);
    cell.expected_sq_euclid = spread / ns;
    cell.uniform_bound_sq_euclid = (1.0 - 1.0 / static_cast<double>(cell.n_outcomes)) / ns;
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < report.cells.size(); i = next++) run_cell(report.cells[i]);
  };
  std::vector<std::jthread> pool;
  const auto n_workers = std::min(static_cast<std::size_t>(jobs), report.cells.size());
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  return report;
}

ScalingFit fit_scalings(const CalibrationReport& report) {
  std::set<std::size_t> ns_values, no_values;
  for (const auto& c : report.cells) {
    ns_values.insert(c.n_samples);
    no_values.insert(c.n_outcomes);
    if (!(c.stats.kl_mean > 0.0) || !(c.stats.euclid_mean > 0.0))
      throw std::invalid_argument("degenerate fit: non-positive mean distance");
  }
  if (ns_values.size() < 2) throw std::invalid_argument("degenerate fit: need at least two distinct sample counts");

  ScalingFit fit;
  fit.has_no_axis = no_values.size() >= 2;
  const auto rows = static_cast<Eigen::Index>(report.cells.size());
  const Eigen::Index cols = fit.has_no_axis ? 3 : 2;
  Eigen::MatrixXd X(rows, cols);
  Eigen::VectorXd y_eu(rows), y_kl(rows), x_eu(rows), x_kl(rows), d_eu(rows), d_kl(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& c = report.cells[static_cast<std::size_t>(r)];
    const double ns = static_cast<double>(c.n_samples), no = static_cast<double>(c.n_outcomes);
    X(r, 0) = 1.0;
    X(r, 1) = std::log(ns);
    if (fit.has_no_axis) X(r, 2) = std::log(no);
    y_eu[r] = std::log(c.stats.euclid_mean);
    y_kl[r] = std::log(c.stats.kl_mean);
    x_eu[r] = 1.0 / std::sqrt(ns);
    x_kl[r] = no / ns;
    d_eu[r] = c.stats.euclid_mean;
    d_kl[r] = c.stats.kl_mean;
  }
  const auto eu = ols(X, y_eu);
  const auto kl = ols(X, y_kl);
  fit.euclid_slope_ns = eu[1];
  fit.kl_slope_ns = kl[1];
  if (fit.has_no_axis) {
    fit.euclid_slope_no = eu[2];
    fit.kl_slope_no = kl[2];
  }
  fit.c_euclid = ols(x_eu, d_eu)[0];
  fit.c_kl = ols(x_kl, d_kl)[0];
  return fit;
}

std::string report_csv(const CalibrationReport& report) {
  std::ostringstream out;
  out << "n_outcomes,n_samples,trials,kl_mean,kl_se,euclid_mean,euclid_se,sq_euclid_mean,sq_euclid_se,"
         "expected_sq_euclid,uniform_bound_sq_euclid\n";
  for (const auto& c : report.cells)
    out << c.n_outcomes << ',' << c.n_samples << ',' << c.stats.trials << ',' << fmt(c.stats.kl_mean) << ','
        << fmt(c.stats.kl_se) << ',' << fmt(c.stats.euclid_mean) << ',' << fmt(c.stats.euclid_se) << ','
        << fmt(c.stats.sq_euclid_mean) << ',' << fmt(c.stats.sq_euclid_se) << ',' << fmt(c.expected_sq_euclid)
        << ',' << fmt(c.uniform_bound_sq_euclid) << '\n';
  return out.str();
}

nlohmann::ordered_json fit_json(const ScalingFit& fit) {
  auto line = [](const LineFit& f) {
    return nlohmann::ordered_json{{"value", f.value}, {"ci95", {f.ci_low, f.ci_high}}};
  };
  nlohmann::ordered_json j;
  j["euclid_slope_vs_samples"] = line(fit.euclid_slope_ns);
  j["kl_slope_vs_samples"] = line(fit.kl_slope_ns);
  if (fit.has_no_axis) {
    j["euclid_slope_vs_outcomes"] = line(fit.euclid_slope_no);
    j["kl_slope_vs_outcomes"] = line(fit.kl_slope_no);
  }
  j["c_euclid"] = line(fit.c_euclid);
  j["c_kl"] = line(fit.c_kl);
  return j;
}

}  // namespace netlocal::calibrate
