#include "netlocal/scan.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "netlocal/checkpoint.hpp"
#include "netlocal/seeding.hpp"

namespace netlocal::scan {

using localmodel::LocalModelNet;

namespace {

constexpr std::uint64_t kPointStream = 0x7363616e;

std::string format_double(double v, int precision) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

void check_range(const char* what, double v, double lo, double hi) {
  if (!(v >= lo - 1e-12 && v <= hi + 1e-12))
    throw std::invalid_argument(std::string(what) + " = " + format_double(v, 10) + " outside [" +
                                format_double(lo, 6) + ", " + format_double(hi, 6) + "]");
}

ScanResult run_point(const ScanPoint& point, const ScanOptions& opts, std::optional<LocalModelNet>& warm) {
  ScanResult r;
  r.point = point;
  r.seed = point_seed(opts.tcfg.seed, point);
  const auto start = std::chrono::steady_clock::now();
  try {
    const auto target = build_target(point.target);
    const auto config = coarse_network(point.target.network, point.target.coarse);
    auto tcfg = opts.tcfg;
    tcfg.seed = r.seed;
    auto ctrl = opts.ctrl;
    ctrl.n_outcomes = target.size();
    localmodel::TrainResult tr;
    if (opts.warm_start && warm && warm->config() == config) {
      auto net = *warm;
      tr = localmodel::train(net, target, tcfg, ctrl);
      warm = std::move(net);
    } else {
      auto outcome = localmodel::fit(config, target, opts.width, opts.depth, tcfg, ctrl);
      tr = outcome.result;
      if (opts.warm_start) warm = std::move(outcome.net);
    }
    r.final_kl = tr.final_kl;
    r.final_euclid = tr.final_euclid;
    r.best_during_training = tr.best_during_training;
    r.iterations = tr.iterations_run;
    r.end_sample_count = tr.end_sample_count;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace

double ScanPoint::param(const std::string& name) const {
  for (const auto& [k, v] : params)
    if (k == name) return v;
  throw std::out_of_range("scan point has no parameter '" + name + "'");
}

std::uint64_t point_seed(std::uint64_t base_seed, const ScanPoint& point) {
  std::vector<std::uint64_t> path{kPointStream};
  path.insert(path.end(), point.coords.begin(), point.coords.end());
  return derive_seed_path(base_seed, path);
}

std::vector<ScanResult> run_scan(const std::vector<ScanPoint>& points, const ScanOptions& opts,
                                 const PointDoneFn& on_done) {
  localmodel::validate(opts.tcfg);
  if (opts.jobs < 1) throw std::invalid_argument("jobs must be at least 1");
  std::vector<ScanResult> results(points.size());
  std::mutex done_mutex;
  auto finish = [&](std::size_t i, ScanResult r) {
    std::lock_guard lock(done_mutex);
    results[i] = std::move(r);
    if (on_done) on_done(results[i]);
  };

  if (opts.warm_start || opts.jobs == 1 || points.size() <= 1) {
    std::optional<LocalModelNet> warm;
    for (std::size_t i = 0; i < points.size(); ++i) finish(i, run_point(points[i], opts, warm));
    return results;
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    std::optional<LocalModelNet> none;
    for (std::size_t i = next++; i < points.size(); i = next++) finish(i, run_point(points[i], opts, none));
  };
  std::vector<std::jthread> pool;
  const auto n_workers = std::min(static_cast<std::size_t>(opts.jobs), points.size());
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  pool.clear();
  return results;
}

std::vector<ScanPoint> rgb4_points(const std::vector<double>& u2_grid, double visibility) {
  check_range("V", visibility, 0.0, 1.0);
  std::vector<ScanPoint> points;
  for (std::size_t i = 0; i < u2_grid.size(); ++i) {
    const double u2 = u2_grid[i];
    check_range("u2", u2, 0.5, 1.0);
    TargetSpec t;
    t.network = triangle_network(4);
    t.state = StateFamily::PsiPlus;
    t.visibility = visibility;
    t.measurement = MeasurementFamily::Rgb4;
    t.u = std::sqrt(u2);
    points.push_back({{{"u2", u2}, {"V", visibility}}, {i}, std::move(t)});
  }
  return points;
}

std::vector<ScanPoint> visibility_points(const TargetSpec& base, const std::vector<double>& v_grid) {
  std::vector<ScanPoint> points;
  for (std::size_t i = 0; i < v_grid.size(); ++i) {
    check_range("V", v_grid[i], 0.0, 1.0);
    ScanPoint p;
    p.target = base;
    p.target.visibility = v_grid[i];
    if (base.measurement == MeasurementFamily::Rgb4) {
      p.params.emplace_back("u2", base.u * base.u);
    } else {
      p.params.emplace_back("theta", base.theta);
      p.params.emplace_back("mu", base.mu);
    }
    p.params.emplace_back("V", v_grid[i]);
    p.coords = {i};
    points.push_back(std::move(p));
  }
  return points;
}

std::vector<ScanPoint> grid_2d_points(const NetworkConfig& network, const std::vector<double>& theta_grid,
                                      const std::vector<double>& mu_grid, int state_family,
                                      const std::vector<std::vector<int>>& coarse) {
  if (state_family != 1 && state_family != 2) throw std::invalid_argument("state family must be 1 or 2");
  for (const auto& party : network.parties())
    if (party.sources.size() != 2)
      throw std::invalid_argument("grid scans need a ring network (party '" + party.name + "' has " +
                                  std::to_string(party.sources.size()) + " sources)");
  std::vector<ScanPoint> points;
  for (std::size_t i = 0; i < theta_grid.size(); ++i) {
    check_range("theta", theta_grid[i], 0.0, std::numbers::pi);
    for (std::size_t j = 0; j < mu_grid.size(); ++j) {
      check_range("mu", mu_grid[j], 0.0, std::numbers::pi / 2);
      TargetSpec t;
      t.network = network;
      t.state = state_family == 1 ? StateFamily::Rotated1 : StateFamily::Rotated2;
      t.theta = theta_grid[i];
      t.measurement = MeasurementFamily::Tetra;
      t.mu = mu_grid[j];
      t.coarse = coarse;
      points.push_back({{{"theta", theta_grid[i]}, {"mu", mu_grid[j]}}, {i, j}, std::move(t)});
    }
  }
  return points;
}

std::vector<ScanResult> scan_rgb4(const std::vector<double>& u2_grid, double visibility, const ScanOptions& opts,
                                  const PointDoneFn& on_done) {
  return run_scan(rgb4_points(u2_grid, visibility), opts, on_done);
}

std::vector<ScanResult> scan_visibility(double u2, const std::vector<double>& v_grid, const ScanOptions& opts,
                                        const PointDoneFn& on_done) {
  check_range("u2", u2, 0.5, 1.0);
  TargetSpec base;
  base.network = triangle_network(4);
  base.state = StateFamily::PsiPlus;
  base.measurement = MeasurementFamily::Rgb4;
  base.u = std::sqrt(u2);
  return scan_visibility(base, v_grid, opts, on_done);
}

std::vector<ScanResult> scan_visibility(const TargetSpec& base, const std::vector<double>& v_grid,
                                        const ScanOptions& opts, const PointDoneFn& on_done) {
  return run_scan(visibility_points(base, v_grid), opts, on_done);
}

std::vector<ScanResult> scan_grid_2d(const NetworkConfig& network, const std::vector<double>& theta_grid,
                                     const std::vector<double>& mu_grid, int state_family,
                                     const std::vector<std::vector<int>>& coarse, const ScanOptions& opts,
                                     const PointDoneFn& on_done) {
  return run_scan(grid_2d_points(network, theta_grid, mu_grid, state_family, coarse), opts, on_done);
}

std::vector<SymmetryProbe> theta_symmetry(const std::vector<ScanResult>& results) {
  constexpr double kTol = 1e-9;
  const double half_pi = std::numbers::pi / 2;
  std::vector<SymmetryProbe> out;
  for (const auto& a : results) {
    if (!a.ok || a.point.target.measurement != MeasurementFamily::Tetra) continue;
    const double ta = a.point.target.theta;
    if (ta <= half_pi + kTol) continue;
    for (const auto& b : results) {
      if (!b.ok || b.point.target.measurement != MeasurementFamily::Tetra) continue;
      if (std::abs(a.point.target.mu - b.point.target.mu) > kTol) continue;
      if (std::abs((ta - half_pi) - (half_pi - b.point.target.theta)) > kTol) continue;
      out.push_back({a.point.target.mu, ta - half_pi, std::abs(a.final_kl - b.final_kl)});
    }
  }
  return out;
}

std::string results_csv(const std::vector<ScanResult>& results) {
  std::ostringstream out;
  if (!results.empty())
    for (const auto& [name, v] : results.front().point.params) out << name << ',';
  out << "final_kl,final_euclid,best_raw_loss,iterations,seed,wall_time_s,end_samples\n";
  for (const auto& r : results) {
    if (!r.ok) continue;
    for (const auto& [name, v] : r.point.params) out << format_double(v, 12) << ',';
    out << format_double(r.final_kl, 10) << ',' << format_double(r.final_euclid, 10) << ','
        << format_double(r.best_during_training, 10) << ',' << r.iterations << ',' << r.seed << ','
        << format_double(r.wall_time_seconds, 6) << ',' << r.end_sample_count << '\n';
  }
  return out.str();
}

nlohmann::ordered_json results_sidecar(const std::string& name, const std::vector<ScanResult>& results,
                                       const ScanOptions& opts) {
  using oj = nlohmann::ordered_json;
  oj j;
  j["name"] = name;
  j["options"] = {{"width", opts.width},
                  {"depth", opts.depth},
                  {"jobs", opts.jobs},
                  {"warm_start", opts.warm_start},
                  {"train_config", oj(localmodel::to_json(opts.tcfg))},
                  {"controller", oj(localmodel::to_json(opts.ctrl))}};
  oj points = oj::array();
  oj failed = oj::array();
  for (const auto& r : results) {
    oj p;
    p["params"] = oj::object();
    for (const auto& [k, v] : r.point.params) p["params"][k] = v;
    p["coords"] = r.point.coords;
    p["target"] = target_to_json(r.point.target);
    p["seed"] = r.seed;
    p["ok"] = r.ok;
    if (r.ok) {
      p["final_kl"] = r.final_kl;
      p["final_euclid"] = r.final_euclid;
      p["best_raw_loss"] = r.best_during_training;
      p["iterations"] = r.iterations;
      p["end_samples"] = r.end_sample_count;
    } else {
      p["error"] = r.error;
      failed.push_back(p["params"]);
    }
    p["wall_time_s"] = r.wall_time_seconds;
    points.push_back(std::move(p));
  }
  j["points"] = std::move(points);
  j["failed_points"] = std::move(failed);
  oj sym = oj::array();
  for (const auto& s : theta_symmetry(results))
    sym.push_back({{"mu", s.mu}, {"theta_offset", s.offset}, {"abs_kl_difference", s.abs_kl_difference}});
  j["theta_symmetry"] = std::move(sym);
  return j;
}

std::string scan_basename(const std::string& name, std::chrono::system_clock::time_point when) {
  const std::time_t t = std::chrono::system_clock::to_time_t(when);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%S", &tm);
  return "scan_" + name + "_" + buf;
}

std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 1) throw std::invalid_argument("grid needs at least one point");
  if (count == 1) return {lo};
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
  return g;
}

}  // namespace netlocal::scan
