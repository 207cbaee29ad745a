#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "netlocal/targets.hpp"
#include "netlocal/trainer.hpp"

namespace netlocal::scan {

/// One cell of a parameter scan.
struct ScanPoint {
  /// Named parameters in column order, e.g. {"u2", 0.85}, {"V", 1}.
  std::vector<std::pair<std::string, double>> params;
  /// Grid coordinates; the point's seed is derived from these.
  std::vector<std::uint64_t> coords;
  TargetSpec target;

  double param(const std::string& name) const;
};

struct ScanResult {
  ScanPoint point;
  double final_kl = 0.0;
  double final_euclid = 0.0;
  double best_during_training = 0.0;
  int iterations = 0;
  std::uint64_t seed = 0;
  double wall_time_seconds = 0.0;
  std::size_t end_sample_count = 0;
  bool ok = true;
  std::string error;
};

struct ScanOptions {
  localmodel::TrainConfig tcfg;  // tcfg.seed is the base seed
  localmodel::SamplingController ctrl;
  int width = 60;
  int depth = 4;
  int jobs = 1;
  /// Start each point from the previous point's trained net. Forces
  /// sequential execution in point order.
  bool warm_start = false;
};

using PointDoneFn = std::function<void(const ScanResult&)>;

std::uint64_t point_seed(std::uint64_t base_seed, const ScanPoint& point);

/// Trains every point; results come back in input order regardless of `jobs`.
/// A failing point is reported with ok = false instead of aborting the scan.
std::vector<ScanResult> run_scan(const std::vector<ScanPoint>& points, const ScanOptions& opts,
                                 const PointDoneFn& on_done = {});

std::vector<ScanPoint> rgb4_points(const std::vector<double>& u2_grid, double visibility);
std::vector<ScanPoint> visibility_points(const TargetSpec& base, const std::vector<double>& v_grid);
/// Row-major over (theta, mu); every cell has params {theta, mu}.
std::vector<ScanPoint> grid_2d_points(const NetworkConfig& network, const std::vector<double>& theta_grid,
                                      const std::vector<double>& mu_grid, int state_family,
                                      const std::vector<std::vector<int>>& coarse);

std::vector<ScanResult> scan_rgb4(const std::vector<double>& u2_grid, double visibility, const ScanOptions& opts,
                                  const PointDoneFn& on_done = {});
std::vector<ScanResult> scan_visibility(double u2, const std::vector<double>& v_grid, const ScanOptions& opts,
                                        const PointDoneFn& on_done = {});
/// Visibility scan around any target (e.g. a (theta, mu) ring realization).
std::vector<ScanResult> scan_visibility(const TargetSpec& base, const std::vector<double>& v_grid,
                                        const ScanOptions& opts, const PointDoneFn& on_done = {});
std::vector<ScanResult> scan_grid_2d(const NetworkConfig& network, const std::vector<double>& theta_grid,
                                     const std::vector<double>& mu_grid, int state_family,
                                     const std::vector<std::vector<int>>& coarse, const ScanOptions& opts,
                                     const PointDoneFn& on_done = {});

/// |KL(pi/2 + t) - KL(pi/2 - t)| for every mu and every mirrored theta pair present.
struct SymmetryProbe {
  double mu = 0.0;
  double offset = 0.0;
  double abs_kl_difference = 0.0;
};
std::vector<SymmetryProbe> theta_symmetry(const std::vector<ScanResult>& results);

/// Header: param names, then final_kl,final_euclid,best_raw_loss,iterations,seed,wall_time_s,end_samples.
std::string results_csv(const std::vector<ScanResult>& results);
nlohmann::ordered_json results_sidecar(const std::string& name, const std::vector<ScanResult>& results,
                                       const ScanOptions& opts);

/// `scan_<name>_<YYYYmmddTHHMMSS>` in UTC.
std::string scan_basename(const std::string& name, std::chrono::system_clock::time_point when);

/// Evenly spaced grid including both ends.
std::vector<double> linspace(double lo, double hi, int count);

}  // namespace netlocal::scan
