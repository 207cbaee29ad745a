#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "netlocal/local_model.hpp"

namespace netlocal::calibrate {

/// Mean and standard error of the sampling distances between one reference
/// distribution and `trials` multinomial estimates of it.
struct SamplingStats {
  int trials = 0;
  double kl_mean = 0.0, kl_se = 0.0;
  double euclid_mean = 0.0, euclid_se = 0.0;
  double sq_euclid_mean = 0.0, sq_euclid_se = 0.0;
};

struct CalibrationCell {
  std::size_t n_outcomes = 0;
  std::size_t n_samples = 0;
  SamplingStats stats;
  /// (1/N_s) sum_i p_i (1 - p_i) for this cell's reference.
  double expected_sq_euclid = 0.0;
  /// (1 - 1/N_o) / N_s.
  double uniform_bound_sq_euclid = 0.0;
};

struct CalibrationReport {
  std::uint64_t seed = 0;
  int trials = 0;
  std::vector<CalibrationCell> cells;
};

/// Uniform draw from the probability simplex (symmetric Dirichlet, alpha = 1).
std::vector<double> random_reference(std::size_t n_outcomes, localmodel::Rng& rng);
/// Normalized counts of `n_samples` categorical draws from `p` (conditional binomials).
std::vector<double> multinomial_estimate(const std::vector<double>& p, std::size_t n_samples, localmodel::Rng& rng);

/// KL(reference || estimate) and Euclidean distances over independent trials.
SamplingStats sampling_stats(const std::vector<double>& reference, std::size_t n_samples, int trials,
                             std::uint64_t seed);

/// One fresh reference per (N_o, N_s) cell.
CalibrationReport sampling_error_study(const std::vector<std::size_t>& outcomes,
                                       const std::vector<std::size_t>& samples, int trials, std::uint64_t seed,
                                       int jobs = 1);

struct LineFit {
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// log d = a + slope_ns log N_s + slope_no log N_o (the N_o term is dropped
/// when only one N_o is present), plus prefactors of d = c_E / sqrt(N_s) and
/// d = c_K N_o / N_s fitted in linear space. Intervals are 95% normal.
struct ScalingFit {
  LineFit euclid_slope_ns;
  LineFit euclid_slope_no;
  LineFit kl_slope_ns;
  LineFit kl_slope_no;
  LineFit c_euclid;
  LineFit c_kl;
  bool has_no_axis = false;
};

/// Throws std::invalid_argument on a degenerate design (fewer than two
/// distinct N_s values) or non-positive means.
ScalingFit fit_scalings(const CalibrationReport& report);

/// One row per cell.
std::string report_csv(const CalibrationReport& report);
nlohmann::ordered_json fit_json(const ScalingFit& fit);

}  // namespace netlocal::calibrate
