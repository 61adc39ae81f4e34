#pragma once

#include "lowems/core.hpp"
#include "lowems/measurement.hpp"
#include "lowems/solver.hpp"
#include "lowems/weights.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lowems {

/// Synthetic experiment setup. Defaults follow the desk-scale completion
/// setting: 100 x 50, four bins, rank five, 4000 samples per bin.
struct SweepConfig {
  Eigen::Index n1 = 100;
  Eigen::Index n2 = 50;
  Eigen::Index r = 5;
  std::size_t d = 4;
  Eigen::Index m0 = 4000;
  std::vector<double> p_grid;  // sampling fractions for the sample-complexity search
  double sigma1 = 0.05;
  std::vector<double> sigma2_grid{1e-3};
  std::vector<std::string> strategies{"last_only", "equal", "optimal"};
  int trials = 10;
  std::uint64_t seed = 0;
  OperatorKind variant = OperatorKind::Sampling;
  double gamma = 0.0;
  int max_sweeps = 500;
  double tol = 1e-8;
  InitMode init = InitMode::Spectral;
  double success_threshold = 0.04;
  int threads = 1;

  void validate(bool needs_p_grid) const;
};

/// 20 log-spaced fractions in [0.02, 1].
std::vector<double> default_p_grid();

/// ||X_hat - X||_F^2 / ||X||_F^2.
double relative_error(const Matrix& X_hat, const Matrix& X);

/// Weights for a named strategy at noise levels (sigma1, sigma2).
WeightVector strategy_weights(const std::string& strategy, std::size_t d, double sigma1, double sigma2);

struct ErrorRow {
  double sigma2 = 0;
  std::string strategy;
  double mean = 0;    // NaN when every trial failed
  double stddev = 0;  // sample standard deviation over successful trials
  int trials = 0;     // successful trials
  int failed = 0;
  double max_trace_increase = 0;  // largest single-step objective increase seen
};

struct SampleRow {
  double sigma2 = 0;
  std::string strategy;
  std::optional<double> min_p;      // empty: threshold not reached on the grid
  std::vector<double> mean_errors;  // one per grid point evaluated, ascending p
  double max_trace_increase = 0;
};

struct SweepResult {
  std::vector<ErrorRow> error_rows;
  std::vector<SampleRow> sample_rows;
  std::vector<double> p_grid;
};

/// Per-trial hook for callers that want to inspect every solver run.
struct TrialRecord {
  double sigma2 = 0;
  std::string strategy;
  Eigen::Index m0 = 0;
  int trial = 0;
  const Solution* solution = nullptr;  // null if the solve failed
  const LowemsProblem* problem = nullptr;
  const DynamicGroundTruth* truth = nullptr;
  double error = 0;
};
using TrialObserver = std::function<void(const TrialRecord&)>;

/// Fresh truth and observations per (sigma2, trial); every strategy is fit
/// to the same data and the same initialization stream.
SweepResult run_error_sweep(const SweepConfig& cfg, const TrialObserver& observer = {});

/// For each (sigma2, strategy): the smallest p on the ascending grid whose
/// mean relative error over the trials is at most cfg.success_threshold.
SweepResult run_sample_sweep(const SweepConfig& cfg, const TrialObserver& observer = {});

/// (sum_t w_t^2 s1^2 + sum_t (d-t) w_t^2 s2^2) * n_max * r / m with unit constant.
double error_bound_shape(const WeightVector& w, double sigma1, double sigma2, Eigen::Index n_max, Eigen::Index r,
                         double m);

/// max_t w_t^2 ((d-t) mu0^2 r s2^2 / n1 + s1^2) / sum_t w_t^2 ((d-t) s2^2 + s1^2).
double phi_prime(const WeightVector& w, double sigma1, double sigma2, double mu0, Eigen::Index r, Eigen::Index n1);

struct DiagnosticRow {
  double sigma2 = 0;
  std::string strategy;
  double bound_shape = 0;
  double phi_prime = 0;
  double empirical = 0;  // mean relative error from the sweep
  double ratio = 0;      // empirical / bound_shape
};

struct TheoremReport {
  std::vector<DiagnosticRow> rows;
};

TheoremReport theorem_diagnostics(const SweepConfig& cfg, const SweepResult& result, double mu0 = 1.0);

struct ScalingRow {
  double sigma2 = 0;
  std::string strategy;
  double predicted_ratio = 0;  // bound_shape(m_small) / bound_shape(m_large)
  double empirical_ratio = 0;  // mean error(m_small) / mean error(m_large)
};

/// Runs the error sweep at two per-bin measurement counts and compares the
/// error ratio against the 1/m prediction of the bound shape.
std::vector<ScalingRow> two_point_scaling(SweepConfig cfg, Eigen::Index m_small, Eigen::Index m_large);

/// CSV writers; floating values use 17 significant digits.
void write_error_csv(std::ostream& out, const SweepResult& result);
void write_sample_csv(std::ostream& out, const SweepResult& result);
void write_diagnostics_csv(std::ostream& out, const TheoremReport& report);

std::string format_double(double value);

/// Runs body(0..n-1) on up to `threads` workers. Exceptions are rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace lowems
