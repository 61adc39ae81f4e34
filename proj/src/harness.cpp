#include "lowems/harness.hpp"

#include "lowems/dynmodel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

namespace lowems {

void SweepConfig::validate(bool needs_p_grid) const {
  require(n1 >= 1 && n2 >= 1 && r >= 1 && r <= std::min(n1, n2), "sweep: invalid dimensions or rank");
  require(d >= 1, "sweep: d must be at least 1");
  require(trials >= 1, "sweep: trials must be at least 1");
  require(!sigma2_grid.empty(), "sweep: sigma2 grid must be nonempty");
  require(!strategies.empty(), "sweep: strategy list must be nonempty");
  require(sigma1 >= 0 && std::isfinite(sigma1), "sweep: sigma1 must be finite and nonnegative");
  for (double s : sigma2_grid) require(s >= 0 && std::isfinite(s), "sweep: sigma2 values must be finite and >= 0");
  for (const auto& s : strategies) (void)strategy_weights(s, d, 1.0, 0.0);
  require(threads >= 1, "sweep: threads must be at least 1");
  if (needs_p_grid) {
    require(!p_grid.empty(), "sweep: p grid must be nonempty");
    for (std::size_t i = 0; i < p_grid.size(); ++i) {
      require(p_grid[i] > 0 && p_grid[i] <= 1, "sweep: p grid values must lie in (0, 1]");
      if (i > 0) require(p_grid[i] > p_grid[i - 1], "sweep: p grid must be strictly ascending");
    }
  } else {
    require(m0 >= 1, "sweep: m0 must be positive");
  }
}

std::vector<double> default_p_grid() {
  std::vector<double> grid(20);
  const double lo = std::log(0.02);
  const double hi = std::log(1.0);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / 19.0);
  grid.back() = 1.0;
  return grid;
}

double relative_error(const Matrix& X_hat, const Matrix& X) {
  require(X_hat.rows() == X.rows() && X_hat.cols() == X.cols(), "relative_error: dimension mismatch");
  const double denom = X.squaredNorm();
  require(denom > 0, "relative_error: reference matrix is zero");
  return (X_hat - X).squaredNorm() / denom;
}

WeightVector strategy_weights(const std::string& strategy, std::size_t d, double sigma1, double sigma2) {
  if (strategy == "optimal") {
    double kappa = 0;
    if (sigma2 > 0) kappa = sigma1 > 0 ? (sigma2 * sigma2) / (sigma1 * sigma1) : std::numeric_limits<double>::infinity();
    return optimal_weights(d, kappa);
  }
  return weights_from_spec(strategy, d, 0.0);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t k = 0; k < workers; ++k) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

struct StrategyOutcome {
  bool ok = false;
  double error = 0;
  double max_increase = 0;
};

double max_increase(const std::vector<double>& trace) {
  double worst = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) worst = std::max(worst, trace[i] - trace[i - 1]);
  return worst;
}

/// One synthetic trial: draws truth + observations from the trial stream and
/// fits every strategy to the same data.
std::vector<StrategyOutcome> run_trial(const SweepConfig& cfg, double sigma2, Eigen::Index m0, RandomStream trial_rng,
                                       int trial, const TrialObserver& observer, std::mutex& observer_mutex) {
  RandomStream truth_rng = trial_rng.derive(1);
  RandomStream op_rng = trial_rng.derive(2);
  RandomStream noise_rng = trial_rng.derive(3);
  const RandomStream init_rng = trial_rng.derive(4);

  auto truth = std::make_shared<const DynamicGroundTruth>(generate_truth(cfg.n1, cfg.n2, cfg.r, cfg.d, sigma2, truth_rng));
  std::vector<LinearOperator> ops;
  ops.reserve(cfg.d);
  for (std::size_t t = 0; t < cfg.d; ++t) ops.push_back(make_operator(cfg.variant, cfg.n1, cfg.n2, m0, op_rng));
  auto obs = std::make_shared<const ObservationSet>(observe(std::move(ops), truth, cfg.sigma1, noise_rng));

  std::vector<StrategyOutcome> out(cfg.strategies.size());
  for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
    LowemsProblem problem;
    problem.obs = obs;
    problem.w = strategy_weights(cfg.strategies[s], cfg.d, cfg.sigma1, sigma2);
    problem.r = cfg.r;
    problem.gamma = cfg.gamma;

    SolveOptions opts;
    opts.max_sweeps = cfg.max_sweeps;
    opts.tol = cfg.tol;
    opts.init = cfg.init;
    opts.rng = init_rng;

    TrialRecord record;
    record.sigma2 = sigma2;
    record.strategy = cfg.strategies[s];
    record.m0 = m0;
    record.trial = trial;
    record.problem = &problem;
    record.truth = truth.get();
    try {
      const Solution sol = solve(problem, opts);
      out[s].ok = true;
      out[s].error = relative_error(sol.X_hat, truth->last());
      out[s].max_increase = max_increase(sol.objective_trace);
      record.solution = &sol;
      record.error = out[s].error;
      if (observer) {
        std::lock_guard lock(observer_mutex);
        observer(record);
      }
    } catch (const Error&) {
      out[s].ok = false;
      if (observer) {
        std::lock_guard lock(observer_mutex);
        observer(record);
      }
    }
  }
  return out;
}

struct CellStats {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();
  int ok = 0;
  int failed = 0;
  double max_increase = 0;
};

/// Trials for one cell, aggregated per strategy in trial order.
std::vector<CellStats> run_cell(const SweepConfig& cfg, double sigma2, Eigen::Index m0, std::uint64_t cell,
                                const TrialObserver& observer) {
  std::vector<std::vector<StrategyOutcome>> outcomes(static_cast<std::size_t>(cfg.trials));
  std::mutex observer_mutex;
  parallel_for(outcomes.size(), cfg.threads, [&](std::size_t k) {
    const RandomStream trial_rng(cfg.seed, hash_ids({cell, static_cast<std::uint64_t>(k)}));
    outcomes[k] = run_trial(cfg, sigma2, m0, trial_rng, static_cast<int>(k), observer, observer_mutex);
  });

  std::vector<CellStats> stats(cfg.strategies.size());
  for (std::size_t s = 0; s < stats.size(); ++s) {
    double sum = 0;
    for (const auto& trial : outcomes) {
      if (!trial[s].ok) {
        ++stats[s].failed;
        continue;
      }
      ++stats[s].ok;
      sum += trial[s].error;
      stats[s].max_increase = std::max(stats[s].max_increase, trial[s].max_increase);
    }
    if (stats[s].ok == 0) continue;
    stats[s].mean = sum / stats[s].ok;
    double ss = 0;
    for (const auto& trial : outcomes)
      if (trial[s].ok) ss += (trial[s].error - stats[s].mean) * (trial[s].error - stats[s].mean);
    stats[s].stddev = stats[s].ok > 1 ? std::sqrt(ss / (stats[s].ok - 1)) : 0.0;
  }
  return stats;
}

Eigen::Index samples_for(double p, Eigen::Index n1, Eigen::Index n2) {
  return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(p * static_cast<double>(n1 * n2))));
}

}  // namespace

SweepResult run_error_sweep(const SweepConfig& cfg, const TrialObserver& observer) {
  cfg.validate(false);
  SweepResult result;
  for (std::size_t g = 0; g < cfg.sigma2_grid.size(); ++g) {
    const double sigma2 = cfg.sigma2_grid[g];
    const auto stats = run_cell(cfg, sigma2, cfg.m0, hash_ids({0, g}), observer);
    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
      result.error_rows.push_back(ErrorRow{sigma2, cfg.strategies[s], stats[s].mean, stats[s].stddev, stats[s].ok,
                                           stats[s].failed, stats[s].max_increase});
    }
  }
  return result;
}

SweepResult run_sample_sweep(const SweepConfig& cfg, const TrialObserver& observer) {
  cfg.validate(true);
  SweepResult result;
  result.p_grid = cfg.p_grid;
  for (std::size_t g = 0; g < cfg.sigma2_grid.size(); ++g) {
    const double sigma2 = cfg.sigma2_grid[g];
    std::vector<SampleRow> rows(cfg.strategies.size());
    for (std::size_t s = 0; s < rows.size(); ++s) {
      rows[s].sigma2 = sigma2;
      rows[s].strategy = cfg.strategies[s];
    }
    for (std::size_t k = 0; k < cfg.p_grid.size(); ++k) {
      // Only strategies still searching are fit; the data stream does not
      // depend on which strategies remain.
      SweepConfig sub = cfg;
      sub.strategies.clear();
      std::vector<std::size_t> pending;
      for (std::size_t s = 0; s < rows.size(); ++s) {
        if (!rows[s].min_p) {
          pending.push_back(s);
          sub.strategies.push_back(cfg.strategies[s]);
        }
      }
      if (pending.empty()) break;
      const auto stats = run_cell(sub, sigma2, samples_for(cfg.p_grid[k], cfg.n1, cfg.n2), hash_ids({1, g, k}), observer);
      for (std::size_t j = 0; j < pending.size(); ++j) {
        SampleRow& row = rows[pending[j]];
        row.mean_errors.push_back(stats[j].mean);
        row.max_trace_increase = std::max(row.max_trace_increase, stats[j].max_increase);
        if (stats[j].ok > 0 && stats[j].failed == 0 && stats[j].mean <= cfg.success_threshold) row.min_p = cfg.p_grid[k];
      }
    }
    for (auto& row : rows) result.sample_rows.push_back(std::move(row));
  }
  return result;
}

double error_bound_shape(const WeightVector& w, double sigma1, double sigma2, Eigen::Index n_max, Eigen::Index r,
                         double m) {
  require(m > 0, "error_bound_shape: m must be positive");
  const std::size_t d = w.size();
  double noise = 0;
  double drift = 0;
  for (std::size_t t = 0; t < d; ++t) {
    noise += w[t] * w[t] * sigma1 * sigma1;
    drift += static_cast<double>(d - 1 - t) * w[t] * w[t] * sigma2 * sigma2;
  }
  return (noise + drift) * static_cast<double>(n_max) * static_cast<double>(r) / m;
}

double phi_prime(const WeightVector& w, double sigma1, double sigma2, double mu0, Eigen::Index r, Eigen::Index n1) {
  const std::size_t d = w.size();
  double numerator = 0;
  double denominator = 0;
  for (std::size_t t = 0; t < d; ++t) {
    const double lag = static_cast<double>(d - 1 - t);
    const double w2 = w[t] * w[t];
    numerator = std::max(numerator, w2 * (lag * mu0 * mu0 * static_cast<double>(r) * sigma2 * sigma2 /
                                              static_cast<double>(n1) +
                                          sigma1 * sigma1));
    denominator += w2 * (lag * sigma2 * sigma2 + sigma1 * sigma1);
  }
  return denominator > 0 ? numerator / denominator : std::numeric_limits<double>::quiet_NaN();
}

TheoremReport theorem_diagnostics(const SweepConfig& cfg, const SweepResult& result, double mu0) {
  TheoremReport report;
  const Eigen::Index n_max = std::max(cfg.n1, cfg.n2);
  for (const ErrorRow& row : result.error_rows) {
    const WeightVector w = strategy_weights(row.strategy, cfg.d, cfg.sigma1, row.sigma2);
    DiagnosticRow diag;
    diag.sigma2 = row.sigma2;
    diag.strategy = row.strategy;
    diag.bound_shape = error_bound_shape(w, cfg.sigma1, row.sigma2, n_max, cfg.r, static_cast<double>(cfg.m0));
    diag.phi_prime = phi_prime(w, cfg.sigma1, row.sigma2, mu0, cfg.r, cfg.n1);
    diag.empirical = row.mean;
    diag.ratio = diag.bound_shape > 0 ? row.mean / diag.bound_shape : std::numeric_limits<double>::quiet_NaN();
    report.rows.push_back(diag);
  }
  for (const SampleRow& row : result.sample_rows) {
    if (!row.min_p) continue;
    const WeightVector w = strategy_weights(row.strategy, cfg.d, cfg.sigma1, row.sigma2);
    DiagnosticRow diag;
    diag.sigma2 = row.sigma2;
    diag.strategy = row.strategy;
    const double m = static_cast<double>(samples_for(*row.min_p, cfg.n1, cfg.n2));
    diag.bound_shape = error_bound_shape(w, cfg.sigma1, row.sigma2, n_max, cfg.r, m);
    diag.phi_prime = phi_prime(w, cfg.sigma1, row.sigma2, mu0, cfg.r, cfg.n1);
    diag.empirical = cfg.success_threshold;
    diag.ratio = diag.bound_shape > 0 ? diag.empirical / diag.bound_shape : std::numeric_limits<double>::quiet_NaN();
    report.rows.push_back(diag);
  }
  return report;
}

std::vector<ScalingRow> two_point_scaling(SweepConfig cfg, Eigen::Index m_small, Eigen::Index m_large) {
  require(m_small >= 1 && m_large > m_small, "two_point_scaling: need 1 <= m_small < m_large");
  cfg.m0 = m_small;
  const SweepResult small = run_error_sweep(cfg);
  cfg.m0 = m_large;
  const SweepResult large = run_error_sweep(cfg);
  std::vector<ScalingRow> rows;
  const Eigen::Index n_max = std::max(cfg.n1, cfg.n2);
  for (std::size_t i = 0; i < small.error_rows.size(); ++i) {
    const ErrorRow& a = small.error_rows[i];
    const ErrorRow& b = large.error_rows[i];
    const WeightVector w = strategy_weights(a.strategy, cfg.d, cfg.sigma1, a.sigma2);
    ScalingRow row;
    row.sigma2 = a.sigma2;
    row.strategy = a.strategy;
    row.predicted_ratio = error_bound_shape(w, cfg.sigma1, a.sigma2, n_max, cfg.r, static_cast<double>(m_small)) /
                          error_bound_shape(w, cfg.sigma1, a.sigma2, n_max, cfg.r, static_cast<double>(m_large));
    row.empirical_ratio = a.mean / b.mean;
    rows.push_back(row);
  }
  return rows;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

}  // namespace

void write_error_csv(std::ostream& out, const SweepResult& result) {
  out << "sigma2,strategy,metric,value,stddev,trials\n";
  for (const ErrorRow& row : result.error_rows) {
    out << format_double(row.sigma2) << ',' << csv_field(row.strategy) << ",relative_error," << format_double(row.mean) << ','
        << format_double(row.stddev) << ',' << row.trials << '\n';
  }
}

void write_sample_csv(std::ostream& out, const SweepResult& result) {
  out << "sigma2,strategy,min_p\n";
  for (const SampleRow& row : result.sample_rows) {
    out << format_double(row.sigma2) << ',' << csv_field(row.strategy) << ','
        << (row.min_p ? format_double(*row.min_p) : std::string("not_achieved")) << '\n';
  }
}

void write_diagnostics_csv(std::ostream& out, const TheoremReport& report) {
  out << "sigma2,strategy,bound_shape,phi_prime,empirical,ratio\n";
  for (const DiagnosticRow& row : report.rows) {
    out << format_double(row.sigma2) << ',' << csv_field(row.strategy) << ',' << format_double(row.bound_shape) << ','
        << format_double(row.phi_prime) << ',' << format_double(row.empirical) << ',' << format_double(row.ratio)
        << '\n';
  }
}

}  // namespace lowems
