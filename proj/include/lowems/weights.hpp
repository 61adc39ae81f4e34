#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace lowems {

/// Nonnegative per-bin weights summing to one. kappa records the noise ratio
/// sigma2^2 / sigma1^2 that produced them (+inf for last-bin-only, NaN when
/// not applicable).
struct WeightVector {
  std::vector<double> w;
  double kappa = std::numeric_limits<double>::quiet_NaN();

  std::size_t size() const { return w.size(); }
  double operator[](std::size_t t) const { return w[t]; }
  double sum_of_squares() const;
};

enum class BaselineKind { LastOnly, Equal };

/// Closed-form minimizer of sum_t (1 + p_t kappa) w_t^2 over the simplex with
/// p_t = d - t (1-based t). kappa = +inf gives the last-bin-only baseline.
WeightVector optimal_weights(std::size_t d, double kappa);

/// Same program solved numerically: exact threshold search for the
/// multiplier of the simplex-constrained diagonal QP. Used as a cross-check.
WeightVector solve_weight_qp(std::size_t d, double kappa);

WeightVector baseline_weights(std::size_t d, BaselineKind kind);
BaselineKind parse_baseline(const std::string& name);

/// Objective of the weight program: sum_t w_t^2 + sum_t (d - t) kappa w_t^2.
double weight_objective(const std::vector<double>& w, double kappa);

/// Validates and normalizes user-supplied weights (nonnegative, positive sum).
WeightVector explicit_weights(std::vector<double> w);

/// Parses "last" | "last_only" | "equal" | "optimal" | "explicit:w1,...,wd".
/// kappa is only consulted for "optimal".
WeightVector weights_from_spec(const std::string& spec, std::size_t d, double kappa);

}  // namespace lowems
