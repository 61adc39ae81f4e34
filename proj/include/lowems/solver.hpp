#pragma once

#include "lowems/core.hpp"
#include "lowems/measurement.hpp"
#include "lowems/weights.hpp"

#include <memory>
#include <optional>

namespace lowems {

/// Weighted rank-r least squares over d bins:
///   min_{U,V} 1/2 sum_t w_t ||A^t(U V^T) - y^t||^2 + gamma (||U||_F^2 + ||V||_F^2)
/// with an optional entrywise bound ||X||_inf <= spikiness applied to the result.
struct LowemsProblem {
  std::shared_ptr<const ObservationSet> obs;
  WeightVector w;
  Eigen::Index r = 1;
  double gamma = 0.0;
  std::optional<double> spikiness;

  Eigen::Index rows() const { return obs->rows(); }
  Eigen::Index cols() const { return obs->cols(); }
  void validate() const;
};

struct FactorPair {
  Matrix U;  // n1 x r
  Matrix V;  // n2 x r

  Matrix product() const { return U * V.transpose(); }
};

struct Solution {
  FactorPair factors;
  Matrix X_hat;
  std::vector<double> objective_trace;  // initial value, then one entry per half-sweep
  int iterations = 0;                   // full sweeps performed
  bool converged = false;
  bool clip_applied = false;
  bool used_pseudo_inverse = false;     // a rank-deficient block hit the minimum-norm fallback
};

/// Thrown when the objective stops being finite. Carries the last finite iterate.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, Solution last) : Error(what), last_(std::move(last)) {}
  const Solution& last_finite() const { return last_; }

 private:
  Solution last_;
};

enum class InitMode { Spectral, Random };
InitMode parse_init_mode(const std::string& name);

struct SolveOptions {
  int max_sweeps = 500;
  double tol = 1e-8;
  InitMode init = InitMode::Spectral;
  RandomStream rng{0, 0};
};

/// Weighted data misfit 1/2 sum_t w_t ||A^t(X) - y^t||^2 (no ridge term).
double data_loss(const LowemsProblem& p, const Matrix& X);

double objective(const LowemsProblem& p, const FactorPair& f);

FactorPair init_factors(const LowemsProblem& p, InitMode mode, RandomStream& rng);

/// Exact minimizer over V with U held fixed. Sets *pseudo_inverse (if given)
/// when a rank-deficient block required the minimum-norm solution.
Matrix update_V(const LowemsProblem& p, const Matrix& U, bool* pseudo_inverse = nullptr);
/// Exact minimizer over U with V held fixed.
Matrix update_U(const LowemsProblem& p, const Matrix& V, bool* pseudo_inverse = nullptr);

/// Alternating minimization: V-step then U-step per sweep, until the relative
/// objective decrease over a sweep drops below opts.tol or max_sweeps is hit.
/// A block whose computed minimizer fits worse than the current iterate (only
/// possible through rounding in nearly singular blocks) keeps the better of
/// the current iterate and the minimizer nearest to it.
Solution solve(const LowemsProblem& p, SolveOptions opts);

/// Relative round-off allowance used when comparing losses in the basic
/// inequality check.
inline constexpr double kBasicInequalityRoundoff = 1e-12;

struct BasicInequalityReport {
  double lhs = 0;             // sum_t w_t ||A^t(Delta)||^2
  double rhs = 0;             // 2 sqrt(2r) ||sum_t w_t A^t*(h^t - z^t)||_2 ||Delta||_F
  double loss_estimate = 0;   // data_loss at X_hat
  double loss_truth = 0;      // data_loss at X^d
  bool premise_holds = false; // loss_estimate <= loss_truth up to round-off
  bool inequality_holds = false;
};

/// Evaluates the deterministic error inequality satisfied by any minimizer of
/// the weighted loss, with Delta = X_hat - X^d and h^t = A^t(X^d - X^t).
BasicInequalityReport check_basic_inequality(const Solution& sol, const DynamicGroundTruth* truth,
                                             const LowemsProblem& p);

}  // namespace lowems
