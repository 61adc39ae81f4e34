#include "lowems/weights.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace lowems {
namespace {

void check_args(std::size_t d, double kappa) {
  if (d == 0) throw std::invalid_argument("weights: d must be at least 1");
  if (!(kappa >= 0)) throw std::invalid_argument("weights: kappa must be nonnegative");
}

double lag(std::size_t d, std::size_t t) { return static_cast<double>(d - 1 - t); }

}  // namespace

double WeightVector::sum_of_squares() const {
  return std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
}

WeightVector optimal_weights(std::size_t d, double kappa) {
  check_args(d, kappa);
  if (std::isinf(kappa)) {
    WeightVector out = baseline_weights(d, BaselineKind::LastOnly);
    out.kappa = kappa;
    return out;
  }
  WeightVector out;
  out.kappa = kappa;
  out.w.resize(d);
  double total = 0;
  for (std::size_t t = 0; t < d; ++t) {
    out.w[t] = 1.0 / (1.0 + lag(d, t) * kappa);
    total += out.w[t];
  }
  for (double& v : out.w) v /= total;
  return out;
}

WeightVector solve_weight_qp(std::size_t d, double kappa) {
  check_args(d, kappa);
  if (std::isinf(kappa)) return optimal_weights(d, kappa);

  // min sum_t c_t w_t^2  s.t.  sum_t w_t = 1, w >= 0.
  // Stationarity gives w_t = max(0, nu / (2 c_t)) for the simplex multiplier nu.
  // Sort the curvatures and grow the active set until the multiplier is
  // consistent with the next excluded coordinate.
  std::vector<double> curvature(d);
  for (std::size_t t = 0; t < d; ++t) curvature[t] = 1.0 + lag(d, t) * kappa;

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return curvature[a] < curvature[b]; });

  double inv_sum = 0;
  double half_nu = 0;
  std::size_t active = 0;
  for (std::size_t k = 0; k < d; ++k) {
    inv_sum += 1.0 / curvature[order[k]];
    half_nu = 1.0 / inv_sum;
    active = k + 1;
    // With zero linear term every coordinate stays strictly positive; the
    // check keeps the search correct if a coordinate would go negative.
    if (k + 1 < d && half_nu / curvature[order[k + 1]] <= 0) break;
  }

  WeightVector out;
  out.kappa = kappa;
  out.w.assign(d, 0.0);
  for (std::size_t k = 0; k < active; ++k) out.w[order[k]] = half_nu / curvature[order[k]];
  return out;
}

WeightVector baseline_weights(std::size_t d, BaselineKind kind) {
  if (d == 0) throw std::invalid_argument("baseline_weights: d must be at least 1");
  WeightVector out;
  switch (kind) {
    case BaselineKind::LastOnly:
      out.w.assign(d, 0.0);
      out.w.back() = 1.0;
      out.kappa = std::numeric_limits<double>::infinity();
      break;
    case BaselineKind::Equal:
      out.w.assign(d, 1.0 / static_cast<double>(d));
      out.kappa = 0.0;
      break;
    default:
      throw std::invalid_argument("baseline_weights: unknown kind");
  }
  return out;
}

BaselineKind parse_baseline(const std::string& name) {
  if (name == "last_only" || name == "last") return BaselineKind::LastOnly;
  if (name == "equal") return BaselineKind::Equal;
  throw std::invalid_argument("unknown baseline kind '" + name + "'");
}

double weight_objective(const std::vector<double>& w, double kappa) {
  const std::size_t d = w.size();
  double value = 0;
  for (std::size_t t = 0; t < d; ++t) {
    const double drift = lag(d, t) == 0 ? 0.0 : lag(d, t) * kappa;
    value += (1.0 + drift) * w[t] * w[t];
  }
  return value;
}

WeightVector explicit_weights(std::vector<double> w) {
  if (w.empty()) throw std::invalid_argument("explicit weights: empty list");
  double total = 0;
  for (double v : w) {
    if (!(v >= 0) || !std::isfinite(v)) throw std::invalid_argument("explicit weights: entries must be finite and >= 0");
    total += v;
  }
  if (total <= 0) throw std::invalid_argument("explicit weights: sum must be positive");
  for (double& v : w) v /= total;
  return WeightVector{std::move(w), std::numeric_limits<double>::quiet_NaN()};
}

WeightVector weights_from_spec(const std::string& spec, std::size_t d, double kappa) {
  if (spec == "optimal") return optimal_weights(d, kappa);
  if (spec == "last" || spec == "last_only") return baseline_weights(d, BaselineKind::LastOnly);
  if (spec == "equal") return baseline_weights(d, BaselineKind::Equal);
  const std::string prefix = "explicit:";
  if (spec.rfind(prefix, 0) == 0) {
    std::vector<double> w;
    std::stringstream ss(spec.substr(prefix.size()));
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(item, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("explicit weights: cannot parse '" + item + "'");
      }
      if (used != item.size()) throw std::invalid_argument("explicit weights: cannot parse '" + item + "'");
      w.push_back(v);
    }
    if (w.size() != d) {
      throw std::invalid_argument("explicit weights: expected " + std::to_string(d) + " values, got " +
                                  std::to_string(w.size()));
    }
    return explicit_weights(std::move(w));
  }
  throw std::invalid_argument("unknown weight strategy '" + spec + "'");
}

}  // namespace lowems
