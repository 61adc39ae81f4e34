#include "lowems/solver.hpp"

#include <cmath>
#include <limits>

namespace lowems {

InitMode parse_init_mode(const std::string& name) {
  if (name == "spectral") return InitMode::Spectral;
  if (name == "random") return InitMode::Random;
  throw std::invalid_argument("unknown init mode '" + name + "'");
}

void LowemsProblem::validate() const {
  require(obs != nullptr, "problem: observations required");
  obs->validate();
  require(w.size() == obs->d(), "problem: weight vector length must equal number of bins");
  require(r >= 1 && r <= std::min(rows(), cols()), "problem: rank must lie in [1, min(n1, n2)]");
  require(gamma >= 0 && std::isfinite(gamma), "problem: gamma must be finite and nonnegative");
  if (spikiness) require(*spikiness > 0, "problem: spikiness bound must be positive");
}

namespace {

/// Observed entries grouped along one axis, pre-multiplied by their bin weight.
struct Observation {
  Eigen::Index other;  // index along the axis held fixed
  double weight;
  double value;
};

using Groups = std::vector<std::vector<Observation>>;

/// group_by_col: entries grouped by column (for V rows); else by row (for U rows).
Groups group_sampled(const LowemsProblem& p, bool group_by_col) {
  Groups groups(static_cast<std::size_t>(group_by_col ? p.cols() : p.rows()));
  const ObservationSet& obs = *p.obs;
  for (std::size_t t = 0; t < obs.d(); ++t) {
    if (p.w[t] == 0) continue;
    const auto& idx = obs.ops[t].indices();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double y = obs.y[t](static_cast<Eigen::Index>(i));
      if (group_by_col) {
        groups[static_cast<std::size_t>(idx[i].col)].push_back({idx[i].row, p.w[t], y});
      } else {
        groups[static_cast<std::size_t>(idx[i].row)].push_back({idx[i].col, p.w[t], y});
      }
    }
  }
  return groups;
}

/// Minimises |design x - target|^2 + ridge |x|^2. Normal equations are used
/// when they are well conditioned; otherwise a complete orthogonal
/// decomposition of the design itself, which for ridge == 0 returns the
/// minimum-norm solution and sets *pinv.
Vector solve_block(const Matrix& design, const Vector& target, double ridge, bool* pinv) {
  const Eigen::Index n = design.cols();
  if (design.rows() >= n || ridge > 0) {
    Matrix normal = Matrix::Zero(n, n);
    normal.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
    normal.triangularView<Eigen::StrictlyUpper>() = normal.transpose();
    normal.diagonal().array() += ridge;
    Eigen::LLT<Matrix> llt(normal);
    if (llt.info() == Eigen::Success && llt.rcond() > 1e-8) return llt.solve(design.transpose() * target);
  }
  if (ridge > 0) {
    Matrix aug(design.rows() + n, n);
    aug << design, std::sqrt(ridge) * Matrix::Identity(n, n);
    Vector rhs = Vector::Zero(design.rows() + n);
    rhs.head(design.rows()) = target;
    return Eigen::CompleteOrthogonalDecomposition<Matrix>(aug).solve(rhs);
  }
  if (pinv) *pinv = true;
  if (design.rows() == 0 || design.isZero(0.0)) return Vector::Zero(n);
  return Eigen::CompleteOrthogonalDecomposition<Matrix>(design).solve(target);
}

double block_loss(const Matrix& design, const Vector& target, double ridge, const Vector& x) {
  return (design * x - target).squaredNorm() + ridge * x.squaredNorm();
}

/// Used inside solve only. If rounding in a nearly singular block makes the
/// computed minimizer fit worse than the current iterate, try the minimizer
/// nearest the current iterate instead, and fall back to the current iterate.
Vector guard_block(const Matrix& design, const Vector& target, double ridge, Vector x, const Vector& current) {
  const double before = block_loss(design, target, ridge, current);
  double best = block_loss(design, target, ridge, x);
  if (best <= before) return x;
  const Eigen::Index n = design.cols();
  Matrix aug(design.rows() + n, n);
  aug << design, std::sqrt(ridge) * Matrix::Identity(n, n);
  Vector rhs(design.rows() + n);
  rhs << target - design * current, -std::sqrt(ridge) * current;
  const Vector nearest = current + Eigen::CompleteOrthogonalDecomposition<Matrix>(aug).solve(rhs);
  if (const double loss = block_loss(design, target, ridge, nearest); loss < best) {
    best = loss;
    x = nearest;
  }
  return best <= before ? x : current;
}

Matrix update_sampled(const Groups& groups, const Matrix& fixed, double ridge, bool* pinv,
                      const Matrix* current = nullptr) {
  const Eigen::Index r = fixed.cols();
  Matrix out(static_cast<Eigen::Index>(groups.size()), r);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto rows = static_cast<Eigen::Index>(groups[k].size());
    Matrix design(rows, r);
    Vector target(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Observation& o = groups[k][static_cast<std::size_t>(i)];
      const double scale = std::sqrt(o.weight);
      design.row(i) = scale * fixed.row(o.other);
      target(i) = scale * o.value;
    }
    Vector x = solve_block(design, target, ridge, pinv);
    if (current) x = guard_block(design, target, ridge, std::move(x), current->row(static_cast<Eigen::Index>(k)).transpose());
    out.row(static_cast<Eigen::Index>(k)) = x.transpose();
  }
  return out;
}

/// One ridge least-squares in all entries of the free factor. For the V-step
/// the design row of measurement i is vec(A_i^T U); for the U-step vec(A_i V).
Matrix update_sensed(const LowemsProblem& p, const Matrix& fixed, bool solve_for_V, bool* pinv,
                     const Matrix* current = nullptr) {
  const ObservationSet& obs = *p.obs;
  const Eigen::Index r = fixed.cols();
  const Eigen::Index free_rows = solve_for_V ? p.cols() : p.rows();
  const Eigen::Index unknowns = free_rows * r;

  Eigen::Index total = 0;
  for (std::size_t t = 0; t < obs.d(); ++t)
    if (p.w[t] != 0) total += obs.ops[t].size();

  Matrix design(total, unknowns);
  Vector target(total);
  Eigen::Index row = 0;
  for (std::size_t t = 0; t < obs.d(); ++t) {
    if (p.w[t] == 0) continue;
    const double scale = std::sqrt(p.w[t]);
    const Eigen::Index base = row;
    obs.ops[t].for_each_sensing_matrix([&](Eigen::Index i, const Eigen::Ref<const Matrix>& A) {
      const Matrix coef = solve_for_V ? Matrix(A.transpose() * fixed) : Matrix(A * fixed);
      design.row(base + i) = scale * coef.reshaped().transpose();
      target(base + i) = scale * obs.y[t](i);
    });
    row += obs.ops[t].size();
  }

  Vector x = solve_block(design, target, 2.0 * p.gamma, pinv);
  if (current) x = guard_block(design, target, 2.0 * p.gamma, std::move(x), current->reshaped());
  return Eigen::Map<const Matrix>(x.data(), free_rows, r);
}

double ridge_term(const LowemsProblem& p, const FactorPair& f) {
  return p.gamma == 0 ? 0.0 : p.gamma * (f.U.squaredNorm() + f.V.squaredNorm());
}

void check_factors(const LowemsProblem& p, const FactorPair& f) {
  require(f.U.rows() == p.rows() && f.U.cols() == p.r, "factors: U must be n1 x r");
  require(f.V.rows() == p.cols() && f.V.cols() == p.r, "factors: V must be n2 x r");
}

}  // namespace

double data_loss(const LowemsProblem& p, const Matrix& X) {
  require(X.rows() == p.rows() && X.cols() == p.cols(), "data_loss: dimension mismatch");
  const ObservationSet& obs = *p.obs;
  double loss = 0;
  for (std::size_t t = 0; t < obs.d(); ++t) {
    if (p.w[t] == 0) continue;
    loss += p.w[t] * (obs.ops[t].apply(X) - obs.y[t]).squaredNorm();
  }
  return 0.5 * loss;
}

double objective(const LowemsProblem& p, const FactorPair& f) {
  check_factors(p, f);
  const ObservationSet& obs = *p.obs;
  if (obs.kind() == OperatorKind::Gaussian) return data_loss(p, f.product()) + ridge_term(p, f);

  // Entry reads only; avoids forming U V^T.
  double loss = 0;
  for (std::size_t t = 0; t < obs.d(); ++t) {
    if (p.w[t] == 0) continue;
    const auto& idx = obs.ops[t].indices();
    double bin = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double residual = f.U.row(idx[i].row).dot(f.V.row(idx[i].col)) - obs.y[t](static_cast<Eigen::Index>(i));
      bin += residual * residual;
    }
    loss += p.w[t] * bin;
  }
  return 0.5 * loss + ridge_term(p, f);
}

FactorPair init_factors(const LowemsProblem& p, InitMode mode, RandomStream& rng) {
  p.validate();
  if (mode == InitMode::Random) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(p.r));
    FactorPair f;
    f.U = rng.gaussian_matrix(p.rows(), p.r, stddev);
    f.V = rng.gaussian_matrix(p.cols(), p.r, stddev);
    return f;
  }
  const ObservationSet& obs = *p.obs;
  Matrix M = Matrix::Zero(p.rows(), p.cols());
  for (std::size_t t = 0; t < obs.d(); ++t) {
    if (p.w[t] == 0) continue;
    double scale = p.w[t];
    if (obs.ops[t].kind() == OperatorKind::Sampling) scale /= obs.ops[t].sampling_rate();
    M += scale * obs.ops[t].adjoint(obs.y[t]);
  }
  const TruncatedSvd<double> svd = top_r_svd(M, p.r);
  const Vector root = svd.s.cwiseSqrt();
  return FactorPair{svd.U * root.asDiagonal(), svd.V * root.asDiagonal()};
}

Matrix update_V(const LowemsProblem& p, const Matrix& U, bool* pseudo_inverse) {
  require(U.rows() == p.rows() && U.cols() == p.r, "update_V: U must be n1 x r");
  require(U.allFinite(), "update_V: U must be finite");
  if (p.obs->kind() == OperatorKind::Sampling) return update_sampled(group_sampled(p, true), U, 2.0 * p.gamma, pseudo_inverse);
  return update_sensed(p, U, true, pseudo_inverse);
}

Matrix update_U(const LowemsProblem& p, const Matrix& V, bool* pseudo_inverse) {
  require(V.rows() == p.cols() && V.cols() == p.r, "update_U: V must be n2 x r");
  require(V.allFinite(), "update_U: V must be finite");
  if (p.obs->kind() == OperatorKind::Sampling) return update_sampled(group_sampled(p, false), V, 2.0 * p.gamma, pseudo_inverse);
  return update_sensed(p, V, false, pseudo_inverse);
}

namespace {

void finish(const LowemsProblem& p, Solution& sol) {
  sol.X_hat = sol.factors.product();
  if (p.spikiness) {
    const double a = *p.spikiness;
    if ((sol.X_hat.array().abs() > a).any()) {
      sol.X_hat = sol.X_hat.cwiseMax(-a).cwiseMin(a);
      sol.clip_applied = true;
    }
  }
}

}  // namespace

Solution solve(const LowemsProblem& p, SolveOptions opts) {
  p.validate();
  require(opts.max_sweeps >= 1, "solve: max_sweeps must be positive");
  require(opts.tol >= 0, "solve: tol must be nonnegative");

  const bool sampled = p.obs->kind() == OperatorKind::Sampling;
  const Groups by_col = sampled ? group_sampled(p, true) : Groups{};
  const Groups by_row = sampled ? group_sampled(p, false) : Groups{};

  double data_scale = 0;
  for (std::size_t t = 0; t < p.obs->d(); ++t) data_scale += p.w[t] * p.obs->y[t].squaredNorm();
  // Objective values at or below this are exact fits up to rounding.
  const double floor = 1e-28 * std::max(0.5 * data_scale, std::numeric_limits<double>::min());

  Solution sol;
  sol.factors = init_factors(p, opts.init, opts.rng);
  double current = objective(p, sol.factors);
  if (!std::isfinite(current)) throw DivergenceError("solve: initial objective is not finite", sol);
  sol.objective_trace.push_back(current);

  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    const double before = current;
    Solution last = sol;

    FactorPair next = sol.factors;
    next.V = sampled ? update_sampled(by_col, next.U, 2.0 * p.gamma, &sol.used_pseudo_inverse, &sol.factors.V)
                     : update_sensed(p, next.U, true, &sol.used_pseudo_inverse, &sol.factors.V);
    const double after_v = objective(p, next);
    next.U = sampled ? update_sampled(by_row, next.V, 2.0 * p.gamma, &sol.used_pseudo_inverse, &sol.factors.U)
                     : update_sensed(p, next.V, false, &sol.used_pseudo_inverse, &sol.factors.U);
    const double after_u = objective(p, next);

    if (!std::isfinite(after_v) || !std::isfinite(after_u) || !next.U.allFinite() || !next.V.allFinite()) {
      finish(p, last);
      throw DivergenceError("solve: objective became non-finite at sweep " + std::to_string(sweep), last);
    }
    sol.factors = std::move(next);
    sol.objective_trace.push_back(after_v);
    sol.objective_trace.push_back(after_u);
    sol.iterations = sweep;
    current = after_u;

    if (current <= floor || before <= 0 || (before - current) <= opts.tol * before) {
      sol.converged = true;
      break;
    }
  }
  finish(p, sol);
  return sol;
}

BasicInequalityReport check_basic_inequality(const Solution& sol, const DynamicGroundTruth* truth,
                                             const LowemsProblem& p) {
  require(truth != nullptr, "check_basic_inequality: ground truth required");
  p.validate();
  require(truth->d() == p.obs->d(), "check_basic_inequality: truth bin count mismatch");
  const Matrix& target = truth->last();
  require(sol.X_hat.rows() == target.rows() && sol.X_hat.cols() == target.cols(),
          "check_basic_inequality: dimension mismatch");

  const ObservationSet& obs = *p.obs;
  const Matrix delta = sol.X_hat - target;
  BasicInequalityReport report;
  Matrix gradient = Matrix::Zero(target.rows(), target.cols());
  for (std::size_t t = 0; t < obs.d(); ++t) {
    if (p.w[t] == 0) continue;
    const LinearOperator& op = obs.ops[t];
    report.lhs += p.w[t] * op.apply(delta).squaredNorm();
    // h^t - z^t with z^t = y^t - A^t(X^t) recovered from the data.
    const Vector h = op.apply(target - truth->X_seq[t]);
    const Vector z = obs.y[t] - op.apply(truth->X_seq[t]);
    gradient += p.w[t] * op.adjoint(h - z);
  }
  report.rhs = 2.0 * std::sqrt(2.0 * static_cast<double>(p.r)) * spectral_norm(gradient) * delta.norm();
  report.loss_estimate = data_loss(p, sol.X_hat);
  report.loss_truth = data_loss(p, target);
  // Losses are compared up to round-off on the scale of the zero predictor's
  // loss; the same slack carried through the derivation gives lhs <= rhs + 2 eps.
  double scale = 0;
  for (std::size_t t = 0; t < obs.d(); ++t) scale += 0.5 * p.w[t] * obs.y[t].squaredNorm();
  const double eps = kBasicInequalityRoundoff * scale;
  report.premise_holds = report.loss_estimate <= report.loss_truth + eps;
  report.inequality_holds = report.lhs <= report.rhs * (1.0 + 1e-9) + 2.0 * eps;
  return report;
}

}  // namespace lowems
