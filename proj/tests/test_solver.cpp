#include "lowems/harness.hpp"
#include "lowems/solver.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace lowems {
namespace {

struct Planted {
  std::shared_ptr<const DynamicGroundTruth> truth;
  std::shared_ptr<const ObservationSet> obs;
};

Planted make_planted(OperatorKind kind, Eigen::Index n1, Eigen::Index n2, Eigen::Index r, std::size_t d, Eigen::Index m,
                     double sigma1, double sigma2, std::uint64_t seed) {
  RandomStream rng(seed, 0);
  RandomStream truth_rng = rng.derive(1), op_rng = rng.derive(2), noise_rng = rng.derive(3);
  auto truth = std::make_shared<const DynamicGroundTruth>(generate_truth(n1, n2, r, d, sigma2, truth_rng));
  std::vector<LinearOperator> ops;
  for (std::size_t t = 0; t < d; ++t) ops.push_back(make_operator(kind, n1, n2, m, op_rng));
  auto obs = std::make_shared<const ObservationSet>(observe(std::move(ops), truth, sigma1, noise_rng));
  return {truth, obs};
}

LowemsProblem make_problem(std::shared_ptr<const ObservationSet> obs, WeightVector w, Eigen::Index r, double gamma = 0) {
  LowemsProblem p;
  p.obs = std::move(obs);
  p.w = std::move(w);
  p.r = r;
  p.gamma = gamma;
  return p;
}

// A_i as a dense matrix for either variant.
Matrix measurement_matrix(const LinearOperator& op, Eigen::Index i) {
  if (op.kind() == OperatorKind::Gaussian) return op.sensing_matrix(i);
  Matrix A = Matrix::Zero(op.rows(), op.cols());
  A(op.indices()[i].row, op.indices()[i].col) = 1.0;
  return A;
}

// Objective re-evaluated from apply + norms only.
double objective_oracle(const LowemsProblem& p, const FactorPair& f) {
  const Matrix X = f.U * f.V.transpose();
  double data = 0;
  for (std::size_t t = 0; t < p.obs->d(); ++t) data += p.w[t] * (p.obs->ops[t].apply(X) - p.obs->y[t]).squaredNorm();
  return 0.5 * data + p.gamma * (f.U.squaredNorm() + f.V.squaredNorm());
}

// Minimizer over the free factor via explicit design-matrix assembly. With
// solve_for_v the unknowns are vec(V) (column-major, n2 x r) and the design row
// for A_i is vec(A_i^T U); otherwise vec(U) with rows vec(A_i V).
Matrix design_oracle(const LowemsProblem& p, const Matrix& fixed, bool solve_for_v) {
  const Eigen::Index rows = solve_for_v ? p.cols() : p.rows();
  const Eigen::Index k = rows * p.r;
  Eigen::Index total = 0;
  for (const auto& op : p.obs->ops) total += op.size();
  Matrix D = Matrix::Zero(total, k);
  Vector b = Vector::Zero(total);
  Eigen::Index row = 0;
  for (std::size_t t = 0; t < p.obs->d(); ++t) {
    const double sw = std::sqrt(p.w[t]);
    for (Eigen::Index i = 0; i < p.obs->ops[t].size(); ++i, ++row) {
      const Matrix A = measurement_matrix(p.obs->ops[t], i);
      const Matrix G = solve_for_v ? Matrix(A.transpose() * fixed) : Matrix(A * fixed);
      D.row(row) = sw * G.reshaped().transpose();
      b(row) = sw * p.obs->y[t](i);
    }
  }
  const Matrix normal = D.transpose() * D + 2.0 * p.gamma * Matrix::Identity(k, k);
  const Vector sol = normal.completeOrthogonalDecomposition().solve(D.transpose() * b);
  return sol.reshaped(rows, p.r);
}

// Plain rank-r least squares by ALS on a single sampled matrix.
Matrix single_matrix_als(const LinearOperator& op, const Vector& y, FactorPair f, int sweeps) {
  const Eigen::Index r = f.U.cols();
  for (int s = 0; s < sweeps; ++s) {
    for (Eigen::Index j = 0; j < f.V.rows(); ++j) {
      Matrix G = Matrix::Zero(r, r);
      Vector h = Vector::Zero(r);
      for (Eigen::Index i = 0; i < op.size(); ++i) {
        if (op.indices()[i].col != j) continue;
        const Vector u = f.U.row(op.indices()[i].row).transpose();
        G += u * u.transpose();
        h += y(i) * u;
      }
      f.V.row(j) = G.ldlt().solve(h).transpose();
    }
    for (Eigen::Index j = 0; j < f.U.rows(); ++j) {
      Matrix G = Matrix::Zero(r, r);
      Vector h = Vector::Zero(r);
      for (Eigen::Index i = 0; i < op.size(); ++i) {
        if (op.indices()[i].row != j) continue;
        const Vector v = f.V.row(op.indices()[i].col).transpose();
        G += v * v.transpose();
        h += y(i) * v;
      }
      f.U.row(j) = G.ldlt().solve(h).transpose();
    }
  }
  return f.U * f.V.transpose();
}

void expect_monotone(const Solution& sol) {
  for (std::size_t k = 1; k < sol.objective_trace.size(); ++k)
    EXPECT_LE(sol.objective_trace[k], sol.objective_trace[k - 1] + 1e-12) << "step " << k;
}

TEST(Objective, ExactFitIsZero) {
  const auto pl = make_planted(OperatorKind::Gaussian, 8, 6, 2, 1, 60, 0.0, 0.0, 1);
  const auto p = make_problem(pl.obs, baseline_weights(1, BaselineKind::LastOnly), 2);
  const FactorPair f{pl.truth->U, pl.truth->V_seq[0]};
  EXPECT_LE(objective(p, f), 1e-16 * pl.obs->y[0].squaredNorm());
}

TEST(Objective, ZeroFactorsGiveHalfWeightedEnergy) {
  const auto pl = make_planted(OperatorKind::Sampling, 8, 6, 2, 3, 30, 0.1, 0.1, 2);
  const auto w = optimal_weights(3, 2.0);
  const auto p = make_problem(pl.obs, w, 2);
  double expected = 0;
  for (std::size_t t = 0; t < 3; ++t) expected += 0.5 * w[t] * pl.obs->y[t].squaredNorm();
  EXPECT_NEAR(objective(p, {Matrix::Zero(8, 2), Matrix::Zero(6, 2)}), expected, 1e-14 * expected);
}

TEST(Objective, MatchesReevaluationOracle) {
  for (auto kind : {OperatorKind::Gaussian, OperatorKind::Sampling}) {
    const auto pl = make_planted(kind, 7, 5, 2, 2, 25, 0.1, 0.2, 3);
    const auto p = make_problem(pl.obs, optimal_weights(2, 0.7), 2, 0.4);
    RandomStream rng(4, 0);
    const FactorPair f{rng.gaussian_matrix(7, 2), rng.gaussian_matrix(5, 2)};
    const double oracle = objective_oracle(p, f);
    EXPECT_NEAR(objective(p, f), oracle, 1e-12 * oracle);
  }
}

TEST(Objective, DimensionMismatchRejected) {
  const auto pl = make_planted(OperatorKind::Sampling, 5, 4, 2, 1, 10, 0.0, 0.0, 5);
  const auto p = make_problem(pl.obs, baseline_weights(1, BaselineKind::Equal), 2);
  EXPECT_THROW(objective(p, {Matrix::Zero(4, 2), Matrix::Zero(5, 2)}), std::invalid_argument);
}

TEST(InitFactors, SpectralAlignsWithPlantedSubspace) {
  const auto pl = make_planted(OperatorKind::Gaussian, 20, 15, 2, 1, 800, 0.0, 0.0, 6);
  const auto p = make_problem(pl.obs, baseline_weights(1, BaselineKind::LastOnly), 2);
  RandomStream rng(0, 0);
  const FactorPair f = init_factors(p, InitMode::Spectral, rng);
  const Matrix Q = f.U.householderQr().householderQ() * Matrix::Identity(20, 2);
  const double cos_min = top_r_svd(Matrix(pl.truth->U.transpose() * Q), 2).s(1);
  EXPECT_LT(std::acos(std::min(1.0, cos_min)), 0.5);
}

TEST(InitFactors, RandomModeDeterministic) {
  const auto pl = make_planted(OperatorKind::Sampling, 6, 5, 2, 1, 20, 0.0, 0.0, 7);
  const auto p = make_problem(pl.obs, baseline_weights(1, BaselineKind::LastOnly), 2);
  RandomStream a(3, 3), b(3, 3);
  const auto fa = init_factors(p, InitMode::Random, a), fb = init_factors(p, InitMode::Random, b);
  EXPECT_EQ(fa.U, fb.U);
  EXPECT_EQ(fa.V, fb.V);
}

TEST(InitFactors, SpectralOnZeroDataIsZero) {
  auto pl = make_planted(OperatorKind::Sampling, 6, 5, 2, 2, 20, 0.0, 0.0, 8);
  auto obs = std::make_shared<ObservationSet>(*pl.obs);
  for (auto& y : obs->y) y.setZero();
  const auto p = make_problem(obs, baseline_weights(2, BaselineKind::Equal), 2);
  RandomStream rng(0, 0);
  const auto f = init_factors(p, InitMode::Spectral, rng);
  EXPECT_TRUE(f.U.isZero(0));
  EXPECT_TRUE(f.V.isZero(0));
}

std::shared_ptr<const ObservationSet> scalar_observation(double y) {
  auto obs = std::make_shared<ObservationSet>();
  obs->ops.push_back(LinearOperator::sampling(1, 1, {{0, 0}}));
  obs->y.push_back(Vector::Constant(1, y));
  return obs;
}

TEST(UpdateV, ScalarLeastSquares) {
  const auto p = make_problem(scalar_observation(6.0), baseline_weights(1, BaselineKind::LastOnly), 1);
  EXPECT_NEAR(update_V(p, Matrix::Constant(1, 1, 2.0))(0, 0), 3.0, 1e-15);
}

TEST(UpdateU, ScalarLeastSquares) {
  const auto p = make_problem(scalar_observation(6.0), baseline_weights(1, BaselineKind::LastOnly), 1);
  EXPECT_NEAR(update_U(p, Matrix::Constant(1, 1, 2.0))(0, 0), 3.0, 1e-15);
}

std::shared_ptr<const ObservationSet> untouched_observation() {
  // Column 2 and row 2 of a 3x3 matrix are never observed.
  auto obs = std::make_shared<ObservationSet>();
  obs->ops.push_back(LinearOperator::sampling(3, 3, {{0, 0}, {1, 1}, {0, 1}}));
  obs->y.push_back(Vector::Constant(3, 2.0));
  return obs;
}

TEST(UpdateV, UnobservedRowShrinksToZero) {
  const auto p = make_problem(untouched_observation(), baseline_weights(1, BaselineKind::LastOnly), 2, 0.5);
  RandomStream rng(1, 0);
  const Matrix V = update_V(p, rng.gaussian_matrix(3, 2));
  EXPECT_TRUE(V.row(2).isZero(0));
  EXPECT_FALSE(V.row(0).isZero(0));
}

TEST(UpdateU, UnobservedRowShrinksToZero) {
  const auto p = make_problem(untouched_observation(), baseline_weights(1, BaselineKind::LastOnly), 2, 0.5);
  RandomStream rng(2, 0);
  const Matrix U = update_U(p, rng.gaussian_matrix(3, 2));
  EXPECT_TRUE(U.row(2).isZero(0));
}

TEST(UpdateV, RankDeficientFallsBackToMinimumNorm) {
  const auto p = make_problem(untouched_observation(), baseline_weights(1, BaselineKind::LastOnly), 2, 0.0);
  RandomStream rng(3, 0);
  bool pinv = false;
  const Matrix V = update_V(p, rng.gaussian_matrix(3, 2), &pinv);
  EXPECT_TRUE(pinv);
  EXPECT_TRUE(V.allFinite());
  EXPECT_TRUE(V.row(2).isZero(0));
}

class DesignOracle : public ::testing::TestWithParam<std::tuple<OperatorKind, double>> {};

TEST_P(DesignOracle, UpdateVMatchesDenseNormalEquations) {
  const auto [kind, gamma] = GetParam();
  const auto pl = make_planted(kind, 6, 5, 2, 2, 40, 0.1, 0.3, 9);
  const auto p = make_problem(pl.obs, optimal_weights(2, 1.5), 2, gamma);
  RandomStream rng(10, 0);
  const Matrix U = rng.gaussian_matrix(6, 2);
  const Matrix oracle = design_oracle(p, U, true);
  EXPECT_LT((update_V(p, U) - oracle).cwiseAbs().maxCoeff(), 1e-8);
}

TEST_P(DesignOracle, UpdateUMatchesDenseNormalEquations) {
  const auto [kind, gamma] = GetParam();
  const auto pl = make_planted(kind, 6, 5, 2, 2, 40, 0.1, 0.3, 11);
  const auto p = make_problem(pl.obs, optimal_weights(2, 1.5), 2, gamma);
  RandomStream rng(12, 0);
  const Matrix V = rng.gaussian_matrix(5, 2);
  const Matrix oracle = design_oracle(p, V, false);
  EXPECT_LT((update_U(p, V) - oracle).cwiseAbs().maxCoeff(), 1e-8);
}

INSTANTIATE_TEST_SUITE_P(Variants, DesignOracle,
                         ::testing::Combine(::testing::Values(OperatorKind::Gaussian, OperatorKind::Sampling),
                                            ::testing::Values(0.0, 0.3)));

TEST(Solve, StaticGaussianExactRecovery) {
  const auto pl = make_planted(OperatorKind::Gaussian, 50, 30, 3, 1, 750, 0.0, 0.0, 13);
  const auto p = make_problem(pl.obs, baseline_weights(1, BaselineKind::LastOnly), 3);
  SolveOptions opts;
  opts.max_sweeps = 100;
  const Solution sol = solve(p, opts);
  EXPECT_LE(relative_error(sol.X_hat, pl.truth->last()), 1e-4);
  EXPECT_LE(sol.iterations, 100);
  expect_monotone(sol);
}

TEST(Solve, LastOnlyEqualsSingleBinProblem) {
  const auto pl = make_planted(OperatorKind::Sampling, 30, 20, 2, 3, 300, 0.05, 0.1, 14);
  const auto multi = make_problem(pl.obs, baseline_weights(3, BaselineKind::LastOnly), 2);
  auto single_obs = std::make_shared<ObservationSet>();
  single_obs->ops.push_back(pl.obs->ops.back());
  single_obs->y.push_back(pl.obs->y.back());
  const auto single = make_problem(single_obs, baseline_weights(1, BaselineKind::LastOnly), 2);
  const Solution a = solve(multi, {}), b = solve(single, {});
  EXPECT_LT((a.X_hat - b.X_hat).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Solve, ZeroWeightBinsHaveNoInfluence) {
  for (auto kind : {OperatorKind::Gaussian, OperatorKind::Sampling}) {
    const auto pl = make_planted(kind, 12, 10, 2, 3, 120, 0.05, 0.1, 15);
    const auto w = explicit_weights({0.4, 0.0, 0.6});
    const Solution base = solve(make_problem(pl.obs, w, 2), {});
    auto perturbed = std::make_shared<ObservationSet>(*pl.obs);
    perturbed->y[1].array() += 100.0;
    const Solution other = solve(make_problem(perturbed, w, 2), {});
    EXPECT_EQ(base.X_hat, other.X_hat);
    EXPECT_EQ(base.objective_trace, other.objective_trace);
  }
}

TEST(Solve, SingleBinMatchesPlainAls) {
  const auto pl = make_planted(OperatorKind::Sampling, 25, 20, 2, 1, 250, 0.05, 0.0, 16);
  const auto p = make_problem(pl.obs, baseline_weights(1, BaselineKind::LastOnly), 2);
  SolveOptions opts;
  opts.tol = 0.0;
  opts.max_sweeps = 300;
  const Solution sol = solve(p, opts);
  RandomStream rng(0, 0);
  const Matrix ref = single_matrix_als(pl.obs->ops[0], pl.obs->y[0], init_factors(p, InitMode::Spectral, rng), sol.iterations);
  EXPECT_LT((sol.X_hat - ref).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Solve, TraceMonotoneAndRankBounded) {
  for (auto kind : {OperatorKind::Gaussian, OperatorKind::Sampling}) {
    const auto pl = make_planted(kind, 20, 15, 3, 3, 200, 0.1, 0.2, 17);
    SolveOptions opts;
    opts.init = InitMode::Random;
    opts.rng = RandomStream(5, 5);
    const Solution sol = solve(make_problem(pl.obs, optimal_weights(3, 4.0), 3, 0.1), opts);
    expect_monotone(sol);
    EXPECT_EQ(sol.objective_trace.size() % 2, 1u);
    ASSERT_FALSE(sol.clip_applied);
    const auto svd = top_r_svd(sol.X_hat, 3);
    EXPECT_LT((sol.X_hat - svd.reconstruct()).norm(), 1e-10 * sol.X_hat.norm());
  }
}

// Fewer samples per row than the rank: most row blocks are singular.
TEST(Solve, SeverelyUndersampledTraceStaysMonotone) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto pl = make_planted(OperatorKind::Sampling, 100, 50, 5, 4, 100, 0.05, 1e-3, 40 + seed);
    for (const auto& w : {baseline_weights(4, BaselineKind::LastOnly), optimal_weights(4, 4e-4)}) {
      const Solution sol = solve(make_problem(pl.obs, w, 5), {});
      expect_monotone(sol);
      EXPECT_TRUE(sol.used_pseudo_inverse);
      EXPECT_TRUE(sol.X_hat.allFinite());
    }
  }
}

TEST(Solve, SpikinessClipping) {
  const auto pl = make_planted(OperatorKind::Sampling, 15, 10, 2, 1, 120, 0.0, 0.0, 18);
  auto p = make_problem(pl.obs, baseline_weights(1, BaselineKind::LastOnly), 2);
  p.spikiness = 0.1;
  const Solution sol = solve(p, {});
  EXPECT_TRUE(sol.clip_applied);
  EXPECT_LE(sol.X_hat.cwiseAbs().maxCoeff(), 0.1);
  p.spikiness = 1e6;
  EXPECT_FALSE(solve(p, {}).clip_applied);
}

TEST(Solve, NonFiniteDataRaisesDivergence) {
  auto pl = make_planted(OperatorKind::Sampling, 6, 5, 1, 1, 20, 0.0, 0.0, 19);
  auto obs = std::make_shared<ObservationSet>(*pl.obs);
  obs->y[0](0) = 1e300;
  EXPECT_THROW(solve(make_problem(obs, baseline_weights(1, BaselineKind::LastOnly), 1), {}), DivergenceError);
}

TEST(Solve, RejectsInvalidProblem) {
  const auto pl = make_planted(OperatorKind::Sampling, 6, 5, 1, 2, 20, 0.0, 0.0, 20);
  EXPECT_THROW(solve(make_problem(pl.obs, baseline_weights(3, BaselineKind::Equal), 1), {}), std::invalid_argument);
  EXPECT_THROW(solve(make_problem(pl.obs, baseline_weights(2, BaselineKind::Equal), 6), {}), std::invalid_argument);
}

TEST(BasicInequality, ExactEstimateGivesZeroLhs) {
  const auto pl = make_planted(OperatorKind::Gaussian, 10, 8, 2, 2, 100, 0.05, 0.05, 21);
  const auto p = make_problem(pl.obs, optimal_weights(2, 1.0), 2);
  Solution sol;
  sol.X_hat = pl.truth->last();
  const auto report = check_basic_inequality(sol, pl.truth.get(), p);
  EXPECT_EQ(report.lhs, 0.0);
  EXPECT_TRUE(report.premise_holds);
  EXPECT_TRUE(report.inequality_holds);
}

TEST(BasicInequality, NoiselessGlobalOptimum) {
  const auto pl = make_planted(OperatorKind::Gaussian, 20, 15, 2, 1, 400, 0.0, 0.0, 22);
  const auto p = make_problem(pl.obs, baseline_weights(1, BaselineKind::LastOnly), 2);
  const Solution sol = solve(p, {});
  const auto report = check_basic_inequality(sol, pl.truth.get(), p);
  EXPECT_TRUE(report.premise_holds);
  EXPECT_TRUE(report.inequality_holds);
}

TEST(BasicInequality, NoisyDriftingRunSatisfiesInequality) {
  for (auto kind : {OperatorKind::Gaussian, OperatorKind::Sampling}) {
    const auto pl = make_planted(kind, 20, 15, 2, 3, 300, 0.1, 0.05, 23);
    const auto p = make_problem(pl.obs, optimal_weights(3, 0.25), 2);
    const Solution sol = solve(p, {});
    const auto report = check_basic_inequality(sol, pl.truth.get(), p);
    ASSERT_TRUE(report.premise_holds);
    EXPECT_GT(report.lhs, 0.0);
    EXPECT_TRUE(report.inequality_holds) << report.lhs << " > " << report.rhs;
  }
}

TEST(BasicInequality, FarEstimateFailsPremise) {
  const auto pl = make_planted(OperatorKind::Gaussian, 10, 8, 2, 1, 100, 0.05, 0.0, 24);
  const auto p = make_problem(pl.obs, baseline_weights(1, BaselineKind::LastOnly), 2);
  Solution sol;
  sol.X_hat = 10.0 * pl.truth->last();
  EXPECT_FALSE(check_basic_inequality(sol, pl.truth.get(), p).premise_holds);
}

TEST(BasicInequality, MissingTruthRejected) {
  const auto pl = make_planted(OperatorKind::Gaussian, 6, 5, 1, 1, 20, 0.0, 0.0, 25);
  const auto p = make_problem(pl.obs, baseline_weights(1, BaselineKind::LastOnly), 1);
  Solution sol;
  sol.X_hat = Matrix::Zero(6, 5);
  EXPECT_THROW(check_basic_inequality(sol, nullptr, p), std::invalid_argument);
}

}  // namespace
}  // namespace lowems
