#include "lowems/dynmodel.hpp"

#include <gtest/gtest.h>

namespace lowems {
namespace {

TEST(RandomOrthonormal, ColumnsOrthonormal) {
  RandomStream rng(1, 0);
  const Matrix Q = random_orthonormal(5, 3, rng);
  EXPECT_TRUE((Q.transpose() * Q).isApprox(Matrix::Identity(3, 3), 1e-12));
  EXPECT_LT(((Q.transpose() * Q) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RandomOrthonormal, SquareHasUnitDeterminant) {
  RandomStream rng(2, 0);
  const Matrix Q = random_orthonormal(3, 3, rng);
  EXPECT_NEAR(std::abs(Q.determinant()), 1.0, 1e-10);
}

TEST(RandomOrthonormal, Deterministic) {
  RandomStream a(9, 1), b(9, 1);
  EXPECT_EQ(random_orthonormal(6, 2, a), random_orthonormal(6, 2, b));
}

TEST(RandomOrthonormal, RejectsRankAboveDimension) {
  RandomStream rng(1, 0);
  EXPECT_THROW(random_orthonormal(3, 4, rng), std::invalid_argument);
}

TEST(GenerateTruth, ZeroDriftKeepsSnapshotsEqual) {
  RandomStream rng(3, 0);
  const auto truth = generate_truth(10, 8, 2, 4, 0.0, rng);
  ASSERT_EQ(truth.d(), 4u);
  for (std::size_t t = 1; t < 4; ++t) {
    EXPECT_EQ(truth.X_seq[t], truth.X_seq[0]);
    EXPECT_EQ(truth.V_seq[t], truth.V_seq[0]);
  }
}

TEST(GenerateTruth, SnapshotsHaveBoundedRank) {
  RandomStream rng(4, 0);
  const auto truth = generate_truth(12, 9, 3, 3, 0.2, rng);
  EXPECT_TRUE((truth.U.transpose() * truth.U).isApprox(Matrix::Identity(3, 3), 1e-10));
  for (const Matrix& X : truth.X_seq) {
    const auto svd = top_r_svd(X, 3);
    EXPECT_LT((X - svd.reconstruct()).norm(), 1e-10 * X.norm());
  }
  for (std::size_t t = 0; t < truth.d(); ++t) EXPECT_EQ(truth.X_seq[t], truth.U * truth.V_seq[t].transpose());
}

TEST(GenerateTruth, DriftSecondMomentMonteCarlo) {
  const Eigen::Index n2 = 20, r = 3;
  const double sigma2 = 0.1;
  double acc = 0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    RandomStream rng(static_cast<std::uint64_t>(s), 17);
    const auto truth = generate_truth(10, n2, r, 2, sigma2, rng);
    acc += (truth.V_seq[1] - truth.V_seq[0]).squaredNorm();
  }
  const double expected = static_cast<double>(n2 * r) * sigma2 * sigma2;
  EXPECT_NEAR(acc / seeds, expected, 0.10 * expected);
}

TEST(GenerateTruth, DriftVarianceWithinChiSquareBounds) {
  RandomStream rng(5, 0);
  const double sigma2 = 0.3;
  const auto truth = generate_truth(20, 400, 5, 3, sigma2, rng);
  for (std::size_t t = 1; t < truth.d(); ++t) {
    const Matrix eps = truth.V_seq[t] - truth.V_seq[t - 1];
    const double n = static_cast<double>(eps.size());  // 2000 entries
    const double stat = eps.squaredNorm() / (sigma2 * sigma2);
    // 99% two-sided chi-square interval, normal approximation.
    const double half_width = 2.576 * std::sqrt(2.0 * n);
    EXPECT_GT(stat, n - half_width);
    EXPECT_LT(stat, n + half_width);
  }
}

TEST(GenerateTruth, OrthonormalUPreservesDriftNorm) {
  RandomStream rng(6, 0);
  const auto truth = generate_truth(15, 10, 4, 4, 0.5, rng);
  for (std::size_t t = 1; t < truth.d(); ++t) {
    const double dx = (truth.X_seq[t] - truth.X_seq[t - 1]).norm();
    const double de = (truth.V_seq[t] - truth.V_seq[t - 1]).norm();
    EXPECT_NEAR(dx, de, 1e-10);
  }
}

TEST(GenerateTruth, InitialFactorsStandardGaussian) {
  RandomStream rng(7, 0);
  const auto truth = generate_truth(10, 500, 4, 1, 0.0, rng);
  const Matrix& V = truth.V_seq[0];
  const double mean = V.mean();
  const double var = (V.array() - mean).square().sum() / static_cast<double>(V.size() - 1);
  EXPECT_NEAR(mean, 0.0, 0.1);
  EXPECT_NEAR(var, 1.0, 0.1);
}

TEST(GenerateTruth, RejectsInvalidDimensions) {
  RandomStream rng(1, 0);
  EXPECT_THROW(generate_truth(3, 2, 3, 1, 0.0, rng), std::invalid_argument);
  EXPECT_THROW(generate_truth(3, 3, 1, 0, 0.0, rng), std::invalid_argument);
  EXPECT_THROW(generate_truth(3, 3, 1, 1, -1.0, rng), std::invalid_argument);
}

}  // namespace
}  // namespace lowems
