#pragma once

#include "lowems/core.hpp"

namespace lowems {

/// Planted time-varying low-rank matrices X^t = U (V^t)^T with a fixed
/// orthonormal U and a Gaussian random walk on V.
struct DynamicGroundTruth {
  Matrix U;                   // n1 x r, orthonormal columns
  std::vector<Matrix> V_seq;  // d matrices, n2 x r
  std::vector<Matrix> X_seq;  // d matrices, n1 x n2
  double sigma2 = 0.0;        // per-entry std. dev. of the drift

  Eigen::Index n1() const { return U.rows(); }
  Eigen::Index n2() const { return V_seq.front().rows(); }
  Eigen::Index rank() const { return U.cols(); }
  std::size_t d() const { return X_seq.size(); }
  const Matrix& last() const { return X_seq.back(); }
};

/// n x r matrix with orthonormal columns: thin Householder QR of an i.i.d.
/// Gaussian matrix, with column signs fixed so that diag(R) > 0.
Matrix random_orthonormal(Eigen::Index n, Eigen::Index r, RandomStream& rng);

/// V^1 has i.i.d. N(0, 1) entries; V^t = V^{t-1} + eps^t with eps^t entries
/// i.i.d. N(0, sigma2^2).
DynamicGroundTruth generate_truth(Eigen::Index n1, Eigen::Index n2, Eigen::Index r, std::size_t d, double sigma2,
                                  RandomStream& rng);

}  // namespace lowems
