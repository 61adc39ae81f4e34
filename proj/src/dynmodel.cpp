#include "lowems/dynmodel.hpp"

namespace lowems {

Matrix random_orthonormal(Eigen::Index n, Eigen::Index r, RandomStream& rng) {
  require(n >= 1 && r >= 1, "random_orthonormal: dimensions must be positive");
  require(r <= n, "random_orthonormal: r must not exceed n");
  const Matrix g = rng.gaussian_matrix(n, r);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, r);
  const Matrix R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < r; ++j) {
    if (R(j, j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

DynamicGroundTruth generate_truth(Eigen::Index n1, Eigen::Index n2, Eigen::Index r, std::size_t d, double sigma2,
                                  RandomStream& rng) {
  require(n1 >= 1 && n2 >= 1 && r >= 1, "generate_truth: dimensions must be positive");
  require(r <= std::min(n1, n2), "generate_truth: r exceeds min(n1, n2)");
  require(d >= 1, "generate_truth: need at least one time bin");
  require(sigma2 >= 0 && std::isfinite(sigma2), "generate_truth: sigma2 must be finite and nonnegative");

  DynamicGroundTruth truth;
  truth.sigma2 = sigma2;
  truth.U = random_orthonormal(n1, r, rng);
  truth.V_seq.reserve(d);
  truth.X_seq.reserve(d);
  truth.V_seq.push_back(rng.gaussian_matrix(n2, r));
  for (std::size_t t = 1; t < d; ++t) {
    if (sigma2 == 0.0) {
      truth.V_seq.push_back(truth.V_seq.back());
    } else {
      truth.V_seq.push_back(truth.V_seq.back() + rng.gaussian_matrix(n2, r, sigma2));
    }
  }
  for (const Matrix& V : truth.V_seq) truth.X_seq.push_back(truth.U * V.transpose());
  return truth;
}

}  // namespace lowems
