#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lowems {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// Base for all library errors that are not plain argument violations.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or insufficient input data (files, tables, splits).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A decomposition failed to converge.
class SvdError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// sqrt of the sum of squared entries.
template <typename Derived>
typename Derived::RealScalar frobenius_norm(const Eigen::MatrixBase<Derived>& m) {
  return m.norm();
}

/// Frobenius inner product <A, B> = trace(A^T B).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar frobenius_inner(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  return a.cwiseProduct(b).sum();
}

template <typename Scalar>
struct TruncatedSvd {
  MatrixX<Scalar> U;  // n1 x r, orthonormal columns
  VectorX<Scalar> s;  // r singular values, nonincreasing
  MatrixX<Scalar> V;  // n2 x r, orthonormal columns

  MatrixX<Scalar> reconstruct() const { return U * s.asDiagonal() * V.transpose(); }
};

/// Relative cutoff below which singular values are reported as exactly zero.
inline constexpr double kSvdZeroTolerance = 1e-12;

/// Best rank-r approximation in Frobenius norm (Eckart-Young).
///
/// Singular values below kSvdZeroTolerance * s_1 are set to zero. Throws
/// SvdError if the underlying bidiagonal divide-and-conquer iteration fails or
/// the input is not finite.
template <typename Derived>
TruncatedSvd<typename Derived::Scalar> top_r_svd(const Eigen::MatrixBase<Derived>& m, Eigen::Index r) {
  using Scalar = typename Derived::Scalar;
  require(r >= 1, "top_r_svd: rank must be positive");
  require(r <= std::min(m.rows(), m.cols()), "top_r_svd: rank exceeds min(rows, cols)");
  if (!m.allFinite()) throw SvdError("top_r_svd: input contains non-finite entries");

  const MatrixX<Scalar> dense = m;
  Eigen::BDCSVD<MatrixX<Scalar>> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw SvdError("top_r_svd: SVD did not converge");

  TruncatedSvd<Scalar> out;
  out.U = svd.matrixU().leftCols(r);
  out.V = svd.matrixV().leftCols(r);
  out.s = svd.singularValues().head(r);
  const Scalar cutoff = out.s.size() > 0 ? Scalar(kSvdZeroTolerance) * out.s(0) : Scalar(0);
  for (Eigen::Index i = 0; i < out.s.size(); ++i) {
    if (out.s(i) < cutoff) out.s(i) = Scalar(0);
  }
  return out;
}

/// Largest singular value by power iteration on M^T M.
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& m, int max_iterations = 500,
                                       double tol = 1e-12) {
  using Scalar = typename Derived::Scalar;
  if (m.size() == 0) return Scalar(0);
  // Deterministic start vector with no special alignment to any axis.
  VectorX<Scalar> v(m.cols());
  for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = Scalar(1) + Scalar(0.1) * std::sin(Scalar(j + 1));
  v.normalize();
  Scalar sigma = 0;
  for (int it = 0; it < max_iterations; ++it) {
    VectorX<Scalar> u = m * v;
    VectorX<Scalar> w = m.transpose() * u;
    const Scalar wn = w.norm();
    if (wn == Scalar(0)) return Scalar(0);
    const Scalar next = std::sqrt(wn);
    v = w / wn;
    if (std::abs(next - sigma) <= Scalar(tol) * next) {
      sigma = next;
      break;
    }
    sigma = next;
  }
  return (m * v).norm();
}

/// Deterministic counter-based random source.
///
/// Each draw hashes (key, counter) with the SplitMix64 finalizer, where key is
/// derived from (seed, stream_id). Gaussians use the Box-Muller transform on
/// two consecutive uniforms, so sequences are reproducible across platforms up
/// to libm rounding in log/cos/sin.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Independent child stream; same (parent, child_id) gives the same child.
  RandomStream derive(std::uint64_t child_id) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer on [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  double gaussian();
  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev = 1.0);
  Vector gaussian_vector(Eigen::Index n, double stddev = 1.0);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);
/// Order-sensitive hash of a sequence of ids, used to derive stream ids.
std::uint64_t hash_ids(std::initializer_list<std::uint64_t> ids);

}  // namespace lowems
