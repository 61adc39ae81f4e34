#pragma once

#include "lowems/core.hpp"
#include "lowems/dynmodel.hpp"
#include "lowems/weights.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace lowems {

enum class OperatorKind { Gaussian, Sampling };

std::string to_string(OperatorKind kind);
OperatorKind parse_operator_kind(const std::string& name);

struct EntryIndex {
  Eigen::Index row = 0;
  Eigen::Index col = 0;

  friend bool operator==(const EntryIndex&, const EntryIndex&) = default;
};

/// How Gaussian sensing matrices are held in memory.
enum class GaussianStorage {
  Explicit,  // all A_i stored, m x (n1 n2)
  Replay,    // only the generating stream is kept; A_i regenerated on demand
};

/// A linear map R^{n1 x n2} -> R^m, either a Gaussian measurement ensemble
/// ([A(X)]_i = <A_i, X>, entries of A_i i.i.d. N(0, 1/m)) or a uniform
/// sampling ensemble with replacement ([A(X)]_i = X(j_i, k_i)).
class LinearOperator {
 public:
  /// Draws A_1..A_m from rng. Each A_i consumes n1*n2 Gaussians in row-major
  /// order, so the Explicit and Replay forms of the same stream agree.
  static LinearOperator gaussian(Eigen::Index n1, Eigen::Index n2, Eigen::Index m, RandomStream& rng,
                                 GaussianStorage storage = GaussianStorage::Explicit);
  /// Replay-mode operator whose A_i are regenerated from `stream` itself.
  static LinearOperator gaussian_replay(Eigen::Index n1, Eigen::Index n2, Eigen::Index m, RandomStream stream);
  /// Wraps given sensing matrices; `stacked` row i is A_i flattened column-major.
  static LinearOperator gaussian_from_stacked(Eigen::Index n1, Eigen::Index n2, Matrix stacked);
  static LinearOperator sampling(Eigen::Index n1, Eigen::Index n2, std::vector<EntryIndex> indices);
  /// m index pairs drawn uniformly from [n1] x [n2] with replacement.
  static LinearOperator random_sampling(Eigen::Index n1, Eigen::Index n2, Eigen::Index m, RandomStream& rng);

  OperatorKind kind() const { return kind_; }
  Eigen::Index rows() const { return n1_; }
  Eigen::Index cols() const { return n2_; }
  Eigen::Index size() const { return m_; }
  bool is_replay() const { return replay_.has_value(); }
  const std::optional<RandomStream>& replay_stream() const { return replay_; }

  /// Sampling payload (empty for Gaussian).
  const std::vector<EntryIndex>& indices() const { return indices_; }
  /// m / (n1 n2); meaningful for sampling operators.
  double sampling_rate() const { return static_cast<double>(m_) / static_cast<double>(n1_ * n2_); }

  /// Explicit Gaussian payload; materializes it for replay operators.
  Matrix stacked_sensing_matrices() const;
  /// A_i as an n1 x n2 matrix (Gaussian only).
  Matrix sensing_matrix(Eigen::Index i) const;
  /// Visits A_0..A_{m-1} in order (Gaussian only).
  void for_each_sensing_matrix(const std::function<void(Eigen::Index, const Eigen::Ref<const Matrix>&)>& visit) const;

  Vector apply(const Matrix& X) const;
  Matrix adjoint(const Vector& b) const;

 private:
  LinearOperator(OperatorKind kind, Eigen::Index n1, Eigen::Index n2, Eigen::Index m)
      : kind_(kind), n1_(n1), n2_(n2), m_(m) {}

  OperatorKind kind_;
  Eigen::Index n1_;
  Eigen::Index n2_;
  Eigen::Index m_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> stacked_;
  std::optional<RandomStream> replay_;
  std::vector<EntryIndex> indices_;
};

LinearOperator make_operator(OperatorKind kind, Eigen::Index n1, Eigen::Index n2, Eigen::Index m, RandomStream& rng);

/// Per-bin operators and observations y^t = A^t(X^t) + z^t.
struct ObservationSet {
  std::vector<LinearOperator> ops;
  std::vector<Vector> y;
  double sigma1 = 0.0;
  std::shared_ptr<const DynamicGroundTruth> truth;

  std::size_t d() const { return ops.size(); }
  Eigen::Index rows() const { return ops.front().rows(); }
  Eigen::Index cols() const { return ops.front().cols(); }
  OperatorKind kind() const { return ops.front().kind(); }

  /// Throws std::invalid_argument if any structural invariant is broken.
  void validate() const;
};

ObservationSet observe(std::vector<LinearOperator> ops, std::shared_ptr<const DynamicGroundTruth> truth, double sigma1,
                       RandomStream& rng);

/// |sum_t w_t ||A^t(X)||^2 / ||X||_F^2 - 1| for one test matrix.
double rip_deviation(const std::vector<LinearOperator>& ops, const WeightVector& w, const Matrix& X);

/// Empirical lower bound on the rank-`rank` isometry constant of the
/// composite operator {sqrt(w_t) A^t}: maximum deviation over `trials`
/// random rank-`rank` unit-Frobenius matrices (products of Gaussian factors).
double estimate_rip(const std::vector<LinearOperator>& ops, const WeightVector& w, Eigen::Index rank, int trials,
                    RandomStream& rng);

}  // namespace lowems
