#include "lowems/measurement.hpp"

namespace lowems {

std::string to_string(OperatorKind kind) { return kind == OperatorKind::Gaussian ? "gaussian" : "sampling"; }

OperatorKind parse_operator_kind(const std::string& name) {
  if (name == "gaussian" || name == "sensing") return OperatorKind::Gaussian;
  if (name == "sampling" || name == "completion") return OperatorKind::Sampling;
  throw std::invalid_argument("unknown operator variant '" + name + "'");
}

namespace {

void check_dims(Eigen::Index n1, Eigen::Index n2, Eigen::Index m) {
  require(n1 >= 1 && n2 >= 1, "operator: dimensions must be positive");
  require(m >= 1, "operator: need at least one measurement");
}

Matrix draw_sensing_matrix(RandomStream& rng, Eigen::Index n1, Eigen::Index n2, double stddev) {
  return rng.gaussian_matrix(n1, n2, stddev);
}

}  // namespace

LinearOperator LinearOperator::gaussian(Eigen::Index n1, Eigen::Index n2, Eigen::Index m, RandomStream& rng,
                                        GaussianStorage storage) {
  check_dims(n1, n2, m);
  // Each operator gets a child stream; advancing the parent keeps successive
  // operators from the same stream distinct.
  RandomStream local = rng.derive(rng.next_u64());
  if (storage == GaussianStorage::Replay) return gaussian_replay(n1, n2, m, local);
  LinearOperator op(OperatorKind::Gaussian, n1, n2, m);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(m));
  op.stacked_.resize(m, n1 * n2);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Matrix A = draw_sensing_matrix(local, n1, n2, stddev);
    op.stacked_.row(i) = Eigen::Map<const Vector>(A.data(), A.size()).transpose();
  }
  return op;
}

LinearOperator LinearOperator::gaussian_replay(Eigen::Index n1, Eigen::Index n2, Eigen::Index m,
                                               RandomStream stream) {
  check_dims(n1, n2, m);
  LinearOperator op(OperatorKind::Gaussian, n1, n2, m);
  op.replay_ = stream;
  return op;
}

LinearOperator LinearOperator::gaussian_from_stacked(Eigen::Index n1, Eigen::Index n2, Matrix stacked) {
  check_dims(n1, n2, stacked.rows());
  require(stacked.cols() == n1 * n2, "operator: stacked sensing matrices must have n1*n2 columns");
  LinearOperator op(OperatorKind::Gaussian, n1, n2, stacked.rows());
  op.stacked_ = std::move(stacked);
  return op;
}

LinearOperator LinearOperator::sampling(Eigen::Index n1, Eigen::Index n2, std::vector<EntryIndex> indices) {
  check_dims(n1, n2, static_cast<Eigen::Index>(indices.size()));
  for (const EntryIndex& e : indices) {
    require(e.row >= 0 && e.row < n1 && e.col >= 0 && e.col < n2, "operator: sampling index out of range");
  }
  LinearOperator op(OperatorKind::Sampling, n1, n2, static_cast<Eigen::Index>(indices.size()));
  op.indices_ = std::move(indices);
  return op;
}

LinearOperator LinearOperator::random_sampling(Eigen::Index n1, Eigen::Index n2, Eigen::Index m, RandomStream& rng) {
  check_dims(n1, n2, m);
  std::vector<EntryIndex> indices(static_cast<std::size_t>(m));
  for (EntryIndex& e : indices) {
    e.row = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n1)));
    e.col = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n2)));
  }
  return sampling(n1, n2, std::move(indices));
}

LinearOperator make_operator(OperatorKind kind, Eigen::Index n1, Eigen::Index n2, Eigen::Index m, RandomStream& rng) {
  if (kind == OperatorKind::Gaussian) return LinearOperator::gaussian(n1, n2, m, rng);
  return LinearOperator::random_sampling(n1, n2, m, rng);
}

void LinearOperator::for_each_sensing_matrix(
    const std::function<void(Eigen::Index, const Eigen::Ref<const Matrix>&)>& visit) const {
  require(kind_ == OperatorKind::Gaussian, "operator: sensing matrices exist only for the Gaussian variant");
  if (replay_) {
    RandomStream local = *replay_;
    const double stddev = 1.0 / std::sqrt(static_cast<double>(m_));
    for (Eigen::Index i = 0; i < m_; ++i) visit(i, draw_sensing_matrix(local, n1_, n2_, stddev));
    return;
  }
  for (Eigen::Index i = 0; i < m_; ++i) visit(i, Eigen::Map<const Matrix>(stacked_.row(i).data(), n1_, n2_));
}

Matrix LinearOperator::stacked_sensing_matrices() const {
  require(kind_ == OperatorKind::Gaussian, "operator: sensing matrices exist only for the Gaussian variant");
  if (!replay_) return stacked_;
  Matrix stacked(m_, n1_ * n2_);
  for_each_sensing_matrix([&](Eigen::Index i, const Eigen::Ref<const Matrix>& A) {
    stacked.row(i) = A.reshaped().transpose();
  });
  return stacked;
}

Matrix LinearOperator::sensing_matrix(Eigen::Index i) const {
  require(kind_ == OperatorKind::Gaussian, "operator: sensing matrices exist only for the Gaussian variant");
  require(i >= 0 && i < m_, "operator: sensing matrix index out of range");
  if (!replay_) return Eigen::Map<const Matrix>(stacked_.row(i).data(), n1_, n2_);
  Matrix found;
  for_each_sensing_matrix([&](Eigen::Index j, const Eigen::Ref<const Matrix>& A) {
    if (j == i) found = A;
  });
  return found;
}

Vector LinearOperator::apply(const Matrix& X) const {
  require(X.rows() == n1_ && X.cols() == n2_, "apply: dimension mismatch");
  Vector out(m_);
  if (kind_ == OperatorKind::Sampling) {
    for (Eigen::Index i = 0; i < m_; ++i) out(i) = X(indices_[i].row, indices_[i].col);
    return out;
  }
  if (!replay_) return stacked_ * Eigen::Map<const Vector>(X.data(), X.size());
  for_each_sensing_matrix(
      [&](Eigen::Index i, const Eigen::Ref<const Matrix>& A) { out(i) = frobenius_inner(A, X); });
  return out;
}

Matrix LinearOperator::adjoint(const Vector& b) const {
  require(b.size() == m_, "adjoint: length mismatch");
  Matrix out = Matrix::Zero(n1_, n2_);
  if (kind_ == OperatorKind::Sampling) {
    for (Eigen::Index i = 0; i < m_; ++i) out(indices_[i].row, indices_[i].col) += b(i);
    return out;
  }
  if (!replay_) {
    Eigen::Map<Vector>(out.data(), out.size()) = stacked_.transpose() * b;
    return out;
  }
  for_each_sensing_matrix([&](Eigen::Index i, const Eigen::Ref<const Matrix>& A) { out += b(i) * A; });
  return out;
}

void ObservationSet::validate() const {
  require(!ops.empty(), "observations: need at least one time bin");
  require(y.size() == ops.size(), "observations: one observation vector per operator required");
  for (std::size_t t = 0; t < ops.size(); ++t) {
    require(ops[t].rows() == ops[0].rows() && ops[t].cols() == ops[0].cols(), "observations: operator dims differ");
    require(ops[t].kind() == ops[0].kind(), "observations: operator variants differ");
    require(y[t].size() == ops[t].size(), "observations: y length does not match operator size");
  }
  if (truth) {
    require(truth->d() == ops.size(), "observations: truth has a different number of bins");
    require(truth->n1() == rows() && truth->n2() == cols(), "observations: truth dims differ from operators");
  }
}

ObservationSet observe(std::vector<LinearOperator> ops, std::shared_ptr<const DynamicGroundTruth> truth, double sigma1,
                       RandomStream& rng) {
  require(truth != nullptr, "observe: ground truth required");
  require(sigma1 >= 0 && std::isfinite(sigma1), "observe: sigma1 must be finite and nonnegative");
  require(ops.size() == truth->d(), "observe: operator count must equal number of bins");
  ObservationSet obs;
  obs.sigma1 = sigma1;
  for (std::size_t t = 0; t < ops.size(); ++t) {
    require(ops[t].rows() == truth->n1() && ops[t].cols() == truth->n2(), "observe: operator dims differ from truth");
    Vector y = ops[t].apply(truth->X_seq[t]);
    if (sigma1 > 0) y += rng.gaussian_vector(y.size(), sigma1);
    obs.y.push_back(std::move(y));
  }
  obs.ops = std::move(ops);
  obs.truth = std::move(truth);
  obs.validate();
  return obs;
}

double rip_deviation(const std::vector<LinearOperator>& ops, const WeightVector& w, const Matrix& X) {
  require(ops.size() == w.size(), "rip: one weight per operator required");
  const double norm2 = X.squaredNorm();
  require(norm2 > 0, "rip: test matrix must be nonzero");
  double energy = 0;
  for (std::size_t t = 0; t < ops.size(); ++t) {
    if (w[t] == 0) continue;
    energy += w[t] * ops[t].apply(X).squaredNorm();
  }
  return std::abs(energy / norm2 - 1.0);
}

double estimate_rip(const std::vector<LinearOperator>& ops, const WeightVector& w, Eigen::Index rank, int trials,
                    RandomStream& rng) {
  require(trials >= 1, "estimate_rip: trials must be at least 1");
  require(!ops.empty(), "estimate_rip: need at least one operator");
  require(rank >= 1 && rank <= std::min(ops[0].rows(), ops[0].cols()), "estimate_rip: invalid rank");
  double worst = 0;
  for (int k = 0; k < trials; ++k) {
    Matrix X = rng.gaussian_matrix(ops[0].rows(), rank) * rng.gaussian_matrix(ops[0].cols(), rank).transpose();
    X /= X.norm();
    worst = std::max(worst, rip_deviation(ops, w, X));
  }
  return worst;
}

}  // namespace lowems
