#include "lowems/core.hpp"

#include <numbers>

namespace lowems {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_ids(std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t id : ids) h = mix64(h ^ mix64(id));
  return h;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), key_(mix64(mix64(seed) ^ (stream_id * 0xd1b54a32d192ed03ULL))) {}

RandomStream RandomStream::derive(std::uint64_t child_id) const {
  return RandomStream(seed_, hash_ids({stream_id_, child_id}));
}

std::uint64_t RandomStream::next_u64() {
  return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
}

double RandomStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t RandomStream::uniform_index(std::uint64_t n) {
  require(n > 0, "uniform_index: empty range");
  // Lemire's multiply-shift with rejection for exact uniformity.
  const std::uint64_t threshold = (0 - n) % n;
  while (true) {
    const unsigned __int128 product = static_cast<unsigned __int128>(next_u64()) * n;
    if (static_cast<std::uint64_t>(product) >= threshold) return static_cast<std::uint64_t>(product >> 64);
  }
}

double RandomStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Matrix RandomStream::gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix m(rows, cols);
  // Fill in row-major order so the draw sequence matches the semantic layout.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = stddev * gaussian();
  return m;
}

Vector RandomStream::gaussian_vector(Eigen::Index n, double stddev) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = stddev * gaussian();
  return v;
}

}  // namespace lowems
