#ifndef KTRACE_RANDOM_HPP
#define KTRACE_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/QR>

#include "ktrace/operator.hpp"
#include "ktrace/sparse.hpp"

namespace ktrace {

/// Seeded generator with platform-independent draws.
///
/// std::mt19937_64 is fully specified; the standard distributions are not, so
/// the conversions to doubles and normals are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (spare_) {
      spare_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    cached_ = radius * std::sin(2.0 * std::numbers::pi * u2);
    spare_ = true;
    return radius * std::cos(2.0 * std::numbers::pi * u2);
  }

  Complex complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re / std::numbers::sqrt2, im / std::numbers::sqrt2};
  }

  Index below(Index n) { return static_cast<Index>(engine_() % static_cast<std::uint64_t>(n)); }

 private:
  std::mt19937_64 engine_;
  bool spare_ = false;
  double cached_ = 0.0;
};

/// Complex Gaussian entries.
inline Operator random_matrix(Index n, Rng& rng) {
  Eigen::MatrixXcd m(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) m(i, j) = rng.complex_normal();
  return Operator(std::move(m));
}

inline Operator random_hermitian(Index n, Rng& rng) {
  const Operator g = random_matrix(n, rng);
  return Operator(Eigen::MatrixXcd(0.5 * (g.matrix() + g.matrix().adjoint())), true);
}

/// Haar-distributed unitary (QR of a Gaussian matrix with phase-fixed R).
inline Operator random_unitary(Index n, Rng& rng) {
  const Operator g = random_matrix(n, rng);
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g.matrix());
  Eigen::MatrixXcd q = qr.householderQ();
  const Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index i = 0; i < n; ++i) {
    const Complex diag = r(i, i);
    if (std::abs(diag) > 0.0) q.col(i) *= diag / std::abs(diag);
  }
  return Operator(std::move(q));
}

/// Hermitian operator U diag(v) U* with eigenvalues drawn from [lo, hi].
inline Operator random_hermitian_with_spectrum(Index n, double lo, double hi, Rng& rng) {
  const Operator u = random_unitary(n, rng);
  Eigen::VectorXcd v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  Eigen::MatrixXcd h = u.matrix() * v.asDiagonal() * u.matrix().adjoint();
  h = 0.5 * (h + h.adjoint()).eval();
  return Operator(std::move(h));
}

namespace detail {

// One layer of independent random U(2) rotations on the given index pairs.
inline void unitary_layer(std::vector<SparseOperator::Triplet>& t, Index dim,
                          const std::vector<std::pair<Index, Index>>& pairs, Rng& rng) {
  std::vector<bool> touched(static_cast<std::size_t>(dim), false);
  for (auto [i, j] : pairs) {
    const double theta = rng.uniform(0.0, std::numbers::pi / 2);
    const double alpha = rng.uniform(0.0, 2 * std::numbers::pi);
    const double beta = rng.uniform(0.0, 2 * std::numbers::pi);
    const double gamma = rng.uniform(0.0, 2 * std::numbers::pi);
    const Complex c = std::polar(std::cos(theta), beta), s = std::polar(std::sin(theta), gamma);
    const Complex phase = std::polar(1.0, alpha);
    t.emplace_back(i, i, phase * c);
    t.emplace_back(i, j, phase * s);
    t.emplace_back(j, i, -phase * std::conj(s));
    t.emplace_back(j, j, phase * std::conj(c));
    touched[static_cast<std::size_t>(i)] = touched[static_cast<std::size_t>(j)] = true;
  }
  for (Index i = 0; i < dim; ++i)
    if (!touched[static_cast<std::size_t>(i)]) t.emplace_back(i, i, std::polar(1.0, rng.uniform(0.0, 2 * std::numbers::pi)));
}

}  // namespace detail

/// Seed-fixed random unitary with sparse brickwork structure: random U(2)
/// rotations on (2m, 2m+1), then (2m+1, 2m+2), then (i, i + dim/2). Every
/// diagonal, near-diagonal and half-offset entry is generically non-zero, so
/// the contraction couples all blocks of the structured models while staying
/// sparse at large dims. Norm is exactly 1.
template <OperatorLike Op = SparseOperator>
Op random_contraction(Index dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<Index, Index>> even, odd, half;
  for (Index i = 0; i + 1 < dim; i += 2) even.emplace_back(i, i + 1);
  for (Index i = 1; i + 1 < dim; i += 2) odd.emplace_back(i, i + 1);
  for (Index i = 0; i < dim / 2; ++i) half.emplace_back(i, i + dim / 2);
  SparseOperator result = SparseOperator::identity(dim);
  for (const auto* pairs : {&even, &odd, &half}) {
    std::vector<SparseOperator::Triplet> t;
    detail::unitary_layer(t, dim, *pairs, rng);
    result = SparseOperator::from_triplets(dim, t) * result;
  }
  if constexpr (std::is_same_v<Op, Operator>)
    return result.to_dense();
  else
    return result;
}

}  // namespace ktrace

#endif  // KTRACE_RANDOM_HPP
