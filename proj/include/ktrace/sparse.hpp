#ifndef KTRACE_SPARSE_HPP
#define KTRACE_SPARSE_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "ktrace/operator.hpp"

namespace ktrace {

/// Structured fast path: a sparse operator whose spectral work is done block by
/// block on the connected components of its sparsity graph.
///
/// The counterexample model is a direct sum of 2x2 blocks in the (i, k) basis
/// and the circle model is banded, so both stay cheap at dims of order 10^4.
class SparseOperator {
 public:
  using Matrix = Eigen::SparseMatrix<Complex>;
  using Triplet = Eigen::Triplet<Complex>;

  SparseOperator() = default;

  explicit SparseOperator(Index dim) : m_(dim, dim) {
    if (dim <= 0) throw OperatorError("operator dimension must be positive");
  }

  explicit SparseOperator(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0)
      throw OperatorError("operator entries must form a non-empty square array");
    drop_zeros();
  }

  static SparseOperator from_triplets(Index dim, const std::vector<Triplet>& triplets) {
    Matrix m(dim, dim);
    m.setFromTriplets(triplets.begin(), triplets.end());
    return SparseOperator(std::move(m));
  }

  static SparseOperator identity(Index n) {
    Matrix m(n, n);
    m.setIdentity();
    return SparseOperator(std::move(m));
  }
  static SparseOperator zero(Index n) { return SparseOperator(n); }
  static SparseOperator diagonal(std::span<const Complex> values) {
    const auto n = static_cast<Index>(values.size());
    std::vector<Triplet> t;
    t.reserve(values.size());
    for (Index i = 0; i < n; ++i) t.emplace_back(i, i, values[static_cast<std::size_t>(i)]);
    return from_triplets(n, t);
  }
  static SparseOperator diagonal(std::span<const double> values) {
    std::vector<Complex> c(values.begin(), values.end());
    return diagonal(std::span<const Complex>(c));
  }
  static SparseOperator unit(Index i, Index j, Index n) {
    if (n <= 0 || i < 1 || j < 1 || i > n || j > n)
      throw OperatorError("matrix unit index out of range");
    return from_triplets(n, {Triplet(i - 1, j - 1, 1.0)});
  }
  static SparseOperator from_dense(const Operator& a) {
    std::vector<Triplet> t;
    for (Index j = 0; j < a.dim(); ++j)
      for (Index i = 0; i < a.dim(); ++i)
        if (a(i, j) != Complex(0.0)) t.emplace_back(i, j, a(i, j));
    return from_triplets(a.dim(), t);
  }

  [[nodiscard]] Index dim() const { return m_.rows(); }
  [[nodiscard]] const Matrix& matrix() const { return m_; }
  [[nodiscard]] Index nonzeros() const { return m_.nonZeros(); }
  [[nodiscard]] Complex coeff(Index i, Index j) const { return m_.coeff(i, j); }

  [[nodiscard]] Eigen::VectorXcd diagonal_entries() const { return m_.diagonal(); }

  [[nodiscard]] Eigen::MatrixXcd gather(std::span<const Index> support) const {
    const auto k = static_cast<Index>(support.size());
    Eigen::MatrixXcd out(k, k);
    if (k == 1) {
      out(0, 0) = m_.coeff(support[0], support[0]);
      return out;
    }
    std::map<Index, Index> position;
    for (Index r = 0; r < k; ++r) position[support[r]] = r;
    out.setZero();
    for (Index c = 0; c < k; ++c) {
      for (Matrix::InnerIterator it(m_, support[c]); it; ++it) {
        auto found = position.find(it.row());
        if (found != position.end()) out(found->second, c) = it.value();
      }
    }
    return out;
  }

  [[nodiscard]] Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const { return m_ * x; }
  [[nodiscard]] Eigen::VectorXcd apply_adjoint(const Eigen::VectorXcd& x) const {
    return m_.adjoint() * x;
  }

  [[nodiscard]] Operator to_dense() const { return Operator(Eigen::MatrixXcd(m_)); }

  friend SparseOperator operator+(const SparseOperator& a, const SparseOperator& b) {
    check_same_dim(a, b);
    return SparseOperator(Matrix(a.m_ + b.m_));
  }
  friend SparseOperator operator-(const SparseOperator& a, const SparseOperator& b) {
    check_same_dim(a, b);
    return SparseOperator(Matrix(a.m_ - b.m_));
  }
  friend SparseOperator operator-(const SparseOperator& a) { return SparseOperator(Matrix(-a.m_)); }
  friend SparseOperator operator*(Complex z, const SparseOperator& a) {
    return SparseOperator(Matrix(z * a.m_));
  }
  friend SparseOperator operator*(const SparseOperator& a, const SparseOperator& b) {
    check_same_dim(a, b);
    return SparseOperator(Matrix(a.m_ * b.m_));
  }

 private:
  static void check_same_dim(const SparseOperator& a, const SparseOperator& b) {
    if (a.dim() != b.dim())
      throw OperatorError("dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()));
  }

  // Exact cancellations (commutators of block operators) must not leave stored
  // zeros behind, or they would glue independent components together.
  void drop_zeros() {
    m_.prune([](Index, Index, const Complex& v) { return v != Complex(0.0); });
    m_.makeCompressed();
  }

  Matrix m_;
};

inline SparseOperator adjoint(const SparseOperator& a) {
  return SparseOperator(SparseOperator::Matrix(a.matrix().adjoint()));
}

inline SparseOperator kron(const SparseOperator& a, const SparseOperator& b) {
  const Index nb = b.dim();
  std::vector<SparseOperator::Triplet> t;
  t.reserve(static_cast<std::size_t>(a.nonzeros() * b.nonzeros()));
  for (Index ja = 0; ja < a.dim(); ++ja)
    for (SparseOperator::Matrix::InnerIterator ia(a.matrix(), ja); ia; ++ia)
      for (Index jb = 0; jb < nb; ++jb)
        for (SparseOperator::Matrix::InnerIterator ib(b.matrix(), jb); ib; ++ib)
          t.emplace_back(ia.row() * nb + ib.row(), ja * nb + jb, ia.value() * ib.value());
  return SparseOperator::from_triplets(a.dim() * nb, t);
}

inline Operator to_dense(const Operator& a) { return a; }
inline Operator to_dense(const SparseOperator& a) { return a.to_dense(); }

inline double max_abs_entry(const SparseOperator& a) {
  double best = 0.0;
  for (Index j = 0; j < a.dim(); ++j)
    for (SparseOperator::Matrix::InnerIterator it(a.matrix(), j); it; ++it)
      best = std::max(best, std::abs(it.value()));
  return best;
}

inline double frobenius_norm(const Operator& a) { return a.matrix().norm(); }
inline double frobenius_norm(const SparseOperator& a) { return a.matrix().norm(); }

inline double hermitian_residual(const SparseOperator& a) {
  return max_abs_entry(a - adjoint(a));
}

/// Index sets on which the operator is a direct sum: i and j share a
/// component whenever A[i,j] or A[j,i] is non-zero. Components are ordered by
/// their smallest index and each is sorted.
inline std::vector<std::vector<Index>> components(const SparseOperator& a) {
  const Index n = a.dim();
  std::vector<Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (Index j = 0; j < n; ++j)
    for (SparseOperator::Matrix::InnerIterator it(a.matrix(), j); it; ++it) {
      Index ri = find(it.row()), rj = find(j);
      if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
    }
  std::vector<std::vector<Index>> out;
  std::vector<Index> slot(static_cast<std::size_t>(n), -1);
  for (Index i = 0; i < n; ++i) {
    const Index r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<Index>(out.size());
      out.emplace_back();
    }
    out[static_cast<std::size_t>(slot[r])].push_back(i);
  }
  return out;
}

inline std::vector<std::vector<Index>> components(const Operator& a) {
  std::vector<Index> all(static_cast<std::size_t>(a.dim()));
  std::iota(all.begin(), all.end(), Index{0});
  return {all};
}

/// Components of the union of sparsity graphs (the finest partition reducing
/// every operator in the list simultaneously).
inline std::vector<std::vector<Index>> joint_components(const std::vector<const SparseOperator*>& ops) {
  if (ops.empty()) throw OperatorError("joint_components needs at least one operator");
  SparseOperator::Matrix pattern(ops.front()->dim(), ops.front()->dim());
  for (const auto* op : ops) {
    SparseOperator::Matrix absval = op->matrix().cwiseAbs().cast<Complex>();
    pattern += absval;
  }
  return components(SparseOperator(std::move(pattern)));
}

/// Largest dense block handled by the blockwise kernels.
inline constexpr Index kMaxDenseBlock = 2048;

namespace detail {

// Deterministic power iteration on A*A; the start vector is fixed so repeated
// calls give identical results.
template <class Op>
double power_norm(const Op& a, int max_iterations = 4000, double tol = 1e-14) {
  const Index n = a.dim();
  Eigen::VectorXcd x(n);
  for (Index i = 0; i < n; ++i) x(i) = Complex(1.0 + 0.25 * std::sin(1.0 + 0.7 * static_cast<double>(i)),
                                               0.1 * std::cos(0.3 * static_cast<double>(i)));
  x.normalize();
  double estimate = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXcd y = a.apply_adjoint(a.apply(x));
    const double norm_y = y.norm();
    if (norm_y == 0.0) return 0.0;
    const double next = std::sqrt(norm_y);
    x = y / norm_y;
    if (std::abs(next - estimate) <= tol * next) return next;
    estimate = next;
  }
  return estimate;
}

}  // namespace detail

/// Components wider than kMaxDenseBlock are accepted when their bandwidth
/// (in increasing index order) is at most this.
inline constexpr Index kMaxBandwidth = 64;

namespace detail {

// Lower and upper bandwidth of the block of `a` on a sorted support.
inline std::pair<Index, Index> bandwidths(const SparseOperator& a, const std::vector<Index>& support) {
  Index kl = 0, ku = 0;
  for (std::size_t pc = 0; pc < support.size(); ++pc)
    for (SparseOperator::Matrix::InnerIterator it(a.matrix(), support[pc]); it; ++it) {
      const auto pr = static_cast<Index>(std::lower_bound(support.begin(), support.end(), it.row()) - support.begin());
      const auto col = static_cast<Index>(pc);
      kl = std::max(kl, pr - col);
      ku = std::max(ku, col - pr);
    }
  return {kl, ku};
}

inline std::vector<double> banded_singular_values(const SparseOperator& a, const std::vector<Index>& support,
                                                  Index kl, Index ku) {
  const int n = static_cast<int>(support.size()), ikl = static_cast<int>(kl), iku = static_cast<int>(ku);
  const int ldab = ikl + iku + 1, zero = 0, one = 1;
  std::vector<Complex> ab(static_cast<std::size_t>(ldab) * static_cast<std::size_t>(n), Complex(0.0));
  for (int pc = 0; pc < n; ++pc)
    for (SparseOperator::Matrix::InnerIterator it(a.matrix(), support[static_cast<std::size_t>(pc)]); it; ++it) {
      const auto pr = static_cast<int>(std::lower_bound(support.begin(), support.end(), it.row()) - support.begin());
      ab[static_cast<std::size_t>(iku + pr - pc) + static_cast<std::size_t>(pc) * static_cast<std::size_t>(ldab)] =
          it.value();
    }
  std::vector<double> d(static_cast<std::size_t>(n)), e(static_cast<std::size_t>(std::max(1, n - 1)));
  std::vector<double> rwork(static_cast<std::size_t>(n)), work(4 * static_cast<std::size_t>(n));
  std::vector<Complex> zwork(static_cast<std::size_t>(n));
  Complex zdummy;
  double ddummy = 0.0;
  int info = 0;
  zgbbrd_("N", &n, &n, &zero, &ikl, &iku, ab.data(), &ldab, d.data(), e.data(), &zdummy, &one, &zdummy, &one,
          &zdummy, &one, zwork.data(), rwork.data(), &info);
  if (info != 0) throw OperatorError("band bidiagonalization failed (info " + std::to_string(info) + ")");
  dbdsqr_("U", &n, &zero, &zero, &zero, d.data(), e.data(), &ddummy, &one, &ddummy, &one, &ddummy, &one,
          work.data(), &info);
  if (info != 0) throw OperatorError("bidiagonal SVD did not converge (info " + std::to_string(info) + ")");
  for (double& v : d) v = std::abs(v);
  return d;
}

}  // namespace detail

/// Exact per component: dense SVD up to 256 wide, the band kernel for wider
/// banded components. Wide components that are not banded fall back to a
/// deterministic power-iteration estimate of the whole operator.
inline double operator_norm(const SparseOperator& a) {
  if (a.nonzeros() == 0) return 0.0;
  double best = 0.0;
  bool estimate_needed = false;
  for (const auto& c : components(a)) {
    if (c.size() == 1) {
      best = std::max(best, std::abs(a.coeff(c[0], c[0])));
      continue;
    }
    if (c.size() <= 256) {
      best = std::max(best, detail::dense_singular_values(a.gather(c)).front());
      continue;
    }
    const auto [kl, ku] = detail::bandwidths(a, c);
    if (kl + ku <= kMaxBandwidth) {
      const auto s = detail::banded_singular_values(a, c, kl, ku);
      best = std::max(best, *std::max_element(s.begin(), s.end()));
    } else {
      estimate_needed = true;
    }
  }
  if (estimate_needed) best = std::max(best, detail::power_norm(a));
  return best;
}

/// Operator norm of a - b, with cheap certified shortcuts around the threshold.
template <class Op>
bool norm_distance_exceeds(const Op& a, const Op& b, double threshold) {
  const Op diff = a - b;
  if (max_abs_entry(diff) > threshold) return true;
  if (frobenius_norm(diff) <= threshold) return false;
  return operator_norm(diff) > threshold;
}

}  // namespace ktrace

#endif  // KTRACE_SPARSE_HPP
