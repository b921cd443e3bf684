#ifndef KTRACE_OPERATOR_HPP
#define KTRACE_OPERATOR_HPP

#include <algorithm>
#include <complex>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ktrace/lapack.hpp"

namespace ktrace {

using Complex = std::complex<double>;
using Index = Eigen::Index;

/// Raised on shape mismatches, bad indices and violated operator preconditions.
class OperatorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense complex square matrix acting on C^dim.
///
/// The universal carrier for the small-dimensional algebra (fuzzing, exact
/// identities, dense cross-checks of the structured fast path).
class Operator {
 public:
  Operator() = default;

  explicit Operator(Index dim) : m_(Eigen::MatrixXcd::Zero(dim, dim)) {
    if (dim <= 0) throw OperatorError("operator dimension must be positive");
  }

  explicit Operator(Eigen::MatrixXcd m, std::optional<bool> hermitian_hint = {})
      : m_(std::move(m)), hermitian_hint_(hermitian_hint) {
    if (m_.rows() != m_.cols() || m_.rows() == 0)
      throw OperatorError("operator entries must form a non-empty square array");
    if (hermitian_hint_.value_or(false)) {
      const double scale = m_.cwiseAbs().maxCoeff();
      const double skew = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
      if (skew > 1e-12 * scale)
        throw OperatorError("hermitian_hint set on a non-Hermitian operator");
    }
  }

  static Operator identity(Index n) {
    return Operator(Eigen::MatrixXcd::Identity(n, n), true);
  }
  static Operator zero(Index n) { return Operator(n); }
  static Operator diagonal(std::span<const Complex> values) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Index>(values.size()),
                                                 static_cast<Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i)
      m(static_cast<Index>(i), static_cast<Index>(i)) = values[i];
    return Operator(std::move(m));
  }
  static Operator diagonal(std::span<const double> values) {
    std::vector<Complex> c(values.begin(), values.end());
    return diagonal(std::span<const Complex>(c));
  }
  /// Single 1 at (i, j), 1-based indices.
  static Operator unit(Index i, Index j, Index n) {
    if (n <= 0 || i < 1 || j < 1 || i > n || j > n)
      throw OperatorError("matrix unit index out of range");
    Operator u(n);
    u.m_(i - 1, j - 1) = 1.0;
    return u;
  }

  [[nodiscard]] Index dim() const { return m_.rows(); }
  [[nodiscard]] const Eigen::MatrixXcd& matrix() const { return m_; }
  [[nodiscard]] Complex coeff(Index i, Index j) const { return m_(i, j); }
  [[nodiscard]] Complex operator()(Index i, Index j) const { return m_(i, j); }
  [[nodiscard]] std::optional<bool> hermitian_hint() const { return hermitian_hint_; }

  [[nodiscard]] Eigen::VectorXcd diagonal_entries() const { return m_.diagonal(); }

  /// Principal submatrix on the given index set.
  [[nodiscard]] Eigen::MatrixXcd gather(std::span<const Index> support) const {
    const auto k = static_cast<Index>(support.size());
    Eigen::MatrixXcd out(k, k);
    for (Index r = 0; r < k; ++r)
      for (Index c = 0; c < k; ++c) out(r, c) = m_(support[r], support[c]);
    return out;
  }

  [[nodiscard]] Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const { return m_ * x; }
  [[nodiscard]] Eigen::VectorXcd apply_adjoint(const Eigen::VectorXcd& x) const {
    return m_.adjoint() * x;
  }

  friend Operator operator+(const Operator& a, const Operator& b) {
    check_same_dim(a, b);
    return Operator(a.m_ + b.m_);
  }
  friend Operator operator-(const Operator& a, const Operator& b) {
    check_same_dim(a, b);
    return Operator(a.m_ - b.m_);
  }
  friend Operator operator-(const Operator& a) { return Operator(-a.m_); }
  friend Operator operator*(Complex z, const Operator& a) { return Operator(z * a.m_); }
  friend Operator operator*(const Operator& a, const Operator& b) {
    check_same_dim(a, b);
    return Operator(a.m_ * b.m_);
  }

 private:
  static void check_same_dim(const Operator& a, const Operator& b) {
    if (a.dim() != b.dim())
      throw OperatorError("dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()));
  }

  Eigen::MatrixXcd m_;
  std::optional<bool> hermitian_hint_;
};

/// Common surface of the dense and structured operator representations.
template <class Op>
concept OperatorLike = requires(const Op& a, const Op& b, Complex z, Index n,
                                std::span<const Index> support) {
  { a.dim() } -> std::convertible_to<Index>;
  { a.coeff(n, n) } -> std::convertible_to<Complex>;
  { a.diagonal_entries() } -> std::convertible_to<Eigen::VectorXcd>;
  { a.gather(support) } -> std::convertible_to<Eigen::MatrixXcd>;
  { a + b } -> std::same_as<Op>;
  { a - b } -> std::same_as<Op>;
  { a * b } -> std::same_as<Op>;
  { z * a } -> std::same_as<Op>;
  { Op::identity(n) } -> std::same_as<Op>;
  { Op::zero(n) } -> std::same_as<Op>;
  { Op::unit(n, n, n) } -> std::same_as<Op>;
};

/// Row-major construction; entries must hold dim*dim values.
inline Operator make_operator(Index dim, std::span<const Complex> entries) {
  if (dim <= 0) throw OperatorError("operator dimension must be positive");
  if (static_cast<Index>(entries.size()) != dim * dim)
    throw OperatorError("expected " + std::to_string(dim * dim) + " entries, got " +
                        std::to_string(entries.size()));
  Eigen::MatrixXcd m(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) m(i, j) = entries[static_cast<std::size_t>(i * dim + j)];
  return Operator(std::move(m));
}

inline Operator make_operator(Index dim, std::initializer_list<std::initializer_list<Complex>> rows) {
  std::vector<Complex> flat;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != dim)
      throw OperatorError("row length does not match dimension");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return make_operator(dim, std::span<const Complex>(flat));
}

inline Operator adjoint(const Operator& a) {
  return Operator(a.matrix().adjoint(), a.hermitian_hint());
}

template <OperatorLike Op>
Op multiply(const Op& a, const Op& b) {
  return a * b;
}

template <OperatorLike Op>
Op commutator(const Op& a, const Op& b) {
  return a * b - b * a;
}

/// Tensor product with the first factor's index outer: (A⊗B)[iB+k, jB+l] = A[i,j]·B[k,l].
inline Operator kron(const Operator& a, const Operator& b) {
  const Index na = a.dim(), nb = b.dim();
  Eigen::MatrixXcd out(na * nb, na * nb);
  for (Index i = 0; i < na; ++i)
    for (Index j = 0; j < na; ++j) out.block(i * nb, j * nb, nb, nb) = a(i, j) * b.matrix();
  return Operator(std::move(out));
}

template <OperatorLike Op = Operator>
Op matrix_unit(Index i, Index j, Index n) {
  return Op::unit(i, j, n);
}

/// Largest singular value.
inline double operator_norm(const Operator& a) {
  if (a.dim() == 1) return std::abs(a(0, 0));
  return detail::dense_singular_values(a.matrix()).front();
}

inline double max_abs_entry(const Operator& a) { return a.matrix().cwiseAbs().maxCoeff(); }

/// max |A - A*| over entries.
inline double hermitian_residual(const Operator& a) {
  return (a.matrix() - a.matrix().adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace ktrace

#endif  // KTRACE_OPERATOR_HPP
