#ifndef KTRACE_SPECTRAL_HPP
#define KTRACE_SPECTRAL_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <type_traits>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ktrace/operator.hpp"
#include "ktrace/sparse.hpp"

namespace ktrace {

/// Singular values in non-increasing order with partial sums.
///
/// sigma has dim + 1 entries: sigma[n] is the sum of the n largest values.
struct SingularProfile {
  std::vector<double> mu;
  std::vector<double> sigma;

  static SingularProfile from_values(std::vector<double> values) {
    for (double& v : values) v = std::max(v, 0.0);
    std::sort(values.begin(), values.end(), std::greater<>());
    SingularProfile p;
    p.mu = std::move(values);
    p.sigma.assign(p.mu.size() + 1, 0.0);
    for (std::size_t n = 1; n <= p.mu.size(); ++n) p.sigma[n] = p.sigma[n - 1] + p.mu[n - 1];
    return p;
  }

  [[nodiscard]] Index size() const { return static_cast<Index>(mu.size()); }
};

inline SingularProfile singular_values(const Operator& a) {
  return SingularProfile::from_values(detail::dense_singular_values(a.matrix()));
}

/// Blockwise: dense SVD for components up to 256 wide, the band kernel for
/// wider banded components, dense SVD again up to kMaxDenseBlock.
inline SingularProfile singular_values(const SparseOperator& a) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(a.dim()));
  for (const auto& c : components(a)) {
    if (c.size() == 1) {
      values.push_back(std::abs(a.coeff(c[0], c[0])));
      continue;
    }
    if (c.size() > 256) {
      const auto [kl, ku] = detail::bandwidths(a, c);
      if (kl + ku <= kMaxBandwidth) {
        const auto s = detail::banded_singular_values(a, c, kl, ku);
        values.insert(values.end(), s.begin(), s.end());
        continue;
      }
      if (static_cast<Index>(c.size()) > kMaxDenseBlock)
        throw OperatorError("component of size " + std::to_string(c.size()) + " and bandwidth " +
                            std::to_string(kl + ku) + " exceeds the dense and banded limits");
    }
    const auto s = detail::dense_singular_values(a.gather(c));
    values.insert(values.end(), s.begin(), s.end());
  }
  return SingularProfile::from_values(std::move(values));
}

/// Acceptance tolerance for "Hermitian": max |A - A*| <= 1e-10 (1 + ||A||).
template <class Op>
bool is_hermitian(const Op& a) {
  const double skew = hermitian_residual(a);
  if (skew == 0.0) return true;
  return skew <= 1e-10 * (1.0 + operator_norm(a));
}

/// Eigenvalues ascending, eigenvectors as orthonormal columns.
struct EigenDecomposition {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
};

/// Eigen-decomposition of a Hermitian operator, stored per reducing block.
struct HermitianSpectrum {
  struct Block {
    std::vector<Index> support;
    Eigen::VectorXd values;   // ascending within the block
    Eigen::MatrixXcd vectors;  // columns, rows indexed like support
  };

  /// One eigenpair addressed by block and column.
  struct Pair {
    double value;
    std::size_t block;
    Index column;
  };

  Index dim = 0;
  std::vector<Block> blocks;

  [[nodiscard]] std::vector<Pair> pairs() const {
    std::vector<Pair> out;
    out.reserve(static_cast<std::size_t>(dim));
    for (std::size_t b = 0; b < blocks.size(); ++b)
      for (Index c = 0; c < blocks[b].values.size(); ++c)
        out.push_back({blocks[b].values(c), b, c});
    return out;
  }

  /// Eigenpairs sorted by |eigenvalue| ascending; ties keep the original order
  /// (block by smallest index, then column).
  [[nodiscard]] std::vector<Pair> by_magnitude() const {
    auto out = pairs();
    std::stable_sort(out.begin(), out.end(), [](const Pair& x, const Pair& y) {
      return std::abs(x.value) < std::abs(y.value);
    });
    return out;
  }

  [[nodiscard]] double min_abs() const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : blocks) best = std::min(best, b.values.cwiseAbs().minCoeff());
    return best;
  }
  [[nodiscard]] double max_abs() const {
    double best = 0.0;
    for (const auto& b : blocks) best = std::max(best, b.values.cwiseAbs().maxCoeff());
    return best;
  }
};

namespace detail {

inline HermitianSpectrum::Block block_eigen(std::vector<Index> support, const Eigen::MatrixXcd& m) {
  HermitianSpectrum::Block block;
  block.support = std::move(support);
  if (m.rows() == 1) {
    block.values = Eigen::VectorXd::Constant(1, m(0, 0).real());
    block.vectors = Eigen::MatrixXcd::Identity(1, 1);
    return block;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m);
  if (solver.info() != Eigen::Success) throw OperatorError("Hermitian eigensolver failed");
  block.values = solver.eigenvalues();
  block.vectors = solver.eigenvectors();
  return block;
}

template <class Op>
void require_hermitian(const Op& a) {
  if (!is_hermitian(a)) throw OperatorError("operator is not Hermitian within tolerance");
}

}  // namespace detail

inline HermitianSpectrum hermitian_spectrum(const Operator& a) {
  detail::require_hermitian(a);
  std::vector<Index> all(static_cast<std::size_t>(a.dim()));
  std::iota(all.begin(), all.end(), Index{0});
  HermitianSpectrum s;
  s.dim = a.dim();
  const Eigen::MatrixXcd herm = 0.5 * (a.matrix() + a.matrix().adjoint());
  s.blocks.push_back(detail::block_eigen(std::move(all), herm));
  return s;
}

inline HermitianSpectrum hermitian_spectrum(const SparseOperator& a) {
  detail::require_hermitian(a);
  HermitianSpectrum s;
  s.dim = a.dim();
  for (auto& c : components(a)) {
    if (static_cast<Index>(c.size()) > kMaxDenseBlock)
      throw OperatorError("component of size " + std::to_string(c.size()) +
                          " exceeds the dense block limit");
    Eigen::MatrixXcd m = a.gather(c);
    m = 0.5 * (m + m.adjoint()).eval();
    s.blocks.push_back(detail::block_eigen(std::move(c), m));
  }
  return s;
}

inline EigenDecomposition eig_hermitian(const Operator& a) {
  const HermitianSpectrum s = hermitian_spectrum(a);
  return {s.blocks.front().values, s.blocks.front().vectors};
}

namespace detail {

template <class F>
Complex evaluate(F&& f, double x) {
  const Complex y = Complex(std::invoke(f, x));
  if (!std::isfinite(y.real()) || !std::isfinite(y.imag()))
    throw OperatorError("function undefined at eigenvalue " + std::to_string(x));
  return y;
}

}  // namespace detail

/// Rebuild V f(Λ) V* from a spectrum. f may return real or complex values.
template <OperatorLike Op, class F>
Op apply_function(const HermitianSpectrum& s, F&& f) {
  if constexpr (std::is_same_v<Op, Operator>) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(s.dim, s.dim);
    for (const auto& b : s.blocks) {
      Eigen::VectorXcd fv(b.values.size());
      for (Index i = 0; i < b.values.size(); ++i) fv(i) = detail::evaluate(f, b.values(i));
      const Eigen::MatrixXcd local = b.vectors * fv.asDiagonal() * b.vectors.adjoint();
      for (Index r = 0; r < local.rows(); ++r)
        for (Index c = 0; c < local.cols(); ++c) out(b.support[r], b.support[c]) = local(r, c);
    }
    return Operator(std::move(out));
  } else {
    std::vector<SparseOperator::Triplet> t;
    t.reserve(static_cast<std::size_t>(s.dim));
    for (const auto& b : s.blocks) {
      if (b.support.size() == 1) {
        t.emplace_back(b.support[0], b.support[0], detail::evaluate(f, b.values(0)));
        continue;
      }
      Eigen::VectorXcd fv(b.values.size());
      for (Index i = 0; i < b.values.size(); ++i) fv(i) = detail::evaluate(f, b.values(i));
      const Eigen::MatrixXcd local = b.vectors * fv.asDiagonal() * b.vectors.adjoint();
      for (Index r = 0; r < local.rows(); ++r)
        for (Index c = 0; c < local.cols(); ++c)
          if (local(r, c) != Complex(0.0)) t.emplace_back(b.support[r], b.support[c], local(r, c));
    }
    return SparseOperator::from_triplets(s.dim, t);
  }
}

/// f(A) for Hermitian A. Throws when f is not finite at some eigenvalue.
template <OperatorLike Op, class F>
Op functional_calculus(const Op& a, F&& f) {
  return apply_function<Op>(hermitian_spectrum(a), std::forward<F>(f));
}

/// |A|^s for Hermitian A; negative s requires A invertible.
template <OperatorLike Op>
Op abs_power(const Op& a, double s) {
  return functional_calculus(a, [s](double x) { return std::pow(std::abs(x), s); });
}

/// Per-N rows of the finite-dimensional Weyl–Hölder chain
/// σ_N(AB) <= Σ μ_k(A)μ_k(B) <= (Σ μ_k(A)^p)^{1/p} (Σ μ_k(B)^q)^{1/q}.
struct WeylHolderReport {
  struct Row {
    Index n;
    double lhs;
    double weyl;
    double rhs;
    double margin;  // rhs - lhs
  };
  double p = 2.0;
  double q = 2.0;
  std::vector<Row> rows;
  bool weyl_holds = true;
  bool holds = true;
};

inline constexpr double kWeylHolderSlack = 1e-10;

template <OperatorLike Op>
WeylHolderReport check_weyl_holder(const Op& a, const Op& b, double p, double q) {
  if (!(p > 1.0) || !(q > 1.0) || std::abs(1.0 / p + 1.0 / q - 1.0) > 1e-12)
    throw std::invalid_argument("Hölder exponents must satisfy 1/p + 1/q = 1 with p, q > 1");
  const SingularProfile ab = singular_values(a * b);
  const SingularProfile pa = singular_values(a);
  const SingularProfile pb = singular_values(b);
  WeylHolderReport report;
  report.p = p;
  report.q = q;
  double weyl = 0.0, sum_p = 0.0, sum_q = 0.0;
  for (Index n = 1; n <= ab.size(); ++n) {
    const auto k = static_cast<std::size_t>(n - 1);
    weyl += pa.mu[k] * pb.mu[k];
    sum_p += std::pow(pa.mu[k], p);
    sum_q += std::pow(pb.mu[k], q);
    const double rhs = std::pow(sum_p, 1.0 / p) * std::pow(sum_q, 1.0 / q);
    const double lhs = ab.sigma[static_cast<std::size_t>(n)];
    report.rows.push_back({n, lhs, weyl, rhs, rhs - lhs});
    report.weyl_holds = report.weyl_holds && lhs <= weyl + kWeylHolderSlack;
    report.holds = report.holds && lhs <= rhs + kWeylHolderSlack;
  }
  return report;
}

}  // namespace ktrace

#endif  // KTRACE_SPECTRAL_HPP
