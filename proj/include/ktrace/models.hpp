#ifndef KTRACE_MODELS_HPP
#define KTRACE_MODELS_HPP

#include <array>
#include <cstdio>
#include <cmath>
#include <string>
#include <vector>

#include "ktrace/kcycle.hpp"
#include "ktrace/operator.hpp"
#include "ktrace/sparse.hpp"

namespace ktrace {

// ---------------------------------------------------------------------------
// Two-by-two counterexample: H = C^2 ⊗ K, a = m12 ⊗ b^{-1}, D = diag(λ, μ) ⊗ b.
//
// b is diagonal with eigenvalues k^{1/d}, k = 1..n, so that b^{-d} = diag(1/k)
// and its Dixmier trace is exactly 1 in the limit.

struct CounterexampleSpec {
  double lambda = 1.0;
  double mu = 2.0;
  double d = 1.0;
  Index n = 64;

  void validate() const {
    if (n < 4) throw std::invalid_argument("counterexample needs n >= 4");
    if (!(d > 0.0)) throw std::invalid_argument("counterexample needs d > 0");
    if (lambda == 0.0 || mu == 0.0) throw std::invalid_argument("lambda and mu must be non-zero (D invertible)");
  }
};

template <OperatorLike Op>
struct CounterexampleModel {
  CounterexampleSpec spec;
  KCycle<Op> kcycle;
  Op a;
  Op a_star;
  /// Brute-force products indexed so that x[i][j][k] ≅ m_{i+1,j+1}:
  /// x11 = (aa*)^{k+1}, x22 = (a*a)^{k+1}, x12 = a(a*a)^k, x21 = a*(aa*)^k.
  /// With m_ij e_j = e_i, a*a = m22 ⊗ b^{-2}; the diagonal labels are therefore
  /// swapped relative to writing x11 = (a*a)^{k+1}.
  std::array<std::array<std::array<Op, 4>, 2>, 2> x;
};

namespace detail {

template <OperatorLike Op>
Op b_power(const CounterexampleSpec& s, double exponent) {
  std::vector<double> v(static_cast<std::size_t>(s.n));
  for (Index k = 1; k <= s.n; ++k) v[static_cast<std::size_t>(k - 1)] = std::pow(static_cast<double>(k), exponent / s.d);
  return Op::diagonal(std::span<const double>(v));
}

}  // namespace detail

/// m_ij ⊗ b^{power}, 1-based matrix-unit indices.
template <OperatorLike Op>
Op block_element(const CounterexampleSpec& s, Index i, Index j, double power) {
  return kron(Op::unit(i, j, 2), detail::b_power<Op>(s, power));
}

/// Closed form of x_ij^k: m_ii ⊗ b^{-(2k+2)} on the diagonal, m_ij ⊗ b^{-(2k+1)} off it.
template <OperatorLike Op>
Op closed_form_x(const CounterexampleSpec& s, Index i, Index j, int k) {
  const double power = i == j ? -(2.0 * k + 2.0) : -(2.0 * k + 1.0);
  return block_element<Op>(s, i, j, power);
}

template <OperatorLike Op>
CounterexampleModel<Op> build_counterexample(const CounterexampleSpec& spec) {
  spec.validate();
  const std::array<double, 2> alpha_diag{spec.lambda, spec.mu};
  const Op alpha = Op::diagonal(std::span<const double>(alpha_diag));
  const Op b = detail::b_power<Op>(spec, 1.0);
  const Op dirac = kron(alpha, b);
  const Op a = block_element<Op>(spec, 1, 2, -1.0);
  const Op a_star = adjoint(a);

  // Eigenvalues of |D| below min(|λ|,|μ|) n^{1/d} are those of the untruncated operator.
  const double cutoff = std::min(std::abs(spec.lambda), std::abs(spec.mu)) *
                        std::pow(static_cast<double>(spec.n), 1.0 / spec.d) * (1.0 + 1e-12);
  Index complete = 0;
  for (Index k = 1; k <= spec.n; ++k) {
    const double bk = std::pow(static_cast<double>(k), 1.0 / spec.d);
    complete += (std::abs(spec.lambda) * bk <= cutoff) + (std::abs(spec.mu) * bk <= cutoff);
  }

  std::array<std::array<std::array<Op, 4>, 2>, 2> x;
  const Op ata = a_star * a, aat = a * a_star;
  Op pow_ata = Op::identity(a.dim()), pow_aat = Op::identity(a.dim());
  for (std::size_t k = 0; k < 4; ++k) {
    x[0][1][k] = a * pow_ata;       // a (a*a)^k
    x[1][0][k] = a_star * pow_aat;  // a* (aa*)^k
    pow_ata = pow_ata * ata;
    pow_aat = pow_aat * aat;
    x[0][0][k] = pow_aat;  // (aa*)^{k+1} = m11 ⊗ b^{-(2k+2)}
    x[1][1][k] = pow_ata;  // (a*a)^{k+1} = m22 ⊗ b^{-(2k+2)}
  }

  std::vector<Named<Op>> elements{{"a*", a_star}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 4; ++k)
        elements.push_back({"x" + std::to_string(i + 1) + std::to_string(j + 1) + "^" + std::to_string(k),
                            x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]});

  char label[128];
  std::snprintf(label, sizeof label, "counterexample(lambda=%g, mu=%g, d=%g, n=%lld)", spec.lambda, spec.mu,
                spec.d, static_cast<long long>(spec.n));
  KCycle<Op> kc({{"a", a}}, dirac, spec.d, label, complete, std::move(elements));
  return {spec, std::move(kc), a, a_star, std::move(x)};
}

/// φ([[D,a],[D,a*]]) in the limit: −(λ−μ)² (|λ|^{-d} − |μ|^{-d}) τ(b^{-d}), with τ(b^{-d}) = 1.
inline double expected_form_defect(const CounterexampleSpec& s) {
  const double gap = s.lambda - s.mu;
  return -gap * gap * (std::pow(std::abs(s.lambda), -s.d) - std::pow(std::abs(s.mu), -s.d));
}

/// φ(1) = tr(|α|^{-d}) τ(b^{-d}).
inline double expected_phi_identity(const CounterexampleSpec& s) {
  return std::pow(std::abs(s.lambda), -s.d) + std::pow(std::abs(s.mu), -s.d);
}

/// ||[[D,a],[D,a*]] + (λ−μ)² (m11 − m22) ⊗ 1||.
template <OperatorLike Op>
double double_commutator_residual(const CounterexampleModel<Op>& m) {
  const Op& dirac = m.kcycle.dirac();
  const Op computed = commutator(commutator(dirac, m.a), commutator(dirac, m.a_star));
  const double gap = m.spec.lambda - m.spec.mu;
  const Op expected = Complex(-gap * gap) * (block_element<Op>(m.spec, 1, 1, 0.0) - block_element<Op>(m.spec, 2, 2, 0.0));
  return operator_norm(computed - expected);
}

/// Residuals of [D, x_ij^k] against both sign conventions for the off-diagonal
/// case: (j − i)(λ − μ) m_ij ⊗ b^{-2k} (what the products give with m_ij e_j = e_i)
/// and (i − j)(λ − μ) m_ij ⊗ b^{-2k} (the printed form).
struct GeneratorCommutatorCheck {
  double residual_direct = 0.0;
  double residual_printed = 0.0;
  double norm = 0.0;  // ||[D, x_ij^k]||
  std::string matching;  // "direct", "printed", "both" or "neither"
};

template <OperatorLike Op>
GeneratorCommutatorCheck generator_commutator_residual(const CounterexampleModel<Op>& m, Index i, Index j, int k) {
  if (i < 1 || i > 2 || j < 1 || j > 2 || k < 0 || k > 3) throw std::out_of_range("x_ij^k index out of range");
  const Op& xk = m.x[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(k)];
  const Op computed = commutator(m.kcycle.dirac(), xk);
  const Op shape = block_element<Op>(m.spec, i, j, -2.0 * k);
  const double gap = m.spec.lambda - m.spec.mu;
  const auto di = static_cast<double>(i), dj = static_cast<double>(j);
  GeneratorCommutatorCheck c;
  c.norm = operator_norm(computed);
  c.residual_direct = operator_norm(computed - Complex((dj - di) * gap) * shape);
  c.residual_printed = operator_norm(computed - Complex((di - dj) * gap) * shape);
  const double tol = 1e-12 * (1.0 + c.norm);
  const bool direct = c.residual_direct <= tol, printed = c.residual_printed <= tol;
  c.matching = direct && printed ? "both" : direct ? "direct" : printed ? "printed" : "neither";
  return c;
}

/// Largest residual between the brute-force x_ij^k and their closed forms (k <= 3).
template <OperatorLike Op>
double closed_form_residual(const CounterexampleModel<Op>& m) {
  double worst = 0.0;
  for (Index i = 1; i <= 2; ++i)
    for (Index j = 1; j <= 2; ++j)
      for (int k = 0; k < 4; ++k) {
        const Op& brute = m.x[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(k)];
        worst = std::max(worst, operator_norm(brute - closed_form_x<Op>(m.spec, i, j, k)));
      }
  return worst;
}

// ---------------------------------------------------------------------------
// Circle: Fourier modes k = -M..M-1, D = diag(k + 1/2), multiplication by a
// trigonometric polynomial f acting as the Toeplitz matrix f̂(j − k).

struct CircleSpec {
  std::vector<Complex> fourier;  // f̂(m) for m = -M_f..M_f
  Index modes = 64;

  [[nodiscard]] Index bandwidth() const { return static_cast<Index>(fourier.size() / 2); }
  [[nodiscard]] Complex coefficient(Index m) const {
    const Index mf = bandwidth();
    if (m < -mf || m > mf) return 0.0;
    return fourier[static_cast<std::size_t>(m + mf)];
  }

  void validate() const {
    if (fourier.empty() || fourier.size() % 2 == 0)
      throw std::invalid_argument("fourier coefficients must cover m = -M_f..M_f");
    const Index mf = bandwidth();
    double scale = 0.0;
    for (const auto& c : fourier) scale = std::max(scale, std::abs(c));
    for (Index m = 0; m <= mf; ++m)
      if (std::abs(coefficient(-m) - std::conj(coefficient(m))) > 1e-12 * (1.0 + scale))
        throw std::invalid_argument("fourier coefficients must satisfy f(-m) = conj(f(m))");
    if (modes < 1 || modes < 4 * mf) throw std::invalid_argument("circle needs modes >= 4 * M_f");
  }

  /// Build from (m, f̂(m)) pairs; missing coefficients are zero.
  static CircleSpec from_terms(const std::vector<std::pair<Index, Complex>>& terms, Index modes) {
    Index mf = 0;
    for (const auto& [m, c] : terms) mf = std::max(mf, m < 0 ? -m : m);
    CircleSpec s;
    s.modes = modes;
    s.fourier.assign(static_cast<std::size_t>(2 * mf + 1), Complex(0.0));
    for (const auto& [m, c] : terms) s.fourier[static_cast<std::size_t>(m + mf)] += c;
    return s;
  }
};

template <OperatorLike Op>
Op toeplitz_multiplier(const CircleSpec& spec) {
  const Index dim = 2 * spec.modes, mf = spec.bandwidth();
  if constexpr (std::is_same_v<Op, Operator>) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (Index r = 0; r < dim; ++r)
      for (Index c = std::max<Index>(0, r - mf); c <= std::min(dim - 1, r + mf); ++c) m(r, c) = spec.coefficient(r - c);
    return Operator(std::move(m));
  } else {
    std::vector<SparseOperator::Triplet> t;
    for (Index r = 0; r < dim; ++r)
      for (Index c = std::max<Index>(0, r - mf); c <= std::min(dim - 1, r + mf); ++c)
        if (spec.coefficient(r - c) != Complex(0.0)) t.emplace_back(r, c, spec.coefficient(r - c));
    return SparseOperator::from_triplets(dim, t);
  }
}

template <OperatorLike Op>
KCycle<Op> build_circle(const CircleSpec& spec) {
  spec.validate();
  const Index dim = 2 * spec.modes;
  std::vector<double> eig(static_cast<std::size_t>(dim));
  for (Index i = 0; i < dim; ++i) eig[static_cast<std::size_t>(i)] = static_cast<double>(i - spec.modes) + 0.5;
  char label[96];
  std::snprintf(label, sizeof label, "circle(M=%lld, M_f=%lld)", static_cast<long long>(spec.modes),
                static_cast<long long>(spec.bandwidth()));
  return KCycle<Op>({{"f", toeplitz_multiplier<Op>(spec)}}, Op::diagonal(std::span<const double>(eig)), 1.0, label);
}

/// (1/π) ∫ f dθ = 2 f̂(0): the d = 1 trace-theorem value of φ(M_f).
inline double circle_expected_trace(const CircleSpec& spec) { return 2.0 * spec.coefficient(0).real(); }

}  // namespace ktrace

#endif  // KTRACE_MODELS_HPP
