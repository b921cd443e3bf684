#ifndef KTRACE_KCYCLE_HPP
#define KTRACE_KCYCLE_HPP

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ktrace/dixmier.hpp"
#include "ktrace/operator.hpp"
#include "ktrace/sparse.hpp"
#include "ktrace/spectral.hpp"

namespace ktrace {

template <OperatorLike Op>
struct Named {
  std::string name;
  Op op;
};

/// Finite truncation of a K-cycle: generators of the algebra, a Hermitian
/// invertible D and the summability exponent d.
///
/// complete_count is the number of smallest-|D| eigenpairs that agree with the
/// untruncated operator; default schedules never look past it.
template <OperatorLike Op>
class KCycle {
 public:
  KCycle(std::vector<Named<Op>> generators, Op dirac, double d, std::string label = {},
         Index complete_count = 0, std::vector<Named<Op>> elements = {})
      : generators_(std::move(generators)),
        elements_(std::move(elements)),
        dirac_(std::move(dirac)),
        d_(d),
        label_(std::move(label)) {
    if (!(d_ > 0.0)) throw std::invalid_argument("summability exponent d must be positive");
    for (const auto& g : generators_)
      if (g.op.dim() != dirac_.dim()) throw OperatorError("generator '" + g.name + "' has the wrong dimension");
    for (const auto& e : elements_)
      if (e.op.dim() != dirac_.dim()) throw OperatorError("element '" + e.name + "' has the wrong dimension");
    hermitian_residual_ = hermitian_residual(dirac_);
    spectrum_ = hermitian_spectrum(dirac_);
    if (!(spectrum_.min_abs() > 1e-12 * spectrum_.max_abs()))
      throw OperatorError("D is not invertible (eigenvalue at 0)");
    abs_dirac_ = apply_function<Op>(spectrum_, [](double x) { return std::abs(x); });
    complete_count_ = (complete_count <= 0 || complete_count > dim()) ? dim() : complete_count;
  }

  [[nodiscard]] Index dim() const { return dirac_.dim(); }
  [[nodiscard]] const Op& dirac() const { return dirac_; }
  [[nodiscard]] const Op& abs_dirac() const { return abs_dirac_; }
  [[nodiscard]] double d() const { return d_; }
  [[nodiscard]] const std::string& label() const { return label_; }
  [[nodiscard]] const std::vector<Named<Op>>& generators() const { return generators_; }
  [[nodiscard]] const std::vector<Named<Op>>& elements() const { return elements_; }
  [[nodiscard]] const HermitianSpectrum& spectrum() const { return spectrum_; }
  [[nodiscard]] Index complete_count() const { return complete_count_; }
  [[nodiscard]] double dirac_hermitian_residual() const { return hermitian_residual_; }

  /// |D|^s from the cached spectrum.
  [[nodiscard]] Op abs_power(double s) const {
    return apply_function<Op>(spectrum_, [s](double x) { return std::pow(std::abs(x), s); });
  }

  [[nodiscard]] std::vector<Index> schedule(std::span<const Index> requested = {}) const {
    return detail::resolve_schedule(requested, complete_count_);
  }

  /// Look up a generator or named element; a trailing '*' takes the adjoint.
  [[nodiscard]] Op resolve(const std::string& name) const {
    for (const auto& g : generators_)
      if (g.name == name) return g.op;
    for (const auto& e : elements_)
      if (e.name == name) return e.op;
    if (name.size() > 1 && name.back() == '*') return adjoint(resolve(name.substr(0, name.size() - 1)));
    throw std::out_of_range("unknown operator reference '" + name + "'");
  }

  [[nodiscard]] bool is_generator(const std::string& name) const {
    for (const auto& g : generators_)
      if (g.name == name) return true;
    return false;
  }

 private:
  std::vector<Named<Op>> generators_;
  std::vector<Named<Op>> elements_;
  Op dirac_;
  Op abs_dirac_;
  double d_;
  std::string label_;
  HermitianSpectrum spectrum_;
  Index complete_count_ = 0;
  double hermitian_residual_ = 0.0;
};

// ---------------------------------------------------------------------------
// Summability and boundedness

struct VerifyReport {
  double hermitian_residual = 0.0;
  double min_abs_eigenvalue = 0.0;
  std::vector<std::pair<std::string, double>> commutator_norms;  // ||[D, g]||
  std::vector<std::pair<Index, double>> summability_table;       // σ_N(|D|^{-d}) / log N
  bool monotone_tail = false;
  double relative_stability = 0.0;
  bool summable = false;
};

/// Summability verdict: the ratio table is bounded when its tail is
/// non-increasing, or when it has settled within 5%.
template <OperatorLike Op>
VerifyReport verify_kcycle(const KCycle<Op>& kc, std::span<const Index> schedule = {}) {
  VerifyReport r;
  r.hermitian_residual = kc.dirac_hermitian_residual();
  r.min_abs_eigenvalue = kc.spectrum().min_abs();
  for (const auto& g : kc.generators())
    r.commutator_norms.emplace_back(g.name, operator_norm(commutator(kc.dirac(), g.op)));

  std::vector<double> mu;
  for (const auto& p : kc.spectrum().pairs()) mu.push_back(std::pow(std::abs(p.value), -kc.d()));
  const SingularProfile profile = SingularProfile::from_values(std::move(mu));

  std::vector<Index> ns(schedule.begin(), schedule.end());
  if (ns.empty()) {
    for (Index n = 64; n <= kc.complete_count(); n *= 2) ns.push_back(n);
    if (ns.size() < 3) {
      ns.clear();
      for (Index n = 2; n <= kc.complete_count(); n *= 2) ns.push_back(n);
    }
  }
  for (Index n : ns) {
    if (n > kc.complete_count()) throw std::out_of_range("schedule exceeds the trusted truncation");
    r.summability_table.emplace_back(n, ratio_estimator(profile, n));
  }
  if (r.summability_table.empty()) throw std::invalid_argument("empty summability schedule");

  const auto& t = r.summability_table;
  const std::size_t first = t.size() > 3 ? t.size() - 3 : 0;
  r.monotone_tail = true;
  double dev = 0.0;
  for (std::size_t i = first; i < t.size(); ++i) {
    if (i > first && t[i].second > t[i - 1].second) r.monotone_tail = false;
    dev = std::max(dev, std::abs(t[i].second - t.back().second));
  }
  r.relative_stability = t.back().second > 0 ? dev / t.back().second : 0.0;
  r.summable = r.monotone_tail || r.relative_stability <= kStabilityTolerance;
  return r;
}

// ---------------------------------------------------------------------------
// The functional φ(T) = τ(|D|^{-d} T) and the hypertrace property

template <OperatorLike Op>
TraceEstimate phi(const KCycle<Op>& kc, const Op& t, std::span<const Index> schedule = {}) {
  return cutoff_estimator(t, kc.spectrum(), kc.d(), schedule, kc.complete_count());
}

/// φ(aT) − φ(Ta).
template <OperatorLike Op>
TraceEstimate hypertrace_defect(const KCycle<Op>& kc, const Op& a, const Op& t,
                                std::span<const Index> schedule = {}) {
  TraceEstimate e = phi(kc, commutator(a, t), schedule);
  e.note = "phi(aT) - phi(Ta) via cutoff increments";
  return e;
}

/// τ(|[|D|^{-d}, a]|), which must vanish for every a in the algebra.
template <OperatorLike Op>
TraceEstimate commutator_vanishing(const KCycle<Op>& kc, const Op& a, std::span<const Index> schedule = {}) {
  const Op x = commutator(kc.abs_power(-kc.d()), a);
  const auto s = kc.schedule(schedule);
  return estimate_from_profile(singular_values(x), s);
}

/// Relative residual of [a, H^{-k}] = Σ_{j=1}^{k} H^{-j} [H, a] H^{-k-1+j}.
template <OperatorLike Op>
double power_identity_residual(const Op& h, const Op& a, int k) {
  if (k < 1) throw std::invalid_argument("power k must be positive");
  const HermitianSpectrum spec = hermitian_spectrum(h);
  if (!(spec.min_abs() > 1e-14 * spec.max_abs())) throw OperatorError("H is singular");
  std::vector<Op> inv_powers;  // inv_powers[j] = H^{-j}
  inv_powers.push_back(Op::identity(h.dim()));
  for (int j = 1; j <= k; ++j)
    inv_powers.push_back(apply_function<Op>(spec, [j](double x) { return std::pow(x, -j); }));
  const Op lhs = commutator(a, inv_powers[static_cast<std::size_t>(k)]);
  const Op ha = commutator(h, a);
  Op rhs = Op::zero(h.dim());
  for (int j = 1; j <= k; ++j)
    rhs = rhs + inv_powers[static_cast<std::size_t>(j)] * ha * inv_powers[static_cast<std::size_t>(k + 1 - j)];
  return operator_norm(lhs - rhs) / (1e-30 + operator_norm(lhs));
}

// ---------------------------------------------------------------------------
// Spectral truncation: compression onto the m smallest-|D| eigenvectors

template <OperatorLike Op>
class Compression {
 public:
  Compression(const KCycle<Op>& kc, Index m) : m_(m) {
    if (m < 1 || m > kc.dim()) throw std::out_of_range("compression size out of range");
    const auto order = kc.spectrum().by_magnitude();
    const auto& blocks = kc.spectrum().blocks;
    std::vector<SparseOperator::Triplet> t;
    values_.reserve(static_cast<std::size_t>(m));
    for (Index c = 0; c < m; ++c) {
      const auto& pr = order[static_cast<std::size_t>(c)];
      const auto& blk = blocks[pr.block];
      for (std::size_t r = 0; r < blk.support.size(); ++r) {
        const Complex v = blk.vectors(static_cast<Index>(r), pr.column);
        if (v != Complex(0.0)) t.emplace_back(blk.support[r], c, v);
      }
      values_.push_back(pr.value);
    }
    basis_.resize(kc.dim(), m);
    basis_.setFromTriplets(t.begin(), t.end());
    basis_.makeCompressed();
    complete_ = std::min(m, kc.complete_count());
    d_ = kc.d();
    label_ = kc.label();
  }

  /// V* X V.
  [[nodiscard]] Op apply(const Op& x) const {
    if constexpr (std::is_same_v<Op, Operator>) {
      const Eigen::MatrixXcd v(basis_);
      return Operator(Eigen::MatrixXcd(v.adjoint() * x.matrix() * v));
    } else {
      SparseOperator::Matrix out = basis_.adjoint() * x.matrix() * basis_;
      return SparseOperator(std::move(out));
    }
  }

  [[nodiscard]] KCycle<Op> kcycle(const KCycle<Op>& kc) const {
    std::vector<Named<Op>> gens;
    for (const auto& g : kc.generators()) gens.push_back({g.name, apply(g.op)});
    return KCycle<Op>(std::move(gens), Op::diagonal(std::span<const double>(values_)), d_,
                      label_ + " [m=" + std::to_string(m_) + "]", complete_);
  }

  [[nodiscard]] Index size() const { return m_; }

 private:
  Index m_;
  SparseOperator::Matrix basis_;
  std::vector<double> values_;
  Index complete_ = 0;
  double d_ = 1.0;
  std::string label_;
};

// ---------------------------------------------------------------------------
// Fractional commutators, the derivation δ = [|D|, ·] and its flow

struct FractionalRatioReport {
  struct Row {
    Index dim;
    double fractional;  // ||[|D|^r, a]||
    double dirac;       // ||[D, a]||
    double ratio;
  };
  double r = 0.5;
  std::vector<Row> rows;
  bool vacuous = false;
  bool bounded = false;
  double bound_factor = 2.0;  // ratio must stay below bound_factor × ratio at the smallest dim
};

template <OperatorLike Op>
FractionalRatioReport fractional_commutator_ratio(const KCycle<Op>& kc, const Op& a, double r,
                                                  std::span<const Index> dims) {
  if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("exponent r must lie in (0, 1)");
  if (dims.empty()) throw std::invalid_argument("dims must not be empty");
  FractionalRatioReport rep;
  rep.r = r;
  bool any_nonzero = false;
  for (Index m : dims) {
    const Compression<Op> comp(kc, m);
    const KCycle<Op> sub = comp.kcycle(kc);
    const Op am = comp.apply(a);
    const double num = operator_norm(commutator(sub.abs_power(r), am));
    const double den = operator_norm(commutator(sub.dirac(), am));
    any_nonzero = any_nonzero || den > 0.0;
    rep.rows.push_back({m, num, den, den > 0.0 ? num / den : 0.0});
  }
  rep.vacuous = !any_nonzero;
  if (rep.vacuous) return rep;
  double reference = 0.0, worst = 0.0;
  bool have_reference = false;
  for (const auto& row : rep.rows) {
    if (row.dirac <= 0.0) continue;
    if (!have_reference) {
      reference = row.ratio;
      have_reference = true;
    }
    worst = std::max(worst, row.ratio);
  }
  rep.bounded = worst <= rep.bound_factor * reference;
  return rep;
}

/// δ(a) = [|D|, a].
template <OperatorLike Op>
Op delta(const KCycle<Op>& kc, const Op& a) {
  return commutator(kc.abs_dirac(), a);
}

/// α_t(a) = e^{it|D|} a e^{-it|D|}.
template <OperatorLike Op>
Op evolve(const KCycle<Op>& kc, const Op& a, double t) {
  const Op u = apply_function<Op>(kc.spectrum(), [t](double x) { return std::polar(1.0, t * std::abs(x)); });
  return u * a * adjoint(u);
}

struct RegularityReport {
  struct Series {
    std::string name;                       // "delta^j(a)" or "delta^j([D,a])"
    int j = 0;
    std::vector<std::pair<Index, double>> norms;  // per truncation dim
    bool growing = false;
  };
  int n_max = 2;
  std::vector<Index> dims;
  std::vector<Series> series;
  /// Largest n such that δ^j(a) and δ^j([D,a]) stay bounded for all j <= n-1
  /// (capped at n_max + 1).
  int level = 0;
  bool a2_regular = false;
};

inline constexpr double kGrowthThreshold = 4.0;

/// Norm tables of δ^j(a), δ^j([D,a]) across spectral truncations. A series is
/// growing when its norm at the largest dim exceeds 4× the smallest-dim norm.
template <OperatorLike Op>
RegularityReport regularity_profile(const KCycle<Op>& kc, const Op& a, int n_max, std::span<const Index> dims) {
  if (n_max < 0) throw std::invalid_argument("n_max must be non-negative");
  if (dims.empty()) throw std::invalid_argument("dims must not be empty");
  RegularityReport rep;
  rep.n_max = n_max;
  rep.dims.assign(dims.begin(), dims.end());
  const auto per_j = static_cast<std::size_t>(n_max + 1);
  std::vector<RegularityReport::Series> of_a(per_j), of_da(per_j);
  for (int j = 0; j <= n_max; ++j) {
    of_a[static_cast<std::size_t>(j)].name = "delta^" + std::to_string(j) + "(a)";
    of_a[static_cast<std::size_t>(j)].j = j;
    of_da[static_cast<std::size_t>(j)].name = "delta^" + std::to_string(j) + "([D,a])";
    of_da[static_cast<std::size_t>(j)].j = j;
  }
  for (Index m : dims) {
    const Compression<Op> comp(kc, m);
    const KCycle<Op> sub = comp.kcycle(kc);
    Op x = comp.apply(a);
    Op y = commutator(sub.dirac(), x);
    for (int j = 0; j <= n_max; ++j) {
      of_a[static_cast<std::size_t>(j)].norms.emplace_back(m, operator_norm(x));
      of_da[static_cast<std::size_t>(j)].norms.emplace_back(m, operator_norm(y));
      x = delta(sub, x);
      y = delta(sub, y);
    }
  }
  auto verdict = [](RegularityReport::Series& s) {
    const double lo = s.norms.front().second, hi = s.norms.back().second;
    s.growing = hi > 1e-12 && hi > kGrowthThreshold * lo;
  };
  rep.level = n_max + 1;
  for (int j = 0; j <= n_max; ++j) {
    auto& sa = of_a[static_cast<std::size_t>(j)];
    auto& sd = of_da[static_cast<std::size_t>(j)];
    verdict(sa);
    verdict(sd);
    if ((sa.growing || sd.growing) && rep.level > j) rep.level = j;
  }
  for (auto& s : of_a) rep.series.push_back(std::move(s));
  for (auto& s : of_da) rep.series.push_back(std::move(s));
  rep.a2_regular = rep.level >= 2;
  return rep;
}

inline const RegularityReport::Series& find_series(const RegularityReport& rep, const std::string& name) {
  for (const auto& s : rep.series)
    if (s.name == name) return s;
  throw std::out_of_range("no series named " + name);
}

}  // namespace ktrace

#endif  // KTRACE_KCYCLE_HPP
