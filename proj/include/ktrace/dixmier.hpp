#ifndef KTRACE_DIXMIER_HPP
#define KTRACE_DIXMIER_HPP

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ktrace/operator.hpp"
#include "ktrace/spectral.hpp"

namespace ktrace {

// Finite-truncation stand-ins for the Dixmier trace.
//
// Given partial sums S_N (of singular values, or of diagonal entries in the
// eigenbasis of |D|), two sequences are tabulated along a schedule of N:
//   ratio      S_N / log N            (the defining sequence; carries a 1/log N bias)
//   increment  (S_{2N} - S_N) / log 2 (converges at rate 1/N on c/k profiles)
// Reported values come from the increment table at the largest N.

enum class Estimator { ratio, increment, cutoff };

inline const char* to_string(Estimator e) {
  switch (e) {
    case Estimator::ratio: return "ratio";
    case Estimator::increment: return "increment";
    case Estimator::cutoff: return "cutoff";
  }
  return "unknown";
}

struct TraceEstimate {
  using Table = std::vector<std::pair<Index, Complex>>;

  Complex value{0.0};
  Estimator estimator = Estimator::increment;
  Table table;        // the estimator's own sequence; value == table.back()
  Table companion;    // ratio-type sequence on the same schedule (N >= 2)
  double stability = 0.0;
  bool omega_dependent = false;
  std::string note;
};

/// Relative size of late-schedule oscillation beyond which a limit is not
/// reported as ω-independent.
inline constexpr double kStabilityTolerance = 0.05;

inline double ratio_estimator(const SingularProfile& profile, Index n) {
  if (n < 2 || n > profile.size())
    throw std::out_of_range("ratio estimator needs 2 <= N <= dim");
  return profile.sigma[static_cast<std::size_t>(n)] / std::log(static_cast<double>(n));
}

inline double increment_estimator(const SingularProfile& profile, Index n) {
  if (n < 1 || 2 * n > profile.size())
    throw std::out_of_range("increment estimator needs 1 <= N and 2N <= dim");
  return (profile.sigma[static_cast<std::size_t>(2 * n)] - profile.sigma[static_cast<std::size_t>(n)]) /
         std::log(2.0);
}

/// Powers of two from 64 with 2N <= limit; falls back to starting at 2 for
/// small limits.
inline std::vector<Index> default_schedule(Index limit) {
  std::vector<Index> out;
  for (Index n = 64; 2 * n <= limit; n *= 2) out.push_back(n);
  if (out.empty())
    for (Index n = 2; 2 * n <= limit; n *= 2) out.push_back(n);
  if (out.empty())
    throw std::invalid_argument("dimension " + std::to_string(limit) + " too small for a trace estimate");
  return out;
}

namespace detail {

inline std::vector<Index> resolve_schedule(std::span<const Index> schedule, Index limit) {
  if (schedule.empty()) return default_schedule(limit);
  std::vector<Index> out(schedule.begin(), schedule.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] < 1 || 2 * out[i] > limit)
      throw std::out_of_range("schedule entry " + std::to_string(out[i]) +
                              " needs 1 <= N and 2N <= " + std::to_string(limit));
    if (i > 0 && out[i] <= out[i - 1])
      throw std::invalid_argument("schedule must be strictly increasing");
  }
  return out;
}

inline void finish(TraceEstimate& e) {
  e.value = e.table.back().second;
  double dev = 0.0;
  const std::size_t first = e.table.size() > 3 ? e.table.size() - 3 : 0;
  for (std::size_t i = first; i < e.table.size(); ++i)
    dev = std::max(dev, std::abs(e.table[i].second - e.value));
  e.stability = dev;
  double scale = std::abs(e.value);
  if (!e.companion.empty()) scale = std::max(scale, std::abs(e.companion.back().second));
  e.omega_dependent = dev > kStabilityTolerance * scale + 1e-9;
}

// Tables from cumulative sums: sums[n] = sum of the first n terms.
template <class T>
TraceEstimate from_partial_sums(const std::vector<T>& sums, std::span<const Index> schedule,
                                Estimator tag) {
  TraceEstimate e;
  e.estimator = tag;
  const double log2 = std::log(2.0);
  for (Index n : schedule) {
    const auto i = static_cast<std::size_t>(n);
    e.table.emplace_back(n, Complex(sums[2 * i] - sums[i]) / log2);
    if (n >= 2) e.companion.emplace_back(n, Complex(sums[i]) / std::log(static_cast<double>(n)));
  }
  finish(e);
  return e;
}

}  // namespace detail

/// Increment estimate with ratio companion, straight from a singular profile.
inline TraceEstimate estimate_from_profile(const SingularProfile& profile,
                                           std::span<const Index> schedule = {}) {
  const auto s = detail::resolve_schedule(schedule, profile.size());
  return detail::from_partial_sums(profile.sigma, s, Estimator::increment);
}

/// Dixmier-trace estimate of a positive semidefinite operator.
template <OperatorLike Op>
TraceEstimate dixmier_positive(const Op& a, std::span<const Index> schedule = {}) {
  const HermitianSpectrum spec = hermitian_spectrum(a);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(a.dim()));
  for (const auto& b : spec.blocks) values.insert(values.end(), b.values.data(), b.values.data() + b.values.size());
  const double scale = spec.max_abs();
  for (double v : values)
    if (v < -1e-10 * scale)
      throw OperatorError("operator is not positive: eigenvalue " + std::to_string(v));
  return estimate_from_profile(SingularProfile::from_values(std::move(values)), schedule);
}

/// τ(A₊) − τ(A₋) for Hermitian A. The default schedule is limited by the
/// smaller non-trivial spectral part so both increments stay inside the truncation.
template <OperatorLike Op>
TraceEstimate dixmier_selfadjoint(const Op& a, std::span<const Index> schedule = {}) {
  const HermitianSpectrum spec = hermitian_spectrum(a);
  const double zero = 1e-14 * spec.max_abs();
  std::vector<double> pos, neg;
  for (const auto& b : spec.blocks)
    for (Index i = 0; i < b.values.size(); ++i) {
      const double v = b.values(i);
      if (v > zero) pos.push_back(v);
      else if (v < -zero) neg.push_back(-v);
    }
  Index limit = a.dim();
  if (!pos.empty() && !neg.empty())
    limit = static_cast<Index>(std::min(pos.size(), neg.size()));
  else if (!pos.empty() || !neg.empty())
    limit = static_cast<Index>(std::max(pos.size(), neg.size()));
  const auto s = detail::resolve_schedule(schedule, limit);
  auto padded = [&](std::vector<double> v) {
    v.resize(static_cast<std::size_t>(a.dim()), 0.0);
    return SingularProfile::from_values(std::move(v));
  };
  const SingularProfile pp = padded(std::move(pos));
  const SingularProfile pn = padded(std::move(neg));
  std::vector<double> diff(pp.sigma.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = pp.sigma[i] - pn.sigma[i];
  return detail::from_partial_sums(diff, s, Estimator::increment);
}

/// Diagonal partial sums of |D|^{-d} T in the eigenbasis of |D| (smallest
/// |D|-eigenvalues first). Estimates φ(T) = τ(|D|^{-d} T) for arbitrary T.
///
/// limit bounds the schedule: only the first `limit` eigenpairs of the
/// truncated D are trusted to match the untruncated operator.
template <OperatorLike Op>
TraceEstimate cutoff_estimator(const Op& t, const HermitianSpectrum& spec_d, double d,
                               std::span<const Index> schedule = {}, Index limit = 0) {
  if (t.dim() != spec_d.dim) throw OperatorError("dimension mismatch between T and D");
  if (!(spec_d.min_abs() > 1e-14 * spec_d.max_abs()))
    throw OperatorError("D is singular; |D|^{-d} undefined");
  if (limit <= 0 || limit > t.dim()) limit = t.dim();
  const auto s = detail::resolve_schedule(schedule, limit);

  // ⟨v, T v⟩ for every eigenvector, block by block.
  std::vector<Eigen::VectorXcd> expect(spec_d.blocks.size());
  for (std::size_t b = 0; b < spec_d.blocks.size(); ++b) {
    const auto& blk = spec_d.blocks[b];
    if (blk.support.size() == 1) {
      expect[b] = Eigen::VectorXcd::Constant(1, t.coeff(blk.support[0], blk.support[0]));
      continue;
    }
    const Eigen::MatrixXcd local = t.gather(blk.support);
    expect[b] = (blk.vectors.adjoint() * local * blk.vectors).diagonal();
  }
  const auto order = spec_d.by_magnitude();
  std::vector<Complex> sums(order.size() + 1, Complex(0.0));
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& pr = order[k];
    sums[k + 1] = sums[k] + std::pow(std::abs(pr.value), -d) * expect[pr.block](pr.column);
  }
  TraceEstimate e = detail::from_partial_sums(sums, s, Estimator::cutoff);
  e.note = "diagonal partial sums in the |D| eigenbasis; equals the Dixmier trace only where the limit is measurable";
  return e;
}

template <OperatorLike Op>
TraceEstimate cutoff_estimator(const Op& t, const Op& d_op, double d, std::span<const Index> schedule = {}) {
  return cutoff_estimator(t, hermitian_spectrum(d_op), d, schedule);
}

struct HolderReport {
  double p = 2.0;
  double q = 2.0;
  double lhs = 0.0;  // τ(|AB|)
  double rhs = 0.0;  // τ(|A|^p)^{1/p} τ(|B|^q)^{1/q}, or ||B|| τ(|A|) when q = ∞
  double tolerance = 0.0;
  bool holds = true;
  TraceEstimate lhs_estimate;
};

namespace detail {

inline SingularProfile powered(const SingularProfile& p, double exponent) {
  std::vector<double> v(p.mu.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::pow(p.mu[i], exponent);
  return SingularProfile::from_values(std::move(v));
}

inline void settle(HolderReport& r) {
  r.tolerance = 1e-6 + 1e-2 * r.rhs;
  r.holds = r.lhs <= r.rhs + r.tolerance;
}

}  // namespace detail

/// Trace-level Hölder inequality τ(|AB|) <= τ(|A|^p)^{1/p} τ(|B|^q)^{1/q}.
template <OperatorLike Op>
HolderReport holder_check(const Op& a, const Op& b, double p, double q, std::span<const Index> schedule = {}) {
  if (!(p > 1.0) || !(q > 1.0) || std::abs(1.0 / p + 1.0 / q - 1.0) > 1e-12)
    throw std::invalid_argument("Hölder exponents must satisfy 1/p + 1/q = 1 with p, q > 1");
  HolderReport r;
  r.p = p;
  r.q = q;
  r.lhs_estimate = estimate_from_profile(singular_values(a * b), schedule);
  r.lhs = r.lhs_estimate.value.real();
  const double ta = estimate_from_profile(detail::powered(singular_values(a), p), schedule).value.real();
  const double tb = estimate_from_profile(detail::powered(singular_values(b), q), schedule).value.real();
  r.rhs = std::pow(std::max(ta, 0.0), 1.0 / p) * std::pow(std::max(tb, 0.0), 1.0 / q);
  detail::settle(r);
  return r;
}

/// The p = 1, q = ∞ case: τ(|AB|) <= ||B|| τ(|A|).
template <OperatorLike Op>
HolderReport holder_check_bounded(const Op& a, const Op& b, std::span<const Index> schedule = {}) {
  HolderReport r;
  r.p = 1.0;
  r.q = std::numeric_limits<double>::infinity();
  r.lhs_estimate = estimate_from_profile(singular_values(a * b), schedule);
  r.lhs = r.lhs_estimate.value.real();
  r.rhs = operator_norm(b) * estimate_from_profile(singular_values(a), schedule).value.real();
  detail::settle(r);
  return r;
}

}  // namespace ktrace

#endif  // KTRACE_DIXMIER_HPP
