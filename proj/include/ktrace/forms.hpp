#ifndef KTRACE_FORMS_HPP
#define KTRACE_FORMS_HPP

#include <optional>
#include <string>
#include <vector>

#include "ktrace/dixmier.hpp"
#include "ktrace/kcycle.hpp"

namespace ktrace {

/// a0 da1 ... dan, with operator references resolved against a K-cycle.
/// An empty a0 stands for the unit.
struct FormWord {
  std::optional<std::string> a0;
  std::vector<std::string> letters;

  [[nodiscard]] int degree() const { return static_cast<int>(letters.size()); }

  [[nodiscard]] std::string to_string() const {
    std::string out = a0.value_or("");
    for (const auto& l : letters) {
      if (!out.empty()) out += " ";
      out += "d" + l;
    }
    return out.empty() ? "1" : out;
  }

  friend bool operator==(const FormWord&, const FormWord&) = default;

  /// Concatenation; the second word's a0 must be the unit.
  friend FormWord operator+(const FormWord& w1, const FormWord& w2) {
    if (w2.a0) throw std::invalid_argument("concatenation needs a unit a0 on the right word");
    FormWord out = w1;
    out.letters.insert(out.letters.end(), w2.letters.begin(), w2.letters.end());
    return out;
  }
};

/// Finite linear combination of words; identical words are merged on insertion.
class FormSum {
 public:
  struct Term {
    Complex coeff;
    FormWord word;
  };

  FormSum() = default;
  FormSum(std::initializer_list<Term> terms) {
    for (const auto& t : terms) add(t.coeff, t.word);
  }

  FormSum& add(Complex coeff, const FormWord& word) {
    for (auto it = terms_.begin(); it != terms_.end(); ++it) {
      if (it->word == word) {
        it->coeff += coeff;
        if (it->coeff == Complex(0.0)) terms_.erase(it);
        return *this;
      }
    }
    if (coeff != Complex(0.0)) terms_.push_back({coeff, word});
    return *this;
  }

  friend FormSum operator+(FormSum x, const FormSum& y) {
    for (const auto& t : y.terms_) x.add(t.coeff, t.word);
    return x;
  }
  friend FormSum operator*(Complex z, FormSum x) {
    FormSum out;
    for (const auto& t : x.terms_) out.add(z * t.coeff, t.word);
    return out;
  }

  [[nodiscard]] const std::vector<Term>& terms() const { return terms_; }
  [[nodiscard]] bool empty() const { return terms_.empty(); }

 private:
  std::vector<Term> terms_;
};

/// π(a0 da1 ... dan) = a0 [D,a1] ... [D,an].
template <OperatorLike Op>
Op represent(const KCycle<Op>& kc, const FormWord& w) {
  Op out = w.a0 ? kc.resolve(*w.a0) : Op::identity(kc.dim());
  for (const auto& letter : w.letters) out = out * commutator(kc.dirac(), kc.resolve(letter));
  return out;
}

/// τ(Σ c w) = Σ c iⁿ φ(π(w)).
template <OperatorLike Op>
TraceEstimate tau(const KCycle<Op>& kc, const FormSum& x, std::span<const Index> schedule = {}) {
  Op total = Op::zero(kc.dim());
  for (const auto& t : x.terms()) {
    Complex phase(1.0);
    for (int j = 0; j < t.word.degree(); ++j) phase *= Complex(0.0, 1.0);
    total = total + (t.coeff * phase) * represent(kc, t.word);
  }
  return phi(kc, total, schedule);
}

// ---------------------------------------------------------------------------
// Monomials of the *-algebra generated by A and [D, A]

template <OperatorLike Op>
struct Monomial {
  std::vector<std::string> letters;
  Op op;

  [[nodiscard]] std::string spelling() const {
    std::string out;
    for (const auto& l : letters) out += (out.empty() ? "" : "·") + l;
    return out;
  }
};

template <OperatorLike Op>
struct MonomialSet {
  std::vector<Monomial<Op>> monomials;
  /// (dropped spelling, kept spelling or "0") for every deduplicated word.
  std::vector<std::pair<std::string, std::string>> collisions;
};

inline constexpr double kDedupTolerance = 1e-10;

/// Letters g, g*, [D,g], [D,g*] for every generator g.
template <OperatorLike Op>
std::vector<Monomial<Op>> form_alphabet(const KCycle<Op>& kc) {
  std::vector<Monomial<Op>> out;
  for (const auto& g : kc.generators()) {
    const Op gs = adjoint(g.op);
    out.push_back({{g.name}, g.op});
    out.push_back({{g.name + "*"}, gs});
    out.push_back({{"[D," + g.name + "]"}, commutator(kc.dirac(), g.op)});
    out.push_back({{"[D," + g.name + "*]"}, commutator(kc.dirac(), gs)});
  }
  return out;
}

/// All products of at most `length` letters, deduplicated by operator-norm
/// distance (words equal to zero or to an earlier word are dropped).
template <OperatorLike Op>
MonomialSet<Op> enumerate_monomials(const KCycle<Op>& kc, int length) {
  if (length < 1) throw std::invalid_argument("monomial length must be at least 1");
  const auto alphabet = form_alphabet(kc);
  MonomialSet<Op> set;
  auto admit = [&](Monomial<Op> m) {
    if (!norm_distance_exceeds(m.op, Op::zero(kc.dim()), kDedupTolerance)) {
      set.collisions.emplace_back(m.spelling(), "0");
      return false;
    }
    for (const auto& kept : set.monomials) {
      if (!norm_distance_exceeds(m.op, kept.op, kDedupTolerance)) {
        set.collisions.emplace_back(m.spelling(), kept.spelling());
        return false;
      }
    }
    set.monomials.push_back(std::move(m));
    return true;
  };
  std::vector<std::size_t> frontier;
  for (const auto& letter : alphabet)
    if (admit(letter)) frontier.push_back(set.monomials.size() - 1);
  for (int len = 2; len <= length; ++len) {
    std::vector<std::size_t> next;
    for (std::size_t idx : frontier) {
      for (const auto& letter : alphabet) {
        Monomial<Op> m = set.monomials[idx];
        m.letters.push_back(letter.letters.front());
        m.op = m.op * letter.op;
        if (admit(std::move(m))) next.push_back(set.monomials.size() - 1);
      }
    }
    frontier = std::move(next);
  }
  return set;
}

struct SurveyReport {
  struct Entry {
    std::string x;
    std::string y;
    double defect;
  };
  int length = 2;
  std::vector<Index> schedule;
  double max_defect = 0.0;
  std::pair<std::string, std::string> worst_pair;
  TraceEstimate worst_estimate;
  std::vector<Entry> defect_table;
  std::vector<std::pair<std::string, std::string>> collisions;
};

/// max |φ(xy) − φ(yx)| over monomial pairs of total length <= L.
template <OperatorLike Op>
SurveyReport trace_defect_survey(const KCycle<Op>& kc, int length, std::span<const Index> schedule = {}) {
  if (length < 2 || length > 3) throw std::invalid_argument("survey length must be 2 or 3");
  SurveyReport rep;
  rep.length = length;
  rep.schedule = kc.schedule(schedule);
  const MonomialSet<Op> set = enumerate_monomials(kc, length - 1);
  rep.collisions = set.collisions;
  const auto& ms = set.monomials;
  bool first = true;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    for (std::size_t j = i + 1; j < ms.size(); ++j) {
      if (ms[i].letters.size() + ms[j].letters.size() > static_cast<std::size_t>(length)) continue;
      TraceEstimate e = phi(kc, commutator(ms[i].op, ms[j].op), rep.schedule);
      const double defect = std::abs(e.value);
      rep.defect_table.push_back({ms[i].spelling(), ms[j].spelling(), defect});
      if (first || defect > rep.max_defect) {
        first = false;
        rep.max_defect = defect;
        rep.worst_pair = {ms[i].spelling(), ms[j].spelling()};
        rep.worst_estimate = std::move(e);
      }
    }
  }
  return rep;
}

}  // namespace ktrace

#endif  // KTRACE_FORMS_HPP
