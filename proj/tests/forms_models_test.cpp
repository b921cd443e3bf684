#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "generators.hpp"
#include "ktrace/forms.hpp"
#include "ktrace/json.hpp"
#include "ktrace/ktrace.hpp"

using namespace ktrace;

namespace {

CounterexampleModel<SparseOperator> sparse_model(double lambda, double mu, Index n) {
  return build_counterexample<SparseOperator>({lambda, mu, 1.0, n});
}

CounterexampleModel<Operator> dense_model(double lambda, double mu, Index n) {
  return build_counterexample<Operator>({lambda, mu, 1.0, n});
}

FormWord word(std::vector<std::string> letters, std::optional<std::string> a0 = std::nullopt) {
  return FormWord{std::move(a0), std::move(letters)};
}

// da da* − da* da.
FormSum differential_commutator() { return {{1.0, word({"a", "a*"})}, {-1.0, word({"a*", "a"})}}; }

}  // namespace

// --- counterexample model ---------------------------------------------------

TEST(Counterexample, DiracForSmallN) {
  const auto m = dense_model(1.0, 2.0, 4);
  const std::vector<double> expected{1, 2, 3, 4, 2, 4, 6, 8};
  ASSERT_EQ(m.kcycle.dim(), 8);
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j)
      EXPECT_EQ(m.kcycle.dirac()(i, j), Complex(i == j ? expected[static_cast<std::size_t>(i)] : 0.0));
}

TEST(Counterexample, SpecValidation) {
  EXPECT_THROW(dense_model(1.0, 2.0, 3), std::invalid_argument);
  EXPECT_THROW(dense_model(0.0, 2.0, 8), std::invalid_argument);
  EXPECT_THROW(dense_model(1.0, 0.0, 8), std::invalid_argument);
  EXPECT_THROW((build_counterexample<Operator>({1.0, 2.0, 0.0, 8})), std::invalid_argument);
}

TEST(Counterexample, FirstDiagonalElement) {
  const auto m = dense_model(1.0, 2.0, 16);
  const Operator& x = m.x[0][0][0];
  EXPECT_EQ(gen::max_diff(x, m.a * m.a_star), 0.0);
  EXPECT_LE(gen::max_diff(x, block_element<Operator>(m.spec, 1, 1, -2.0)), 1e-15);
}

TEST(Counterexample, SquareVanishes) {
  const auto m = dense_model(1.0, 2.0, 64);
  EXPECT_EQ(max_abs_entry(m.a * m.a), 0.0);
  EXPECT_EQ(max_abs_entry(m.a_star * m.a_star), 0.0);
}

TEST(Counterexample, ClosedFormsUpToN64) {
  for (Index n : {4, 16, 64}) {
    gen::Source src(5000 + static_cast<std::uint64_t>(n));
    const double lambda = src.real(-3.0, 3.0), mu = src.real(0.5, 3.0);
    EXPECT_LE(closed_form_residual(dense_model(lambda == 0.0 ? 1.0 : lambda, mu, n)), 1e-12) << "n=" << n;
  }
  EXPECT_LE(closed_form_residual(sparse_model(1.0, 2.0, 64)), 1e-12);
}

TEST(Counterexample, NamedElementsResolve) {
  const auto m = dense_model(1.0, 2.0, 8);
  EXPECT_EQ(gen::max_diff(m.kcycle.resolve("x12^2"), m.x[0][1][2]), 0.0);
  EXPECT_EQ(gen::max_diff(m.kcycle.resolve("a*"), m.a_star), 0.0);
  EXPECT_EQ(gen::max_diff(m.kcycle.resolve("x21^0*"), adjoint(m.x[1][0][0])), 0.0);
  EXPECT_THROW(m.kcycle.resolve("b"), std::out_of_range);
}

TEST(ExpectedFormDefect, Examples) {
  EXPECT_DOUBLE_EQ(expected_form_defect({1.0, 2.0, 1.0, 8}), -0.5);
  EXPECT_EQ(expected_form_defect({2.0, -2.0, 1.0, 8}), 0.0);
  EXPECT_EQ(expected_form_defect({-1.0, 1.0, 1.0, 8}), 0.0);
  EXPECT_DOUBLE_EQ(expected_phi_identity({1.0, 2.0, 1.0, 8}), 1.5);
}

TEST(DoubleCommutator, Examples) {
  EXPECT_LE(double_commutator_residual(dense_model(1.0, 2.0, 32)), 1e-12);
  const auto equal = dense_model(1.5, 1.5, 16);
  EXPECT_EQ(double_commutator_residual(equal), 0.0);
  EXPECT_EQ(operator_norm(commutator(equal.kcycle.dirac(), equal.a)), 0.0);
}

TEST(DoubleCommutator, RandomParameters) {
  for (int c = 0; c < 50; ++c) {
    gen::Source src(5100 + static_cast<std::uint64_t>(c));
    const auto m = dense_model(src.real(1.0, 3.0), src.real(1.0, 3.0), 16);
    EXPECT_LE(double_commutator_residual(m), 1e-12) << "case " << c;
  }
}

TEST(GeneratorCommutator, DiagonalVanishes) {
  const auto m = dense_model(1.0, 2.0, 16);
  for (Index i = 1; i <= 2; ++i)
    for (int k = 0; k < 4; ++k) {
      const auto c = generator_commutator_residual(m, i, i, k);
      EXPECT_EQ(c.norm, 0.0);
      EXPECT_EQ(c.matching, "both");
    }
}

TEST(GeneratorCommutator, OffDiagonalFollowsDirectProducts) {
  const auto m = dense_model(1.0, 3.0, 16);
  const auto first = generator_commutator_residual(m, 1, 2, 0);
  EXPECT_NEAR(first.norm, 2.0, 1e-12);
  const auto c = generator_commutator_residual(m, 1, 2, 2);
  EXPECT_EQ(c.matching, "direct");
  EXPECT_LE(c.residual_direct, 1e-12);
  EXPECT_NEAR(c.residual_printed, 2.0 * c.norm, 1e-12);
  EXPECT_LE(gen::max_diff(commutator(m.kcycle.dirac(), m.x[0][1][2]),
                          Complex(-2.0) * block_element<Operator>(m.spec, 1, 2, -4.0)),
            1e-12);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(generator_commutator_residual(m, 2, 1, k).matching, "direct");
  EXPECT_THROW(generator_commutator_residual(m, 1, 3, 0), std::out_of_range);
}

TEST(Counterexample, FormDefectMatchesClosedForm) {
  const auto m = sparse_model(1.0, 2.0, 8192);
  const SparseOperator dc = commutator(commutator(m.kcycle.dirac(), m.a), commutator(m.kcycle.dirac(), m.a_star));
  const double expected = expected_form_defect(m.spec);
  EXPECT_NEAR(phi(m.kcycle, dc).value.real(), expected, std::max(5e-3, 0.02 * std::abs(expected)));
}

TEST(Counterexample, VerifyPasses) {
  EXPECT_TRUE(verify_kcycle(sparse_model(1.0, 2.0, 2048).kcycle).summable);
  EXPECT_TRUE(verify_kcycle(sparse_model(1.0, -1.0, 2048).kcycle).summable);
}

// --- circle model -----------------------------------------------------------

TEST(Circle, ConstantIsIdentity) {
  const KCycle<Operator> kc = build_circle<Operator>(CircleSpec::from_terms({{0, 1.0}}, 16));
  EXPECT_EQ(gen::max_diff(kc.generators().front().op, Operator::identity(32)), 0.0);
  EXPECT_EQ(kc.dirac()(0, 0), Complex(-15.5));
  EXPECT_EQ(kc.dirac()(31, 31), Complex(15.5));
}

TEST(Circle, ExponentialIsShift) {
  const Operator s = toeplitz_multiplier<Operator>(CircleSpec::from_terms({{1, 1.0}}, 8));
  for (Index r = 0; r < 16; ++r)
    for (Index c = 0; c < 16; ++c) EXPECT_EQ(s(r, c), Complex(r == c + 1 ? 1.0 : 0.0));
  std::vector<double> eig(16);
  for (Index i = 0; i < 16; ++i) eig[static_cast<std::size_t>(i)] = static_cast<double>(i - 8) + 0.5;
  EXPECT_NEAR(operator_norm(commutator(Operator::diagonal(std::span<const double>(eig)), s)), 1.0, 1e-12);
}

TEST(Circle, SparseMatchesDense) {
  const CircleSpec spec = CircleSpec::from_terms({{0, 1.0}, {2, Complex(0.5, 0.25)}, {-2, Complex(0.5, -0.25)}}, 16);
  EXPECT_EQ(gen::max_diff(to_dense(toeplitz_multiplier<SparseOperator>(spec)), toeplitz_multiplier<Operator>(spec)), 0.0);
}

TEST(Circle, SpecValidation) {
  EXPECT_THROW(build_circle<Operator>(CircleSpec::from_terms({{1, 1.0}}, 16)), std::invalid_argument);
  EXPECT_THROW(build_circle<Operator>(CircleSpec::from_terms({{0, 1.0}, {3, 0.5}, {-3, 0.5}}, 8)), std::invalid_argument);
  CircleSpec even;
  even.fourier = {1.0, 1.0};
  EXPECT_THROW(build_circle<Operator>(even), std::invalid_argument);
}

TEST(Circle, ExpectedTrace) {
  EXPECT_EQ(circle_expected_trace(CircleSpec::from_terms({{0, 1.0}}, 16)), 2.0);
  EXPECT_EQ(circle_expected_trace(CircleSpec::from_terms({{1, 0.5}, {-1, 0.5}}, 16)), 0.0);
  EXPECT_EQ(circle_expected_trace(CircleSpec::from_terms({{0, 1.0}, {1, 0.5}, {-1, 0.5}}, 16)), 2.0);
}

TEST(Circle, WideSymbolTraceAndHypertrace) {
  const CircleSpec spec = CircleSpec::from_terms(
      {{0, 1.5}, {3, 0.25}, {-3, 0.25}, {4, Complex(0.0, -0.5)}, {-4, Complex(0.0, 0.5)}}, 8192);
  const KCycle<SparseOperator> kc = build_circle<SparseOperator>(spec);
  const SparseOperator& f = kc.generators().front().op;
  EXPECT_NEAR(phi(kc, f).value.real(), circle_expected_trace(spec), 0.02 * circle_expected_trace(spec));
  EXPECT_LE(std::abs(hypertrace_defect(kc, f, random_contraction(kc.dim(), 11)).value), 0.01);
  EXPECT_TRUE(verify_kcycle(kc).summable);
}

// --- forms ------------------------------------------------------------------

TEST(FormWord, DegreeSpellingAndConcatenation) {
  const FormWord w = word({"a", "a*"}, "a");
  EXPECT_EQ(w.degree(), 2);
  EXPECT_EQ(w.to_string(), "a da da*");
  EXPECT_EQ(word({}).to_string(), "1");
  EXPECT_EQ((w + word({"a"})).letters, (std::vector<std::string>{"a", "a*", "a"}));
  EXPECT_THROW(word({"a"}) + w, std::invalid_argument);
}

TEST(FormSum, MergesAndDropsZeros) {
  FormSum x{{1.0, word({"a"})}, {2.0, word({"a"})}, {1.0, word({"a*"})}};
  EXPECT_EQ(x.terms().size(), 2u);
  EXPECT_EQ(x.terms().front().coeff, Complex(3.0));
  x.add(-1.0, word({"a*"}));
  EXPECT_EQ(x.terms().size(), 1u);
  EXPECT_TRUE((Complex(0.0) * x).empty());
}

TEST(Represent, Examples) {
  const auto m = dense_model(1.0, 2.0, 16);
  EXPECT_EQ(gen::max_diff(represent(m.kcycle, word({}, "a")), m.a), 0.0);
  // [D,a*] = (μ−λ) m21 ⊗ 1, so a[D,a*] = (μ−λ) m11 ⊗ b^{-1}.
  EXPECT_LE(gen::max_diff(represent(m.kcycle, word({"a*"}, "a")), block_element<Operator>(m.spec, 1, 1, -1.0)), 1e-15);
  EXPECT_LE(gen::max_diff(represent(m.kcycle, word({"a", "a*"})), Complex(-1.0) * block_element<Operator>(m.spec, 1, 1, 0.0)),
            1e-15);
  EXPECT_THROW(represent(m.kcycle, word({"c"})), std::out_of_range);
}

TEST(Represent, MultiplicativeOverConcatenation) {
  const std::vector<std::string> refs{"a", "a*", "x12^1", "x22^0", "x11^2*"};
  const auto m = dense_model(1.0, 2.5, 16);
  for (int c = 0; c < 40; ++c) {
    gen::Source src(5200 + static_cast<std::uint64_t>(c));
    const auto pick = [&](Index len) {
      std::vector<std::string> out;
      for (Index i = 0; i < len; ++i) out.push_back(refs[static_cast<std::size_t>(src.integer(0, 4))]);
      return out;
    };
    const FormWord w1 = word(pick(src.integer(0, 3)), refs[static_cast<std::size_t>(src.integer(0, 4))]);
    const FormWord w2 = word(pick(src.integer(0, 3)));
    const Operator joined = represent(m.kcycle, w1 + w2);
    const Operator product = represent(m.kcycle, w1) * represent(m.kcycle, w2);
    EXPECT_LE(gen::max_diff(joined, product), 1e-13 * (1.0 + max_abs_entry(product))) << "case " << c;
  }
}

TEST(Tau, ZeroSum) {
  const auto m = sparse_model(1.0, 2.0, 256);
  for (const auto& [n, v] : tau(m.kcycle, FormSum{}).table) EXPECT_EQ(v, Complex(0.0));
}

TEST(Tau, CommutatorOfDifferentials) {
  const auto m = sparse_model(1.0, 2.0, 8192);
  const TraceEstimate e = tau(m.kcycle, differential_commutator());
  EXPECT_NEAR(e.value.real(), -expected_form_defect(m.spec), 5e-3);
  EXPECT_NEAR(std::abs(e.value), 0.5, 5e-3);
  const auto equal = sparse_model(1.0, 1.0, 8192);
  EXPECT_LE(std::abs(tau(equal.kcycle, differential_commutator()).value), 1e-6);
}

TEST(Tau, Linear) {
  const auto m = dense_model(1.0, 2.0, 32);
  const FormSum x{{1.0, word({"a"}, "a*")}, {Complex(0.0, 2.0), word({"x12^0"})}};
  const FormSum y{{-0.5, word({"a", "a*"})}, {1.0, word({}, "x21^1")}};
  for (int c = 0; c < 10; ++c) {
    gen::Source src(5300 + static_cast<std::uint64_t>(c));
    const Complex z = src.complex();
    const TraceEstimate l = tau(m.kcycle, z * x + y);
    const TraceEstimate tx = tau(m.kcycle, x), ty = tau(m.kcycle, y);
    for (std::size_t i = 0; i < l.table.size(); ++i)
      EXPECT_NEAR(std::abs(l.table[i].second - (z * tx.table[i].second + ty.table[i].second)), 0.0, 1e-12);
  }
}

// --- monomials and the survey -----------------------------------------------

TEST(Monomials, AlphabetAndDedup) {
  const auto m = dense_model(1.0, 2.0, 16);
  const MonomialSet<Operator> one = enumerate_monomials(m.kcycle, 1);
  ASSERT_EQ(one.monomials.size(), 4u);
  EXPECT_EQ(one.monomials[2].spelling(), "[D,a]");
  const MonomialSet<Operator> two = enumerate_monomials(m.kcycle, 2);
  EXPECT_LE(two.monomials.size(), 20u);
  EXPECT_GT(two.monomials.size(), 4u);
  EXPECT_NE(std::find(two.collisions.begin(), two.collisions.end(), std::pair<std::string, std::string>{"a·a", "0"}),
            two.collisions.end());
  for (const auto& mono : two.monomials) EXPECT_NE(mono.spelling(), "a·a");
  EXPECT_THROW(enumerate_monomials(m.kcycle, 0), std::invalid_argument);
}

TEST(Survey, DistinctModuli) {
  const auto m = sparse_model(1.0, 2.0, 8192);
  const SurveyReport r = trace_defect_survey(m.kcycle, 2);
  EXPECT_NEAR(r.max_defect, 0.5, 5e-3);
  EXPECT_EQ(r.worst_pair, (std::pair<std::string, std::string>{"[D,a]", "[D,a*]"}));
  const Json j = r;
  EXPECT_EQ(j.at("L"), 2);
  EXPECT_EQ(j.at("worst_pair")[0], "[D,a]");
  EXPECT_EQ(j.at("defect_table").size(), r.defect_table.size());
}

TEST(Survey, EqualModuli) {
  for (const double mu : {1.0, -1.0}) {
    const SurveyReport r = trace_defect_survey(sparse_model(1.0, mu, 8192).kcycle, 2);
    EXPECT_LE(r.max_defect, 1e-3) << "mu=" << mu;
  }
}

TEST(Survey, SelfPairIsExactlyZero) {
  const auto m = dense_model(1.0, 2.0, 32);
  for (const auto& mono : enumerate_monomials(m.kcycle, 2).monomials)
    for (const auto& [n, v] : hypertrace_defect(m.kcycle, mono.op, mono.op).table) EXPECT_EQ(v, Complex(0.0));
}

TEST(Survey, SeparatesRegularFromIrregular) {
  const double bad = trace_defect_survey(sparse_model(1.0, 2.0, 4096).kcycle, 2).max_defect;
  double worst_regular = 0.0;
  for (const double mu : {1.0, -1.0}) {
    const double small = trace_defect_survey(sparse_model(1.0, mu, 1024).kcycle, 2).max_defect;
    const double large = trace_defect_survey(sparse_model(1.0, mu, 4096).kcycle, 2).max_defect;
    EXPECT_LE(large, small + 1e-15);
    worst_regular = std::max(worst_regular, large);
  }
  EXPECT_GE(bad, 10.0 * worst_regular);
  EXPECT_GE(bad, 0.49);
}

TEST(Survey, LengthThreeAndGuard) {
  const auto m = sparse_model(1.0, 2.0, 1024);
  const SurveyReport r = trace_defect_survey(m.kcycle, 3);
  EXPECT_EQ(r.length, 3);
  EXPECT_GE(r.max_defect, trace_defect_survey(m.kcycle, 2).max_defect - 1e-12);
  EXPECT_THROW(trace_defect_survey(m.kcycle, 4), std::invalid_argument);
}
