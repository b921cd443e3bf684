#ifndef KTRACE_EXPERIMENT_HPP
#define KTRACE_EXPERIMENT_HPP

// Batch driver: config parsing, named checks, JSON reports and CSV tables.
//
// Every check runs on the structured (sparse) representation. Reports are
// byte-identical for a fixed config and seed apart from the "metadata" field.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ktrace/forms.hpp"
#include "ktrace/json.hpp"
#include "ktrace/kcycle.hpp"
#include "ktrace/models.hpp"
#include "ktrace/random.hpp"

namespace ktrace {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names{"verify",  "hypertrace",  "eq12",       "holder",
                                              "lemma14", "forms_survey", "regularity", "circle_trace"};
  return names;
}

struct ExperimentConfig {
  std::string model = "counterexample";
  CounterexampleSpec counterexample;
  CircleSpec circle;
  std::vector<Index> schedule;
  std::vector<std::string> checks;
  std::uint64_t seed = 1;
  std::string output = "reports";
  int survey_length = 2;

  [[nodiscard]] Index dim() const { return model == "circle" ? 2 * circle.modes : 2 * counterexample.n; }

  /// Reject unknown checks and schedules that leave the truncation.
  void validate() const {
    if (model != "counterexample" && model != "circle") throw ConfigError("unknown model '" + model + "'");
    try {
      if (model == "circle")
        circle.validate();
      else
        counterexample.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      if (schedule[i] < 1) throw ConfigError("schedule entries must be positive");
      if (i > 0 && schedule[i] <= schedule[i - 1]) throw ConfigError("schedule must be strictly increasing");
    }
    if (!schedule.empty() && 2 * schedule.back() > dim())
      throw ConfigError("schedule maximum " + std::to_string(schedule.back()) + " exceeds dim/2 = " +
                        std::to_string(dim() / 2));
    for (const auto& c : checks)
      if (std::find(known_checks().begin(), known_checks().end(), c) == known_checks().end())
        throw ConfigError("unknown check '" + c + "'");
    if (survey_length < 2 || survey_length > 3) throw ConfigError("survey_length must be 2 or 3");
  }

  /// Normalized echo; the output path is left out so reports do not depend on it.
  [[nodiscard]] Json echo() const {
    Json j{{"model", model}, {"schedule", schedule}, {"checks", checks}, {"seed", seed}};
    if (model == "circle") {
      Json f = Json::array();
      for (const auto& c : circle.fourier) f.push_back(complex_json(c));
      j["fourier"] = f;
      j["modes"] = circle.modes;
    } else {
      j["lambda"] = counterexample.lambda;
      j["mu"] = counterexample.mu;
      j["d"] = counterexample.d;
      j["n"] = counterexample.n;
    }
    if (survey_length != 2) j["survey_length"] = survey_length;
    return j;
  }

  static ExperimentConfig from_json(const Json& j) {
    ExperimentConfig c;
    try {
      if (!j.is_object()) throw ConfigError("config must be a JSON object");
      if (!j.contains("model")) throw ConfigError("config needs a \"model\" field");
      c.model = j.at("model").get<std::string>();
      if (c.model == "circle") {
        if (!j.contains("fourier")) throw ConfigError("circle config needs \"fourier\"");
        for (const auto& v : j.at("fourier")) {
          if (v.is_number())
            c.circle.fourier.emplace_back(v.get<double>(), 0.0);
          else if (v.is_array() && v.size() == 2)
            c.circle.fourier.emplace_back(v[0].get<double>(), v[1].get<double>());
          else
            throw ConfigError("fourier entries must be numbers or [re, im] pairs");
        }
        c.circle.modes = j.value("modes", c.circle.modes);
      } else {
        c.counterexample.lambda = j.value("lambda", c.counterexample.lambda);
        c.counterexample.mu = j.value("mu", c.counterexample.mu);
        c.counterexample.d = j.value("d", c.counterexample.d);
        c.counterexample.n = j.value("n", c.counterexample.n);
      }
      c.schedule = j.value("schedule", c.schedule);
      c.checks = j.value("checks", c.checks);
      c.seed = j.value("seed", c.seed);
      c.output = j.value("output", c.output);
      c.survey_length = j.value("survey_length", c.survey_length);
    } catch (const Json::exception& e) {
      throw ConfigError(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
  }

  static ExperimentConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    Json j;
    try {
      in >> j;
    } catch (const Json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return from_json(j);
  }
};

/// One convergence table: N with its ratio and increment columns (either may be absent).
struct ConvergenceTable {
  struct Row {
    Index n;
    std::optional<double> ratio;
    std::optional<double> increment;
  };
  std::string name;
  std::vector<Row> rows;

  /// Real parts of an estimate's increment table merged with its ratio companion.
  static ConvergenceTable from_estimate(std::string name, const TraceEstimate& e) {
    ConvergenceTable t{std::move(name), {}};
    for (const auto& [n, v] : e.table) t.rows.push_back({n, std::nullopt, v.real()});
    for (const auto& [n, v] : e.companion)
      for (auto& row : t.rows)
        if (row.n == n) row.ratio = v.real();
    return t;
  }

  [[nodiscard]] std::string csv() const {
    std::ostringstream out;
    out << std::setprecision(17) << "N,ratio,increment\n";
    for (const auto& r : rows) {
      out << r.n << ',';
      if (r.ratio) out << *r.ratio;
      out << ',';
      if (r.increment) out << *r.increment;
      out << '\n';
    }
    return out.str();
  }

  [[nodiscard]] Json json() const {
    Json rows_json = Json::array();
    for (const auto& r : rows)
      rows_json.push_back(Json::array({r.n, r.ratio ? Json(*r.ratio) : Json(nullptr),
                                       r.increment ? Json(*r.increment) : Json(nullptr)}));
    return rows_json;
  }
};

struct CheckResult {
  std::string check;
  bool passed = false;
  std::string verdict;
  Json values = Json::object();
  std::vector<ConvergenceTable> tables;
};

// Thresholds applied by the checks.
inline constexpr double kVanishingTolerance = 1e-3;
inline constexpr double kHypertraceTolerance = 0.02;
inline constexpr double kCircleHypertraceTolerance = 0.01;
inline constexpr double kCircleTraceRelative = 0.02;
inline constexpr double kTracePropertyTolerance = 1e-2;
inline constexpr double kHolderEqualityRelative = 0.01;
inline constexpr int kHypertraceSamples = 20;
inline constexpr int kWeylHolderSamples = 1000;

class Experiment {
 public:
  using Op = SparseOperator;

  explicit Experiment(ExperimentConfig config) : config_(std::move(config)) {
    config_.validate();
    if (config_.model == "circle") {
      circle_.emplace(build_circle<Op>(config_.circle));
    } else {
      counterexample_.emplace(build_counterexample<Op>(config_.counterexample));
    }
    if (!config_.schedule.empty() && 2 * config_.schedule.back() > kcycle().complete_count())
      throw ConfigError("schedule maximum " + std::to_string(config_.schedule.back()) +
                        " looks past the resolved part of the spectrum (" +
                        std::to_string(kcycle().complete_count()) + " eigenvalues)");
  }

  [[nodiscard]] const ExperimentConfig& config() const { return config_; }
  [[nodiscard]] const KCycle<Op>& kcycle() const { return circle_ ? *circle_ : counterexample_->kcycle; }

  CheckResult run(const std::string& check) const {
    CheckResult r;
    r.check = check;
    if (check == "verify") verify(r);
    else if (check == "hypertrace") hypertrace(r);
    else if (check == "eq12") eq12(r);
    else if (check == "holder") holder(r);
    else if (check == "lemma14") lemma14(r);
    else if (check == "forms_survey") forms_survey(r);
    else if (check == "regularity") regularity(r);
    else if (check == "circle_trace") circle_trace(r);
    else throw ConfigError("unknown check '" + check + "'");
    return r;
  }

  /// Named estimates for the convergence subcommand.
  static const std::vector<std::string>& quantities() {
    static const std::vector<std::string> names{"tau_b_minus_d", "abs_dirac_minus_d", "zero",        "phi_identity",
                                                "phi_generator", "form_defect",       "commutator_vanishing"};
    return names;
  }

  TraceEstimate quantity(const std::string& name) const {
    const auto& kc = kcycle();
    const auto s = schedule();
    const Op& g = kc.generators().front().op;
    if (name == "tau_b_minus_d") {
      // b^{-d} = diag(1/k); for the circle, k runs over the modes.
      const Index n = circle_ ? config_.circle.modes : config_.counterexample.n;
      std::vector<double> mu(static_cast<std::size_t>(n));
      for (Index k = 1; k <= n; ++k) mu[static_cast<std::size_t>(k - 1)] = 1.0 / static_cast<double>(k);
      std::vector<Index> own(s.begin(), s.end());
      while (!own.empty() && 2 * own.back() > n) own.pop_back();
      if (own.empty()) own = default_schedule(n);
      return estimate_from_profile(SingularProfile::from_values(std::move(mu)), own);
    }
    if (name == "abs_dirac_minus_d") return dixmier_positive(kc.abs_power(-kc.d()), s);
    if (name == "zero") return phi(kc, Op::zero(kc.dim()), s);
    if (name == "phi_identity") return phi(kc, Op::identity(kc.dim()), s);
    if (name == "phi_generator") return phi(kc, g, s);
    if (name == "form_defect")
      return phi(kc, commutator(commutator(kc.dirac(), g), commutator(kc.dirac(), adjoint(g))), s);
    if (name == "commutator_vanishing") return commutator_vanishing(tractable(), tractable().generators().front().op);
    throw ConfigError("unknown quantity '" + name + "'");
  }

 private:
  [[nodiscard]] std::vector<Index> schedule() const { return kcycle().schedule(config_.schedule); }

  /// The model itself, or its compression onto kMaxDenseBlock modes when
  /// [|D|^{-d}, g] has a component too large for the dense and banded
  /// singular-value kernels.
  [[nodiscard]] const KCycle<Op>& tractable() const {
    if (!tractable_) {
      const auto& kc = kcycle();
      const Op weight = kc.abs_power(-kc.d());
      bool fits = true;
      for (const auto& g : kc.generators()) {
        const Op x = commutator(weight, g.op);
        for (const auto& c : components(x)) {
          if (static_cast<Index>(c.size()) <= kMaxDenseBlock) continue;
          const auto [kl, ku] = detail::bandwidths(x, c);
          fits = fits && kl + ku <= kMaxBandwidth;
        }
      }
      if (fits)
        tractable_.emplace(kc);
      else
        tractable_.emplace(Compression<Op>(kc, kMaxDenseBlock).kcycle(kc));
    }
    return *tractable_;
  }

  void verify(CheckResult& r) const {
    const auto& kc = kcycle();
    const VerifyReport v = verify_kcycle(kc);
    r.values["report"] = v;
    r.values["label"] = kc.label();
    bool ok = v.summable && v.hermitian_residual <= 1e-12 && v.min_abs_eigenvalue > 0.0;
    if (counterexample_) {
      const auto& m = *counterexample_;
      const double gap2 = (m.spec.lambda - m.spec.mu) * (m.spec.lambda - m.spec.mu);
      const double cf = closed_form_residual(m);
      const double dc = double_commutator_residual(m);
      const double a2 = operator_norm(m.a * m.a);
      Json gens = Json::object();
      bool gens_ok = true;
      for (Index i = 1; i <= 2; ++i)
        for (Index j = 1; j <= 2; ++j)
          for (int k = 0; k < 4; ++k) {
            const auto g = generator_commutator_residual(m, i, j, k);
            gens_ok = gens_ok && g.matching != "neither";
            gens["x" + std::to_string(i) + std::to_string(j) + "^" + std::to_string(k)] = g;
          }
      r.values["closed_form_residual"] = cf;
      r.values["double_commutator_residual"] = dc;
      r.values["a_squared_norm"] = a2;
      r.values["generator_commutators"] = gens;
      ok = ok && cf <= 1e-12 && dc <= 1e-12 * (1.0 + gap2) && a2 == 0.0 && gens_ok;
    }
    ConvergenceTable t{"summability", {}};
    for (const auto& [n, value] : v.summability_table) t.rows.push_back({n, value, std::nullopt});
    r.tables.push_back(std::move(t));
    r.passed = ok;
    r.verdict = ok ? "K-cycle verified (d+-summable)" : "K-cycle verification FAILS";
  }

  void hypertrace(CheckResult& r) const {
    const auto& kc = kcycle();
    const auto s = schedule();
    const double tol = circle_ ? kCircleHypertraceTolerance : kHypertraceTolerance;
    double worst = 0.0;
    Json per_generator = Json::object();
    for (const auto& g : kc.generators()) {
      std::vector<double> mean_inc(s.size(), 0.0), mean_ratio(s.size(), 0.0);
      Json defects = Json::array();
      for (int i = 0; i < kHypertraceSamples; ++i) {
        const Op t = random_contraction<Op>(kc.dim(), config_.seed + static_cast<std::uint64_t>(i));
        const TraceEstimate e = hypertrace_defect(kc, g.op, t, s);
        worst = std::max(worst, std::abs(e.value));
        defects.push_back(complex_json(e.value));
        for (std::size_t k = 0; k < s.size(); ++k) {
          mean_inc[k] += std::abs(e.table[k].second) / kHypertraceSamples;
          for (const auto& [n, v] : e.companion)
            if (n == s[k]) mean_ratio[k] += std::abs(v) / kHypertraceSamples;
        }
      }
      ConvergenceTable t{"mean_abs_defect_" + g.name, {}};
      for (std::size_t k = 0; k < s.size(); ++k)
        t.rows.push_back({s[k], s[k] >= 2 ? std::optional<double>(mean_ratio[k]) : std::nullopt, mean_inc[k]});
      per_generator[g.name] = Json{{"defects", defects},
                                   {"decreasing", s.size() < 2 || mean_inc.back() < mean_inc.front()}};
      r.tables.push_back(std::move(t));
    }
    r.values["max_abs_defect"] = worst;
    r.values["tolerance"] = tol;
    r.values["samples"] = kHypertraceSamples;
    r.values["generators"] = per_generator;
    r.passed = worst <= tol;
    r.verdict = r.passed ? "hypertrace property holds" : "hypertrace property FAILS";
  }

  void eq12(CheckResult& r) const {
    const auto& kc = tractable();
    const bool compressed = &kc != &kcycle() && kc.dim() != kcycle().dim();
    const auto s = compressed ? kc.schedule() : schedule();
    bool ok = true;
    for (const auto& g : kc.generators()) {
      const TraceEstimate full = commutator_vanishing(kc, g.op, s);
      Json entry{{"estimate", full}, {"value", std::abs(full.value)}};
      ok = ok && std::abs(full.value) <= kVanishingTolerance;
      // Same quantity on a quarter-size compression, to expose the decay.
      const Index quarter = kc.dim() / 4;
      if (quarter >= 8) {
        const KCycle<Op> small = Compression<Op>(kc, quarter).kcycle(kc);
        const TraceEstimate q = commutator_vanishing(small, small.generators().front().op);
        const double ratio = std::abs(q.value) / std::max(std::abs(full.value), 1e-300);
        entry["quarter_dim"] = quarter;
        entry["quarter_value"] = std::abs(q.value);
        entry["decrease_factor"] = ratio;
      }
      r.values[g.name] = entry;
      r.tables.push_back(ConvergenceTable::from_estimate("commutator_" + g.name, full));
    }
    r.values["tolerance"] = kVanishingTolerance;
    if (compressed) r.values["compressed_to"] = kc.dim();
    r.passed = ok;
    r.verdict = ok ? "tau(|[|D|^-d, a]|) vanishes" : "tau(|[|D|^-d, a]|) does not vanish";
  }

  void holder(CheckResult& r) const {
    const auto& kc = kcycle();
    const auto s = schedule();
    bool ok = true;
    Json family = Json::array();
    TraceEstimate first_lhs;
    for (const double p : {2.0, 3.0, 4.0}) {
      const double q = p / (p - 1.0);
      const HolderReport h = holder_check(kc.abs_power(-kc.d() / p), kc.abs_power(-kc.d() / q), p, q, s);
      const bool equal = std::abs(h.lhs - h.rhs) <= kHolderEqualityRelative * std::abs(h.rhs);
      ok = ok && h.holds && equal;
      if (family.empty()) first_lhs = h.lhs_estimate;
      Json entry = h;
      entry["equality_within_1pct"] = equal;
      family.push_back(entry);
    }
    r.values["equality_family"] = family;

    const auto& tk = tractable();
    const HolderReport bounded = holder_check_bounded(tk.abs_power(-tk.d()), tk.generators().front().op,
                                                      &tk == &kc ? std::span<const Index>(s) : std::span<const Index>());
    r.values["bounded_case"] = bounded;
    ok = ok && bounded.holds;

    Rng rng(config_.seed);
    int violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kWeylHolderSamples; ++i) {
      const Index n = 2 + rng.below(31);
      const double p = rng.uniform(1.1, 6.0);
      const double q = p / (p - 1.0);
      const Operator a = random_matrix(n, rng), b = random_matrix(n, rng);
      const WeylHolderReport w = check_weyl_holder(a, b, p, q);
      if (!w.holds) ++violations;
      for (const auto& row : w.rows) worst_margin = std::min(worst_margin, row.margin);
    }
    r.values["weyl_holder"] = Json{{"samples", kWeylHolderSamples}, {"violations", violations},
                                   {"min_margin", worst_margin}, {"slack", kWeylHolderSlack}};
    ok = ok && violations == 0;
    r.tables.push_back(ConvergenceTable::from_estimate("holder_lhs_p2", first_lhs));
    r.passed = ok;
    r.verdict = ok ? "Hölder inequalities hold" : "Hölder inequality FAILS";
  }

  void lemma14(CheckResult& r) const {
    const auto& kc = kcycle();
    std::vector<Index> dims;
    const Index top = std::min<Index>(kc.dim(), Index{1} << 14);
    for (Index m = std::min<Index>(256, std::max<Index>(4, top / 64)); m <= top; m *= 2) dims.push_back(m);
    bool ok = true;
    for (const auto& g : kc.generators()) {
      const FractionalRatioReport f = fractional_commutator_ratio(kc, g.op, 0.5, dims);
      ok = ok && (f.vacuous || f.bounded);
      r.values[g.name] = f;
    }
    r.passed = ok;
    r.verdict = ok ? "||[|D|^r, a]|| / ||[D, a]|| stays bounded" : "fractional commutator ratio grows";
  }

  void forms_survey(CheckResult& r) const {
    const auto& kc = kcycle();
    const auto s = schedule();
    const SurveyReport sv = trace_defect_survey(kc, config_.survey_length, s);
    r.values = sv;
    r.values["tolerance"] = kTracePropertyTolerance;
    if (counterexample_) r.values["expected_form_defect"] = expected_form_defect(counterexample_->spec);
    const std::string g = kc.generators().front().name;
    const FormSum x{{1.0, FormWord{std::nullopt, {g, g + "*"}}}, {-1.0, FormWord{std::nullopt, {g + "*", g}}}};
    r.values["tau_commutator_of_differentials"] = tau(kc, x, s);
    r.tables.push_back(ConvergenceTable::from_estimate("worst_pair", sv.worst_estimate));
    r.passed = sv.max_defect <= kTracePropertyTolerance;
    r.verdict = r.passed ? "trace property holds" : "trace property FAILS";
  }

  void regularity(CheckResult& r) const {
    const auto& kc = kcycle();
    std::vector<Index> dims;
    const Index top = std::min<Index>(kc.dim(), Index{1} << 14);
    for (Index m = std::min<Index>(256, std::max<Index>(4, top / 64)); m <= top; m *= 2) dims.push_back(m);
    bool ok = true;
    for (const auto& g : kc.generators()) {
      const RegularityReport rep = regularity_profile(kc, g.op, 2, dims);
      ok = ok && rep.a2_regular;
      r.values[g.name] = rep;
    }
    r.passed = ok;
    r.verdict = ok ? "A2-regular (delta^2 bounded)" : "not A2-regular (delta growth detected)";
  }

  void circle_trace(CheckResult& r) const {
    if (!circle_) throw ConfigError("check circle_trace needs the circle model");
    const auto& kc = kcycle();
    const auto s = schedule();
    const Op& f = kc.generators().front().op;
    const TraceEstimate e = phi(kc, f, s);
    const double expected = circle_expected_trace(config_.circle);
    const double tol = kCircleTraceRelative * std::max(std::abs(expected), 1.0);
    const TraceEstimate h = hypertrace_defect(kc, f, random_contraction<Op>(kc.dim(), config_.seed), s);
    r.values["phi"] = e;
    r.values["expected"] = expected;
    r.values["tolerance"] = tol;
    r.values["hypertrace_defect"] = std::abs(h.value);
    r.values["hypertrace_tolerance"] = kCircleHypertraceTolerance;
    r.tables.push_back(ConvergenceTable::from_estimate("phi_f", e));
    r.passed = std::abs(e.value.real() - expected) <= tol && std::abs(e.value.imag()) <= tol &&
               std::abs(h.value) <= kCircleHypertraceTolerance;
    r.verdict = r.passed ? "trace theorem instance holds" : "trace theorem instance FAILS";
  }

  ExperimentConfig config_;
  std::optional<CounterexampleModel<Op>> counterexample_;
  std::optional<KCycle<Op>> circle_;
  mutable std::optional<KCycle<Op>> tractable_;
};

// ---------------------------------------------------------------------------
// Report files

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline Json report_json(const ExperimentConfig& config, const CheckResult& r, double runtime_ms) {
  Json tables = Json::object();
  for (const auto& t : r.tables) tables[t.name] = t.json();
  return Json{{"schema", 1},
              {"config_echo", config.echo()},
              {"check", r.check},
              {"verdict", r.verdict},
              {"passed", r.passed},
              {"values", r.values},
              {"tables", tables},
              {"metadata", Json{{"runtime_ms", runtime_ms}, {"timestamp", utc_timestamp()}}}};
}

/// Runs every configured check, writes <out>/<check>.json and
/// <out>/<check>_<table>.csv, and returns the exit status.
///
/// Status 0 when every check passes (with expect_fail: when every check
/// fails), 1 otherwise, 2 on configuration errors.
inline int run_experiment(const ExperimentConfig& config, bool expect_fail, std::ostream& log) {
  try {
    const Experiment ex(config);
    const std::filesystem::path out(config.output);
    if (!config.checks.empty()) std::filesystem::create_directories(out);
    bool all_pass = true, all_fail = true;
    for (const auto& check : config.checks) {
      const auto start = std::chrono::steady_clock::now();
      const CheckResult r = ex.run(check);
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      std::ofstream(out / (check + ".json")) << report_json(config, r, ms).dump(2) << '\n';
      for (const auto& t : r.tables) std::ofstream(out / (check + "_" + t.name + ".csv")) << t.csv();
      log << (r.passed ? "PASS " : "FAIL ") << check << ": " << r.verdict << '\n';
      all_pass = all_pass && r.passed;
      all_fail = all_fail && !r.passed;
    }
    if (expect_fail) return all_fail ? 0 : 1;
    return all_pass ? 0 : 1;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::logic_error& e) {
    // Invalid arguments and out-of-range schedules originate in the config.
    log << "config error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace ktrace

#endif  // KTRACE_EXPERIMENT_HPP
