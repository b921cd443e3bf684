#ifndef KTRACE_JSON_HPP
#define KTRACE_JSON_HPP

// JSON views of the report types. Complex numbers are written as [re, im].

#include <json.hpp>

#include "ktrace/dixmier.hpp"
#include "ktrace/forms.hpp"
#include "ktrace/kcycle.hpp"
#include "ktrace/models.hpp"
#include "ktrace/spectral.hpp"

namespace ktrace {

using Json = nlohmann::json;

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline Json table_json(const TraceEstimate::Table& t) {
  Json out = Json::array();
  for (const auto& [n, v] : t) out.push_back(Json::array({n, complex_json(v)}));
  return out;
}

inline void to_json(Json& j, const TraceEstimate& e) {
  j = Json{{"value", complex_json(e.value)},
           {"estimator", to_string(e.estimator)},
           {"table", table_json(e.table)},
           {"ratio_table", table_json(e.companion)},
           {"stability", e.stability},
           {"omega_dependent", e.omega_dependent}};
  if (!e.note.empty()) j["note"] = e.note;
}

inline void to_json(Json& j, const SingularProfile& p) {
  j = Json{{"mu", p.mu}, {"sigma", p.sigma}};
}

inline void to_json(Json& j, const WeylHolderReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back(Json{{"N", row.n}, {"lhs", row.lhs}, {"weyl", row.weyl}, {"rhs", row.rhs}, {"margin", row.margin}});
  j = Json{{"p", r.p}, {"q", r.q}, {"weyl_holds", r.weyl_holds}, {"holds", r.holds}, {"rows", rows}};
}

inline void to_json(Json& j, const HolderReport& r) {
  j = Json{{"p", r.p},
           {"q", std::isinf(r.q) ? Json("inf") : Json(r.q)},
           {"lhs", r.lhs},
           {"rhs", r.rhs},
           {"tolerance", r.tolerance},
           {"holds", r.holds},
           {"lhs_estimate", r.lhs_estimate}};
}

inline void to_json(Json& j, const VerifyReport& r) {
  Json norms = Json::object();
  for (const auto& [name, v] : r.commutator_norms) norms[name] = v;
  Json table = Json::array();
  for (const auto& [n, v] : r.summability_table) table.push_back(Json::array({n, v}));
  j = Json{{"hermitian_residual", r.hermitian_residual},
           {"min_abs_eigenvalue", r.min_abs_eigenvalue},
           {"commutator_norms", norms},
           {"summability_table", table},
           {"monotone_tail", r.monotone_tail},
           {"relative_stability", r.relative_stability},
           {"summable", r.summable}};
}

inline void to_json(Json& j, const FractionalRatioReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back(Json{{"dim", row.dim}, {"fractional", row.fractional}, {"dirac", row.dirac}, {"ratio", row.ratio}});
  j = Json{{"r", r.r}, {"rows", rows}, {"vacuous", r.vacuous}, {"bounded", r.bounded}, {"bound_factor", r.bound_factor}};
}

inline void to_json(Json& j, const RegularityReport& r) {
  Json series = Json::array();
  for (const auto& s : r.series) {
    Json norms = Json::array();
    for (const auto& [m, v] : s.norms) norms.push_back(Json::array({m, v}));
    series.push_back(Json{{"name", s.name}, {"j", s.j}, {"norms", norms}, {"growing", s.growing}});
  }
  j = Json{{"n_max", r.n_max},
           {"dims", r.dims},
           {"series", series},
           {"level", r.level},
           {"a2_regular", r.a2_regular},
           {"growth_threshold", kGrowthThreshold},
           {"note", "delta^2-growth diagnostic across spectral truncations; the A2 graph-norm core is not checkable at finite size"}};
}

inline void to_json(Json& j, const SurveyReport& r) {
  Json table = Json::array();
  for (const auto& e : r.defect_table) table.push_back(Json{{"x", e.x}, {"y", e.y}, {"defect", e.defect}});
  Json collisions = Json::array();
  for (const auto& [dropped, kept] : r.collisions) collisions.push_back(Json::array({dropped, kept}));
  j = Json{{"L", r.length},
           {"schedule", r.schedule},
           {"max_defect", r.max_defect},
           {"worst_pair", Json::array({r.worst_pair.first, r.worst_pair.second})},
           {"worst_estimate", r.worst_estimate},
           {"defect_table", table},
           {"collisions", collisions}};
}

inline void to_json(Json& j, const GeneratorCommutatorCheck& c) {
  j = Json{{"residual_direct", c.residual_direct},
           {"residual_printed", c.residual_printed},
           {"norm", c.norm},
           {"matching", c.matching}};
}

}  // namespace ktrace

#endif  // KTRACE_JSON_HPP
