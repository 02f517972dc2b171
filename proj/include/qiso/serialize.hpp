#pragma once

// JSON and CSV encodings of spectra, reports and invariants. Every JSON
// document carries "schema": "1".

#include <iomanip>
#include <ostream>
#include <string>

#include "json.hpp"

#include "qiso/invariants.hpp"
#include "qiso/spectrum.hpp"

namespace qiso {

inline constexpr const char* kSchemaVersion = "1";

using Json = nlohmann::ordered_json;

inline Json to_json(const BoundaryCondition& bc) {
  Json j;
  j["kind"] = to_string(bc.kind);
  switch (bc.kind) {
    case BcKind::dirichlet: break;
    case BcKind::robin:
      j["h"] = bc.h;
      j["H"] = bc.H;
      break;
    case BcKind::general:
      j["a"] = bc.a;
      j["b"] = bc.b;
      j["c"] = bc.c;
      j["d"] = bc.d;
      break;
  }
  return j;
}

inline BoundaryCondition boundary_condition_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "dirichlet") return BoundaryCondition::dirichlet();
  if (kind == "robin") return BoundaryCondition::robin(j.at("h").get<double>(), j.at("H").get<double>());
  if (kind == "general") {
    return BoundaryCondition::general(j.at("a").get<double>(), j.at("b").get<double>(), j.at("c").get<double>(),
                                      j.at("d").get<double>());
  }
  throw InvalidArgument("unknown boundary condition kind '" + kind + "'");
}

inline Json to_json(const Spectrum& s) {
  Json j;
  j["schema"] = kSchemaVersion;
  j["bc"] = to_json(s.bc);
  j["index_offset"] = s.index_offset;
  j["tolerance"] = s.tolerance;
  j["eigenvalues"] = s.eigenvalues;
  return j;
}

inline Spectrum spectrum_from_json(const Json& j) {
  Spectrum s;
  s.bc = boundary_condition_from_json(j.at("bc"));
  s.index_offset = j.value("index_offset", s.bc.index_offset());
  s.tolerance = j.value("tolerance", 0.0);
  s.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
  return s;
}

/// CSV with header "index,lambda".
inline void write_spectrum_csv(std::ostream& out, const Spectrum& s) {
  out << "index,lambda\n" << std::setprecision(17);
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << static_cast<int>(i) + s.index_offset << ',' << s.eigenvalues[i] << '\n';
  }
}

inline Json to_json(const CheckReport& c) {
  Json j;
  j["check"] = c.check;
  j["pass"] = c.pass;
  j["lhs"] = c.lhs;
  j["rhs"] = c.rhs;
  j["tolerance"] = c.tolerance;
  return j;
}

inline Json to_json(const HeatExpansion& h) {
  Json j;
  j["c_neg_half"] = h.c_neg_half;
  j["c_0"] = h.c_0;
  j["c_half"] = h.c_half;
  j["c_1"] = h.c_1;
  j["c_three_half"] = h.c_three_half;
  return j;
}

inline Json to_json(const SpectralCoordinates& sc) {
  Json j;
  j["schema"] = kSchemaVersion;
  j["C"] = sc.C;
  j["b"] = sc.b;
  j["kappa"] = sc.kappa;
  return j;
}

inline Json to_json(const RelativeDeterminant& d) {
  Json j;
  j["value"] = d.value;
  j["log_value"] = d.log_value;
  j["k"] = d.k;
  j["lambda_k_p"] = d.lambda_k_p;
  j["lambda_k_q"] = d.lambda_k_q;
  return j;
}

}  // namespace qiso
