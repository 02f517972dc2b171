#pragma once

// Command-line front end. `parse_args` turns argv into a RunConfig, `run`
// executes it. Results go to stdout (or --out); failures print an error
// document on stderr and map to exit codes 2 (usage), 3 (numerical) and
// 4 (verification).

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qiso/darboux.hpp"
#include "qiso/error.hpp"
#include "qiso/invariants.hpp"
#include "qiso/potential.hpp"
#include "qiso/serialize.hpp"
#include "qiso/spectrum.hpp"

namespace qiso::cli {

enum class Command { spectrum, quasi, darboux, heat, det, coords, bc_sweep, verify };
enum class Format { json, csv };

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitVerification = 4;

inline constexpr int kMaxEigenvalues = 500;
inline constexpr double kMaxShift = 1e4;
inline constexpr const char* kThreadsEnv = "QISO_THREADS";

inline const char* to_string(Command c) {
  switch (c) {
    case Command::spectrum: return "spectrum";
    case Command::quasi: return "quasi";
    case Command::darboux: return "darboux";
    case Command::heat: return "heat";
    case Command::det: return "det";
    case Command::coords: return "coords";
    case Command::bc_sweep: return "bc-sweep";
    case Command::verify: return "verify";
  }
  return "?";
}

struct RunConfig {
  Command command = Command::spectrum;
  std::string q_expr;  // exactly one of q_expr / q_csv
  std::string q_csv;
  std::string bc = "dirichlet";  // dirichlet | neumann | robin | general | family
  double h = 0.0, H = 0.0;
  double a = 1.0, b = 0.0, c = 1.0, d = 0.0;
  double theta = std::numbers::pi / 4;
  int n = 1;
  double t = 0.0;  // eigenvalue shift
  int m = 0;       // 0: command default
  double mu = 0.0;
  double g0 = 1.0, dg0 = 0.0;
  std::vector<double> t_grid;  // heat times; empty: default grid
  int theta_grid = 16;
  int nodes = 1025;
  std::string out;
  std::optional<Format> format;
  std::string pair;  // verify: directory written by `quasi --out`
  std::string p_csv; // verify: stored transformed potential
  int threads = 1;
};

/// 13 points, logarithmic over [1e-4, 1].
inline std::vector<double> default_t_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 12; ++i) g.push_back(std::pow(10.0, -4.0 + i / 3.0));
  return g;
}

inline int default_depth(Command c) {
  switch (c) {
    case Command::spectrum: return 10;
    case Command::quasi:
    case Command::det:
    case Command::verify: return 25;
    case Command::darboux: return 15;
    case Command::coords: return 20;
    case Command::bc_sweep: return 6;
    case Command::heat: return 0;  // chosen from the tail bound
  }
  return 10;
}

inline void validate(const RunConfig& cfg) {
  const bool has_pair = cfg.command == Command::verify && !cfg.pair.empty();
  if (!cfg.q_expr.empty() && !cfg.q_csv.empty()) throw InvalidArgument("give exactly one of --q and --q-csv");
  if (cfg.q_expr.empty() && cfg.q_csv.empty() && !has_pair) throw InvalidArgument("a potential is required (--q or --q-csv)");
  if (cfg.m < 0 || cfg.m > kMaxEigenvalues) {
    throw InvalidArgument("--m must lie in [1, " + std::to_string(kMaxEigenvalues) + "]");
  }
  if (!std::isfinite(cfg.t) || std::abs(cfg.t) > kMaxShift) throw InvalidArgument("|--t| must not exceed 1e4");
  if (cfg.n < 1) throw InvalidArgument("--n must be >= 1");
  if (cfg.theta_grid < 1 || cfg.theta_grid > 1000) throw InvalidArgument("--theta-grid must lie in [1, 1000]");
  if (cfg.nodes < 17 || cfg.nodes % 2 == 0 || cfg.nodes > 1'000'001) {
    throw InvalidArgument("--nodes must be odd and at least 17");
  }
  for (double t : cfg.t_grid) {
    if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("t-grid values must be positive");
  }
  if (cfg.threads < 1) throw InvalidArgument("thread count must be >= 1");
}

/// Accepts a comma-separated list or "log:a:b:n".
inline std::vector<double> parse_t_grid(const std::string& text) {
  std::vector<double> out;
  auto number = [](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw InvalidArgument("bad number '" + s + "' in --t-grid");
    return v;
  };
  if (text.rfind("log:", 0) == 0) {
    std::vector<std::string> parts;
    std::stringstream ss(text.substr(4));
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(p);
    if (parts.size() != 3) throw InvalidArgument("--t-grid log form is log:a:b:n");
    const double a = number(parts[0]), b = number(parts[1]);
    const int k = static_cast<int>(number(parts[2]));
    if (!(a > 0.0) || !(b > 0.0) || k < 1) throw InvalidArgument("--t-grid log form needs a, b > 0 and n >= 1");
    for (int i = 0; i < k; ++i) {
      out.push_back(k == 1 ? a : std::exp(std::log(a) + (std::log(b) - std::log(a)) * i / (k - 1)));
    }
    return out;
  }
  std::stringstream ss(text);
  std::string p;
  while (std::getline(ss, p, ',')) out.push_back(number(p));
  if (out.empty()) throw InvalidArgument("--t-grid is empty");
  return out;
}

namespace detail {

inline Potential load_potential(const RunConfig& cfg) {
  if (!cfg.q_csv.empty()) return read_potential_csv(cfg.q_csv);
  return parse_potential(cfg.q_expr);
}

inline Json potential_source(const RunConfig& cfg) {
  Json j;
  if (!cfg.q_csv.empty()) {
    j["csv"] = cfg.q_csv;
  } else {
    j["expression"] = cfg.q_expr;
  }
  return j;
}

inline BoundaryCondition boundary_condition(const RunConfig& cfg) {
  if (cfg.bc == "dirichlet") return BoundaryCondition::dirichlet();
  if (cfg.bc == "neumann") return BoundaryCondition::neumann();
  if (cfg.bc == "robin") return BoundaryCondition::robin(cfg.h, cfg.H);
  if (cfg.bc == "general") return BoundaryCondition::general(cfg.a, cfg.b, cfg.c, cfg.d);
  if (cfg.bc == "family") return BoundaryCondition::cos_sin_family(cfg.theta);
  throw InvalidArgument("unknown --bc '" + cfg.bc + "'");
}

inline int depth(const RunConfig& cfg) { return cfg.m > 0 ? cfg.m : default_depth(cfg.command); }

inline EigenOptions eigen_options(const RunConfig& cfg) {
  EigenOptions o;
  o.threads = cfg.threads;
  return o;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline std::string spectrum_text(const Spectrum& s, Format f) {
  if (f == Format::csv) {
    std::ostringstream os;
    write_spectrum_csv(os, s);
    return os.str();
  }
  return dump(to_json(s));
}

/// Files produced by one run. Nothing touches the disk until commit(); if
/// a write fails midway every file already written is removed again.
class Artifacts {
 public:
  void add(std::filesystem::path path, std::string content) { pending_.push_back({std::move(path), std::move(content)}); }
  bool empty() const { return pending_.empty(); }

  void commit() {
    std::vector<std::filesystem::path> written;
    std::vector<std::filesystem::path> made_dirs;
    try {
      for (const auto& [path, content] : pending_) {
        const auto dir = path.parent_path();
        if (!dir.empty() && !std::filesystem::exists(dir)) {
          std::filesystem::create_directories(dir);
          made_dirs.push_back(dir);
        }
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw InvalidArgument("cannot write " + path.string());
        written.push_back(path);
        f << content;
        f.close();
        if (!f) throw InvalidArgument("cannot write " + path.string());
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& p : written) std::filesystem::remove(p, ec);
      for (auto it = made_dirs.rbegin(); it != made_dirs.rend(); ++it) std::filesystem::remove(*it, ec);
      throw;
    }
  }

 private:
  struct Item {
    std::filesystem::path path;
    std::string content;
  };
  std::vector<Item> pending_;
};

/// Output of a command: a primary document (stdout or --out) plus extra files.
struct Output {
  std::string primary;
  Artifacts files;
  bool verified = true;
};

inline Json check_list_json(const std::vector<CheckReport>& checks) {
  Json arr = Json::array();
  for (const auto& c : checks) arr.push_back(to_json(c));
  return arr;
}

inline bool all_pass(const std::vector<CheckReport>& checks) {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

inline CheckReport positivity_check(std::string name, double value) { return {std::move(name), value > 0.0, value, 0.0, 0.0}; }

/// Row-by-row comparison λ_m(p) against λ_m(q) + t δ_{mn}.
struct MatchTable {
  Json rows = Json::array();
  double worst = 0.0;
};

inline MatchTable match_table(const Spectrum& spec_q, const Spectrum& spec_p, int n, double t, double tol) {
  MatchTable mt;
  for (int m = spec_q.index_offset; m <= spec_q.last_index(); ++m) {
    const double expected = spec_q.at(m) + (m == n ? t : 0.0);
    const double diff = std::abs(spec_p.at(m) - expected);
    mt.worst = std::max(mt.worst, diff);
    Json row;
    row["index"] = m;
    row["lambda_q"] = spec_q.at(m);
    row["lambda_p"] = spec_p.at(m);
    row["expected"] = expected;
    row["difference"] = diff;
    row["pass"] = diff < tol;
    mt.rows.push_back(row);
  }
  return mt;
}

struct PairTolerances {
  double spectrum = kSpectrumMatchTolerance;
  double mean = 1e-7;
  double endpoint = 1e-5;
  double determinant = 1e-7;
};

/// Invariant checks shared by `quasi` and `verify`.
inline Json pair_checks(const Potential& q, const Potential& p, const Spectrum& spec_q, const Spectrum& spec_p, int n,
                        double t, const PairTolerances& tol, std::vector<CheckReport>& checks) {
  Json j;
  const auto mt = match_table(spec_q, spec_p, n, t, tol.spectrum);
  j["eigenvalues"] = mt.rows;
  checks.push_back({"spectrum_match", mt.worst < tol.spectrum, mt.worst, 0.0, tol.spectrum});

  const auto mi = verify_mean_invariance(p, q, tol.mean);
  checks.push_back(mi.check);
  j["heat_coefficients"] = {{"c_half_p", mi.c_half_p}, {"c_half_q", mi.c_half_q}};

  checks.push_back(make_check("endpoint_sum_rule", p(0.0) + p(1.0), q(0.0) + q(1.0) - 4.0 * t, tol.endpoint));

  const double lq = spec_q.at(n), lp = spec_p.at(n);
  if (lq > 0.0 && lp > 0.0) {
    RelativeDeterminant det;
    try {
      det = relative_determinant(spec_p, spec_q, n);
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::verification) throw;
      // The spectrum_match check already records the failure; keep the ratio for the report.
      det.k = n;
      det.lambda_k_p = lp;
      det.lambda_k_q = lq;
      det.value = lp / lq;
      det.log_value = std::log(lp) - std::log(lq);
    }
    j["determinant"] = to_json(det);
    checks.push_back(make_check("relative_determinant", det.value, (lq + t) / lq, tol.determinant));
  } else {
    j["determinant"] = nullptr;
  }
  return j;
}

inline std::string potential_csv(const Potential& p, int nodes) {
  std::ostringstream os;
  write_potential_csv(os, p, nodes, p.has_endpoint_derivatives());
  return os.str();
}

inline std::string extension(Format f) { return f == Format::csv ? ".csv" : ".json"; }

// ---------------------------------------------------------------------------

inline Output cmd_spectrum(const RunConfig& cfg) {
  const auto q = load_potential(cfg);
  const auto bc = boundary_condition(cfg);
  const auto spec = eigenvalues(q, bc, depth(cfg), eigen_options(cfg));
  Output o;
  if (cfg.format.value_or(Format::csv) == Format::csv) {
    o.primary = spectrum_text(spec, Format::csv);
  } else {
    Json j = to_json(spec);
    j["command"] = "spectrum";
    j["potential"] = potential_source(cfg);
    o.primary = dump(j);
  }
  return o;
}

inline Output cmd_quasi(const RunConfig& cfg) {
  const auto q = load_potential(cfg);
  const int m = std::max(depth(cfg), cfg.n + 1);
  const auto opt = eigen_options(cfg);
  const auto r = quasi_isospectral(q, cfg.n, cfg.t, m, opt);
  const auto spec_p = eigenvalues(r.p, BoundaryCondition::dirichlet(), m, opt);

  std::vector<CheckReport> checks;
  Json j;
  j["schema"] = kSchemaVersion;
  j["command"] = "quasi";
  j["potential"] = potential_source(cfg);
  j["n"] = cfg.n;
  j["t"] = cfg.t;
  j["m"] = m;
  j["lambda_n"] = r.lambda_n;
  j["y1_at_1"] = r.y1_at_1;
  j["b"] = {{"min", r.min_b}, {"min_location", r.min_b_location}, {"at_0", r.b(0.0)}, {"at_1", r.b(1.0)}};
  checks.push_back(positivity_check("b_positive", r.min_b));
  checks.push_back(make_check("b_at_0", r.b(0.0), 1.0, 1e-9));
  const Json pc = pair_checks(q, r.p, r.source_spectrum, spec_p, cfg.n, cfg.t, {}, checks);
  for (const auto& [k, v] : pc.items()) j[k] = v;
  j["checks"] = check_list_json(checks);
  j["pass"] = all_pass(checks);

  Output o;
  o.primary = dump(j);
  o.verified = all_pass(checks);
  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    const Format f = cfg.format.value_or(Format::json);
    o.files.add(dir / "potential_p.csv", potential_csv(r.p, cfg.nodes));
    o.files.add(dir / ("spectrum_q" + extension(f)), spectrum_text(r.source_spectrum, f));
    o.files.add(dir / ("spectrum_p" + extension(f)), spectrum_text(spec_p, f));
    o.files.add(dir / "report.json", o.primary);
  }
  return o;
}

inline Output cmd_darboux(const RunConfig& cfg) {
  const auto q = load_potential(cfg);
  Json j;
  j["schema"] = kSchemaVersion;
  j["command"] = "darboux";
  j["potential"] = potential_source(cfg);
  std::vector<CheckReport> checks;
  Potential out_potential;
  if (cfg.bc == "robin" || cfg.bc == "neumann") {
    const double h = cfg.bc == "neumann" ? 0.0 : cfg.h;
    const double H = cfg.bc == "neumann" ? 0.0 : cfg.H;
    const auto rd = robin_to_dirichlet(q, h, H, depth(cfg), eigen_options(cfg));
    j["mode"] = "robin_to_dirichlet";
    j["h"] = h;
    j["H"] = H;
    j["ground_state_lambda"] = rd.robin.at(0);
    Json rows = Json::array();
    double worst = 0.0;
    for (int k = 0; k <= rd.robin.last_index(); ++k) {
      Json row;
      row["index"] = k;
      row["robin"] = rd.robin.at(k);
      if (k >= rd.dirichlet.index_offset && k <= rd.dirichlet.last_index()) {
        const double diff = std::abs(rd.dirichlet.at(k) - rd.robin.at(k));
        worst = std::max(worst, diff);
        row["dirichlet"] = rd.dirichlet.at(k);
        row["difference"] = diff;
      } else {
        // The Robin ground state has no Dirichlet partner.
        row["dirichlet"] = nullptr;
        row["difference"] = nullptr;
      }
      rows.push_back(row);
    }
    j["pairs"] = rows;
    checks.push_back({"isospectral_pairs", worst < 1e-6, worst, 0.0, 1e-6});
    out_potential = rd.q_tilde;
  } else {
    const auto g = solve_ivp(q, cfg.mu, cfg.g0, cfg.dg0);
    out_potential = darboux_single(q, cfg.mu, g);
    j["mode"] = "single";
    j["mu"] = cfg.mu;
    j["g0"] = cfg.g0;
    j["dg0"] = cfg.dg0;
  }
  j["transformed"] = {{"at_0", out_potential(0.0)}, {"at_1", out_potential(1.0)}, {"mean", mean(out_potential).value}};
  j["checks"] = check_list_json(checks);
  j["pass"] = all_pass(checks);
  Output o;
  o.primary = dump(j);
  o.verified = all_pass(checks);
  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    o.files.add(dir / "potential.csv", potential_csv(out_potential, cfg.nodes));
    o.files.add(dir / "report.json", o.primary);
  }
  return o;
}

/// Smallest M whose tail bound at time t is below the heat-trace tolerance,
/// using |b_m| ≤ 2‖q‖∞ (min-max bracket).
inline int heat_depth(const Potential& q, double t) {
  const double C = mean(q).value;
  const double shift = C - 2.0 * sup_norm(q);
  int M = 1;
  while (qiso::detail::heat_tail_bound(M, t, shift) > 0.5 * kHeatTraceTolerance) {
    if (++M > kMaxEigenvalues) {
      throw InvalidArgument("t = " + std::to_string(t) + " needs more than " + std::to_string(kMaxEigenvalues) +
                            " eigenvalues");
    }
  }
  return M;
}

inline Output cmd_heat(const RunConfig& cfg) {
  const auto q = load_potential(cfg);
  const auto grid = cfg.t_grid.empty() ? default_t_grid() : cfg.t_grid;
  const double tmin = *std::min_element(grid.begin(), grid.end());
  const int m = cfg.m > 0 ? cfg.m : heat_depth(q, tmin);
  const auto spec = eigenvalues(q, BoundaryCondition::dirichlet(), m, eigen_options(cfg));
  const double C = mean(q).value;
  std::optional<HeatExpansion> hx;
  if (q.has_endpoint_derivatives()) hx = heat_expansion_coeffs(q);

  Json rows = Json::array();
  std::ostringstream csv;
  csv << "t,trace,error_bound,expansion,residual\n" << std::setprecision(17);
  for (double t : grid) {
    const auto ht = heat_trace(spec, t, C);
    Json row;
    row["t"] = t;
    row["trace"] = ht.value;
    row["error_bound"] = ht.error_bound;
    csv << t << ',' << ht.value << ',' << ht.error_bound << ',';
    if (hx) {
      row["expansion"] = (*hx)(t);
      row["residual"] = ht.value - (*hx)(t);
      csv << (*hx)(t) << ',' << ht.value - (*hx)(t);
    } else {
      row["expansion"] = nullptr;
      row["residual"] = nullptr;
      csv << ',';
    }
    csv << '\n';
    rows.push_back(row);
  }
  Output o;
  if (cfg.format.value_or(Format::json) == Format::csv) {
    o.primary = csv.str();
    return o;
  }
  Json j;
  j["schema"] = kSchemaVersion;
  j["command"] = "heat";
  j["potential"] = potential_source(cfg);
  j["m"] = m;
  j["mean"] = C;
  if (hx) {
    j["coefficients"] = to_json(*hx);
  } else {
    j["coefficients"] = nullptr;
  }
  j["rows"] = rows;
  o.primary = dump(j);
  return o;
}

inline Output cmd_det(const RunConfig& cfg) {
  const auto q = load_potential(cfg);
  const int m = std::max(depth(cfg), cfg.n + 1);
  const auto opt = eigen_options(cfg);
  const auto r = quasi_isospectral(q, cfg.n, cfg.t, m, opt);
  const auto spec_p = eigenvalues(r.p, BoundaryCondition::dirichlet(), m, opt);
  const auto det = relative_determinant(spec_p, r.source_spectrum, cfg.n);
  const auto grid = cfg.t_grid.empty() ? default_t_grid() : cfg.t_grid;

  Json rows = Json::array();
  std::ostringstream csv;
  csv << "t,relative_trace,single_term,difference\n" << std::setprecision(17);
  double worst = 0.0;
  for (double t : grid) {
    const double rel = relative_heat_trace(spec_p, r.source_spectrum, t);
    const double single = std::exp(-t * det.lambda_k_p) - std::exp(-t * det.lambda_k_q);
    worst = std::max(worst, std::abs(rel - single));
    rows.push_back({{"t", t}, {"relative_trace", rel}, {"single_term", single}, {"difference", std::abs(rel - single)}});
    csv << t << ',' << rel << ',' << single << ',' << std::abs(rel - single) << '\n';
  }
  const CheckReport telescoping{"relative_trace_telescoping", worst < 1e-9, worst, 0.0, 1e-9};
  Output o;
  o.verified = telescoping.pass;
  if (cfg.format.value_or(Format::json) == Format::csv) {
    o.primary = csv.str();
    return o;
  }
  Json j;
  j["schema"] = kSchemaVersion;
  j["command"] = "det";
  j["potential"] = potential_source(cfg);
  j["n"] = cfg.n;
  j["t"] = cfg.t;
  j["m"] = m;
  j["determinant"] = to_json(det);
  j["rows"] = rows;
  j["checks"] = Json::array({to_json(telescoping)});
  j["pass"] = telescoping.pass;
  o.primary = dump(j);
  return o;
}

inline Output cmd_coords(const RunConfig& cfg) {
  const auto q = load_potential(cfg);
  const auto sc = spectral_coordinates(q, depth(cfg), eigen_options(cfg));
  Output o;
  if (cfg.format.value_or(Format::json) == Format::csv) {
    std::ostringstream os;
    os << "n,b,kappa\n" << std::setprecision(17);
    for (std::size_t i = 0; i < sc.b.size(); ++i) os << i + 1 << ',' << sc.b[i] << ',' << sc.kappa[i] << '\n';
    o.primary = os.str();
    return o;
  }
  Json j = to_json(sc);
  j["command"] = "coords";
  j["potential"] = potential_source(cfg);
  o.primary = dump(j);
  return o;
}

/// θ_i = i·(π/2)/(G+1), i = 1..G, for the family a = c = cos θ, b = d = sin θ.
/// Each row also records the boundary determinant of the λ = 0 fundamental
/// pair; a nonzero value means λ = 0 is not an eigenvalue at that θ.
inline Output cmd_bc_sweep(const RunConfig& cfg) {
  const auto q = load_potential(cfg);
  const int m = depth(cfg);
  const auto opt = eigen_options(cfg);
  const int G = cfg.theta_grid;
  Json rows = Json::array();
  std::ostringstream csv;
  csv << "theta,index,lambda\n" << std::setprecision(17);
  for (int i = 1; i <= G; ++i) {
    const double theta = i * (std::numbers::pi / 2) / (G + 1);
    const auto bc = BoundaryCondition::cos_sin_family(theta);
    const auto spec = eigenvalues(q, bc, m, opt);
    const double det0 = char_function(q, bc, 0.0);
    Json row;
    row["theta"] = theta;
    row["eigenvalues"] = spec.eigenvalues;
    row["lambda0_determinant"] = det0;
    row["lambda0_is_eigenvalue"] = std::abs(det0) < 1e-10;
    rows.push_back(row);
    for (std::size_t k = 0; k < spec.size(); ++k) csv << theta << ',' << k << ',' << spec.eigenvalues[k] << '\n';
  }
  Output o;
  if (cfg.format.value_or(Format::json) == Format::csv) {
    o.primary = csv.str();
    return o;
  }
  Json j;
  j["schema"] = kSchemaVersion;
  j["command"] = "bc-sweep";
  j["potential"] = potential_source(cfg);
  j["theta_grid"] = G;
  j["m"] = m;
  j["rows"] = rows;
  o.primary = dump(j);
  return o;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const std::exception& e) {
    throw InvalidArgument("malformed JSON in " + path.string() + ": " + e.what());
  }
}

/// Re-runs the pair checks on a stored transformed potential. Tolerances
/// allow for the cubic interpolation of the stored grid.
inline Output cmd_verify(const RunConfig& cfg) {
  RunConfig c = cfg;
  std::filesystem::path p_path = cfg.p_csv;
  std::optional<Json> stored;
  if (!cfg.pair.empty()) {
    const std::filesystem::path dir(cfg.pair);
    stored = read_json_file(dir / "report.json");
    const auto& src = stored->at("potential");
    if (c.q_expr.empty() && c.q_csv.empty()) {
      if (src.contains("expression")) c.q_expr = src["expression"].get<std::string>();
      if (src.contains("csv")) c.q_csv = src["csv"].get<std::string>();
    }
    c.n = stored->at("n").get<int>();
    c.t = stored->at("t").get<double>();
    if (c.m == 0) c.m = stored->at("m").get<int>();
    if (p_path.empty()) p_path = dir / "potential_p.csv";
  }
  if (p_path.empty()) throw InvalidArgument("verify needs --pair or --p-csv");
  validate(c);
  const auto q = load_potential(c);
  const auto p = read_potential_csv(p_path.string());
  const int m = std::max(depth(c), c.n + 1);
  const auto opt = eigen_options(c);
  const auto spec_q = eigenvalues(q, BoundaryCondition::dirichlet(), m, opt);
  const auto spec_p = eigenvalues(p, BoundaryCondition::dirichlet(), m, opt);

  PairTolerances tol;
  tol.spectrum = 1e-6;
  tol.mean = 1e-6;
  tol.determinant = 1e-6;
  std::vector<CheckReport> checks;
  Json j;
  j["schema"] = kSchemaVersion;
  j["command"] = "verify";
  j["potential"] = potential_source(c);
  j["p_csv"] = p_path.string();
  j["n"] = c.n;
  j["t"] = c.t;
  j["m"] = m;
  const Json pc = pair_checks(q, p, spec_q, spec_p, c.n, c.t, tol, checks);
  for (const auto& [k, v] : pc.items()) j[k] = v;
  if (stored && stored->contains("eigenvalues")) {
    // Round trip: the stored grid reproduces the spectrum recorded at construction time.
    double worst = 0.0;
    for (const auto& row : stored->at("eigenvalues")) {
      const int idx = row.at("index").get<int>();
      if (idx <= spec_p.last_index()) worst = std::max(worst, std::abs(spec_p.at(idx) - row.at("lambda_p").get<double>()));
    }
    checks.push_back({"round_trip", worst < 1e-6, worst, 0.0, 1e-6});
  }
  j["checks"] = check_list_json(checks);
  j["pass"] = all_pass(checks);
  Output o;
  o.primary = dump(j);
  o.verified = all_pass(checks);
  return o;
}

}  // namespace detail

/// Executes a configuration. Returns the process exit code.
inline int run(const RunConfig& cfg_in, std::ostream& out, std::ostream& err) {
  auto error_document = [&](const std::string& category, const std::string& code, const std::string& message,
                            const DarbouxError* de) {
    Json e;
    e["category"] = category;
    e["code"] = code;
    e["message"] = message;
    if (de) {
      if (std::isfinite(de->location())) e["location"] = de->location();
      if (std::isfinite(de->value())) e["value"] = de->value();
    }
    err << detail::dump(Json{{"schema", kSchemaVersion}, {"command", to_string(cfg_in.command)}, {"error", e}});
  };
  try {
    RunConfig cfg = cfg_in;
    if (cfg.command != Command::verify) validate(cfg);
    detail::Output o;
    switch (cfg.command) {
      case Command::spectrum: o = detail::cmd_spectrum(cfg); break;
      case Command::quasi: o = detail::cmd_quasi(cfg); break;
      case Command::darboux: o = detail::cmd_darboux(cfg); break;
      case Command::heat: o = detail::cmd_heat(cfg); break;
      case Command::det: o = detail::cmd_det(cfg); break;
      case Command::coords: o = detail::cmd_coords(cfg); break;
      case Command::bc_sweep: o = detail::cmd_bc_sweep(cfg); break;
      case Command::verify: o = detail::cmd_verify(cfg); break;
    }
    const bool out_is_dir = cfg.command == Command::quasi || cfg.command == Command::darboux;
    if (!cfg.out.empty() && !out_is_dir) o.files.add(cfg.out, o.primary);
    o.files.commit();
    if (cfg.out.empty() || out_is_dir) out << o.primary;
    if (!o.verified) {
      error_document("verification", "check_failed", "one or more checks failed; see the report", nullptr);
      return kExitVerification;
    }
    return kExitOk;
  } catch (const DarbouxError& e) {
    error_document("numerical", e.code(), e.what(), &e);
    return kExitNumerical;
  } catch (const Error& e) {
    switch (e.category()) {
      case ErrorCategory::usage: error_document("usage", e.code(), e.what(), nullptr); return kExitUsage;
      case ErrorCategory::numerical: error_document("numerical", e.code(), e.what(), nullptr); return kExitNumerical;
      case ErrorCategory::verification:
        error_document("verification", e.code(), e.what(), nullptr);
        return kExitVerification;
    }
  } catch (const std::filesystem::filesystem_error& e) {
    error_document("usage", "io_error", e.what(), nullptr);
    return kExitUsage;
  } catch (const std::exception& e) {
    error_document("numerical", "internal_error", e.what(), nullptr);
    return kExitNumerical;
  }
  return kExitNumerical;
}

/// Builds a RunConfig from argv. Returns nullopt after printing help or a
/// usage error; `exit_code` then holds the code to return.
inline std::optional<RunConfig> parse_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
                                           int& exit_code) {
  RunConfig cfg;
  std::string t_grid, format;
  CLI::App app{"Sturm-Liouville spectra, quasi-isospectral deformations and spectral invariants on [0,1]"};
  app.require_subcommand(1);
  // -h is taken by the Robin coefficient.
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_help_all_flag("--help-all", "Show help for every command");

  struct Spec {
    Command command;
    const char* name;
    const char* help;
  };
  const Spec specs[] = {
      {Command::spectrum, "spectrum", "Lowest eigenvalues for a boundary condition"},
      {Command::quasi, "quasi", "Shift the n-th Dirichlet eigenvalue by t and verify the result"},
      {Command::darboux, "darboux", "Single Darboux transform, or the Robin-to-Dirichlet transform with --bc robin"},
      {Command::heat, "heat", "Heat trace and its small-t expansion over a t-grid"},
      {Command::det, "det", "Relative determinant and relative heat trace of a quasi-isospectral pair"},
      {Command::coords, "coords", "Spectral coordinates C, b_n, kappa_n"},
      {Command::bc_sweep, "bc-sweep", "Eigenvalue branches for a = c = cos(theta), b = d = sin(theta)"},
      {Command::verify, "verify", "Re-run the invariant checks on a stored pair"},
  };
  for (const auto& s : specs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->callback([&cfg, c = s.command] { cfg.command = c; });
    sub->add_option("--q", cfg.q_expr, "Potential expression in x (e.g. \"2+sin(2*pi*x)\")");
    sub->add_option("--q-csv", cfg.q_csv, "Potential samples, CSV with header x,q or x,q,dq");
    sub->add_option("--m", cfg.m, "Number of eigenvalues");
    sub->add_option("--out", cfg.out, "Output file (directory for quasi and darboux)");
    sub->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    switch (s.command) {
      case Command::spectrum:
      case Command::darboux:
        sub->add_option("--bc", cfg.bc, "dirichlet, neumann, robin, general or family")
            ->check(CLI::IsMember({"dirichlet", "neumann", "robin", "general", "family"}));
        sub->add_option("--h", cfg.h, "Robin coefficient at x=0");
        sub->add_option("--H", cfg.H, "Robin coefficient at x=1");
        if (s.command == Command::spectrum) {
          sub->add_option("--a", cfg.a);
          sub->add_option("--b", cfg.b);
          sub->add_option("--c", cfg.c);
          sub->add_option("--d", cfg.d);
          sub->add_option("--theta", cfg.theta, "Angle for --bc family");
        } else {
          sub->add_option("--mu", cfg.mu, "Spectral parameter of g");
          sub->add_option("--g0", cfg.g0, "g(0)");
          sub->add_option("--dg0", cfg.dg0, "g'(0)");
          sub->add_option("--nodes", cfg.nodes, "Export grid size");
        }
        break;
      case Command::quasi:
      case Command::det:
        sub->add_option("--n", cfg.n, "Index of the shifted eigenvalue")->required();
        sub->add_option("--t", cfg.t, "Shift")->required();
        if (s.command == Command::quasi) {
          sub->add_option("--nodes", cfg.nodes, "Export grid size");
        } else {
          sub->add_option("--t-grid", t_grid, "Heat times: comma list or log:a:b:n");
        }
        break;
      case Command::heat: sub->add_option("--t-grid", t_grid, "Heat times: comma list or log:a:b:n"); break;
      case Command::bc_sweep: sub->add_option("--theta-grid", cfg.theta_grid, "Number of angles in (0, pi/2)"); break;
      case Command::verify:
        sub->add_option("--pair", cfg.pair, "Directory written by quasi --out");
        sub->add_option("--p-csv", cfg.p_csv, "Stored transformed potential");
        sub->add_option("--n", cfg.n, "Index of the shifted eigenvalue");
        sub->add_option("--t", cfg.t, "Shift");
        break;
      case Command::coords: break;
    }
  }

  try {
    app.parse(argc, argv);
    if (!t_grid.empty()) cfg.t_grid = parse_t_grid(t_grid);
    if (!format.empty()) cfg.format = format == "csv" ? Format::csv : Format::json;
    if (const char* env = std::getenv(kThreadsEnv)) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end == env || *end != '\0' || v < 1 || v > 256) {
        throw InvalidArgument(std::string(kThreadsEnv) + " must be an integer in [1, 256]");
      }
      cfg.threads = static_cast<int>(v);
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    exit_code = kExitOk;
    return std::nullopt;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    exit_code = kExitOk;
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    err << detail::dump(Json{{"schema", kSchemaVersion},
                             {"error", {{"category", "usage"}, {"code", "usage_error"}, {"message", e.what()}}}});
    exit_code = kExitUsage;
    return std::nullopt;
  } catch (const Error& e) {
    err << detail::dump(Json{{"schema", kSchemaVersion},
                             {"error", {{"category", "usage"}, {"code", e.code()}, {"message", e.what()}}}});
    exit_code = kExitUsage;
    return std::nullopt;
  }
  return cfg;
}

inline int main_entry(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  int code = kExitOk;
  auto cfg = parse_args(argc, argv, out, err, code);
  if (!cfg) return code;
  return run(*cfg, out, err);
}

}  // namespace qiso::cli
