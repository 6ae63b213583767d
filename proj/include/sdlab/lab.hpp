#pragma once

// Batch experiment runner: JSON manifests in, CSV/JSON certificates plus an
// index out, and static SVG plots rendered from the index.
//
// Exit codes: 0 all certificates pass, 1 computation error, 2 validation
// error, 3 computation finished but some certificate failed.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "sdlab/degiorgi.hpp"
#include "sdlab/drift_fields.hpp"
#include "sdlab/errors.hpp"
#include "sdlab/form_bound.hpp"
#include "sdlab/grid.hpp"
#include "sdlab/orlicz.hpp"
#include "sdlab/parabolic.hpp"
#include "sdlab/sde.hpp"

namespace sdlab::lab {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kExitPass = 0;
inline constexpr int kExitComputation = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitCertificateFailed = 3;

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"formbound", "evolve",    "resolvent",
                                          "orlicz",    "cauchy",    "trotter",
                                          "degiorgi",  "sde-scan",  "crosscheck"};
  return k;
}

// ---------------------------------------------------------------------------
// Field access with validation errors naming the offending field

namespace detail {

inline const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key))
    throw ValidationError(path + "." + key, "missing");
  return j.at(key);
}

inline double number(const json& j, const std::string& key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_number()) throw ValidationError(path + "." + key, "must be a number");
  return v.get<double>();
}

inline double number_or(const json& j, const std::string& key, double def,
                        const std::string& path) {
  if (!j.contains(key)) return def;
  return number(j, key, path);
}

inline double positive(const json& j, const std::string& key, const std::string& path) {
  const double v = number(j, key, path);
  if (!(v > 0.0)) throw ValidationError(path + "." + key, "must be > 0");
  return v;
}

inline int integer(const json& j, const std::string& key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_number_integer()) throw ValidationError(path + "." + key, "must be an integer");
  return v.get<int>();
}

// numbers, or the strings "inf" / "infinity"
inline double extended(const json& v, const std::string& path) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string() && (v == "inf" || v == "infinity"))
    return std::numeric_limits<double>::infinity();
  throw ValidationError(path, "must be a number or \"inf\"");
}

inline std::vector<double> numbers(const json& j, const std::string& key,
                                   const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_array()) throw ValidationError(path + "." + key, "must be an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(extended(v[i], path + "." + key + "[" + std::to_string(i) + "]"));
  return out;
}

inline Point point(const json& v, int d, const std::string& path) {
  if (!v.is_array() || static_cast<int>(v.size()) != d)
    throw ValidationError(path, "must be an array of " + std::to_string(d) + " numbers");
  Point p(d);
  for (int a = 0; a < d; ++a) {
    if (!v[static_cast<std::size_t>(a)].is_number()) throw ValidationError(path, "must be numeric");
    p[a] = v[static_cast<std::size_t>(a)].get<double>();
  }
  return p;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string label(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Config blocks

inline Grid parse_grid(const json& m) {
  const json& g = detail::need(m, "grid", "manifest");
  const int d = detail::integer(g, "d", "grid");
  const double L = detail::positive(g, "L", "grid");
  const int N = detail::integer(g, "N", "grid");
  if (d < 1 || d > kMaxDim) throw ValidationError("grid.d", "must lie in [1, 6]");
  if (N < 16) throw ValidationError("grid.N", "must be >= 16");
  return Grid(d, L, N);
}

struct DriftChoice {
  std::optional<DriftSpec> spec;  // empty: b ≡ 0
  std::optional<double> epsilon;
  MollifySampling sampling = MollifySampling::point;
};

inline DriftChoice parse_drift(const json& m, const Grid& g) {
  DriftChoice dc;
  if (!m.contains("drift")) return dc;
  const json& j = m.at("drift");
  if (j.is_object() && j.value("family", "") == "zero") return dc;
  try {
    dc.spec = drift_from_json(j);
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError("drift", e.what());
  }
  if (dc.spec->dim != g.dim()) throw ValidationError("drift.d", "must equal grid.d");
  if (m.contains("mollify")) {
    const json& mo = m.at("mollify");
    dc.epsilon = detail::positive(mo, "epsilon", "mollify");
    const std::string s = mo.value("sampling", "point");
    if (s == "cell_average")
      dc.sampling = MollifySampling::cell_average;
    else if (s != "point")
      throw ValidationError("mollify.sampling", "must be \"point\" or \"cell_average\"");
  }
  return dc;
}

inline VectorField build_drift(const DriftChoice& dc, const Grid& g,
                               std::optional<double> eps = std::nullopt) {
  if (!dc.spec) return VectorField(g);
  const auto e = eps ? eps : dc.epsilon;
  if (e) return mollify(*dc.spec, *e, g, dc.sampling);
  return sample_drift(*dc.spec, g);
}

inline double drift_delta(const DriftChoice& dc) {
  return dc.spec ? dc.spec->declared_delta : 0.0;
}

inline double drift_c(const DriftChoice& dc) { return dc.spec ? dc.spec->declared_c : 0.0; }

inline std::optional<double> drift_support(const DriftChoice& dc) {
  if (!dc.spec || !dc.spec->support_radius) return std::nullopt;
  return *dc.spec->support_radius + dc.epsilon.value_or(0.0);
}

/// Scalar field from a block {"type": gaussian|point_mass|bump|indicator, ...}.
inline std::function<ScalarField(const Grid&)> parse_field(const json& j, int d,
                                                          const std::string& path) {
  const std::string type = j.is_object() ? j.value("type", "") : "";
  const double amp = detail::number_or(j, "amplitude", 1.0, path);
  const Point c = j.contains("center") ? detail::point(j.at("center"), d, path + ".center")
                                       : Point(d);
  if (type == "gaussian") {
    const double w = detail::positive(j, "width", path);
    return [=](const Grid& g) {
      return sample(g, [&](const Point& x) { return amp * std::exp(-0.5 * (x - c).norm2() / (w * w)); });
    };
  }
  if (type == "bump" || type == "indicator") {
    const double r = detail::positive(j, "radius", path);
    const bool bump = type == "bump";
    return [=](const Grid& g) {
      return sample(g, [&](const Point& x) {
        const double z = (x - c).norm() / r;
        if (bump) return amp * sdlab::detail::cubic_bump(z);
        return z < 1.0 ? amp : 0.0;
      });
    };
  }
  if (type == "point_mass") {
    return [=](const Grid& g) {
      ScalarField f(g);
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double r = (g.point(i) - c).norm();
        if (r < bd) {
          bd = r;
          best = i;
        }
      }
      f[best] = amp / g.cell_volume();
      return f;
    };
  }
  throw ValidationError(path + ".type", "must be gaussian, point_mass, bump or indicator");
}

struct EvolutionBlock {
  EvolutionConfig cfg;
  double cfl_safety = 0.0;  // > 0: τ = min(τ, safety · CFL limit)
  bool export_snapshots = false;
};

inline EvolutionBlock parse_evolution(const json& m) {
  const json& e = detail::need(m, "evolution", "manifest");
  EvolutionBlock b;
  b.cfg.tau = detail::positive(e, "tau", "evolution");
  b.cfg.T = detail::positive(e, "T", "evolution");
  if (e.contains("p_list")) b.cfg.p_list = detail::numbers(e, "p_list", "evolution");
  for (double p : b.cfg.p_list)
    if (!(p >= 1.0)) throw ValidationError("evolution.p_list", "values must be >= 1");
  b.cfg.solve_tol = detail::number_or(e, "solve_tol", b.cfg.solve_tol, "evolution");
  b.cfg.record_gauge = e.value("record_gauge", false);
  b.cfg.snapshot_stride = e.value("snapshot_stride", 1);
  if (b.cfg.snapshot_stride < 1) throw ValidationError("evolution.snapshot_stride", "must be >= 1");
  b.cfl_safety = detail::number_or(e, "cfl_safety", 0.0, "evolution");
  if (b.cfl_safety < 0.0 || b.cfl_safety > 1.0)
    throw ValidationError("evolution.cfl_safety", "must lie in [0, 1]");
  b.export_snapshots = e.value("export_snapshots", false);
  return b;
}

inline EvolutionConfig resolve_tau(const EvolutionBlock& b, const VectorField& drift) {
  EvolutionConfig c = b.cfg;
  if (b.cfl_safety > 0.0) c.tau = std::min(c.tau, b.cfl_safety * cfl_limit(drift));
  return c;
}

// ---------------------------------------------------------------------------
// Output helpers

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline void write_csv(const fs::path& p, const Csv& csv) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  for (std::size_t i = 0; i < csv.header.size(); ++i)
    out << (i ? "," : "") << csv.header[i];
  out << "\n";
  for (const auto& r : csv.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << detail::fmt(r[i]);
    out << "\n";
  }
}

inline Csv read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot read " + p.string());
  Csv csv;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    if (first) {
      while (std::getline(ss, cell, ',')) csv.header.push_back(cell);
      first = false;
      continue;
    }
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

inline void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << j.dump(2) << "\n";
}

/// Snapshot export: one flat float64 file (native byte order, snapshots
/// concatenated, axis 0 fastest) and a JSON header describing it.
inline std::vector<std::string> export_snapshots(const fs::path& dir, const std::string& stem,
                                                 const SemigroupRun& run) {
  const std::string bin = stem + "_snapshots.bin", hdr = stem + "_snapshots.json";
  std::ofstream out(dir / bin, std::ios::binary);
  for (const auto& s : run.snapshots)
    out.write(reinterpret_cast<const char*>(s.values.data()),
              static_cast<std::streamsize>(s.values.size() * sizeof(double)));
  json h{{"dtype", "float64"},
         {"byte_order", "little"},
         {"layout", "snapshot-major, axis 0 fastest"},
         {"d", run.grid.dim()},
         {"N", run.grid.points()},
         {"L", run.grid.half_width()},
         {"h", run.grid.spacing()},
         {"times", run.snapshot_times},
         {"file", bin}};
  write_json(dir / hdr, h);
  return {bin, hdr};
}

struct Artifact {
  std::string name;
  std::string kind;
  bool pass = true;
  std::vector<std::string> files;
  json series = json::array();  // plottable CSV series
  json summary = json::object();
};

struct Context {
  fs::path out_dir;
  std::uint64_t seed = 1;
};

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline void validate_experiment(const json& m) {
  if (!m.is_object()) throw ValidationError("experiment", "must be an object");
  if (!m.contains("kind")) throw ValidationError("kind", "missing");
  const std::string kind = m.at("kind").is_string() ? m.at("kind").get<std::string>() : "";
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
    throw ValidationError("kind", "unrecognized experiment kind '" + kind + "'");
  auto grid_and_drift = [&]() {
    const Grid g = parse_grid(m);
    parse_drift(m, g);
    return g;
  };
  if (kind == "formbound") {
    const Grid g = grid_and_drift();
    const json& fb = need(m, "formbound", "manifest");
    if (number_or(fb, "lambda", 0.0, "formbound") < 0.0)
      throw ValidationError("formbound.lambda", "must be >= 0");
    if (fb.contains("N_list"))
      for (double n : numbers(fb, "N_list", "formbound"))
        if (n < 16) throw ValidationError("formbound.N_list", "values must be >= 16");
    if (fb.contains("declared")) {
      for (const auto& d : fb.at("declared")) {
        if (number(d, "delta", "formbound.declared") < 0.0)
          throw ValidationError("formbound.declared.delta", "must be >= 0");
        number(d, "c", "formbound.declared");
        const std::string ex = d.value("expect", "pass");
        if (ex != "pass" && ex != "fail")
          throw ValidationError("formbound.declared.expect", "must be pass or fail");
      }
      const json& fam = need(fb, "family", "formbound");
      const std::string t = fam.value("type", "");
      if (t == "hardy_optimizers") {
        numbers(fam, "offsets", "formbound.family");
        positive(fam, "cutoff", "formbound.family");
      } else if (t == "gaussians" || t == "radial_bumps") {
        for (const auto& c : need(fam, "centers", "formbound.family"))
          point(c, g.dim(), "formbound.family.centers");
        numbers(fam, "widths", "formbound.family");
      } else {
        throw ValidationError("formbound.family.type", "unknown test-function family");
      }
    }
  } else if (kind == "evolve" || kind == "orlicz" || kind == "cauchy" || kind == "crosscheck") {
    const Grid g = grid_and_drift();
    parse_field(need(m, "initial", "manifest"), g.dim(), "initial");
    parse_evolution(m);
    if (kind == "orlicz") {
      const json& o = need(m, "orlicz", "manifest");
      const double th = number_or(o, "theta", 0.25, "orlicz");
      if (!(th > 0.0 && th < 0.5)) throw ValidationError("orlicz.theta", "must lie in (0, 1/2)");
      if (o.contains("c4") && !(o.at("c4").is_number() || o.at("c4") == "estimate"))
        throw ValidationError("orlicz.c4", "must be a number or \"estimate\"");
      const DriftChoice dc = parse_drift(m, g);
      if (!drift_support(dc)) throw ValidationError("drift.support", "compact support required");
    }
    if (kind == "cauchy" || kind == "trotter") {
      const auto e = numbers(m, "epsilons", "manifest");
      if (e.size() < 3) throw ValidationError("epsilons", "need at least 3 values");
      for (double v : e)
        if (!(v > 0.0)) throw ValidationError("epsilons", "values must be > 0");
    }
    if (kind == "crosscheck") {
      const json& c = need(m, "crosscheck", "manifest");
      positive(c, "t", "crosscheck");
      for (const auto& x : need(c, "x_list", "crosscheck")) point(x, g.dim(), "crosscheck.x_list");
      positive(c, "dt", "crosscheck");
      if (integer(c, "paths", "crosscheck") < 2)
        throw ValidationError("crosscheck.paths", "must be >= 2");
      if (c.contains("coarse_N") && integer(c, "coarse_N", "crosscheck") < 16)
        throw ValidationError("crosscheck.coarse_N", "must be >= 16");
    }
  } else if (kind == "resolvent") {
    const Grid g = grid_and_drift();
    parse_field(need(m, "rhs", "manifest"), g.dim(), "rhs");
    positive(need(m, "resolvent", "manifest"), "mu", "resolvent");
  } else if (kind == "trotter") {
    const Grid g = grid_and_drift();
    parse_field(need(m, "g", "manifest"), g.dim(), "g");
    const auto e = numbers(m, "epsilons", "manifest");
    if (e.empty()) throw ValidationError("epsilons", "need at least one value");
    for (double mu : numbers(m, "mu_list", "manifest"))
      if (!(mu > 0.0)) throw ValidationError("mu_list", "values must be > 0");
  } else if (kind == "degiorgi") {
    if (m.contains("iterations"))
      for (const auto& it : m.at("iterations")) {
        if (!(number(it, "N", "iterations") > 0.0)) throw ValidationError("iterations.N", "must be > 0");
        if (!(number(it, "C0", "iterations") > 1.0)) throw ValidationError("iterations.C0", "must be > 1");
        if (!(number(it, "alpha", "iterations") > 0.0))
          throw ValidationError("iterations.alpha", "must be > 0");
        if (number(it, "z0", "iterations") < 0.0) throw ValidationError("iterations.z0", "must be >= 0");
      }
    if (m.contains("holder")) {
      const Grid g = grid_and_drift();
      const json& h = m.at("holder");
      positive(h, "mu", "holder");
      parse_field(need(h, "rhs", "holder"), g.dim(), "holder.rhs");
      point(need(h, "center", "holder"), g.dim(), "holder.center");
      numbers(h, "radii", "holder");
    }
  } else if (kind == "sde-scan") {
    const json& s = need(m, "sde", "manifest");
    const int d = integer(s, "d", "sde");
    if (d < 3 || d > kMaxDim) throw ValidationError("sde.d", "must lie in [3, 6]");
    point(need(s, "x0", "sde"), d, "sde.x0");
    positive(s, "dt", "sde");
    positive(s, "T", "sde");
    if (integer(s, "paths", "sde") < 1) throw ValidationError("sde.paths", "must be >= 1");
    const auto eh = numbers(s, "eps_hit_list", "sde");
    const auto dl = numbers(m, "delta_list", "manifest");
    if (dl.empty() || !std::is_sorted(dl.begin(), dl.end()))
      throw ValidationError("delta_list", "must be a nonempty sorted list");
    const double eps_reg = s.contains("eps_reg") ? positive(s, "eps_reg", "sde")
                                                 : default_eps_reg(number(s, "dt", "sde"), dl.back(), d);
    for (double e : eh)
      if (e < eps_reg) throw ValidationError("sde.eps_hit_list", "values must be >= eps_reg");
    const double amp = std::sqrt(dl.back()) * (d - 2) / 2.0;
    if (amp > 0.0 && number(s, "dt", "sde") > eps_reg * eps_reg / (2.0 * amp))
      throw ValidationError("sde.dt", "exceeds eps_reg^2 / (sqrt(delta)(d-2))");
  }
}

}  // namespace detail

/// Validates every experiment of a manifest; throws ValidationError.
inline std::vector<json> validate_manifest(const json& manifest) {
  if (!manifest.is_object()) throw ValidationError("manifest", "must be a JSON object");
  std::vector<json> exps;
  if (manifest.contains("experiments")) {
    const json& list = manifest.at("experiments");
    if (!list.is_array()) throw ValidationError("experiments", "must be an array");
    for (const auto& e : list) exps.push_back(e);
  } else {
    exps.push_back(manifest);
  }
  std::map<std::string, int> names;
  for (std::size_t i = 0; i < exps.size(); ++i) {
    try {
      detail::validate_experiment(exps[i]);
    } catch (const ValidationError& e) {
      if (exps.size() == 1 && !manifest.contains("experiments")) throw;
      throw ValidationError("experiments[" + std::to_string(i) + "]." + e.field(),
                            std::string(e.what()).substr(e.field().size() + 2));
    }
    std::string name = exps[i].value("name", exps[i].at("kind").get<std::string>());
    if (names[name]++ > 0) name += "_" + std::to_string(names[name] - 1);
    exps[i]["name"] = name;
  }
  return exps;
}

// ---------------------------------------------------------------------------
// Pipelines

namespace detail {

inline Artifact run_formbound(const json& m, const Context& ctx) {
  Artifact art;
  const Grid g0 = parse_grid(m);
  const DriftChoice dc = parse_drift(m, g0);
  const json& fb = m.at("formbound");
  const double lambda = number_or(fb, "lambda", 0.0, "formbound");
  std::vector<int> Ns;
  if (fb.contains("N_list"))
    for (double n : numbers(fb, "N_list", "formbound")) Ns.push_back(static_cast<int>(n));
  else
    Ns.push_back(g0.points());
  Csv csv{{"N", "h", "delta_est", "iterations", "residual"}, {}};
  json estimates = json::array();
  std::vector<double> est;
  VectorField last;
  for (int N : Ns) {
    const Grid g(g0.dim(), g0.half_width(), N);
    last = build_drift(dc, g);
    const auto e = rayleigh_delta(last, lambda);
    est.push_back(e.delta_est);
    estimates.push_back(to_json(e));
    csv.rows.push_back({static_cast<double>(N), g.spacing(), e.delta_est,
                        static_cast<double>(e.iterations), e.residual});
  }
  bool monotone = true;
  for (std::size_t i = 1; i < est.size(); ++i) monotone = monotone && est[i] >= est[i - 1];
  json verify = json::array();
  bool ok = true;
  if (fb.contains("declared")) {
    const json& fam = fb.at("family");
    const std::string t = fam.at("type");
    TestFunctionFamily family;
    if (t == "hardy_optimizers") {
      family = hardy_optimizer_family(numbers(fam, "offsets", "formbound.family"),
                                      number(fam, "cutoff", "formbound.family"));
    } else {
      std::vector<Point> centers;
      for (const auto& c : fam.at("centers")) centers.push_back(point(c, last.dim(), "centers"));
      auto widths = numbers(fam, "widths", "formbound.family");
      family = t == "gaussians" ? gaussian_family(centers, widths) : radial_bump_family(centers, widths);
    }
    for (const auto& d : fb.at("declared")) {
      const double delta = d.at("delta"), c = d.at("c");
      const std::string expect = d.value("expect", "pass");
      const auto r = verify_form_bound(last, delta, c, family);
      const bool match = r.pass == (expect == "pass");
      ok = ok && match;
      verify.push_back({{"delta", delta}, {"c", c}, {"worst_ratio", r.worst_ratio},
                        {"pass", r.pass}, {"expect", expect}, {"as_expected", match},
                        {"warnings", r.warnings}});
    }
  }
  art.pass = ok;
  art.summary = {{"estimates", estimates}, {"delta_est", est.back()},
                 {"monotone_in_N", monotone}, {"verify", verify}, {"pass", ok}};
  const std::string stem = m.at("name");
  write_csv(ctx.out_dir / (stem + "_estimates.csv"), csv);
  art.files.push_back(stem + "_estimates.csv");
  return art;
}

inline json max_principle(const SemigroupRun& run) {
  const ScalarField& f = run.snapshots.front();
  const double lo = *std::min_element(f.values.begin(), f.values.end());
  const double hi = *std::max_element(f.values.begin(), f.values.end());
  const double umin = *std::min_element(run.min_value.begin(), run.min_value.end());
  const double umax = *std::max_element(run.max_value.begin(), run.max_value.end());
  const bool ok = umin >= lo - 1e-12 && umax <= hi + 1e-12;
  return {{"f_min", lo}, {"f_max", hi}, {"u_min", umin}, {"u_max", umax}, {"pass", ok}};
}

inline SemigroupRun run_evolution(const json& m, const Grid& g, const DriftChoice& dc,
                                  const VectorField& b, DriftMetadata meta) {
  const auto block = parse_evolution(m);
  const auto f = parse_field(m.at("initial"), g.dim(), "initial")(g);
  EvolutionConfig cfg = resolve_tau(block, b);
  meta.delta = drift_delta(dc);
  meta.c = drift_c(dc);
  if (!meta.support_radius) meta.support_radius = drift_support(dc);
  cfg.meta = meta;
  return evolve(f, b, cfg);
}

inline Artifact run_evolve(const json& m, const Context& ctx) {
  Artifact art;
  const std::string stem = m.at("name");
  const Grid g = parse_grid(m);
  const DriftChoice dc = parse_drift(m, g);
  const VectorField b = build_drift(dc, g);
  const SemigroupRun run = run_evolution(m, g, dc, b, {});
  const json cert = m.value("certificates", json::object());
  std::vector<double> ps = cert.contains("p_list") ? numbers(cert, "p_list", "certificates")
                                                    : std::vector<double>{};
  std::vector<std::pair<double, double>> pq;
  if (cert.contains("pq"))
    for (const auto& pr : cert.at("pq"))
      pq.emplace_back(extended(pr.at(0), "certificates.pq"), extended(pr.at(1), "certificates.pq"));
  NormCertificateOptions opt;
  opt.contraction_tol = number_or(cert, "contraction_tol", opt.contraction_tol, "certificates");
  opt.slope_tol = number_or(cert, "slope_tol", opt.slope_tol, "certificates");
  opt.fit_t_min = number_or(cert, "fit_t_min", 0.0, "certificates");
  if (cert.contains("fit_t_max")) opt.fit_t_max = number(cert, "fit_t_max", "certificates");
  const auto rep = norm_certificates(run, ps, pq, opt);

  Csv lp{{"t", "p", "norm", "bound", "ratio"}, {}};
  json contraction = json::array();
  for (const auto& row : rep.contraction) {
    contraction.push_back({{"p", row.p}, {"applicable", row.applicable}, {"omega", row.omega},
                           {"max_ratio", row.max_ratio}, {"argmax_t", row.argmax_t},
                           {"pass", row.pass}});
    if (!row.applicable) continue;
    const auto j = static_cast<std::size_t>(
        std::find(run.p_list.begin(), run.p_list.end(), row.p) - run.p_list.begin());
    const double f = std::isinf(row.p) ? run.sup.front() : run.lp.front()[j];
    for (std::size_t k = 0; k < run.times.size(); ++k) {
      const double norm = std::isinf(row.p) ? run.sup[k] : run.lp[k][j];
      const double bound = std::exp(row.omega * run.times[k]) * f;
      lp.rows.push_back({run.times[k], row.p, norm, bound, bound > 0.0 ? norm / bound : 0.0});
    }
  }
  Csv decay{{"t", "p", "q", "norm", "expected_slope", "fitted_slope"}, {}};
  json decays = json::array();
  for (const auto& row : rep.decay) {
    decays.push_back({{"p", row.p}, {"q", std::isinf(row.q) ? json("inf") : json(row.q)},
                      {"fitted_slope", row.fitted_slope}, {"expected_slope", row.expected_slope},
                      {"relative_error", row.relative_error}, {"points", row.points},
                      {"pass", row.pass}});
    for (std::size_t k = 1; k < run.times.size(); ++k) {
      const double t = run.times[k];
      if (t < opt.fit_t_min || t > opt.fit_t_max) continue;
      double norm = run.sup[k];
      if (!std::isinf(row.q)) {
        const auto j = static_cast<std::size_t>(
            std::find(run.p_list.begin(), run.p_list.end(), row.q) - run.p_list.begin());
        norm = run.lp[k][j];
      }
      decay.rows.push_back({t, row.p, std::isinf(row.q) ? -1.0 : row.q, norm,
                            row.expected_slope, row.fitted_slope});
    }
  }
  const json mp = max_principle(run);
  art.pass = rep.pass && mp.at("pass").get<bool>();
  art.summary = {{"contraction", contraction}, {"decay", decays}, {"max_principle", mp},
                 {"steps", run.times.size() - 1}, {"tau", run.tau},
                 {"edge_sup_final", run.edge_sup.back()}, {"pass", art.pass}};
  if (!lp.rows.empty()) {
    write_csv(ctx.out_dir / (stem + "_lp.csv"), lp);
    art.files.push_back(stem + "_lp.csv");
    art.series.push_back({{"type", "lp_certificate"}, {"csv", stem + "_lp.csv"}});
  }
  if (!decay.rows.empty()) {
    write_csv(ctx.out_dir / (stem + "_decay.csv"), decay);
    art.files.push_back(stem + "_decay.csv");
    art.series.push_back({{"type", "decay"}, {"csv", stem + "_decay.csv"}});
  }
  if (parse_evolution(m).export_snapshots)
    for (auto& f : export_snapshots(ctx.out_dir, stem, run)) art.files.push_back(f);
  return art;
}

inline Artifact run_resolvent(const json& m, const Context& ctx) {
  Artifact art;
  const std::string stem = m.at("name");
  const Grid g = parse_grid(m);
  const DriftChoice dc = parse_drift(m, g);
  const json& r = m.at("resolvent");
  ResolventOptions opt;
  opt.tol = number_or(r, "tol", opt.tol, "resolvent");
  const double mu = number(r, "mu", "resolvent");
  const ScalarField f = parse_field(m.at("rhs"), g.dim(), "rhs")(g);
  SolveStats st;
  const ScalarField u = resolvent({mu, f, build_drift(dc, g)}, g, opt, &st);
  const double fmin = *std::min_element(f.values.begin(), f.values.end());
  const double umin = *std::min_element(u.values.begin(), u.values.end());
  const bool positivity = fmin < 0.0 || umin >= -1e-12;
  const bool contraction = mu * sup_norm(u) <= sup_norm(f) * (1.0 + 1e-6);
  art.pass = positivity && contraction;
  art.summary = {{"mu", mu}, {"iterations", st.iterations},
                 {"relative_residual", st.relative_residual}, {"u_min", umin},
                 {"u_max", *std::max_element(u.values.begin(), u.values.end())},
                 {"positivity", positivity}, {"sup_contraction", contraction}, {"pass", art.pass}};
  Csv hist{{"iteration", "relative_residual"}, {}};
  for (std::size_t i = 0; i < st.history.size(); ++i)
    hist.rows.push_back({static_cast<double>(i), st.history[i]});
  write_csv(ctx.out_dir / (stem + "_residuals.csv"), hist);
  art.files.push_back(stem + "_residuals.csv");
  if (r.value("export_solution", false)) {
    SemigroupRun one;
    one.grid = g;
    one.snapshots.push_back(u);
    one.snapshot_times.push_back(0.0);
    for (auto& fl : export_snapshots(ctx.out_dir, stem, one)) art.files.push_back(fl);
  }
  return art;
}

inline Artifact run_orlicz(const json& m, const Context& ctx) {
  Artifact art;
  const std::string stem = m.at("name");
  const Grid g = parse_grid(m);
  const DriftChoice dc = parse_drift(m, g);
  const json& o = m.at("orlicz");
  const VectorField b = build_drift(dc, g);
  DriftMetadata meta;
  meta.theta = number_or(o, "theta", 0.25, "orlicz");
  if (o.contains("c4") && o.at("c4").is_number())
    meta.c4 = o.at("c4").get<double>();
  else
    meta.c4 = estimate_c(b, 4.0);
  const SemigroupRun run = run_evolution(m, g, dc, b, meta);
  std::optional<double> c;
  if (o.contains("c")) c = positive(o, "c", "orlicz");
  const double tol = number_or(o, "tol", 5e-2, "orlicz");
  const auto rep = orlicz_energy_certificate(run, c, std::nullopt, tol);
  Csv csv{{"t", "star_lhs", "star_rhs", "star1_lhs", "star1_rhs", "gauge_lhs", "gauge_rhs"}, {}};
  for (const auto& r : rep.rows)
    csv.rows.push_back({r.t, r.star_lhs, r.star_rhs, r.star1_lhs, r.star1_rhs, r.gauge_lhs, r.gauge_rhs});
  write_csv(ctx.out_dir / (stem + "_energy.csv"), csv);
  art.files.push_back(stem + "_energy.csv");
  art.pass = rep.pass;
  art.summary = {{"c4", meta.c4}, {"c5", rep.constants.c5}, {"a", rep.constants.a},
                 {"lambda", rep.constants.lambda}, {"G", rep.constants.G},
                 {"c", rep.c}, {"f_gauge", rep.f_gauge},
                 {"star_violation", rep.star_violation}, {"star1_violation", rep.star1_violation},
                 {"gauge_violation", rep.gauge_violation}, {"star_ratio", rep.star_ratio},
                 {"star1_ratio", rep.star1_ratio}, {"gauge_ratio", rep.gauge_ratio},
                 {"max_principle", max_principle(run)},
                 // box truncation: largest |u| reached next to the boundary
                 {"box_edge_sup", *std::max_element(run.edge_sup.begin(), run.edge_sup.end())}};
  if (m.contains("embedding")) {
    const json& e = m.at("embedding");
    const int count = e.value("fields", 50), m_max = e.value("m_max", 4);
    std::mt19937_64 gen(ctx.seed);
    std::normal_distribution<double> normal;
    Csv emb{{"field", "m", "lp_norm", "bound", "tightness"}, {}};
    bool ok = true;
    for (int i = 0; i < count; ++i) {
      ScalarField f(g);
      for (std::size_t k : g.interior()) f[k] = normal(gen);
      const auto r = embedding_check(f, m_max);
      ok = ok && r.pass;
      for (const auto& row : r.rows)
        emb.rows.push_back({static_cast<double>(i), static_cast<double>(row.m), row.lp_norm,
                            row.bound, row.tightness});
    }
    write_csv(ctx.out_dir / (stem + "_embedding.csv"), emb);
    art.files.push_back(stem + "_embedding.csv");
    art.summary["embedding_pass"] = ok;
    art.pass = art.pass && ok;
  }
  art.summary["pass"] = art.pass;
  return art;
}

inline std::vector<VectorField> drift_levels(const json& m, const Grid& g, const DriftChoice& dc) {
  std::vector<VectorField> out;
  for (double e : numbers(m, "epsilons", "manifest")) out.push_back(build_drift(dc, g, e));
  return out;
}

inline Artifact run_cauchy(const json& m, const Context& ctx) {
  Artifact art;
  const std::string stem = m.at("name");
  const Grid g = parse_grid(m);
  const DriftChoice dc = parse_drift(m, g);
  const auto drifts = drift_levels(m, g, dc);
  const auto block = parse_evolution(m);
  EvolutionConfig cfg = block.cfg;
  if (block.cfl_safety > 0.0)
    for (const auto& b : drifts) cfg.tau = std::min(cfg.tau, block.cfl_safety * cfl_limit(b));
  const auto f = parse_field(m.at("initial"), g.dim(), "initial")(g);
  const auto rep = semigroup_cauchy(drifts, f, cfg, m.value("lambda", 0.0));
  Csv csv{{"n", "k", "sup_gauge_diff", "grad_diff_integral"}, {}};
  for (const auto& p : rep.pairs)
    csv.rows.push_back({static_cast<double>(p.n), static_cast<double>(p.k), p.sup_gauge_diff,
                        p.grad_diff_integral});
  write_csv(ctx.out_dir / (stem + "_pairs.csv"), csv);
  art.files.push_back(stem + "_pairs.csv");
  art.pass = rep.pass;
  art.summary = {{"consecutive_gauge", rep.consecutive_gauge},
                 {"consecutive_grad", rep.consecutive_grad}, {"grad_ratios", rep.grad_ratios},
                 {"drift_l2_diffs", rep.drift_l2_diffs}, {"gauge_monotone", rep.gauge_monotone},
                 {"grad_monotone", rep.grad_monotone}, {"grad_halving", rep.grad_halving},
                 {"pass", rep.pass}};
  return art;
}

inline Artifact run_trotter(const json& m, const Context& ctx) {
  Artifact art;
  const std::string stem = m.at("name");
  const Grid g = parse_grid(m);
  const DriftChoice dc = parse_drift(m, g);
  const auto drifts = drift_levels(m, g, dc);
  const auto mu = numbers(m, "mu_list", "manifest");
  const auto gf = parse_field(m.at("g"), g.dim(), "g")(g);
  TrotterOptions opt;
  opt.compact_radius = m.value("compact_radius", opt.compact_radius);
  opt.far_radius = m.value("far_radius", opt.far_radius);
  const auto rep = trotter_limit_check(drifts, mu, gf, opt);
  Csv csv{{"mu", "n", "sup_ratio", "identity_gap", "far_field"}, {}};
  for (std::size_t n = 0; n < drifts.size(); ++n)
    for (std::size_t k = 0; k < mu.size(); ++k)
      csv.rows.push_back({mu[k], static_cast<double>(n), rep.sup_ratio[n][k],
                          rep.identity_gap[n][k], rep.far_field[n][k]});
  write_csv(ctx.out_dir / (stem + "_resolvents.csv"), csv);
  art.files.push_back(stem + "_resolvents.csv");
  art.pass = rep.pass;
  // empirical μ0: smallest listed μ from which a condition holds for every
  // larger listed μ (null when it fails at the largest)
  auto onset = [&](auto holds) -> json {
    json out = nullptr;
    for (std::size_t k = mu.size(); k-- > 0;) {
      if (!holds(k)) break;
      out = mu[k];
    }
    return out;
  };
  const json mu_onset = {
      {"condition1", onset([&](std::size_t k) {
         for (const auto& row : rep.sup_ratio)
           if (row[k] > 1.0 + 1e-6) return false;
         return true;
       })},
      {"condition2", onset([&](std::size_t k) {
         const auto& d = rep.pair_diff[k];
         for (std::size_t n = 1; n < d.size(); ++n)
           if (d[n] > d[n - 1]) return false;
         return true;
       })},
      {"condition3", onset([&](std::size_t k) {
         return k == 0 || rep.condition3[k] < rep.condition3[k - 1];
       })}};
  art.summary = {{"condition1", rep.condition1}, {"condition2", rep.condition2},
                 {"mu_onset", mu_onset},
                 {"condition3_decreasing", rep.condition3_decreasing},
                 {"condition3", rep.condition3}, {"pair_diff", rep.pair_diff},
                 {"far_field_decay", rep.far_field_decay}, {"pass", rep.pass}};
  return art;
}

inline Artifact run_degiorgi(const json& m, const Context& ctx) {
  Artifact art;
  const std::string stem = m.at("name");
  json orbits = json::array();
  Csv zc{{"orbit", "m", "z"}, {}};
  bool ok = true;
  if (m.contains("iterations")) {
    std::size_t idx = 0;
    for (const auto& it : m.at("iterations")) {
      IterationParams p{it.at("N"), it.at("C0"), it.at("alpha"), it.at("z0"), it.value("m_max", 200)};
      const auto o = iterate_z(p);
      // the lemma: below the threshold the orbit must converge
      const bool lemma = !o.hypothesis || o.converged;
      ok = ok && lemma;
      orbits.push_back({{"threshold", o.threshold}, {"hypothesis", o.hypothesis},
                        {"converged", o.converged}, {"diverged", o.diverged},
                        {"lemma_consistent", lemma}});
      for (std::size_t k = 0; k < o.z.size(); ++k)
        zc.rows.push_back({static_cast<double>(idx), static_cast<double>(k), o.z[k]});
      ++idx;
    }
    write_csv(ctx.out_dir / (stem + "_orbits.csv"), zc);
    art.files.push_back(stem + "_orbits.csv");
  }
  art.summary["orbits"] = orbits;
  if (m.contains("holder")) {
    const Grid g = parse_grid(m);
    const DriftChoice dc = parse_drift(m, g);
    const json& h = m.at("holder");
    const double mu = h.at("mu");
    const ScalarField f = parse_field(h.at("rhs"), g.dim(), "holder.rhs")(g);
    const ScalarField u = resolvent({mu, f, build_drift(dc, g)}, g);
    const Point c = point(h.at("center"), g.dim(), "holder.center");
    const auto radii = numbers(h, "radii", "holder");
    const auto rec = holder_profile(u, c, radii, h.value("p", 3.0));
    Csv oc{{"radius", "osc", "level_measure", "fitted_beta"}, {}};
    for (std::size_t i = 0; i < radii.size(); ++i)
      oc.rows.push_back({radii[i], rec.osc[i], rec.level_measure[i], rec.beta});
    write_csv(ctx.out_dir / (stem + "_oscillation.csv"), oc);
    art.files.push_back(stem + "_oscillation.csv");
    art.series.push_back({{"type", "oscillation"}, {"csv", stem + "_oscillation.csv"},
                          {"B", rec.B}});
    art.summary["holder"] = {{"beta", rec.beta}, {"beta_raw", rec.beta_raw}, {"B", rec.B},
                             {"C", rec.C}, {"monotone", rec.monotone},
                             {"decay_ratio", rec.decay_ratio}, {"decay_n", rec.decay_n},
                             {"decay_C2_n0", rec.decay_C2_n0}};
    ok = ok && rec.monotone;
  }
  art.pass = ok;
  art.summary["pass"] = ok;
  return art;
}

inline SdeConfig parse_sde(const json& s, std::uint64_t seed) {
  SdeConfig c;
  c.dim = s.at("d");
  c.x0 = point(s.at("x0"), c.dim, "sde.x0");
  c.dt = s.at("dt");
  c.T = s.at("T");
  c.paths = s.at("paths").get<std::size_t>();
  c.eps_reg = s.value("eps_reg", 0.0);
  c.box_radius = s.contains("box_radius") ? extended(s.at("box_radius"), "sde.box_radius")
                                          : std::numeric_limits<double>::infinity();
  c.step_factor = s.value("step_factor", 0.0);
  c.seed = seed;
  return c;
}

inline Artifact run_sde_scan(const json& m, const Context& ctx) {
  Artifact art;
  const std::string stem = m.at("name");
  const json& s = m.at("sde");
  SdeConfig base = parse_sde(s, ctx.seed);
  base.sign = -1;
  const auto eh = numbers(s, "eps_hit_list", "sde");
  base.eps_hit = eh.front();
  const auto curve = hitting_scan(numbers(m, "delta_list", "manifest"), base, eh);
  Csv csv{{"delta", "p_hat", "ci_lo", "ci_hi", "M", "eps_reg", "eps_hit"}, {}};
  for (const auto& r : curve.rows)
    csv.rows.push_back({r.delta, r.ci.p_hat, r.ci.lo, r.ci.hi, static_cast<double>(r.paths),
                        r.eps_reg, r.eps_hit});
  write_csv(ctx.out_dir / (stem + "_curve.csv"), csv);
  art.files.push_back(stem + "_curve.csv");
  art.series.push_back({{"type", "hitting_curve"}, {"csv", stem + "_curve.csv"},
                        {"threshold", curve.threshold}});
  art.pass = curve.monotone;
  art.summary = {{"threshold", curve.threshold}, {"monotone", curve.monotone},
                 {"threshold_jump", curve.threshold_jump},
                 {"marked_increase", curve.marked_increase}, {"seed", ctx.seed},
                 {"pass", art.pass}};
  return art;
}

inline Artifact run_crosscheck(const json& m, const Context& ctx) {
  Artifact art;
  const std::string stem = m.at("name");
  const Grid g = parse_grid(m);
  const DriftChoice dc = parse_drift(m, g);
  const json& c = m.at("crosscheck");
  const double t = c.at("t");
  auto b = std::make_shared<VectorField>(build_drift(dc, g));
  json mm = m;
  mm["evolution"]["T"] = t;
  mm["evolution"]["snapshot_stride"] = 1 << 30;
  const SemigroupRun run = run_evolution(mm, g, dc, *b, {});
  std::vector<Point> xs;
  for (const auto& x : c.at("x_list")) xs.push_back(point(x, g.dim(), "crosscheck.x_list"));
  double allowance = c.value("allowance", 0.0);
  if (c.contains("coarse_N")) {
    const Grid gc(g.dim(), g.half_width(), c.at("coarse_N").get<int>());
    const VectorField bc = build_drift(dc, gc);
    json mc = mm;
    mc["evolution"]["tau"] = 2.0 * run.tau;
    const SemigroupRun coarse = run_evolution(mc, gc, dc, bc, {});
    for (const auto& x : xs)
      allowance = std::max(allowance, std::abs(interpolate(run.snapshots.back(), x) -
                                               interpolate(coarse.snapshots.back(), x)));
  }
  SdeConfig cfg;
  cfg.dim = g.dim();
  cfg.x0 = Point(g.dim());
  cfg.dt = c.at("dt");
  cfg.paths = c.at("paths").get<std::size_t>();
  cfg.seed = ctx.seed;
  cfg.grid_drift = b;
  cfg.grid_drift_delta = run.meta.delta;
  const ScalarField& f = run.snapshots.front();
  const auto rep = feller_crosscheck(f, t, xs, cfg, run, allowance);
  Csv csv{{"x0", "x1", "x2", "mc_mean", "mc_se", "pde", "difference", "allowed"}, {}};
  for (const auto& r : rep.rows)
    csv.rows.push_back({r.x[0], g.dim() > 1 ? r.x[1] : 0.0, g.dim() > 2 ? r.x[2] : 0.0,
                        r.mc_mean, r.mc_se, r.pde, r.difference, r.allowed});
  write_csv(ctx.out_dir / (stem + "_probes.csv"), csv);
  art.files.push_back(stem + "_probes.csv");
  art.pass = rep.pass;
  art.summary = {{"t", t}, {"allowance", allowance}, {"pass", rep.pass}};
  return art;
}

}  // namespace detail

struct RunResult {
  int exit_code = kExitPass;
  std::string message;
  json index = json::object();
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

/// Validates, then runs every experiment of the manifest and writes the
/// index (`index.json`) into the output directory.
inline RunResult run_experiment(const json& manifest, const RunOptions& opt = {}) {
  RunResult res;
  std::vector<json> exps;
  try {
    exps = validate_manifest(manifest);
  } catch (const ValidationError& e) {
    res.exit_code = kExitValidation;
    res.message = std::string("validation error: ") + e.what();
    return res;
  }
  Context ctx;
  ctx.seed = opt.seed ? *opt.seed : manifest.value("seed", std::uint64_t{1});
  ctx.out_dir = opt.out_dir ? fs::path(*opt.out_dir)
                            : fs::path(manifest.value("out_dir", std::string("lab_out")));
  json artifacts = json::array();
  bool all = true;
  try {
    fs::create_directories(ctx.out_dir);
    for (const auto& m : exps) {
      const std::string kind = m.at("kind");
      Artifact art;
      if (kind == "formbound") art = detail::run_formbound(m, ctx);
      else if (kind == "evolve") art = detail::run_evolve(m, ctx);
      else if (kind == "resolvent") art = detail::run_resolvent(m, ctx);
      else if (kind == "orlicz") art = detail::run_orlicz(m, ctx);
      else if (kind == "cauchy") art = detail::run_cauchy(m, ctx);
      else if (kind == "trotter") art = detail::run_trotter(m, ctx);
      else if (kind == "degiorgi") art = detail::run_degiorgi(m, ctx);
      else if (kind == "sde-scan") art = detail::run_sde_scan(m, ctx);
      else art = detail::run_crosscheck(m, ctx);
      art.name = m.at("name");
      art.kind = kind;
      const std::string report = art.name + ".json";
      json summary = art.summary;
      summary["name"] = art.name;
      summary["kind"] = kind;
      write_json(ctx.out_dir / report, summary);
      art.files.insert(art.files.begin(), report);
      artifacts.push_back({{"name", art.name}, {"kind", kind}, {"pass", art.pass},
                           {"files", art.files}, {"series", art.series}});
      all = all && art.pass;
    }
    res.index = {{"artifacts", artifacts}, {"pass", all}, {"seed", ctx.seed}};
    write_json(ctx.out_dir / "index.json", res.index);
  } catch (const std::exception& e) {
    res.exit_code = kExitComputation;
    res.message = std::string("computation error: ") + e.what();
    return res;
  }
  res.exit_code = all ? kExitPass : kExitCertificateFailed;
  res.message = all ? "all certificates pass" : "some certificates failed";
  return res;
}

// ---------------------------------------------------------------------------
// SVG rendering

struct PlotSeries {
  std::vector<double> x, y;
  std::vector<double> lo, hi;  // optional error bars
  std::string label;
  std::string color = "#1f77b4";
  bool dashed = false;
  bool markers = false;
};

struct Plot {
  std::string title, xlabel, ylabel;
  bool logx = false, logy = false;
  std::vector<PlotSeries> series;
  std::vector<std::pair<double, std::string>> vlines;
};

inline std::string render_svg(const Plot& p) {
  const double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 55;
  auto tx = [&](double v) { return p.logx ? std::log10(v) : v; };
  auto ty = [&](double v) { return p.logy ? std::log10(v) : v; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto take_x = [&](double v) {
    if (p.logx && !(v > 0.0)) return;
    x0 = std::min(x0, tx(v));
    x1 = std::max(x1, tx(v));
  };
  auto take_y = [&](double v) {
    if (p.logy && !(v > 0.0)) return;
    if (!std::isfinite(v)) return;
    y0 = std::min(y0, ty(v));
    y1 = std::max(y1, ty(v));
  };
  for (const auto& s : p.series) {
    for (double v : s.x) take_x(v);
    for (double v : s.y) take_y(v);
    for (double v : s.lo) take_y(v);
    for (double v : s.hi) take_y(v);
  }
  for (const auto& [v, _] : p.vlines) take_x(v);
  if (!(x1 > x0)) { x0 -= 1; x1 += 1; }
  if (!(y1 > y0)) { y0 -= 1; y1 += 1; }
  const double py = 0.05 * (y1 - y0);
  y0 -= py;
  y1 += py;
  auto X = [&](double v) { return ml + (tx(v) - x0) / (x1 - x0) * (W - ml - mr); };
  auto Y = [&](double v) { return H - mb - (ty(v) - y0) / (y1 - y0) * (H - mt - mb); };
  auto f = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", v);
    return std::string(b);
  };
  auto g = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return std::string(b);
  };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << p.title
    << "</text>\n";
  o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\""
    << H - mt - mb << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double vx = x0 + (x1 - x0) * i / 4.0, vy = y0 + (y1 - y0) * i / 4.0;
    const double px = ml + (W - ml - mr) * i / 4.0, pyy = H - mb - (H - mt - mb) * i / 4.0;
    o << "<text x=\"" << f(px) << "\" y=\"" << H - mb + 16 << "\" text-anchor=\"middle\">"
      << g(p.logx ? std::pow(10.0, vx) : vx) << "</text>\n";
    o << "<text x=\"" << ml - 6 << "\" y=\"" << f(pyy + 4) << "\" text-anchor=\"end\">"
      << g(p.logy ? std::pow(10.0, vy) : vy) << "</text>\n";
  }
  o << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << p.xlabel
    << "</text>\n";
  o << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << H / 2 << ")\">" << p.ylabel << "</text>\n";
  for (const auto& [v, label] : p.vlines) {
    o << "<line x1=\"" << f(X(v)) << "\" y1=\"" << mt << "\" x2=\"" << f(X(v)) << "\" y2=\""
      << H - mb << "\" stroke=\"#d62728\" stroke-dasharray=\"6,4\"/>\n";
    o << "<text x=\"" << f(X(v) + 4) << "\" y=\"" << mt + 14 << "\" fill=\"#d62728\">" << label
      << "</text>\n";
  }
  int legend = 0;
  for (const auto& s : p.series) {
    std::ostringstream path;
    bool pen = false;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((p.logx && !(s.x[i] > 0.0)) || (p.logy && !(s.y[i] > 0.0)) || !std::isfinite(s.y[i])) {
        pen = false;
        continue;
      }
      path << (pen ? " L " : " M ") << f(X(s.x[i])) << " " << f(Y(s.y[i]));
      pen = true;
    }
    o << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << s.color
      << "\" stroke-width=\"1.5\"" << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (s.markers && (!p.logy || s.y[i] > 0.0))
        o << "<circle cx=\"" << f(X(s.x[i])) << "\" cy=\"" << f(Y(s.y[i])) << "\" r=\"3\" fill=\""
          << s.color << "\"/>\n";
      if (i < s.lo.size() && (!p.logy || s.lo[i] > 0.0))
        o << "<line x1=\"" << f(X(s.x[i])) << "\" y1=\"" << f(Y(s.lo[i])) << "\" x2=\""
          << f(X(s.x[i])) << "\" y2=\"" << f(Y(s.hi[i])) << "\" stroke=\"" << s.color << "\"/>\n";
    }
    o << "<text x=\"" << W - mr - 10 << "\" y=\"" << mt + 16 + 14 * legend++
      << "\" text-anchor=\"end\" fill=\"" << s.color << "\">" << s.label << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

struct RenderResult {
  std::vector<std::string> plots;
  std::vector<std::string> skipped;
};

namespace detail {

inline std::vector<double> column(const Csv& c, const std::string& name) {
  const auto it = std::find(c.header.begin(), c.header.end(), name);
  if (it == c.header.end()) throw Error("csv column '" + name + "' missing");
  const auto j = static_cast<std::size_t>(it - c.header.begin());
  std::vector<double> out;
  for (const auto& r : c.rows) out.push_back(r.at(j));
  return out;
}

inline const char* palette(std::size_t i) {
  static const char* c[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"};
  return c[i % 6];
}

// Groups rows by the value of `key`, keeping first-appearance order.
inline std::vector<std::pair<double, std::vector<std::size_t>>> groups(const std::vector<double>& key) {
  std::vector<std::pair<double, std::vector<std::size_t>>> out;
  for (std::size_t i = 0; i < key.size(); ++i) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& g) { return g.first == key[i]; });
    if (it == out.end()) out.push_back({key[i], {i}});
    else it->second.push_back(i);
  }
  return out;
}

inline Plot plot_for(const json& series, const Csv& csv) {
  const std::string type = series.at("type");
  Plot p;
  if (type == "lp_certificate") {
    p.title = "L^p norm against the e^{ωt} bound";
    p.xlabel = "t";
    p.ylabel = "||u(t)||_p";
    const auto t = column(csv, "t"), pc = column(csv, "p"), n = column(csv, "norm"),
               b = column(csv, "bound");
    std::size_t k = 0;
    for (const auto& [pv, idx] : groups(pc)) {
      PlotSeries s, sb;
      for (auto i : idx) {
        s.x.push_back(t[i]);
        s.y.push_back(n[i]);
        sb.x.push_back(t[i]);
        sb.y.push_back(b[i]);
      }
      s.label = "p = " + label(pv);
      s.color = sb.color = palette(k++);
      sb.label = "bound, p = " + label(pv);
      sb.dashed = true;
      p.series.push_back(s);
      p.series.push_back(sb);
    }
  } else if (type == "decay") {
    p.title = "L^p to L^q decay";
    p.xlabel = "t";
    p.ylabel = "||u(t)||_q";
    p.logx = p.logy = true;
    const auto t = column(csv, "t"), q = column(csv, "q"), n = column(csv, "norm"),
               es = column(csv, "expected_slope");
    std::size_t k = 0;
    for (const auto& [qv, idx] : groups(q)) {
      PlotSeries s, ref;
      for (auto i : idx) {
        s.x.push_back(t[i]);
        s.y.push_back(n[i]);
      }
      const double s0 = es[idx.front()];
      for (auto i : idx) {
        ref.x.push_back(t[i]);
        ref.y.push_back(n[idx.front()] * std::pow(t[i] / t[idx.front()], s0));
      }
      s.label = qv < 0 ? "q = inf" : "q = " + label(qv);
      s.color = ref.color = palette(k++);
      s.markers = true;
      ref.dashed = true;
      ref.label = "slope " + label(s0);
      p.series.push_back(s);
      p.series.push_back(ref);
    }
  } else if (type == "hitting_curve") {
    p.title = "hitting probability";
    p.xlabel = "delta";
    p.ylabel = "p_hat";
    const auto d = column(csv, "delta"), ph = column(csv, "p_hat"), lo = column(csv, "ci_lo"),
               hi = column(csv, "ci_hi"), eh = column(csv, "eps_hit");
    std::size_t k = 0;
    for (const auto& [e, idx] : groups(eh)) {
      PlotSeries s;
      for (auto i : idx) {
        s.x.push_back(d[i]);
        s.y.push_back(ph[i]);
        s.lo.push_back(lo[i]);
        s.hi.push_back(hi[i]);
      }
      s.label = "eps_hit = " + label(e);
      s.color = palette(k++);
      s.markers = true;
      p.series.push_back(s);
    }
    if (series.contains("threshold"))
      p.vlines.push_back({series.at("threshold").get<double>(),
                          "delta = " + label(series.at("threshold").get<double>())});
  } else if (type == "oscillation") {
    p.title = "oscillation profile";
    p.xlabel = "R";
    p.ylabel = "osc(u, R)";
    p.logx = p.logy = true;
    const auto r = column(csv, "radius"), o = column(csv, "osc"), beta = column(csv, "fitted_beta");
    PlotSeries s{r, o, {}, {}, "osc", palette(0), false, true};
    PlotSeries fit;
    const double B = series.value("B", 0.0);
    for (double x : r) {
      fit.x.push_back(x);
      fit.y.push_back(B * std::pow(x, beta.front()));
    }
    fit.label = "fit, beta = " + label(beta.front());
    fit.color = palette(1);
    fit.dashed = true;
    p.series.push_back(s);
    p.series.push_back(fit);
  } else {
    throw Error("unknown series type '" + type + "'");
  }
  return p;
}

}  // namespace detail

/// Renders every plottable series listed in the index into SVG files next to
/// it. Series whose CSV is missing or unreadable are listed as skipped.
inline RenderResult render_report(const fs::path& index_path) {
  RenderResult res;
  std::ifstream in(index_path);
  if (!in) throw Error("cannot read index " + index_path.string());
  const json index = json::parse(in);
  const fs::path dir = index_path.parent_path();
  for (const auto& art : index.value("artifacts", json::array())) {
    std::size_t k = 0;
    for (const auto& s : art.value("series", json::array())) {
      const std::string csv_name = s.value("csv", "");
      const fs::path csv_path = dir / csv_name;
      if (csv_name.empty() || !fs::exists(csv_path)) {
        res.skipped.push_back(art.value("name", "?") + ":" + csv_name);
        continue;
      }
      try {
        const Plot p = detail::plot_for(s, read_csv(csv_path));
        const std::string out = art.value("name", "plot") + "_" + std::to_string(k++) + ".svg";
        std::ofstream o(dir / out, std::ios::binary);
        o << render_svg(p);
        res.plots.push_back(out);
      } catch (const std::exception&) {
        res.skipped.push_back(art.value("name", "?") + ":" + csv_name);
      }
    }
  }
  return res;
}

}  // namespace sdlab::lab
