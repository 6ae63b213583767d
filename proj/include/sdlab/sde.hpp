#pragma once

// Euler–Maruyama simulation of dX = -b(X) dt + √2 dB with the Hardy drift
//   b(x) = -sign · √δ (d-2)/2 · x / max(|x|, eps_reg)^2
// (sign = -1 pulls paths toward the origin), hitting-probability scans and a
// Monte Carlo cross-check of the PDE solver through u(t,x) = E f(X_t^x).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <vector>

#include "sdlab/errors.hpp"
#include "sdlab/grid.hpp"
#include "sdlab/parabolic.hpp"
#include "sdlab/parallel.hpp"

namespace sdlab {

struct SdeConfig {
  int dim = 3;
  double delta = 0.0;
  int sign = -1;
  Point x0{1.0, 0.0, 0.0};
  double dt = 1e-5;
  double T = 1.0;
  std::size_t paths = 10000;
  double eps_reg = 0.0;
  double eps_hit = 0.0;  // 0 disables hitting
  std::uint64_t seed = 1;
  double box_radius = std::numeric_limits<double>::infinity();
  // Step dt_k = max(dt, step_factor · dist^2), dist the distance to the hit
  // ball and the box boundary; 0 disables adaptivity.
  double step_factor = 0.0;
  // Sampled drift b on a grid (used instead of the Hardy field when set).
  std::shared_ptr<const VectorField> grid_drift;
  double grid_drift_delta = 0.0;  // declared δ of the sampled drift
};

inline double sde_amplitude(const SdeConfig& c) {
  return std::sqrt(c.delta) * (c.dim - 2) / 2.0;
}

/// Default regularization radius 10 √dt · √δ (d-2)/2.
inline double default_eps_reg(double dt, double delta, int d) {
  return 10.0 * std::sqrt(dt) * std::sqrt(delta) * (d - 2) / 2.0;
}

inline void validate(const SdeConfig& c) {
  if (c.dim < 3 || c.dim > kMaxDim) throw ConfigurationError("sde: dimension must be in [3, 6]");
  if (c.x0.dim != c.dim) throw ConfigurationError("sde: x0 dimension mismatch");
  if (c.sign != 1 && c.sign != -1) throw ConfigurationError("sde: sign must be ±1");
  if (c.delta < 0.0) throw ConfigurationError("sde: delta must be >= 0");
  if (!(c.dt > 0.0) || !(c.T > 0.0)) throw ConfigurationError("sde: dt and T must be > 0");
  if (c.paths == 0) throw ConfigurationError("sde: paths must be > 0");
  if (c.eps_reg < 0.0 || c.eps_hit < 0.0) throw ConfigurationError("sde: radii must be >= 0");
  if (c.eps_hit > 0.0 && c.eps_hit < c.eps_reg)
    throw ConfigurationError("sde: eps_hit must be >= eps_reg");
  if (c.step_factor < 0.0) throw ConfigurationError("sde: step_factor must be >= 0");
  if (c.grid_drift) {
    if (c.grid_drift->dim() != c.dim) throw ConfigurationError("sde: grid drift dimension");
    return;
  }
  const double amp = sde_amplitude(c);
  if (amp > 0.0) {
    if (!(c.eps_reg > 0.0)) throw ConfigurationError("sde: eps_reg must be > 0 for delta > 0");
    if (c.dt > c.eps_reg * c.eps_reg / (2.0 * amp))
      throw ConfigurationError("sde: dt exceeds eps_reg^2 / (sqrt(delta)(d-2))");
  }
}

/// Drift increment -b(x) dt of one Euler step.
inline Point drift_increment(const SdeConfig& c, const Point& x, double dt) {
  if (c.grid_drift) return interpolate(*c.grid_drift, x) * (-dt);
  const double amp = sde_amplitude(c);
  Point out(c.dim);
  if (amp == 0.0) return out;
  const double r = std::max(x.norm(), c.eps_reg);
  return x * (c.sign * amp * dt / (r * r));
}

/// Per-path generator derived from (seed, path index) only.
inline std::mt19937_64 path_stream(std::uint64_t seed, std::uint64_t path) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
  return std::mt19937_64(seq);
}

struct TrajectoryEnsemble {
  std::vector<Point> endpoints;
  std::vector<std::uint8_t> hit;     // entered B_{eps_hit}(0) before T
  std::vector<std::uint8_t> exited;  // left the simulation box before T
  std::vector<double> sup_norm;      // max_t |X_t|
  std::vector<std::uint64_t> stream; // rng stream id (path index)
  std::size_t hits = 0;
  std::size_t exits = 0;
};

namespace detail {

struct PathResult {
  Point end;
  bool hit = false;
  bool exited = false;
  double sup = 0.0;
};

inline PathResult simulate_path(const SdeConfig& c, std::uint64_t path) {
  auto gen = path_stream(c.seed, path);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  PathResult res;
  Point x = c.x0;
  double t = 0.0;
  res.sup = x.norm();
  while (t < c.T) {
    const double r = x.norm();
    if (c.eps_hit > 0.0 && r <= c.eps_hit) {
      res.hit = true;
      break;
    }
    if (r >= c.box_radius) {
      res.exited = true;
      break;
    }
    double h = c.dt;
    if (c.step_factor > 0.0) {
      double dist = c.box_radius - r;
      if (c.eps_hit > 0.0) dist = std::min(dist, r - c.eps_hit);
      if (std::isfinite(dist)) h = std::max(h, c.step_factor * dist * dist);
    }
    h = std::min(h, c.T - t);
    const Point drift = drift_increment(c, x, h);
    const double s = std::sqrt(2.0 * h);
    for (int a = 0; a < c.dim; ++a) x[a] += drift[a] + s * normal(gen);
    t += h;
    res.sup = std::max(res.sup, x.norm());
    if (c.eps_hit > 0.0) {
      // Brownian-bridge entry between the two endpoints, the sphere taken as
      // locally flat: P = exp(-a b / h) for distances a, b and variance 2h.
      const double a0 = r - c.eps_hit, a1 = x.norm() - c.eps_hit;
      if (a1 > 0.0 && uniform(gen) < std::exp(-a0 * a1 / h)) {
        res.hit = true;
        break;
      }
    }
  }
  if (!res.hit && !res.exited) {
    const double r = x.norm();
    if (c.eps_hit > 0.0 && r <= c.eps_hit) res.hit = true;
    else if (r >= c.box_radius) res.exited = true;
  }
  res.end = x;
  return res;
}

}  // namespace detail

/// Simulates cfg.paths independent paths, each on its own stream.
inline TrajectoryEnsemble simulate(const SdeConfig& cfg) {
  validate(cfg);
  const std::size_t M = cfg.paths;
  TrajectoryEnsemble ens;
  ens.endpoints.assign(M, Point(cfg.dim));
  ens.hit.assign(M, 0);
  ens.exited.assign(M, 0);
  ens.sup_norm.assign(M, 0.0);
  ens.stream.resize(M);
#pragma omp parallel for schedule(dynamic, 64) if (thread_count() > 1)
  for (std::size_t p = 0; p < M; ++p) {
    const auto r = detail::simulate_path(cfg, p);
    ens.endpoints[p] = r.end;
    ens.hit[p] = r.hit;
    ens.exited[p] = r.exited;
    ens.sup_norm[p] = r.sup;
    ens.stream[p] = p;
  }
  for (std::size_t p = 0; p < M; ++p) {
    ens.hits += ens.hit[p];
    ens.exits += ens.exited[p];
  }
  return ens;
}

// ---------------------------------------------------------------------------
// Hitting probabilities

struct WilsonInterval {
  double p_hat = 0.0, lo = 0.0, hi = 0.0;
};

/// Wilson score interval, 95% by default.
inline WilsonInterval wilson_interval(std::size_t successes, std::size_t n,
                                      double z = 1.959963984540054) {
  if (n == 0) throw ParameterError("wilson_interval: n must be > 0");
  const double N = static_cast<double>(n);
  const double p = static_cast<double>(successes) / N;
  const double z2 = z * z;
  const double den = 1.0 + z2 / N;
  const double mid = (p + z2 / (2.0 * N)) / den;
  const double half = z * std::sqrt(p * (1.0 - p) / N + z2 / (4.0 * N * N)) / den;
  return {p, std::max(0.0, mid - half), std::min(1.0, mid + half)};
}

/// Probability that a radial diffusion of effective dimension de started at
/// radius r enters B_eps before leaving B_R (R = inf allowed).
inline double bessel_hit_probability(double de, double r, double eps, double R) {
  if (r <= eps) return 1.0;
  if (std::abs(de - 2.0) < 1e-12) {
    if (!std::isfinite(R)) return 1.0;
    return std::log(R / r) / std::log(R / eps);
  }
  const double e = 2.0 - de;
  if (!std::isfinite(R)) return e < 0.0 ? std::pow(r / eps, e) : 1.0;
  return (std::pow(r, e) - std::pow(R, e)) / (std::pow(eps, e) - std::pow(R, e));
}

/// Effective radial dimension d - sign·√δ(d-2)/2 · (-1): attraction lowers it.
inline double effective_dimension(int d, double delta, int sign) {
  return d + sign * std::sqrt(delta) * (d - 2) / 2.0;
}

struct HitRow {
  double delta = 0.0;
  double eps_hit = 0.0;
  double eps_reg = 0.0;
  std::size_t paths = 0;
  std::size_t hits = 0;
  WilsonInterval ci;
};

struct HitCurve {
  std::vector<HitRow> rows;  // for each eps_hit, all deltas in order
  double threshold = 0.0;    // 4 (d/(d-2))^2
  bool monotone = true;      // per eps_hit: nondecreasing up to CI overlap
  double threshold_jump = 0.0;  // p(first δ above threshold) - p(last δ below), first eps_hit
  bool marked_increase = false; // jump exceeds both CI half-widths
};

/// Scans δ with the attracting sign. eps_reg is cfg_base.eps_reg when > 0,
/// else the default for the largest δ; it is shared by all δ so that the
/// rows differ only in δ. Every value in eps_hit_list gets its own rows.
inline HitCurve hitting_scan(const std::vector<double>& delta_list, const SdeConfig& cfg_base,
                             std::vector<double> eps_hit_list = {}) {
  if (delta_list.empty()) throw ConfigurationError("hitting_scan: empty delta list");
  if (!std::is_sorted(delta_list.begin(), delta_list.end()))
    throw ConfigurationError("hitting_scan: delta list must be sorted");
  if (cfg_base.sign != -1) throw ConfigurationError("hitting_scan: needs the attracting sign");
  if (eps_hit_list.empty()) eps_hit_list.push_back(cfg_base.eps_hit);
  HitCurve curve;
  const int d = cfg_base.dim;
  curve.threshold = 4.0 * std::pow(static_cast<double>(d) / (d - 2), 2);
  const double eps_reg = cfg_base.eps_reg > 0.0
                             ? cfg_base.eps_reg
                             : default_eps_reg(cfg_base.dt, delta_list.back(), d);
  for (std::size_t e = 0; e < eps_hit_list.size(); ++e) {
    const std::size_t first = curve.rows.size();
    for (double delta : delta_list) {
      SdeConfig c = cfg_base;
      c.delta = delta;
      c.eps_reg = eps_reg;
      c.eps_hit = eps_hit_list[e];
      const auto ens = simulate(c);
      HitRow row{delta, c.eps_hit, eps_reg, c.paths, ens.hits, wilson_interval(ens.hits, c.paths)};
      curve.rows.push_back(row);
    }
    for (std::size_t i = first + 1; i < curve.rows.size(); ++i) {
      const auto& a = curve.rows[i - 1].ci;
      const auto& b = curve.rows[i].ci;
      curve.monotone = curve.monotone && (b.p_hat >= a.p_hat || b.hi >= a.lo);
    }
    if (e == 0) {
      const HitRow* below = nullptr;
      const HitRow* above = nullptr;
      for (std::size_t i = first; i < curve.rows.size(); ++i) {
        if (curve.rows[i].delta < curve.threshold) below = &curve.rows[i];
        if (curve.rows[i].delta > curve.threshold && !above) above = &curve.rows[i];
      }
      if (below && above) {
        curve.threshold_jump = above->ci.p_hat - below->ci.p_hat;
        curve.marked_increase = curve.threshold_jump > (below->ci.hi - below->ci.p_hat) &&
                                curve.threshold_jump > (above->ci.p_hat - above->ci.lo);
      }
    }
  }
  return curve;
}

// ---------------------------------------------------------------------------
// PDE / Monte Carlo cross-check

struct CrosscheckRow {
  Point x;
  double mc_mean = 0.0;
  double mc_se = 0.0;
  double pde = 0.0;
  double difference = 0.0;
  double allowed = 0.0;  // 3 SE + allowance
  bool pass = true;
};

struct CrosscheckReport {
  double t = 0.0;
  std::vector<CrosscheckRow> rows;
  bool pass = true;
};

/// Compares E f(X_t^x), paths killed on leaving the grid box, with the PDE
/// snapshot at time t (which must be stored in `pde_reference`). The SDE uses
/// the PDE drift through cfg.grid_drift.
inline CrosscheckReport feller_crosscheck(const ScalarField& f, double t,
                                          const std::vector<Point>& x_list, SdeConfig cfg,
                                          const SemigroupRun& pde_reference, double allowance) {
  const Grid& g = pde_reference.grid;
  require_same_grid(f.grid, g);
  if (!cfg.grid_drift || !(cfg.grid_drift->grid == g))
    throw ConfigurationError("crosscheck: SDE drift must be the PDE drift on the same grid");
  if (std::abs(cfg.grid_drift_delta - pde_reference.meta.delta) > 1e-12)
    throw ConfigurationError("crosscheck: drift metadata mismatch");
  const auto it = std::find_if(pde_reference.snapshot_times.begin(),
                               pde_reference.snapshot_times.end(),
                               [&](double s) { return std::abs(s - t) <= 1e-9 * std::max(1.0, t); });
  if (it == pde_reference.snapshot_times.end())
    throw ConfigurationError("crosscheck: no PDE snapshot at the requested time");
  const ScalarField& u = pde_reference.snapshots[static_cast<std::size_t>(
      it - pde_reference.snapshot_times.begin())];
  cfg.T = t;
  cfg.eps_hit = 0.0;
  cfg.step_factor = 0.0;
  cfg.box_radius = std::numeric_limits<double>::infinity();
  validate(cfg);
  const double L = g.half_width();

  CrosscheckReport rep;
  rep.t = t;
  for (std::size_t j = 0; j < x_list.size(); ++j) {
    const Point& x0 = x_list[j];
    std::vector<double> val(cfg.paths, 0.0);
#pragma omp parallel for schedule(dynamic, 64) if (thread_count() > 1)
    for (std::size_t p = 0; p < cfg.paths; ++p) {
      auto gen = path_stream(cfg.seed + 0x9e3779b97f4a7c15ULL * (j + 1), p);
      std::normal_distribution<double> normal;
      Point x = x0;
      double s = 0.0;
      bool killed = false;
      while (s < t - 1e-15) {
        const double h = std::min(cfg.dt, t - s);
        const Point drift = drift_increment(cfg, x, h);
        const double sd = std::sqrt(2.0 * h);
        for (int a = 0; a < cfg.dim; ++a) {
          x[a] += drift[a] + sd * normal(gen);
          if (std::abs(x[a]) >= L) killed = true;
        }
        s += h;
        if (killed) break;
      }
      val[p] = killed ? 0.0 : interpolate(f, x);
    }
    double sum = 0.0, sq = 0.0;
    for (double v : val) sum += v;
    const double mean = sum / static_cast<double>(cfg.paths);
    for (double v : val) sq += (v - mean) * (v - mean);
    CrosscheckRow row;
    row.x = x0;
    row.mc_mean = mean;
    row.mc_se = std::sqrt(sq / static_cast<double>(cfg.paths - 1) / static_cast<double>(cfg.paths));
    row.pde = interpolate(u, x0);
    row.difference = std::abs(row.mc_mean - row.pde);
    row.allowed = 3.0 * row.mc_se + allowance;
    row.pass = row.difference <= row.allowed;
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace sdlab
