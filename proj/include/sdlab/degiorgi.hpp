#pragma once

// De Giorgi iteration lemma, oscillation profiles and empirical Caccioppoli
// constants.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sdlab/errors.hpp"
#include "sdlab/grid.hpp"
#include "sdlab/parabolic.hpp"

namespace sdlab {

struct IterationParams {
  double N = 1.0;
  double C0 = 2.0;
  double alpha = 1.0;
  double z0 = 0.0;
  int m_max = 200;
};

/// z* = N^{-1/α} C0^{-1/α^2}, the largest z0 for which the lemma applies.
inline double z_threshold(const IterationParams& p) {
  if (!(p.N > 0.0) || !(p.C0 > 1.0) || !(p.alpha > 0.0))
    throw ParameterError("iteration params need N > 0, C0 > 1, alpha > 0");
  const double z = std::exp(-std::log(p.N) / p.alpha - std::log(p.C0) / (p.alpha * p.alpha));
  if (!std::isfinite(z)) throw ParameterError("iteration threshold is not finite");
  return z;
}

struct ZOrbit {
  std::vector<double> z;
  double threshold = 0.0;
  bool hypothesis = false;  // z0 ≤ z*
  bool converged = false;   // fell below 1e-12 (or reached 0)
  bool diverged = false;    // overflowed; orbit truncated at the last finite term
};

/// Equality orbit z_{m+1} = N C0^m z_m^{1+α}, m < m_max.
///
/// Stepping the recursion directly doubles rounding errors every step, so a
/// start exactly at z* drifts off the critical orbit within ~50 steps. The
/// substitution w_m = ln(z_m / (z* C0^{-m/α})) turns the recursion into
/// w_{m+1} = (1+α) w_m, which is evaluated in closed form instead.
inline ZOrbit iterate_z(const IterationParams& p) {
  if (p.z0 < 0.0) throw ParameterError("z0 must be >= 0");
  if (p.m_max < 0) throw ParameterError("m_max must be >= 0");
  ZOrbit o;
  o.threshold = z_threshold(p);
  o.hypothesis = p.z0 <= o.threshold;
  o.z.push_back(p.z0);
  const double lC = std::log(p.C0);
  const double lzs = -std::log(p.N) / p.alpha - lC / (p.alpha * p.alpha);
  const double lmax = std::log(std::numeric_limits<double>::max());
  const double w0 = p.z0 > 0.0 ? std::log(p.z0) - lzs : -std::numeric_limits<double>::infinity();
  double growth = 1.0;  // (1+α)^m
  for (int m = 1; m <= p.m_max; ++m) {
    growth *= 1.0 + p.alpha;
    const double w = w0 == 0.0 ? 0.0 : growth * w0;
    const double lz = lzs - m * lC / p.alpha + w;
    if (lz > lmax) {
      o.diverged = true;
      break;
    }
    o.z.push_back(std::exp(lz));
  }
  o.converged = o.z.back() < 1e-12;
  return o;
}

// ---------------------------------------------------------------------------
// Oscillation profiles

struct OscillationRecord {
  Point center;
  std::vector<double> radii;
  std::vector<double> osc;
  std::vector<double> level_measure;  // |B_R ∩ {u > (M(R) + m(R))/2}|
  bool monotone = true;               // osc nondecreasing in R
  double beta = 1.0;                  // fitted exponent, capped to (0, 1]
  double beta_raw = 1.0;              // least-squares slope before capping
  double B = 0.0;                     // prefactor of the fit osc ≈ B R^β
  double C = 0.0;                     // max φ(ρ) / ((ρ/R)^β φ(R) + Bρ^β) over ρ < R
  // one-step decay osc(R/2) ≤ (1 - 2^{-n-2}) osc(2R) + C2 R^{2/p}
  double decay_ratio = 0.0;  // max osc(R/2)/osc(2R) over the available triples
  int decay_n = -1;          // smallest n making C2 = 0; -1 if none
  double decay_C2_n0 = 0.0;  // C2 needed with n = 0
};

/// Oscillation of u over the balls B(center, R) (grid points strictly inside).
/// Radii must be increasing; the decay triples use R/2 and 2R whenever both
/// are in the list.
inline OscillationRecord holder_profile(const ScalarField& u, const Point& center,
                                        const std::vector<double>& radii, double p = 3.0) {
  const Grid& g = u.grid;
  if (radii.empty()) throw ParameterError("holder_profile: no radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0) || (i > 0 && radii[i] <= radii[i - 1]))
      throw ParameterError("holder_profile: radii must be positive and increasing");
    for (int a = 0; a < g.dim(); ++a)
      if (std::abs(center[a]) + radii[i] > g.half_width())
        throw ParameterError("holder_profile: ball leaves the grid box");
  }
  OscillationRecord rec;
  rec.center = center;
  rec.radii = radii;
  for (double R : radii) {
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if ((g.point(i) - center).norm() >= R) continue;
      hi = std::max(hi, u[i]);
      lo = std::min(lo, u[i]);
    }
    if (hi < lo) {
      rec.osc.push_back(0.0);
      rec.level_measure.push_back(0.0);
      continue;
    }
    rec.osc.push_back(hi - lo);
    const double k = 0.5 * (hi + lo);
    std::size_t count = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
      if ((g.point(i) - center).norm() < R && u[i] > k) ++count;
    rec.level_measure.push_back(static_cast<double>(count) * g.cell_volume());
  }
  for (std::size_t i = 1; i < rec.osc.size(); ++i)
    rec.monotone = rec.monotone && rec.osc[i] >= rec.osc[i - 1];

  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < radii.size(); ++i)
    if (rec.osc[i] > 0.0) {
      lx.push_back(std::log(radii[i]));
      ly.push_back(std::log(rec.osc[i]));
    }
  if (lx.size() < 2) {
    rec.beta = rec.beta_raw = 1.0;
    return rec;
  }
  rec.beta_raw = ls_slope(lx, ly);
  rec.beta = std::clamp(rec.beta_raw, std::numeric_limits<double>::min(), 1.0);
  double mean_resid = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) mean_resid += ly[i] - rec.beta * lx[i];
  rec.B = std::exp(mean_resid / static_cast<double>(lx.size()));
  for (std::size_t i = 0; i < radii.size(); ++i)
    for (std::size_t j = i + 1; j < radii.size(); ++j) {
      const double rho = radii[i], R = radii[j];
      const double den = std::pow(rho / R, rec.beta) * rec.osc[j] + rec.B * std::pow(rho, rec.beta);
      if (den > 0.0) rec.C = std::max(rec.C, rec.osc[i] / den);
    }

  auto find = [&](double r) -> int {
    for (std::size_t i = 0; i < radii.size(); ++i)
      if (std::abs(radii[i] - r) <= 1e-9 * r) return static_cast<int>(i);
    return -1;
  };
  bool any = false;
  for (double R : radii) {
    const int a = find(0.5 * R), b = find(2.0 * R);
    if (a < 0 || b < 0 || rec.osc[static_cast<std::size_t>(b)] == 0.0) continue;
    any = true;
    const double small = rec.osc[static_cast<std::size_t>(a)];
    const double big = rec.osc[static_cast<std::size_t>(b)];
    rec.decay_ratio = std::max(rec.decay_ratio, small / big);
    rec.decay_C2_n0 =
        std::max(rec.decay_C2_n0, std::max(0.0, small - 0.75 * big) / std::pow(R, 2.0 / p));
  }
  if (any && rec.decay_ratio < 1.0) {
    int n = 0;
    while (1.0 - std::ldexp(1.0, -n - 2) < rec.decay_ratio) ++n;
    rec.decay_n = n;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Caccioppoli constant

struct CaccioppoliCase {
  double k = 0.0, r = 0.0, R = 0.0;
  double lhs = 0.0;       // ||∇v^{p/2} 1_{B_r}||_2^2
  double energy = 0.0;    // ||v^{p/2} 1_{B_R}||_2^2 / (R - r)^2
  double source = 0.0;    // || |f - μu|^{p/2} 1_{u>k} 1_{B_R} ||_2^2
  double ratio = 0.0;     // lhs / (energy + source)
  bool skipped = false;   // empty level set
};

struct CaccioppoliReport {
  std::vector<CaccioppoliCase> cases;
  double K = 0.0;  // max ratio
};

/// Empirical K = K1 = K2 for v = (u - k)_+ centred at `center`.
inline CaccioppoliReport caccioppoli_check(const ScalarField& u, const ScalarField& f, double mu,
                                           double p, const std::vector<double>& k_list,
                                           const std::vector<std::pair<double, double>>& radius_pairs,
                                           const Point& center) {
  require_same_grid(u.grid, f.grid);
  if (!(p >= 2.0)) throw ParameterError("caccioppoli_check: p must be >= 2");
  const Grid& g = u.grid;
  const double ih2 = 1.0 / (g.spacing() * g.spacing());
  CaccioppoliReport rep;
  for (double k : k_list) {
    ScalarField w(g);
    bool any = false;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = u[i] - k;
      if (v > 0.0) {
        w[i] = std::pow(v, 0.5 * p);
        any = true;
      }
    }
    for (const auto& [r, R] : radius_pairs) {
      if (!(r > 0.0 && r < R)) throw ParameterError("caccioppoli_check: need 0 < r < R");
      CaccioppoliCase cs{k, r, R};
      if (!any) {
        cs.skipped = true;
        rep.cases.push_back(cs);
        continue;
      }
      double lhs = 0.0, en = 0.0, src = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double dist = (g.point(i) - center).norm();
        if (dist < r)
          for (int a = 0; a < g.dim(); ++a) {
            if (g.index_along(i, a) + 1 >= g.points()) continue;
            const double dw = w[i + g.stride(a)] - w[i];
            lhs += dw * dw * ih2;
          }
        if (dist < R) {
          en += w[i] * w[i];
          if (u[i] > k) src += std::pow(std::abs(f[i] - mu * u[i]), p);
        }
      }
      cs.lhs = lhs * g.cell_volume();
      cs.energy = en * g.cell_volume() / ((R - r) * (R - r));
      cs.source = src * g.cell_volume();
      const double den = cs.energy + cs.source;
      cs.ratio = den > 0.0 ? cs.lhs / den : 0.0;
      rep.K = std::max(rep.K, cs.ratio);
      rep.cases.push_back(cs);
    }
  }
  return rep;
}

/// Refinement stability: the two constants agree within `factor`.
inline bool refinement_stable(double coarse, double fine, double factor = 2.0) {
  if (coarse == 0.0 && fine == 0.0) return true;
  if (coarse <= 0.0 || fine <= 0.0) return false;
  return std::max(coarse, fine) / std::min(coarse, fine) <= factor;
}

}  // namespace sdlab
