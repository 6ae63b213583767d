#pragma once

// Gauge (Luxemburg) norm for Φ(t) = cosh t - 1:
//   ||f||_Φ = inf{ c > 0 : <cosh(f/c) - 1> <= 1 }.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sdlab/errors.hpp"
#include "sdlab/grid.hpp"
#include "sdlab/parallel.hpp"

namespace sdlab {

namespace detail {

// cosh(x) - 1 without cancellation for small x.
inline double phi(double x) {
  const double s = std::sinh(0.5 * x);
  return 2.0 * s * s;
}

// Arguments beyond this switch to log-domain evaluation.
inline constexpr double kPhiOverflowArg = 700.0;

}  // namespace detail

/// log <cosh(f/c) - 1>; -inf when f ≡ 0. Never overflows.
inline double log_modular(const ScalarField& f, double c) {
  if (!(c > 0.0)) throw ParameterError("modular: c must be > 0");
  const double top = sup_norm(f) / c;
  if (top == 0.0) return -std::numeric_limits<double>::infinity();
  const double logv = std::log(f.grid.cell_volume());
  if (top < detail::kPhiOverflowArg) {
    const double s = parallel_sum(f.size(), [&](std::size_t i) { return detail::phi(f[i] / c); });
    return std::log(s) + logv;
  }
  // log(cosh x - 1) = |x| - log 2 + log1p(-2e^{-|x|} + e^{-2|x|}), shifted by top
  const double s = parallel_sum(f.size(), [&](std::size_t i) {
    const double x = std::abs(f[i]) / c;
    if (x == 0.0) return 0.0;
    const double e = std::exp(-x);
    return std::exp(x - top) * 0.5 * (1.0 - e) * (1.0 - e);
  });
  return top + std::log(s) + logv;
}

/// <cosh(f/c) - 1> by grid quadrature. Throws OverflowError when the value is
/// not representable; use log_modular in that regime.
inline double modular(const ScalarField& f, double c) {
  const double lm = log_modular(f, c);
  if (lm > std::log(std::numeric_limits<double>::max()))
    throw OverflowError("modular: value exceeds the double range");
  return std::exp(lm);
}

struct GaugeNormResult {
  double value = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double residual = 0.0;  // |modular(f, value) - 1|
  int iterations = 0;
};

/// Smallest c with modular(f, c) ≤ 1 to relative tolerance `tol`, by
/// bracketing and bisection in log c. The returned value always satisfies
/// modular(f, value) ≤ 1.
inline GaugeNormResult gauge_norm(const ScalarField& f, double tol = 1e-8) {
  if (!(tol > 0.0)) throw ParameterError("gauge_norm: tol must be > 0");
  GaugeNormResult res;
  const double fmax = sup_norm(f);
  if (fmax == 0.0) return res;
  // Φ(t) ≥ t²/2 gives modular(f, c) ≥ ||f||_2² / (2c²), so the norm is ≥ ||f||_2/√2
  double lo = 0.5 * lp_norm(f, 2.0) / std::sqrt(2.0);
  double hi = 10.0 * fmax;
  while (log_modular(f, lo) <= 0.0) {
    hi = lo;
    lo *= 0.5;
    ++res.iterations;
  }
  while (log_modular(f, hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    ++res.iterations;
  }
  res.bracket_lo = lo;
  res.bracket_hi = hi;
  while (hi - lo > tol * hi) {
    const double mid = std::sqrt(lo * hi);
    if (log_modular(f, mid) > 0.0)
      lo = mid;
    else
      hi = mid;
    ++res.iterations;
  }
  res.value = hi;
  res.residual = std::abs(std::exp(log_modular(f, hi)) - 1.0);
  return res;
}

struct EmbeddingRow {
  int m = 0;
  double lp_norm = 0.0;   // ||f||_{2m}
  double bound = 0.0;     // ((2m)!)^{1/2m} ||f||_Φ
  double tightness = 0.0; // lp_norm / bound
  bool pass = true;
};

struct EmbeddingReport {
  double gauge = 0.0;
  std::vector<EmbeddingRow> rows;
  bool pass = true;
};

/// ||f||_{2m} ≤ ((2m)!)^{1/2m} ||f||_Φ for m = 1..m_max (relative slack 1e-6).
inline EmbeddingReport embedding_check(const ScalarField& f, int m_max, double tol = 1e-10) {
  EmbeddingReport rep;
  rep.gauge = gauge_norm(f, tol).value;
  for (int m = 1; m <= m_max; ++m) {
    EmbeddingRow row;
    row.m = m;
    row.lp_norm = lp_norm(f, 2.0 * m);
    row.bound = std::exp(std::lgamma(2.0 * m + 1.0) / (2.0 * m)) * rep.gauge;
    row.tightness = row.bound > 0.0 ? row.lp_norm / row.bound : 0.0;
    row.pass = row.lp_norm <= row.bound * (1.0 + 1e-6);
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace sdlab
