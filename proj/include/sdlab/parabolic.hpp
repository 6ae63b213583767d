#pragma once

// Solvers for (∂_t - Δ + b·∇)u = 0 and (μ - Δ + b·∇)u = f on a Dirichlet box,
// and the norm / Orlicz-energy certificates evaluated on their output.
//
// Time stepping is IMEX: one explicit first-order upwind advection step
// followed by one implicit Euler diffusion step,
//   u^{k+1} = (I - τΔ_h)^{-1} (I - τ B_h) u^k.
// With τ max_x Σ_a |b_a(x)| ≤ h the advective step is a convex combination
// of neighbouring values and (I - τΔ_h)^{-1} is a positive contraction, so
// every step obeys the discrete maximum principle.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sdlab/errors.hpp"
#include "sdlab/grid.hpp"
#include "sdlab/linear_solvers.hpp"
#include "sdlab/orlicz.hpp"
#include "sdlab/parallel.hpp"

namespace sdlab {

/// Form-bound data of the drift a run was computed with.
struct DriftMetadata {
  double delta = 0.0;
  double c = 0.0;                       // c(δ)
  std::optional<double> support_radius; // R (drift vanishes outside B_R)
  double c4 = 0.0;                      // c(4), used by the Orlicz certificate
  double theta = 0.25;                  // a = 1 + 1/θ
  // Split b = b1 + b2 with bounded b2; unset for plain drifts.
  std::optional<double> b2_sup;  // ||b2||_∞
  std::optional<double> b2_l2;   // ||b2||_2
};

struct EvolutionConfig {
  double tau = 1e-2;
  double T = 1.0;
  double solve_tol = 1e-12;
  int max_solve_iter = 20000;
  std::vector<double> p_list{2.0};
  bool record_gauge = false;
  int snapshot_stride = 1;  // store every k-th step (the final step is always kept)
  DriftMetadata meta;
};

struct SemigroupRun {
  Grid grid;
  double tau = 0.0;
  std::vector<double> times;            // every step, starting at 0
  std::vector<double> p_list;
  std::vector<std::vector<double>> lp;  // lp[k][j] = ||u(t_k)||_{p_j}
  std::vector<double> sup;              // ||u(t_k)||_∞
  std::vector<double> min_value;        // min_x u(t_k, x)
  std::vector<double> max_value;        // max_x u(t_k, x)
  std::vector<double> gauge;            // ||u(t_k)||_Φ (empty unless requested)
  std::vector<double> grad_energy;      // ||∇u(t_k)||_2^2
  std::vector<double> edge_sup;         // max |u| on the layer next to the boundary
  std::vector<double> snapshot_times;
  std::vector<ScalarField> snapshots;
  std::vector<int> solve_iterations;
  DriftMetadata meta;

  /// ∫_0^{t_k} e^{-2λs} ||∇u(s)||^2 ds by the right-endpoint rule, which is the
  /// rule under which the implicit diffusion step satisfies its energy identity.
  std::vector<double> cumulative_energy(double lambda = 0.0) const {
    std::vector<double> out(times.size(), 0.0);
    for (std::size_t k = 1; k < times.size(); ++k)
      out[k] = out[k - 1] + (times[k] - times[k - 1]) *
                                std::exp(-2.0 * lambda * times[k]) * grad_energy[k];
    return out;
  }
};

namespace detail {

inline bool next_to_boundary(const Grid& g, std::size_t i) {
  for (int a = 0; a < g.dim(); ++a) {
    const int k = g.index_along(i, a);
    if (k == 1 || k == g.points() - 2) return true;
  }
  return false;
}

inline void record_state(SemigroupRun& run, const ScalarField& u, double t,
                         bool gauge) {
  const Grid& g = u.grid;
  run.times.push_back(t);
  std::vector<double> row;
  row.reserve(run.p_list.size());
  for (double p : run.p_list) row.push_back(lp_norm(u, p));
  run.lp.push_back(std::move(row));
  run.sup.push_back(sup_norm(u));
  run.min_value.push_back(parallel_max(
      u.size(), [&](std::size_t i) { return -u[i]; },
      -std::numeric_limits<double>::infinity()) * -1.0);
  run.max_value.push_back(parallel_max(
      u.size(), [&](std::size_t i) { return u[i]; },
      -std::numeric_limits<double>::infinity()));
  if (gauge) run.gauge.push_back(gauge_norm(u).value);
  run.grad_energy.push_back(dirichlet_energy(u));
  run.edge_sup.push_back(parallel_max(
      g.size(), [&](std::size_t i) { return next_to_boundary(g, i) ? std::abs(u[i]) : 0.0; },
      0.0));
}

inline void check_finite(const VectorField& b) {
  for (const auto& c : b.components)
    for (double v : c)
      if (!std::isfinite(v)) throw ConfigurationError("drift is not finite; mollify it first");
}

}  // namespace detail

/// Largest τ allowed by the advective CFL bound τ max Σ_a|b_a| ≤ h.
inline double cfl_limit(const VectorField& b) {
  const double s = max_l1_speed(b);
  return s > 0.0 ? b.grid.spacing() / s : std::numeric_limits<double>::infinity();
}

/// Evolves f0 to time cfg.T. The number of steps is ceil(T/τ); the step used
/// is T/steps ≤ τ. f0 is restricted to the interior nodes.
inline SemigroupRun evolve(const ScalarField& f0, const VectorField& b,
                           const EvolutionConfig& cfg) {
  require_same_grid(f0.grid, b.grid);
  if (!(cfg.tau > 0.0) || !(cfg.T > 0.0))
    throw ConfigurationError("evolve: tau and T must be > 0");
  if (cfg.snapshot_stride < 1) throw ConfigurationError("evolve: snapshot_stride must be >= 1");
  for (double p : cfg.p_list)
    if (!(p >= 1.0)) throw ConfigurationError("evolve: p values must be >= 1");
  detail::check_finite(b);
  const Grid& g = f0.grid;
  const double cfl = cfl_limit(b);
  if (cfg.tau > cfl * (1.0 + 1e-12))
    throw ConfigurationError("evolve: tau = " + std::to_string(cfg.tau) +
                             " violates the advective CFL bound " + std::to_string(cfl));

  const auto steps = static_cast<std::size_t>(std::ceil(cfg.T / cfg.tau - 1e-9));
  const double tau = cfg.T / static_cast<double>(steps);

  SemigroupRun run;
  run.grid = g;
  run.tau = tau;
  run.p_list = cfg.p_list;
  run.meta = cfg.meta;

  ScalarField u = f0;
  u.zero_boundary();
  detail::record_state(run, u, 0.0, cfg.record_gauge);
  run.snapshot_times.push_back(0.0);
  run.snapshots.push_back(u);

  const double shift = 1.0 / tau;
  const LinearOperator A = [&](const std::vector<double>& x, std::vector<double>& y) {
    apply_shifted_laplacian(g, x, shift, y);
  };
  std::vector<double> adv, rhs(g.size());
  for (std::size_t k = 1; k <= steps; ++k) {
    apply_upwind_advection(b, u.values, adv);
    const auto& in = g.interior();
    parallel_for(in.size(), [&](std::size_t m) {
      const std::size_t i = in[m];
      rhs[i] = (u[i] - tau * adv[i]) * shift;
    });
    const SolveStats st =
        conjugate_gradient(A, rhs, u.values, cfg.solve_tol, cfg.max_solve_iter);
    run.solve_iterations.push_back(st.iterations);
    const double t = tau * static_cast<double>(k);
    detail::record_state(run, u, t, cfg.record_gauge);
    if (k % static_cast<std::size_t>(cfg.snapshot_stride) == 0 || k == steps) {
      run.snapshot_times.push_back(t);
      run.snapshots.push_back(u);
    }
  }
  return run;
}

// ---------------------------------------------------------------------------
// Resolvent

struct ResolventProblem {
  double mu = 1.0;
  ScalarField rhs;
  VectorField drift;
};

struct ResolventOptions {
  double tol = 1e-10;
  int max_iter = 20000;
  int restart = 40;
};

/// Applies (μ - Δ_h + b·∇_h) with upwind advection on interior nodes.
inline void apply_resolvent_operator(const VectorField& b, double mu,
                                     const std::vector<double>& u, std::vector<double>& out) {
  std::vector<double> adv;
  apply_shifted_laplacian(b.grid, u, mu, out);
  apply_upwind_advection(b, u, adv);
  parallel_for(out.size(), [&](std::size_t i) { out[i] += adv[i]; });
}

/// Solves (μ - Δ_h + b·∇_h)u = f by Jacobi-preconditioned GMRES.
inline ScalarField resolvent(const ResolventProblem& prob, const Grid& g,
                             const ResolventOptions& opt = {}, SolveStats* stats = nullptr) {
  if (!(prob.mu > 0.0)) throw ParameterError("resolvent: mu must be > 0");
  require_same_grid(prob.rhs.grid, g);
  require_same_grid(prob.drift.grid, g);
  detail::check_finite(prob.drift);
  const double ih = 1.0 / g.spacing();
  const double diag0 = prob.mu + 2.0 * g.dim() * ih * ih;
  std::vector<double> inv_diag(g.size(), 0.0);
  for (std::size_t i : g.interior()) {
    double s = 0.0;
    for (int a = 0; a < g.dim(); ++a) s += std::abs(prob.drift.component(a)[i]);
    inv_diag[i] = 1.0 / (diag0 + s * ih);
  }
  std::vector<double> f = prob.rhs.values;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (!g.is_interior(i)) f[i] = 0.0;
  const LinearOperator A = [&](const std::vector<double>& x, std::vector<double>& y) {
    apply_resolvent_operator(prob.drift, prob.mu, x, y);
  };
  ScalarField u(g);
  const SolveStats st = gmres(A, f, inv_diag, u.values, opt.tol, opt.max_iter, opt.restart);
  if (stats) *stats = st;
  return u;
}

// ---------------------------------------------------------------------------
// L^p quasi-contraction and L^p → L^q decay

/// Left end of the interval of quasi-contractive solvability, 2/(2-√δ);
/// +inf when δ ≥ 4.
inline double quasi_contraction_exponent(double delta) {
  if (delta >= 4.0) return std::numeric_limits<double>::infinity();
  return 2.0 / (2.0 - std::sqrt(delta));
}

/// Growth rate c(δ)/(p√δ) of ||u(t)||_p; 0 for δ = 0 or c(δ) = 0.
inline double lp_rate(double delta, double c, double p) {
  if (c == 0.0) return 0.0;
  if (delta <= 0.0) throw ParameterError("lp_rate: c > 0 needs delta > 0");
  return c / (p * std::sqrt(delta));
}

struct ContractionRow {
  double p = 0.0;
  bool applicable = true;
  double omega = 0.0;
  double max_ratio = 0.0;   // max_t ||u(t)||_p e^{-ωt} / ||f||_p
  double argmax_t = 0.0;
  bool pass = true;
};

struct DecayRow {
  double p = 0.0, q = 0.0;
  double fitted_slope = 0.0;
  double expected_slope = 0.0;
  double relative_error = 0.0;
  int points = 0;
  bool pass = true;
};

struct NormCertificateReport {
  std::vector<ContractionRow> contraction;
  std::vector<DecayRow> decay;
  bool pass = true;
};

struct NormCertificateOptions {
  double contraction_tol = 1e-2;
  double slope_tol = 0.10;
  double fit_t_min = 0.0;  // fit window for the decay slopes (t > 0 always)
  double fit_t_max = std::numeric_limits<double>::infinity();
};

/// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  if (x.size() < 2) throw ParameterError("ls_slope: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// p values must be among the run's recorded p_list (or +inf for the sup norm).
/// Each (p, q) pair fits log||u(t)||_q against log t; the initial datum
/// should approximate a point mass normalised in L^p.
inline NormCertificateReport norm_certificates(const SemigroupRun& run,
                                               const std::vector<double>& p_list,
                                               const std::vector<std::pair<double, double>>& pq_list,
                                               const NormCertificateOptions& opt = {}) {
  auto series = [&](double p) {
    std::vector<double> s;
    if (std::isinf(p)) return run.sup;
    const auto it = std::find(run.p_list.begin(), run.p_list.end(), p);
    if (it == run.p_list.end())
      throw ConfigurationError("norm_certificates: p = " + std::to_string(p) + " not recorded");
    const auto j = static_cast<std::size_t>(it - run.p_list.begin());
    for (const auto& row : run.lp) s.push_back(row[j]);
    return s;
  };
  NormCertificateReport rep;
  const int d = run.grid.dim();
  const double p_min = quasi_contraction_exponent(run.meta.delta);
  for (double p : p_list) {
    ContractionRow row;
    row.p = p;
    if (run.meta.delta > 0.0 && p < p_min) {
      row.applicable = false;
      rep.contraction.push_back(row);
      continue;
    }
    row.omega = lp_rate(run.meta.delta, run.meta.c, p);
    const auto s = series(p);
    const double f = s.front();
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double r = f > 0.0 ? s[k] * std::exp(-row.omega * run.times[k]) / f : 0.0;
      if (r > row.max_ratio) {
        row.max_ratio = r;
        row.argmax_t = run.times[k];
      }
    }
    row.pass = row.max_ratio <= 1.0 + opt.contraction_tol;
    rep.pass = rep.pass && row.pass;
    rep.contraction.push_back(row);
  }
  for (const auto& [p, q] : pq_list) {
    DecayRow row;
    row.p = p;
    row.q = q;
    const double ip = 1.0 / p, iq = std::isinf(q) ? 0.0 : 1.0 / q;
    row.expected_slope = -0.5 * d * (ip - iq);
    const auto s = series(q);
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double t = run.times[k];
      if (t > 0.0 && t >= opt.fit_t_min && t <= opt.fit_t_max && s[k] > 0.0) {
        lx.push_back(std::log(t));
        ly.push_back(std::log(s[k]));
      }
    }
    row.points = static_cast<int>(lx.size());
    row.fitted_slope = ls_slope(lx, ly);
    row.relative_error = row.expected_slope != 0.0
                             ? std::abs(row.fitted_slope - row.expected_slope) /
                                   std::abs(row.expected_slope)
                             : std::abs(row.fitted_slope);
    row.pass = row.relative_error <= opt.slope_tol;
    rep.pass = rep.pass && row.pass;
    rep.decay.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Orlicz energy certificate

/// Volume of the Euclidean ball of radius r in R^d.
inline double ball_volume(int d, double r) {
  return std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0) * std::pow(r, d);
}

struct OrliczConstants {
  double c5 = 0.0;
  double a = 0.0;
  double lambda = 0.0;
  double G = 0.0;
  bool split = false;  // constants for a drift with a bounded part
};

/// c5 = c(4) + 4(d-1)R^{-2}, a = 1 + 1/θ, and
///   λ = c5/2,                  G = c5 |B_{aR}|             (plain), or
///   λ = c5/2 + ||b2||_∞^2 / 2, G = c5 |B_{aR}| + ||b2||_2^2 (with bounded part).
inline OrliczConstants orlicz_constants(const DriftMetadata& m, int d) {
  if (!m.support_radius)
    throw ConfigurationError("Orlicz certificate needs the drift's support radius");
  if (!(m.theta > 0.0 && m.theta < 0.5)) throw ConfigurationError("theta must lie in (0, 1/2)");
  const double R = *m.support_radius;
  OrliczConstants k;
  k.c5 = m.c4 + 4.0 * (d - 1) / (R * R);
  k.a = 1.0 + 1.0 / m.theta;
  k.lambda = 0.5 * k.c5;
  k.G = k.c5 * ball_volume(d, k.a * R);
  if (m.b2_sup || m.b2_l2) {
    k.split = true;
    const double s = m.b2_sup.value_or(0.0), l2 = m.b2_l2.value_or(0.0);
    k.lambda += 0.5 * s * s;
    k.G += l2 * l2;
  }
  return k;
}

struct OrliczCertificateRow {
  double t = 0.0;
  double star_lhs = 0.0, star_rhs = 0.0;
  double star1_lhs = 0.0, star1_rhs = 0.0;
  double gauge_lhs = 0.0, gauge_rhs = 0.0;  // ||u(t)||_Φ vs e^{(λ+G)t}||f||_Φ
};

struct OrliczCertificateReport {
  OrliczConstants constants;
  double c = 0.0;
  double f_gauge = 0.0;
  std::vector<OrliczCertificateRow> rows;
  // max over t of max(0, LHS/RHS - 1), per inequality
  double star_violation = 0.0;
  double star1_violation = 0.0;
  double gauge_violation = 0.0;
  // max over t of LHS/RHS, for information
  double star_ratio = 0.0;
  double star1_ratio = 0.0;
  double gauge_ratio = 0.0;
  double tol = 0.0;
  bool pass = true;
};

/// Evaluates the modular energy inequality (star), the energy bound (star1) and
/// the Φ-norm quasi-contraction at every snapshot of `run`. `c` defaults to ||f||_Φ and `lambda` to the constant above.
inline OrliczCertificateReport orlicz_energy_certificate(
    const SemigroupRun& run, std::optional<double> c = std::nullopt,
    std::optional<double> lambda = std::nullopt, double tol = 5e-2) {
  OrliczCertificateReport rep;
  rep.constants = orlicz_constants(run.meta, run.grid.dim());
  rep.tol = tol;
  if (run.snapshots.empty()) throw ConfigurationError("orlicz certificate: run has no snapshots");
  const double lam = lambda.value_or(rep.constants.lambda);
  const double G = rep.constants.G;
  const double c5B = rep.constants.c5 * ball_volume(run.grid.dim(),
                                                   rep.constants.a * *run.meta.support_radius);
  const ScalarField& f = run.snapshots.front();
  rep.f_gauge = gauge_norm(f).value;
  rep.c = c.value_or(rep.f_gauge);
  if (c && !(*c > 0.0)) throw ParameterError("orlicz certificate: c must be > 0");
  const auto energy = run.cumulative_energy(lam);
  const bool zero = rep.f_gauge == 0.0;
  const double modular_f = zero ? 0.0 : modular(f, rep.c);

  auto ratio = [](double lhs, double rhs) {
    if (lhs <= 0.0) return 0.0;
    return rhs > 0.0 ? lhs / rhs : std::numeric_limits<double>::infinity();
  };
  for (std::size_t s = 0; s < run.snapshots.size(); ++s) {
    const double t = run.snapshot_times[s];
    const auto k = static_cast<std::size_t>(
        std::lower_bound(run.times.begin(), run.times.end(), t - 1e-12) - run.times.begin());
    OrliczCertificateRow row;
    row.t = t;
    ScalarField v = run.snapshots[s];
    v *= std::exp(-lam * t);
    if (!zero) {
      row.star_lhs = std::exp(log_modular(v, rep.c)) + energy[k] / (rep.c * rep.c);
      row.gauge_lhs = gauge_norm(run.snapshots[s]).value;
    }
    row.star_rhs = modular_f + t * c5B;
    row.star1_lhs = energy[k];
    row.star1_rhs = (1.0 + t * G) * rep.f_gauge * rep.f_gauge;
    row.gauge_rhs = std::exp((lam + G) * t) * rep.f_gauge;
    if (t > 0.0) {  // at t = 0 both sides coincide
      rep.star_ratio = std::max(rep.star_ratio, ratio(row.star_lhs, row.star_rhs));
      rep.star1_ratio = std::max(rep.star1_ratio, ratio(row.star1_lhs, row.star1_rhs));
      rep.gauge_ratio = std::max(rep.gauge_ratio, ratio(row.gauge_lhs, row.gauge_rhs));
    }
    rep.rows.push_back(row);
  }
  rep.star_violation = std::max(0.0, rep.star_ratio - 1.0);
  rep.star1_violation = std::max(0.0, rep.star1_ratio - 1.0);
  rep.gauge_violation = std::max(0.0, rep.gauge_ratio - 1.0);
  rep.pass = rep.star_violation <= tol && rep.star1_violation <= tol &&
             rep.gauge_violation <= tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Cauchy property of the approximating semigroups

struct CauchyPair {
  std::size_t n = 0, k = 0;
  double sup_gauge_diff = 0.0;     // sup_t ||v_n(t) - v_k(t)||_Φ
  double grad_diff_integral = 0.0; // ∫_0^T ||∇(v_n - v_k)||_2^2
};

struct CauchyReport {
  std::vector<CauchyPair> pairs;          // all n < k
  std::vector<double> drift_l2_diffs;     // ||b_n - b_{n+1}||_2
  std::vector<double> consecutive_gauge;  // pairs (n, n+1)
  std::vector<double> consecutive_grad;
  std::vector<double> grad_ratios;        // consecutive_grad[n] / consecutive_grad[n+1]
  bool gauge_monotone = true;
  bool grad_monotone = true;
  bool grad_halving = true;  // every ratio ≥ 2
  bool pass = true;
};

/// Runs `evolve` for each drift (successive mollifications, coarse to fine)
/// and tabulates the pairwise differences of v_n = e^{-λt}u_n. Every run keeps
/// all steps as snapshots.
inline CauchyReport semigroup_cauchy(const std::vector<VectorField>& drifts,
                                     const ScalarField& f0, EvolutionConfig cfg,
                                     double lambda = 0.0) {
  if (drifts.size() < 3) throw ConfigurationError("semigroup_cauchy: need at least 3 drifts");
  cfg.snapshot_stride = 1;
  cfg.record_gauge = false;
  std::vector<SemigroupRun> runs;
  runs.reserve(drifts.size());
  for (const auto& b : drifts) runs.push_back(evolve(f0, b, cfg));

  CauchyReport rep;
  const Grid& g = f0.grid;
  for (std::size_t n = 0; n + 1 < drifts.size(); ++n) {
    VectorField diff(g);
    for (int a = 0; a < g.dim(); ++a)
      for (std::size_t i = 0; i < g.size(); ++i)
        diff.component(a)[i] = drifts[n].component(a)[i] - drifts[n + 1].component(a)[i];
    rep.drift_l2_diffs.push_back(l2_norm(diff));
  }
  for (std::size_t n = 0; n < runs.size(); ++n) {
    for (std::size_t k = n + 1; k < runs.size(); ++k) {
      CauchyPair pr{n, k, 0.0, 0.0};
      const auto& A = runs[n];
      const auto& B = runs[k];
      for (std::size_t s = 0; s < A.snapshots.size(); ++s) {
        const double t = A.snapshot_times[s];
        ScalarField h = A.snapshots[s] - B.snapshots[s];
        h *= std::exp(-lambda * t);
        pr.sup_gauge_diff = std::max(pr.sup_gauge_diff, gauge_norm(h).value);
        if (s > 0) pr.grad_diff_integral += (t - A.snapshot_times[s - 1]) * dirichlet_energy(h);
      }
      rep.pairs.push_back(pr);
      if (k == n + 1) {
        rep.consecutive_gauge.push_back(pr.sup_gauge_diff);
        rep.consecutive_grad.push_back(pr.grad_diff_integral);
      }
    }
  }
  for (std::size_t n = 0; n + 1 < rep.consecutive_grad.size(); ++n) {
    rep.gauge_monotone = rep.gauge_monotone &&
                         rep.consecutive_gauge[n + 1] <= rep.consecutive_gauge[n];
    rep.grad_monotone = rep.grad_monotone &&
                        rep.consecutive_grad[n + 1] <= rep.consecutive_grad[n];
    const double r = rep.consecutive_grad[n + 1] > 0.0
                         ? rep.consecutive_grad[n] / rep.consecutive_grad[n + 1]
                         : std::numeric_limits<double>::infinity();
    rep.grad_ratios.push_back(r);
    rep.grad_halving = rep.grad_halving && (r >= 2.0 || rep.consecutive_grad[n] == 0.0);
  }
  rep.pass = rep.gauge_monotone && rep.grad_monotone && rep.grad_halving;
  return rep;
}

// ---------------------------------------------------------------------------
// Trotter approximation conditions

struct TrotterOptions {
  double compact_radius = 1.0;  // condition 2 is measured on B_{compact_radius}
  double far_radius = 2.0;      // far field: |x| ≥ far_radius
  ResolventOptions solve;
};

struct TrotterReport {
  std::vector<double> mu_list;
  // indexed [n][m] for drift n and mu_list[m]
  std::vector<std::vector<double>> sup_ratio;     // ||μR_n g||_∞ / ||g||_∞
  std::vector<std::vector<double>> identity_gap;  // ||μR_n g - g||_∞
  std::vector<std::vector<double>> far_field;     // sup_{|x|≥far} |μR_n g|
  // indexed [m][n]: sup over the compact of |μR_n g - μR_{n+1} g|
  std::vector<std::vector<double>> pair_diff;
  std::vector<double> condition3;  // sup_n ||μR_n g - g||_∞, per μ
  bool condition1 = true;
  bool condition2 = true;
  bool condition3_decreasing = true;
  bool far_field_decay = true;  // far field nonincreasing in μ for every n
  bool pass = true;
};

/// Resolvent-side checks of the Trotter approximation theorem, R_n = (μ+Λ_n)^{-1}.
inline TrotterReport trotter_limit_check(const std::vector<VectorField>& drifts,
                                         const std::vector<double>& mu_list,
                                         const ScalarField& g,
                                         const TrotterOptions& opt = {}) {
  if (drifts.empty() || mu_list.empty())
    throw ConfigurationError("trotter_limit_check: need drifts and mu values");
  TrotterReport rep;
  rep.mu_list = mu_list;
  const Grid& grid = g.grid;
  const double gsup = sup_norm(g);
  std::vector<std::vector<ScalarField>> sol(drifts.size());
  for (std::size_t n = 0; n < drifts.size(); ++n) {
    std::vector<double> ratio, gap, far;
    for (double mu : mu_list) {
      ScalarField rhs = g;
      rhs *= mu;
      ScalarField u = resolvent({mu, rhs, drifts[n]}, grid, opt.solve);
      const double s = sup_norm(u);
      ratio.push_back(gsup > 0.0 ? s / gsup : 0.0);
      rep.condition1 = rep.condition1 && s <= gsup * (1.0 + 1e-6);
      gap.push_back(sup_norm(u - g));
      double ff = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid.point(i).norm() >= opt.far_radius) ff = std::max(ff, std::abs(u[i]));
      if (!far.empty()) rep.far_field_decay = rep.far_field_decay && ff <= far.back();
      far.push_back(ff);
      sol[n].push_back(std::move(u));
    }
    rep.sup_ratio.push_back(ratio);
    rep.identity_gap.push_back(gap);
    rep.far_field.push_back(far);
  }
  for (std::size_t m = 0; m < mu_list.size(); ++m) {
    double worst = 0.0;
    for (std::size_t n = 0; n < drifts.size(); ++n) worst = std::max(worst, rep.identity_gap[n][m]);
    rep.condition3.push_back(worst);
    if (m > 0) rep.condition3_decreasing = rep.condition3_decreasing && worst < rep.condition3[m - 1];
    std::vector<double> diffs;
    for (std::size_t n = 0; n + 1 < drifts.size(); ++n) {
      double dmax = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid.point(i).norm() <= opt.compact_radius)
          dmax = std::max(dmax, std::abs(sol[n][m][i] - sol[n + 1][m][i]));
      diffs.push_back(dmax);
      if (n > 0) rep.condition2 = rep.condition2 && dmax <= diffs[n - 1];
    }
    rep.pair_diff.push_back(diffs);
  }
  rep.pass = rep.condition1 && rep.condition2 && rep.condition3_decreasing;
  return rep;
}

// ---------------------------------------------------------------------------
// Weak formulation residual

/// ψ(t, x) = β((t - t0)/s) β(|x - x0|/r) with β(z) = (1 - z^2)_+^3.
struct SpaceTimeBump {
  double t_center = 0.5;
  double t_halfwidth = 0.25;
  Point center;
  double radius = 1.0;
};

struct WeakResidualRow {
  double residual = 0.0;
  double scale = 0.0;     // sum of the magnitudes of the three terms
  double relative = 0.0;  // residual / scale
};

struct WeakResidualReport {
  std::vector<WeakResidualRow> rows;
  double max_relative = 0.0;
  bool pass = true;
};

namespace detail {

inline double cubic_bump(double z) {
  const double s = 1.0 - z * z;
  return s > 0.0 ? s * s * s : 0.0;
}

// b·∇u with centred differences on interior nodes
inline void apply_centered_advection(const VectorField& b, const std::vector<double>& u,
                                     std::vector<double>& out) {
  const Grid& g = b.grid;
  const double ih = 0.5 / g.spacing();
  const auto& in = g.interior();
  out.assign(g.size(), 0.0);
  parallel_for(in.size(), [&](std::size_t k) {
    const std::size_t i = in[k];
    double acc = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const std::size_t s = g.stride(a);
      acc += b.component(a)[i] * (u[i + s] - u[i - s]);
    }
    out[i] = acc * ih;
  });
}

}  // namespace detail

/// Space-time residual of the weak form
///   ∫∫ (∂_t u) ψ + ∇u·∇ψ + (b·∇u) ψ = 0
/// on a run that kept every step (snapshot_stride = 1). The time derivative is
/// the backward difference, equivalent after summation by parts to -⟨u, ∂_tψ⟩
/// since ψ vanishes near t = 0 and t = T. Gradients use the forward-difference
/// pairing and the drift term is centred.
inline WeakResidualReport weak_solution_residual(const SemigroupRun& run, const VectorField& b,
                                                 const std::vector<SpaceTimeBump>& psi_family,
                                                 double tol = 5e-2) {
  const Grid& g = run.grid;
  require_same_grid(g, b.grid);
  if (run.snapshots.size() != run.times.size())
    throw ConfigurationError("weak residual needs every step stored (snapshot_stride = 1)");
  const double T = run.times.back();
  const double h = g.spacing();
  WeakResidualReport rep;
  std::vector<double> lap, adv;
  for (const auto& psi : psi_family) {
    if (psi.center.dim != g.dim()) throw ParameterError("weak residual: psi center dimension");
    if (psi.t_center - psi.t_halfwidth <= 0.0 || psi.t_center + psi.t_halfwidth >= T ||
        !(psi.t_halfwidth > 0.0))
      throw ParameterError("weak residual: psi is not compactly supported in (0, T)");
    for (int a = 0; a < g.dim(); ++a)
      if (std::abs(psi.center[a]) + psi.radius >= g.half_width() - h)
        throw ParameterError("weak residual: psi is not compactly supported in the box");
    const ScalarField phi = sample(g, [&](const Point& x) {
      return detail::cubic_bump((x - psi.center).norm() / psi.radius);
    });
    apply_shifted_laplacian(g, phi.values, 0.0, lap);  // -Δ_h φ
    double res = 0.0, scale = 0.0;
    for (std::size_t k = 1; k < run.times.size(); ++k) {
      const double chi = detail::cubic_bump((run.times[k] - psi.t_center) / psi.t_halfwidth);
      if (chi == 0.0) continue;
      const double dt = run.times[k] - run.times[k - 1];
      const auto& u1 = run.snapshots[k].values;
      const auto& u0 = run.snapshots[k - 1].values;
      detail::apply_centered_advection(b, u1, adv);
      double tt = 0.0, gg = 0.0, bb = 0.0;
      for (std::size_t i : g.interior()) {
        tt += (u1[i] - u0[i]) * phi[i];
        gg += dt * u1[i] * lap[i];
        bb += dt * adv[i] * phi[i];
      }
      const double v = g.cell_volume() * chi;
      res += v * (tt + gg + bb);
      scale += v * (std::abs(tt) + std::abs(gg) + std::abs(bb));
    }
    WeakResidualRow row{std::abs(res), scale, scale > 0.0 ? std::abs(res) / scale : 0.0};
    rep.max_relative = std::max(rep.max_relative, row.relative);
    rep.rows.push_back(row);
  }
  rep.pass = rep.max_relative <= tol;
  return rep;
}

}  // namespace sdlab
