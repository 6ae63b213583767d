#pragma once

// Numerical estimation of the form bound
//   ||b φ||_2^2 <= δ ||∇φ||_2^2 + c(δ) ||φ||_2^2.
//
// For a fixed λ = c the best δ is the top eigenvalue of the generalized
// problem |b|^2 φ = δ (-Δ_h + λ) φ with zero Dirichlet data; it is found by
// power iteration on (-Δ_h + λ)^{-1} |b|^2 with conjugate-gradient inner
// solves.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sdlab/drift_fields.hpp"
#include "sdlab/errors.hpp"
#include "sdlab/grid.hpp"
#include "sdlab/linear_solvers.hpp"

namespace sdlab {

struct FormBoundEstimate {
  double delta_est = 0.0;
  double lambda_used = 0.0;
  double grid_resolution = 0.0;
  int grid_points = 0;
  int iterations = 0;
  double residual = 0.0;
};

struct RayleighOptions {
  double tol = 1e-6;
  int max_iter = 5000;
  double cg_tol = 1e-8;
  int cg_max_iter = 20000;
};

/// δ(λ) = sup_φ <|b|^2 φ^2> / (||∇_h φ||^2 + λ ||φ||^2).
inline FormBoundEstimate rayleigh_delta(const VectorField& b, double lambda,
                                        const RayleighOptions& opt = {}) {
  if (lambda < 0.0) throw ParameterError("rayleigh_delta: lambda must be >= 0");
  const Grid& g = b.grid;
  FormBoundEstimate est;
  est.lambda_used = lambda;
  est.grid_resolution = g.spacing();
  est.grid_points = g.points();

  std::vector<double> weight(g.size(), 0.0);
  for (std::size_t i : g.interior()) {
    weight[i] = b.magnitude2(i);
    if (!std::isfinite(weight[i])) throw ParameterError("rayleigh_delta: drift not finite");
  }
  const double wmax = *std::max_element(weight.begin(), weight.end());
  if (wmax == 0.0) return est;

  const LinearOperator A = [&](const std::vector<double>& x, std::vector<double>& y) {
    apply_shifted_laplacian(g, x, lambda, y);
  };

  // start from the weight itself: positive where the quotient can be large
  std::vector<double> phi(weight), rhs(g.size()), psi(g.size(), 0.0), tmp;
  double prev = 0.0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    parallel_for(g.size(), [&](std::size_t i) { rhs[i] = weight[i] * phi[i]; });
    conjugate_gradient(A, rhs, psi, opt.cg_tol, opt.cg_max_iter);
    // <W ψ, ψ> / <A ψ, ψ> with A ψ = W φ
    const double num = parallel_sum(g.size(), [&](std::size_t i) {
      return weight[i] * psi[i] * psi[i];
    });
    const double den = detail::dot(rhs, psi);
    const double q = num / den;
    est.iterations = it;
    est.delta_est = q;
    const double nrm = detail::norm(psi);
    parallel_for(g.size(), [&](std::size_t i) {
      psi[i] /= nrm;
      phi[i] = psi[i];
    });
    if (it > 1 && std::abs(q - prev) <= opt.tol * q) {
      // residual of the generalized eigen-equation for the final iterate
      apply_shifted_laplacian(g, psi, lambda, tmp);
      double r2 = 0.0, w2 = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double wi = weight[i] * psi[i];
        r2 += std::pow(wi - q * tmp[i], 2);
        w2 += wi * wi;
      }
      est.residual = std::sqrt(r2 / w2);
      return est;
    }
    prev = q;
  }
  throw IterationError("rayleigh_delta: power iteration did not converge", est.delta_est,
                       phi);
}

/// c(target): δ(λ) ≤ target means ||bφ||² ≤ target ||∇φ||² + target·λ ||φ||²,
/// so the constant is target·λ for the smallest such λ. λ is found by
/// bisection on the nonincreasing map λ ↦ δ(λ) (relative tolerance `tol`).
/// Returns 0 when δ(0) ≤ target.
inline double estimate_c(const VectorField& b, double target_delta, double tol = 1e-3,
                         const RayleighOptions& opt = {}) {
  if (!(target_delta > 0.0)) throw ParameterError("estimate_c: target delta must be > 0");
  if (rayleigh_delta(b, 0.0, opt).delta_est <= target_delta) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (rayleigh_delta(b, hi, opt).delta_est > target_delta) {
    lo = hi;
    hi *= 4.0;
    if (hi > 1e12) throw IterationError("estimate_c: no admissible lambda", hi, {});
  }
  while (hi - lo > tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (rayleigh_delta(b, mid, opt).delta_est > target_delta)
      lo = mid;
    else
      hi = mid;
  }
  return target_delta * hi;
}

// ---------------------------------------------------------------------------
// Test-function families

enum class TestFunctionKind { gaussians, radial_bumps, hardy_optimizers };

inline std::string to_string(TestFunctionKind k) {
  switch (k) {
    case TestFunctionKind::gaussians: return "gaussians";
    case TestFunctionKind::radial_bumps: return "radial_bumps";
    case TestFunctionKind::hardy_optimizers: return "hardy_optimizers";
  }
  return "unknown";
}

/// Probes for the form-bound inequality.
///  - gaussians:        exp(-|x - c|^2 / (2 w^2)) for each (center, width)
///  - radial_bumps:     (1 - |x - c|^2/w^2)_+^2 for each (center, width)
///  - hardy_optimizers: |x|^{-(d-2)/2 + ε} · cutoff(|x|), one member per ε, with
///                      a smooth cutoff equal to 1 on B_{cutoff/2} and 0
///                      outside B_cutoff; |x| is capped below at h/2
struct TestFunctionFamily {
  TestFunctionKind kind = TestFunctionKind::gaussians;
  std::vector<Point> centers;
  std::vector<double> widths;
  std::vector<double> exponent_offsets;
  double cutoff = 1.0;

  std::size_t size() const {
    return kind == TestFunctionKind::hardy_optimizers ? exponent_offsets.size()
                                                       : centers.size() * widths.size();
  }
};

inline TestFunctionFamily gaussian_family(std::vector<Point> centers,
                                          std::vector<double> widths) {
  return {TestFunctionKind::gaussians, std::move(centers), std::move(widths), {}, 1.0};
}

inline TestFunctionFamily radial_bump_family(std::vector<Point> centers,
                                             std::vector<double> widths) {
  return {TestFunctionKind::radial_bumps, std::move(centers), std::move(widths), {}, 1.0};
}

inline TestFunctionFamily hardy_optimizer_family(std::vector<double> offsets,
                                                 double cutoff) {
  return {TestFunctionKind::hardy_optimizers, {}, {}, std::move(offsets), cutoff};
}

/// Member `m` of the family sampled on `g` (zero on the boundary layer).
inline ScalarField family_member(const TestFunctionFamily& fam, std::size_t m,
                                 const Grid& g) {
  const int d = g.dim();
  switch (fam.kind) {
    case TestFunctionKind::gaussians:
    case TestFunctionKind::radial_bumps: {
      const Point c = fam.centers[m / fam.widths.size()];
      const double w = fam.widths[m % fam.widths.size()];
      const bool gauss = fam.kind == TestFunctionKind::gaussians;
      return sample(g, [&](const Point& x) {
        const double r2 = (x - c).norm2() / (w * w);
        if (gauss) return std::exp(-0.5 * r2);
        return r2 < 1.0 ? (1.0 - r2) * (1.0 - r2) : 0.0;
      });
    }
    case TestFunctionKind::hardy_optimizers: {
      const double eps = fam.exponent_offsets[m];
      const double R = fam.cutoff;
      const double floor_r = 0.5 * g.spacing();
      return sample(g, [&](const Point& x) {
        const double r = std::max(x.norm(), floor_r);
        if (r >= R) return 0.0;
        double cut = 1.0;
        if (r > 0.5 * R) {
          const double s = (r - 0.5 * R) / (0.5 * R);
          cut = std::pow(std::cos(0.5 * std::numbers::pi * s), 2);
        }
        return std::pow(r, -(d - 2) / 2.0 + eps) * cut;
      });
    }
  }
  return ScalarField(g);
}

struct FormBoundMemberResult {
  double ratio = 0.0;  // (||bφ||^2 - c||φ||^2) / ||∇φ||^2
  bool skipped = false;
};

struct FormBoundReport {
  double delta = 0.0;
  double c = 0.0;
  double worst_ratio = -std::numeric_limits<double>::infinity();
  bool pass = true;
  std::vector<FormBoundMemberResult> members;
  std::vector<std::string> warnings;
};

/// Checks the declared (δ, c) on every family member; pass iff the worst
/// ratio is ≤ δ(1 + 1e-3).
inline FormBoundReport verify_form_bound(const VectorField& b, double delta, double c,
                                         const TestFunctionFamily& family) {
  if (family.size() == 0) throw ParameterError("verify_form_bound: empty family");
  FormBoundReport rep;
  rep.delta = delta;
  rep.c = c;
  const Grid& g = b.grid;
  const ScalarField w = magnitude2(b);
  for (std::size_t m = 0; m < family.size(); ++m) {
    const ScalarField phi = family_member(family, m, g);
    const double grad = dirichlet_energy(phi);
    const double l2 = inner(phi, phi);
    FormBoundMemberResult res;
    if (grad == 0.0) {
      res.skipped = true;
      rep.warnings.push_back("member " + std::to_string(m) +
                             " skipped: zero gradient and zero norm");
      rep.members.push_back(res);
      continue;
    }
    const double bphi = g.cell_volume() * parallel_sum(g.size(), [&](std::size_t i) {
                          return w[i] * phi[i] * phi[i];
                        });
    res.ratio = (bphi - c * l2) / grad;
    rep.worst_ratio = std::max(rep.worst_ratio, res.ratio);
    rep.members.push_back(res);
  }
  rep.pass = rep.worst_ratio <= delta * (1.0 + 1e-3);
  return rep;
}

struct HardyReference {
  double delta = 0.0;
  double c = 0.0;
  double weak_threshold = 0.0;  // 4 (d/(d-2))^2
};

/// Exact metadata of the Hardy drift: (δ, c = 0) and the threshold above which
/// the attracting SDE has no weak solution from the origin.
inline HardyReference hardy_reference(int d, double delta) {
  if (d < 3) throw ParameterError("hardy_reference: d must be >= 3");
  if (delta < 0.0) throw ParameterError("hardy_reference: delta must be >= 0");
  const double q = static_cast<double>(d) / (d - 2);
  return {delta, 0.0, 4.0 * q * q};
}

inline nlohmann::json to_json(const FormBoundEstimate& e,
                              std::optional<double> family_worst_ratio = std::nullopt) {
  nlohmann::json j{{"delta_est", e.delta_est},
                   {"lambda", e.lambda_used},
                   {"grid", {{"h", e.grid_resolution}, {"N", e.grid_points}}},
                   {"iterations", e.iterations},
                   {"residual", e.residual}};
  j["family_worst_ratio"] =
      family_worst_ratio ? nlohmann::json(*family_worst_ratio) : nlohmann::json(nullptr);
  return j;
}

}  // namespace sdlab
