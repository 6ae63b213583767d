#pragma once

// Drift families b: R^d -> R^d, the Friedrichs mollifier E_ε, and the radial
// weights ζ_r, η, ρ used by the energy estimates.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sdlab/errors.hpp"
#include "sdlab/grid.hpp"
#include "sdlab/parallel.hpp"

namespace sdlab {

enum class DriftFamily { hardy, compact_hardy, tail_decay, multi_bump, grid_sampled };

inline std::string to_string(DriftFamily f) {
  switch (f) {
    case DriftFamily::hardy: return "hardy";
    case DriftFamily::compact_hardy: return "compact_hardy";
    case DriftFamily::tail_decay: return "tail_decay";
    case DriftFamily::multi_bump: return "multi_bump";
    case DriftFamily::grid_sampled: return "grid_sampled";
  }
  return "unknown";
}

inline DriftFamily drift_family_from_string(const std::string& s) {
  if (s == "hardy") return DriftFamily::hardy;
  if (s == "compact_hardy") return DriftFamily::compact_hardy;
  if (s == "tail_decay") return DriftFamily::tail_decay;
  if (s == "multi_bump") return DriftFamily::multi_bump;
  if (s == "grid_sampled") return DriftFamily::grid_sampled;
  throw ParameterError("unknown drift family '" + s + "'");
}

/// One Hardy-type bump √δ_m (d-2)/2 · 1_{B(x_m,R_m)} (x-x_m)/|x-x_m|^2.
struct Bump {
  Point center;
  double radius = 1.0;
  double delta = 0.0;
  double c = 0.0;
};

/// Analytic description of a drift plus its declared form-bound metadata.
///
/// Families:
///  - hardy:         sign·√δ (d-2)/2 · x/|x|^2
///  - compact_hardy: the same restricted to B_{R1} (radius = R1)
///  - tail_decay:    (d-2)·1_{B_R} x/|x|^2 + C·1_{B_R^c} |x|^{-α-1} x
///  - multi_bump:    sum of disjoint Hardy bumps, Σδ_m ≤ 4
///  - grid_sampled:  multilinear interpolation of a sampled field
struct DriftSpec {
  int dim = 3;
  DriftFamily family = DriftFamily::hardy;
  double delta = 0.0;
  int sign = +1;
  double radius = 1.0;       // R1 (compact_hardy) or R (tail_decay)
  double tail_c = 0.0;       // C (tail_decay)
  double tail_alpha = 2.0;   // α (tail_decay), α > d/2
  std::vector<Bump> bumps;
  std::shared_ptr<const VectorField> field;

  double declared_delta = 0.0;
  double declared_c = 0.0;
  std::optional<double> support_radius;
};

inline double hardy_amplitude(int d, double delta) {
  return std::sqrt(delta) * (d - 2) / 2.0;
}

inline void validate(const DriftSpec& s) {
  if (s.family != DriftFamily::grid_sampled && s.dim < 3)
    throw ParameterError("drift dimension must be >= 3");
  if (s.dim > kMaxDim) throw ParameterError("drift dimension too large");
  if (!(s.declared_delta >= 0.0 && s.declared_delta <= 4.0))
    throw ParameterError("declared_delta must lie in [0, 4]");
  if (s.declared_c < 0.0) throw ParameterError("declared c must be >= 0");
  switch (s.family) {
    case DriftFamily::hardy:
    case DriftFamily::compact_hardy:
      if (s.delta < 0.0) throw ParameterError("delta must be >= 0");
      if (s.sign != 1 && s.sign != -1) throw ParameterError("sign must be ±1");
      if (s.family == DriftFamily::compact_hardy && !(s.radius > 0.0))
        throw ParameterError("compact_hardy radius must be > 0");
      break;
    case DriftFamily::tail_decay:
      if (!(s.tail_alpha > s.dim / 2.0))
        throw ParameterError("tail_decay requires alpha > d/2");
      if (!(s.radius > 0.0)) throw ParameterError("tail_decay radius must be > 0");
      break;
    case DriftFamily::multi_bump: {
      double total = 0.0;
      for (std::size_t m = 0; m < s.bumps.size(); ++m) {
        const Bump& bm = s.bumps[m];
        if (bm.center.dim != s.dim) throw ParameterError("bump center dimension");
        if (!(bm.radius > 0.0) || bm.delta < 0.0)
          throw ParameterError("bump radius must be > 0 and delta >= 0");
        total += bm.delta;
        for (std::size_t k = 0; k < m; ++k) {
          const Bump& o = s.bumps[k];
          if ((bm.center - o.center).norm() < bm.radius + o.radius)
            throw ParameterError("multi_bump balls must be pairwise disjoint");
        }
      }
      if (total > 4.0 + 1e-12) throw ParameterError("multi_bump requires sum of deltas <= 4");
      break;
    }
    case DriftFamily::grid_sampled:
      if (!s.field) throw ParameterError("grid_sampled drift without a field");
      break;
  }
}

inline DriftSpec hardy_drift(int d, double delta, int sign = +1) {
  DriftSpec s;
  s.dim = d;
  s.family = DriftFamily::hardy;
  s.delta = delta;
  s.sign = sign;
  s.declared_delta = delta;
  s.declared_c = 0.0;
  validate(s);
  return s;
}

inline DriftSpec compact_hardy_drift(int d, double delta, double radius, int sign = +1) {
  DriftSpec s = hardy_drift(d, delta, sign);
  s.family = DriftFamily::compact_hardy;
  s.radius = radius;
  s.support_radius = radius;
  validate(s);
  return s;
}

inline DriftSpec tail_decay_drift(int d, double C, double alpha, double radius) {
  DriftSpec s;
  s.dim = d;
  s.family = DriftFamily::tail_decay;
  s.delta = 4.0;
  s.tail_c = C;
  s.tail_alpha = alpha;
  s.radius = radius;
  s.declared_delta = 4.0;
  validate(s);
  return s;
}

inline DriftSpec multi_bump_drift(int d, std::vector<Bump> bumps) {
  DriftSpec s;
  s.dim = d;
  s.family = DriftFamily::multi_bump;
  s.bumps = std::move(bumps);
  double total = 0.0, rmax = 0.0, c = 0.0;
  for (const Bump& b : s.bumps) {
    total += b.delta;
    c += b.c;
    rmax = std::max(rmax, b.center.norm() + b.radius);
  }
  s.declared_delta = total;
  s.declared_c = c;
  s.support_radius = rmax;
  validate(s);
  return s;
}

inline DriftSpec grid_sampled_drift(VectorField field, double declared_delta = 0.0,
                                    double declared_c = 0.0) {
  DriftSpec s;
  s.dim = field.dim();
  s.family = DriftFamily::grid_sampled;
  s.declared_delta = declared_delta;
  s.declared_c = declared_c;
  s.field = std::make_shared<const VectorField>(std::move(field));
  validate(s);
  return s;
}

namespace detail {

// amp · y / max(|y|, reg)^2; throws at y = 0 when reg = 0.
inline Point hardy_kernel(const Point& y, double amp, double reg) {
  const double r = y.norm();
  const double rr = std::max(r, reg);
  if (rr == 0.0)
    throw SingularityError("drift evaluated at its singularity without regularization");
  return y * (amp / (rr * rr));
}

}  // namespace detail

/// b(x). `regularization` > 0 replaces |x| by max(|x|, regularization) at the
/// singular points of the Hardy-type families.
inline Point eval_drift(const DriftSpec& s, const Point& x, double regularization = 0.0) {
  if (x.dim != s.dim) throw ParameterError("eval_drift: dimension mismatch");
  switch (s.family) {
    case DriftFamily::hardy:
      return detail::hardy_kernel(x, s.sign * hardy_amplitude(s.dim, s.delta),
                                  regularization);
    case DriftFamily::compact_hardy:
      if (x.norm() >= s.radius) return Point(s.dim);
      return detail::hardy_kernel(x, s.sign * hardy_amplitude(s.dim, s.delta),
                                  regularization);
    case DriftFamily::tail_decay: {
      const double r = x.norm();
      if (r < s.radius) return detail::hardy_kernel(x, s.dim - 2.0, regularization);
      return x * (s.tail_c * std::pow(r, -s.tail_alpha - 1.0));
    }
    case DriftFamily::multi_bump:
      for (const Bump& bm : s.bumps) {
        const Point y = x - bm.center;
        if (y.norm() < bm.radius)
          return detail::hardy_kernel(y, hardy_amplitude(s.dim, bm.delta), regularization);
      }
      return Point(s.dim);
    case DriftFamily::grid_sampled:
      return interpolate(*s.field, x);
  }
  return Point(s.dim);
}

/// Samples b on every node with the singularity capped at h/2.
inline VectorField sample_drift(const DriftSpec& s, const Grid& g) {
  if (g.dim() != s.dim) throw ParameterError("sample_drift: dimension mismatch");
  const double reg = 0.5 * g.spacing();
  return sample_vector(g, [&](const Point& x) { return eval_drift(s, x, reg); });
}

// ---------------------------------------------------------------------------
// Mollifier

namespace detail {

inline double bump_profile(double r2) {
  return r2 < 1.0 ? std::exp(1.0 / (r2 - 1.0)) : 0.0;
}

// Adaptive Simpson on [a, b].
template <class F>
double adaptive_simpson(F&& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double integrate(F&& f, double a, double b, double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 50);
}

inline double unit_sphere_area(int d) {
  // |S^{d-1}| = 2 π^{d/2} / Γ(d/2)
  return 2.0 * std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0);
}

}  // namespace detail

/// c_γ with ∫_{B_1} c_γ exp(1/(|x|^2-1)) dx = 1, via the radial reduction
/// |S^{d-1}| ∫_0^1 r^{d-1} exp(1/(r^2-1)) dr and adaptive Simpson (tol 1e-12).
inline double kernel_normalization(int d) {
  if (d < 1) throw ParameterError("kernel_normalization: d must be >= 1");
  const double radial = detail::integrate(
      [d](double r) { return std::pow(r, d - 1) * detail::bump_profile(r * r); }, 0.0,
      1.0, 1e-13);
  return 1.0 / (detail::unit_sphere_area(d) * radial);
}

struct MollifierKernel {
  double epsilon = 1.0;
  int dim = 3;
  double normalization = 0.0;

  MollifierKernel() = default;
  MollifierKernel(double eps, int d)
      : epsilon(eps), dim(d), normalization(kernel_normalization(d)) {
    if (!(eps > 0.0)) throw ParameterError("mollifier epsilon must be > 0");
  }

  /// γ_ε(x) = ε^{-d} γ(x/ε).
  double operator()(const Point& x) const {
    const double r2 = x.norm2() / (epsilon * epsilon);
    return normalization * detail::bump_profile(r2) / std::pow(epsilon, dim);
  }
};

namespace detail {

struct Stencil {
  std::vector<std::array<int, kMaxDim>> offsets;
  std::vector<double> weights;  // normalized to sum 1
  double raw_mass = 0.0;        // sum of γ_ε(o) h^d before normalization
};

// Nonzero kernel weights on the lattice of spacing `spacing`.
inline Stencil make_stencil(const MollifierKernel& k, double spacing) {
  Stencil st;
  const int d = k.dim;
  const int half = static_cast<int>(std::ceil(k.epsilon / spacing));
  const int width = 2 * half + 1;
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(width);
  const double vol = std::pow(spacing, d);
  for (std::size_t n = 0; n < total; ++n) {
    std::array<int, kMaxDim> o{};
    Point y(d);
    std::size_t rest = n;
    for (int a = 0; a < d; ++a) {
      o[static_cast<std::size_t>(a)] = static_cast<int>(rest % width) - half;
      rest /= width;
      y[a] = o[static_cast<std::size_t>(a)] * spacing;
    }
    const double w = k(y);
    if (w > 0.0) {
      st.offsets.push_back(o);
      st.weights.push_back(w * vol);
      st.raw_mass += w * vol;
    }
  }
  for (double& w : st.weights) w /= st.raw_mass;
  return st;
}

}  // namespace detail

/// Riemann sum of γ_ε over a lattice of the given spacing (no renormalization).
inline double kernel_mass(const MollifierKernel& k, double spacing) {
  return detail::make_stencil(k, spacing).raw_mass;
}

/// E_ε b for a sampled field: direct truncated convolution with the
/// renormalized discrete kernel, zero extension outside the box.
inline VectorField mollify(const VectorField& b, double epsilon) {
  const Grid& g = b.grid;
  if (epsilon < 2.0 * g.spacing() * (1.0 - 1e-12))
    throw ResolutionError("mollifier epsilon below twice the grid spacing");
  const MollifierKernel kernel(epsilon, g.dim());
  const auto st = detail::make_stencil(kernel, g.spacing());
  VectorField out(g);
  const int d = g.dim(), n = g.points();
  parallel_for(g.size(), [&](std::size_t i) {
    std::array<int, kMaxDim> idx{};
    for (int a = 0; a < d; ++a) idx[static_cast<std::size_t>(a)] = g.index_along(i, a);
    Point acc(d);
    for (std::size_t s = 0; s < st.offsets.size(); ++s) {
      std::size_t j = 0;
      bool inside = true;
      for (int a = 0; a < d; ++a) {
        const int k = idx[static_cast<std::size_t>(a)] - st.offsets[s][static_cast<std::size_t>(a)];
        if (k < 0 || k >= n) {
          inside = false;
          break;
        }
        j += static_cast<std::size_t>(k) * g.stride(a);
      }
      if (!inside) continue;
      for (int a = 0; a < d; ++a) acc[a] += st.weights[s] * b.component(a)[j];
    }
    out.set(i, acc);
  });
  return out;
}

/// How E_ε b is represented on the grid: its value at each node, or its
/// average over the cell [x - h/2, x + h/2]^d around each node.
enum class MollifySampling { point, cell_average };

namespace detail {

// Stencil convolved with the midpoint rule of a cell of q^d sub-lattice points
// (q odd so the cell offsets are integers).
inline Stencil cell_average_stencil(const Stencil& st, int d, int q) {
  int half = 0;
  for (const auto& o : st.offsets)
    for (int a = 0; a < d; ++a) half = std::max(half, std::abs(o[static_cast<std::size_t>(a)]));
  const int hc = (q - 1) / 2;
  const int R = half + hc, width = 2 * R + 1;
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(width);
  std::vector<double> acc(total, 0.0);
  std::size_t cells = 1;
  for (int a = 0; a < d; ++a) cells *= static_cast<std::size_t>(q);
  const double wc = 1.0 / static_cast<double>(cells);
  for (std::size_t s = 0; s < st.offsets.size(); ++s)
    for (std::size_t c = 0; c < cells; ++c) {
      std::size_t rest = c, flat = 0, mul = 1;
      for (int a = 0; a < d; ++a) {
        const int off = static_cast<int>(rest % static_cast<std::size_t>(q)) - hc;
        rest /= static_cast<std::size_t>(q);
        flat += static_cast<std::size_t>(st.offsets[s][static_cast<std::size_t>(a)] + off + R) * mul;
        mul *= static_cast<std::size_t>(width);
      }
      acc[flat] += st.weights[s] * wc;
    }
  Stencil out;
  out.raw_mass = st.raw_mass;
  for (std::size_t n = 0; n < total; ++n) {
    if (acc[n] == 0.0) continue;
    std::array<int, kMaxDim> o{};
    std::size_t rest = n;
    for (int a = 0; a < d; ++a) {
      o[static_cast<std::size_t>(a)] = static_cast<int>(rest % static_cast<std::size_t>(width)) - R;
      rest /= static_cast<std::size_t>(width);
    }
    out.offsets.push_back(o);
    out.weights.push_back(acc[n]);
  }
  return out;
}

}  // namespace detail

/// E_ε b for an analytic drift on `g`. The convolution is evaluated by the
/// same truncated lattice sum on a sub-lattice of spacing h/q, q ≥ 1 chosen so
/// that the kernel spans at least four sub-lattice steps per radius (q odd
/// for cell averages).
inline VectorField mollify(const DriftSpec& spec, double epsilon, const Grid& g,
                           MollifySampling sampling = MollifySampling::point) {
  if (spec.family == DriftFamily::grid_sampled) return mollify(*spec.field, epsilon);
  if (g.dim() != spec.dim) throw ParameterError("mollify: dimension mismatch");
  if (!(epsilon > 0.0)) throw ResolutionError("mollifier epsilon must be > 0");
  int q = std::max(1, static_cast<int>(std::ceil(4.0 * g.spacing() / epsilon - 1e-9)));
  if (sampling == MollifySampling::cell_average && q % 2 == 0) ++q;
  const double hq = g.spacing() / q;
  const MollifierKernel kernel(epsilon, g.dim());
  auto st = detail::make_stencil(kernel, hq);
  if (sampling == MollifySampling::cell_average) st = detail::cell_average_stencil(st, g.dim(), q);
  const double reg = 0.5 * hq;
  const int d = g.dim();
  double reach = 0.0;
  for (const auto& o : st.offsets) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) r2 += std::pow(o[static_cast<std::size_t>(a)] * hq, 2);
    reach = std::max(reach, std::sqrt(r2));
  }
  VectorField out(g);
  parallel_for(g.size(), [&](std::size_t i) {
    const Point x = g.point(i);
    if (spec.support_radius && x.norm() > *spec.support_radius + reach) return;
    Point acc(d);
    for (std::size_t s = 0; s < st.offsets.size(); ++s) {
      Point y = x;
      for (int a = 0; a < d; ++a) y[a] -= st.offsets[s][static_cast<std::size_t>(a)] * hq;
      acc += eval_drift(spec, y, reg) * st.weights[s];
    }
    out.set(i, acc);
  });
  return out;
}

/// DriftSpec describing E_ε b sampled on `g`, with the metadata of `spec`
/// (mollification does not increase δ or c(δ)) and the support grown by ε.
inline DriftSpec mollified_spec(const DriftSpec& spec, double epsilon, const Grid& g,
                                MollifySampling sampling = MollifySampling::point) {
  DriftSpec out = grid_sampled_drift(mollify(spec, epsilon, g, sampling), spec.declared_delta,
                                     spec.declared_c);
  if (spec.support_radius) out.support_radius = *spec.support_radius + epsilon;
  return out;
}

// ---------------------------------------------------------------------------
// Weights

enum class WeightKind { eta, zeta, rho };

struct WeightFamily {
  double theta = 0.25;
  double r = 1.0;
  double kappa = 1.0;
  Point center;

  double a() const { return 1.0 + 1.0 / theta; }
};

/// η(t): 1 on t ≤ 1, (1-θ(t-1))^{1/θ} on (1, 1+1/θ), 0 beyond.
inline double eta(double t, double theta) {
  if (t <= 1.0) return 1.0;
  if (t >= 1.0 + 1.0 / theta) return 0.0;
  return std::pow(1.0 - theta * (t - 1.0), 1.0 / theta);
}

inline void validate(const WeightFamily& w) {
  if (!(w.theta > 0.0 && w.theta < 0.5)) throw ParameterError("theta must lie in (0, 1/2)");
  if (!(w.r > 0.0)) throw ParameterError("weight radius must be > 0");
  if (!(w.kappa > 0.0)) throw ParameterError("kappa must be > 0");
}

/// ζ_r(x) = η(|x - center|/r).
inline double zeta(const WeightFamily& w, const Point& x) {
  Point y = x;
  if (w.center.dim == x.dim) y -= w.center;
  return eta(y.norm() / w.r, w.theta);
}

/// ρ(x) = (1 + κ|x - center|^2)^{-d/2-1}.
inline double rho(const WeightFamily& w, const Point& x) {
  Point y = x;
  if (w.center.dim == x.dim) y -= w.center;
  return std::pow(1.0 + w.kappa * y.norm2(), -x.dim / 2.0 - 1.0);
}

inline double weight_eval(const WeightFamily& w, WeightKind kind, const Point& x) {
  validate(w);
  switch (kind) {
    case WeightKind::eta:
      if (x.dim != 1) throw ParameterError("eta takes a scalar argument");
      return eta(x[0], w.theta);
    case WeightKind::zeta: return zeta(w, x);
    case WeightKind::rho: return rho(w, x);
  }
  return 0.0;
}

inline double weight_eval(const WeightFamily& w, WeightKind kind, double t) {
  return weight_eval(w, kind, Point{t});
}

struct WeightBoundReport {
  std::size_t samples = 0;
  std::size_t annulus_samples = 0;
  double max_gradient_violation = 0.0;   // max (|∇ζ| - r^{-1} 1_C)_+
  double max_laplacian_violation = 0.0;  // max (-Δζ - (d-1) r^{-2} 1_C)_+
  double max_gradient_outside = 0.0;     // max |∇ζ| off the annulus
  double max_laplacian_outside = 0.0;    // max |Δζ| off the annulus
};

/// Checks |∇ζ_r| ≤ r^{-1} 1_{C(r,ar)} and -Δζ_r ≤ (d-1) r^{-2} 1_{C(r,ar)} with
/// centered differences of step h at the grid nodes lying at distance ≥ 3h
/// from both kinks |x| = r and |x| = ar.
inline WeightBoundReport weight_bound_check(const WeightFamily& w, const Grid& g) {
  validate(w);
  WeightBoundReport rep;
  const double h = g.spacing();
  const int d = g.dim();
  const double r_in = w.r, r_out = w.a() * w.r;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.point(i);
    Point y = x;
    if (w.center.dim == d) y -= w.center;
    const double rad = y.norm();
    if (std::abs(rad - r_in) < 3.0 * h || std::abs(rad - r_out) < 3.0 * h) continue;
    ++rep.samples;
    const double z0 = zeta(w, x);
    double grad2 = 0.0, lap = 0.0;
    for (int a = 0; a < d; ++a) {
      Point xp = x, xm = x;
      xp[a] += h;
      xm[a] -= h;
      const double zp = zeta(w, xp), zm = zeta(w, xm);
      grad2 += std::pow((zp - zm) / (2.0 * h), 2);
      lap += (zp - 2.0 * z0 + zm) / (h * h);
    }
    const double grad = std::sqrt(grad2);
    const bool in_annulus = rad > r_in && rad < r_out;
    if (in_annulus) {
      ++rep.annulus_samples;
      rep.max_gradient_violation = std::max(rep.max_gradient_violation, grad - 1.0 / w.r);
      rep.max_laplacian_violation =
          std::max(rep.max_laplacian_violation, -lap - (d - 1) / (w.r * w.r));
    } else {
      rep.max_gradient_outside = std::max(rep.max_gradient_outside, grad);
      rep.max_laplacian_outside = std::max(rep.max_laplacian_outside, std::abs(lap));
      rep.max_gradient_violation = std::max(rep.max_gradient_violation, grad);
      rep.max_laplacian_violation = std::max(rep.max_laplacian_violation, -lap);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const DriftSpec& s) {
  if (s.family == DriftFamily::grid_sampled)
    throw ParameterError("grid_sampled drifts are not serializable");
  nlohmann::json j;
  j["family"] = to_string(s.family);
  j["d"] = s.dim;
  j["delta"] = s.family == DriftFamily::multi_bump ? s.declared_delta : s.delta;
  j["c"] = s.declared_c;
  j["declared_delta"] = s.declared_delta;
  j["sign"] = s.sign;
  if (s.support_radius) j["support"] = *s.support_radius;
  if (s.family == DriftFamily::compact_hardy || s.family == DriftFamily::tail_decay)
    j["radius"] = s.radius;
  if (s.family == DriftFamily::tail_decay) {
    j["C"] = s.tail_c;
    j["alpha"] = s.tail_alpha;
  }
  if (s.family == DriftFamily::multi_bump) {
    j["bumps"] = nlohmann::json::array();
    for (const Bump& b : s.bumps) {
      std::vector<double> c(b.center.c.begin(), b.center.c.begin() + b.center.dim);
      j["bumps"].push_back({{"center", c}, {"radius", b.radius}, {"delta", b.delta}, {"c", b.c}});
    }
  }
  return j;
}

inline DriftSpec drift_from_json(const nlohmann::json& j) {
  const DriftFamily fam = drift_family_from_string(j.at("family").get<std::string>());
  const int d = j.value("d", 3);
  DriftSpec s;
  switch (fam) {
    case DriftFamily::hardy:
      s = hardy_drift(d, j.at("delta").get<double>(), j.value("sign", 1));
      break;
    case DriftFamily::compact_hardy: {
      const double R = j.contains("radius") ? j["radius"].get<double>()
                                            : j.at("support").get<double>();
      s = compact_hardy_drift(d, j.at("delta").get<double>(), R, j.value("sign", 1));
      break;
    }
    case DriftFamily::tail_decay:
      s = tail_decay_drift(d, j.at("C").get<double>(), j.at("alpha").get<double>(),
                           j.at("radius").get<double>());
      break;
    case DriftFamily::multi_bump: {
      std::vector<Bump> bumps;
      for (const auto& jb : j.at("bumps")) {
        Bump b;
        const auto c = jb.at("center").get<std::vector<double>>();
        b.center = Point(static_cast<int>(c.size()));
        for (std::size_t k = 0; k < c.size(); ++k) b.center[static_cast<int>(k)] = c[k];
        b.radius = jb.at("radius").get<double>();
        b.delta = jb.at("delta").get<double>();
        b.c = jb.value("c", 0.0);
        bumps.push_back(b);
      }
      s = multi_bump_drift(d, std::move(bumps));
      break;
    }
    case DriftFamily::grid_sampled:
      throw ParameterError("grid_sampled drifts cannot be read from JSON");
  }
  if (j.contains("c")) s.declared_c = j["c"].get<double>();
  if (j.contains("declared_delta")) s.declared_delta = j["declared_delta"].get<double>();
  if (j.contains("support")) s.support_radius = j["support"].get<double>();
  validate(s);
  return s;
}

}  // namespace sdlab
