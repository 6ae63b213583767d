#pragma once

// Uniform tensor grids on the box [-L, L]^d with Dirichlet-zero boundary
// nodes, plus the scalar and vector fields sampled on them.
//
// Nodes are x_i = -L + i h, i = 0..N-1, h = 2L/(N-1). The outermost layer of
// nodes carries the boundary condition and is held at zero by every operator
// in this library; the interior nodes are the unknowns.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "sdlab/errors.hpp"
#include "sdlab/parallel.hpp"

namespace sdlab {

inline constexpr int kMaxDim = 6;

/// A point (or vector) in R^d, d <= kMaxDim.
struct Point {
  int dim = 0;
  std::array<double, kMaxDim> c{};

  Point() = default;
  explicit Point(int d) : dim(d) {}
  Point(std::initializer_list<double> xs) : dim(static_cast<int>(xs.size())) {
    if (xs.size() > kMaxDim) throw ParameterError("Point: dimension too large");
    int i = 0;
    for (double x : xs) c[static_cast<std::size_t>(i++)] = x;
  }

  double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

  double norm2() const {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += (*this)[i] * (*this)[i];
    return s;
  }
  double norm() const { return std::sqrt(norm2()); }

  Point& operator+=(const Point& o) {
    for (int i = 0; i < dim; ++i) (*this)[i] += o[i];
    return *this;
  }
  Point& operator-=(const Point& o) {
    for (int i = 0; i < dim; ++i) (*this)[i] -= o[i];
    return *this;
  }
  Point& operator*=(double s) {
    for (int i = 0; i < dim; ++i) (*this)[i] *= s;
    return *this;
  }
  friend Point operator+(Point a, const Point& b) { return a += b; }
  friend Point operator-(Point a, const Point& b) { return a -= b; }
  friend Point operator*(Point a, double s) { return a *= s; }
  friend Point operator*(double s, Point a) { return a *= s; }
};

inline double dot(const Point& a, const Point& b) {
  double s = 0.0;
  for (int i = 0; i < a.dim; ++i) s += a[i] * b[i];
  return s;
}

class Grid {
 public:
  Grid() = default;

  Grid(int dim, double half_width, int points)
      : dim_(dim), half_width_(half_width), points_(points) {
    if (dim < 1 || dim > kMaxDim) throw ParameterError("Grid: bad dimension");
    if (points < 16) throw ParameterError("Grid: need at least 16 points per axis");
    if (!(half_width > 0.0)) throw ParameterError("Grid: half width must be > 0");
    spacing_ = 2.0 * half_width / (points - 1);
    size_ = 1;
    for (int a = 0; a < dim; ++a) {
      strides_[static_cast<std::size_t>(a)] = size_;
      size_ *= static_cast<std::size_t>(points);
    }
    auto interior = std::make_shared<std::vector<std::size_t>>();
    interior->reserve(size_);
    for (std::size_t i = 0; i < size_; ++i)
      if (is_interior(i)) interior->push_back(i);
    interior_ = std::move(interior);
  }

  int dim() const noexcept { return dim_; }
  double half_width() const noexcept { return half_width_; }
  int points() const noexcept { return points_; }
  double spacing() const noexcept { return spacing_; }
  std::size_t size() const noexcept { return size_; }
  std::size_t stride(int axis) const {
    return strides_[static_cast<std::size_t>(axis)];
  }
  double cell_volume() const { return std::pow(spacing_, dim_); }

  int index_along(std::size_t flat, int axis) const {
    return static_cast<int>((flat / stride(axis)) %
                            static_cast<std::size_t>(points_));
  }
  double coordinate(std::size_t flat, int axis) const {
    return -half_width_ + index_along(flat, axis) * spacing_;
  }
  Point point(std::size_t flat) const {
    Point p(dim_);
    for (int a = 0; a < dim_; ++a) p[a] = coordinate(flat, a);
    return p;
  }
  bool is_interior(std::size_t flat) const {
    for (int a = 0; a < dim_; ++a) {
      const int k = index_along(flat, a);
      if (k == 0 || k == points_ - 1) return false;
    }
    return true;
  }
  const std::vector<std::size_t>& interior() const { return *interior_; }

  bool contains(const Point& x) const {
    for (int a = 0; a < dim_; ++a)
      if (std::abs(x[a]) > half_width_) return false;
    return true;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.dim_ == b.dim_ && a.points_ == b.points_ &&
           a.half_width_ == b.half_width_;
  }

 private:
  int dim_ = 0;
  double half_width_ = 0.0;
  int points_ = 0;
  double spacing_ = 0.0;
  std::size_t size_ = 0;
  std::array<std::size_t, kMaxDim> strides_{};
  std::shared_ptr<const std::vector<std::size_t>> interior_ =
      std::make_shared<std::vector<std::size_t>>();
};

inline void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw ParameterError("fields live on different grids");
}

struct ScalarField {
  Grid grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const Grid& g, double fill = 0.0)
      : grid(g), values(g.size(), fill) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  /// Zeros the Dirichlet boundary layer.
  void zero_boundary() {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!grid.is_interior(i)) values[i] = 0.0;
  }

  ScalarField& operator+=(const ScalarField& o) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
    return *this;
  }
  ScalarField& operator*=(double s) {
    for (double& v : values) v *= s;
    return *this;
  }
  friend ScalarField operator+(ScalarField a, const ScalarField& b) {
    return a += b;
  }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) {
    return a -= b;
  }
  friend ScalarField operator*(ScalarField a, double s) { return a *= s; }
  friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
};

struct VectorField {
  Grid grid;
  std::vector<std::vector<double>> components;

  VectorField() = default;
  explicit VectorField(const Grid& g)
      : grid(g),
        components(static_cast<std::size_t>(g.dim()),
                   std::vector<double>(g.size(), 0.0)) {}

  int dim() const { return grid.dim(); }
  std::vector<double>& component(int a) {
    return components[static_cast<std::size_t>(a)];
  }
  const std::vector<double>& component(int a) const {
    return components[static_cast<std::size_t>(a)];
  }

  Point at(std::size_t i) const {
    Point p(dim());
    for (int a = 0; a < dim(); ++a) p[a] = component(a)[i];
    return p;
  }
  void set(std::size_t i, const Point& v) {
    for (int a = 0; a < dim(); ++a) component(a)[i] = v[a];
  }
  double magnitude2(std::size_t i) const {
    double s = 0.0;
    for (const auto& c : components) s += c[i] * c[i];
    return s;
  }

  VectorField& operator*=(double s) {
    for (auto& c : components)
      for (double& v : c) v *= s;
    return *this;
  }
  friend VectorField operator*(VectorField a, double s) { return a *= s; }
};

// ---------------------------------------------------------------------------
// Sampling

inline ScalarField sample(const Grid& g,
                          const std::function<double(const Point&)>& f) {
  ScalarField out(g);
  parallel_for(g.size(), [&](std::size_t i) {
    out[i] = g.is_interior(i) ? f(g.point(i)) : 0.0;
  });
  return out;
}

inline VectorField sample_vector(const Grid& g,
                                 const std::function<Point(const Point&)>& f) {
  VectorField out(g);
  parallel_for(g.size(), [&](std::size_t i) { out.set(i, f(g.point(i))); });
  return out;
}

/// |b|^2 at every node.
inline ScalarField magnitude2(const VectorField& b) {
  ScalarField out(b.grid);
  parallel_for(out.size(), [&](std::size_t i) { out[i] = b.magnitude2(i); });
  return out;
}

// ---------------------------------------------------------------------------
// Quadrature and norms (discrete measure h^d * sum)

inline double integral(const ScalarField& f) {
  return f.grid.cell_volume() *
         parallel_sum(f.size(), [&](std::size_t i) { return f[i]; });
}

inline double inner(const ScalarField& f, const ScalarField& g) {
  require_same_grid(f.grid, g.grid);
  return f.grid.cell_volume() *
         parallel_sum(f.size(), [&](std::size_t i) { return f[i] * g[i]; });
}

inline double sup_norm(const ScalarField& f) {
  return parallel_max(
      f.size(), [&](std::size_t i) { return std::abs(f[i]); }, 0.0);
}

/// Discrete L^p norm; p = +inf gives the sup norm.
inline double lp_norm(const ScalarField& f, double p) {
  if (std::isinf(p)) return sup_norm(f);
  if (!(p >= 1.0)) throw ParameterError("lp_norm: p must be >= 1");
  // scale by the sup norm to avoid overflow for large p
  const double m = sup_norm(f);
  if (m == 0.0) return 0.0;
  const double s = parallel_sum(f.size(), [&](std::size_t i) {
    return std::pow(std::abs(f[i]) / m, p);
  });
  return m * std::pow(s * f.grid.cell_volume(), 1.0 / p);
}

inline double l2_norm(const VectorField& b) {
  return std::sqrt(b.grid.cell_volume() *
                   parallel_sum(b.grid.size(), [&](std::size_t i) {
                     return b.magnitude2(i);
                   }));
}

inline double sup_magnitude(const VectorField& b) {
  return std::sqrt(parallel_max(
      b.grid.size(), [&](std::size_t i) { return b.magnitude2(i); }, 0.0));
}

/// max over nodes of sum_a |b_a|, the advective CFL speed of the upwind scheme.
inline double max_l1_speed(const VectorField& b) {
  return parallel_max(
      b.grid.size(),
      [&](std::size_t i) {
        double s = 0.0;
        for (const auto& c : b.components) s += std::abs(c[i]);
        return s;
      },
      0.0);
}

// ---------------------------------------------------------------------------
// Stencils. All operators act on interior nodes and read zero boundary nodes.

/// out = (shift - Δ_h) u on interior nodes, zero on the boundary.
inline void apply_shifted_laplacian(const Grid& g, const std::vector<double>& u,
                                    double shift, std::vector<double>& out) {
  const double ih2 = 1.0 / (g.spacing() * g.spacing());
  const double diag = shift + 2.0 * g.dim() * ih2;
  const auto& in = g.interior();
  out.assign(g.size(), 0.0);
  parallel_for(in.size(), [&](std::size_t k) {
    const std::size_t i = in[k];
    double nb = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const std::size_t s = g.stride(a);
      nb += u[i + s] + u[i - s];
    }
    out[i] = diag * u[i] - ih2 * nb;
  });
}

inline void apply_shifted_laplacian(const ScalarField& u, double shift,
                                    std::vector<double>& out) {
  apply_shifted_laplacian(u.grid, u.values, shift, out);
}

/// Dirichlet energy ||∇_h u||_2^2 with forward differences over all edges.
inline double dirichlet_energy(const ScalarField& u) {
  const Grid& g = u.grid;
  const double ih2 = 1.0 / (g.spacing() * g.spacing());
  const int n = g.points();
  const double s = parallel_sum(g.size(), [&](std::size_t i) {
    double e = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      if (g.index_along(i, a) + 1 >= n) continue;
      const double d = u[i + g.stride(a)] - u[i];
      e += d * d;
    }
    return e;
  });
  return s * ih2 * g.cell_volume();
}

/// Forward-difference gradient component along `axis`; zero on the last node.
inline ScalarField forward_difference(const ScalarField& u, int axis) {
  const Grid& g = u.grid;
  ScalarField out(g);
  const double ih = 1.0 / g.spacing();
  const std::size_t s = g.stride(axis);
  parallel_for(g.size(), [&](std::size_t i) {
    if (g.index_along(i, axis) + 1 < g.points()) out[i] = (u[i + s] - u[i]) * ih;
  });
  return out;
}

/// out = b · ∇_h u with first-order upwinding (backward difference where
/// b_a > 0, forward where b_a < 0), interior nodes only.
inline void apply_upwind_advection(const VectorField& b,
                                   const std::vector<double>& u,
                                   std::vector<double>& out) {
  const Grid& g = b.grid;
  const double ih = 1.0 / g.spacing();
  const auto& in = g.interior();
  out.assign(g.size(), 0.0);
  parallel_for(in.size(), [&](std::size_t k) {
    const std::size_t i = in[k];
    double acc = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const double ba = b.component(a)[i];
      const std::size_t s = g.stride(a);
      if (ba > 0.0)
        acc += ba * (u[i] - u[i - s]);
      else if (ba < 0.0)
        acc += ba * (u[i + s] - u[i]);
    }
    out[i] = acc * ih;
  });
}

inline void apply_upwind_advection(const VectorField& b, const ScalarField& u,
                                   std::vector<double>& out) {
  require_same_grid(b.grid, u.grid);
  apply_upwind_advection(b, u.values, out);
}

// ---------------------------------------------------------------------------
// Interpolation

/// Multilinear interpolation of a scalar array on `g`; zero outside the box.
inline double interpolate(const Grid& g, const std::vector<double>& values,
                          const Point& x) {
  const int d = g.dim();
  std::array<std::size_t, kMaxDim> base{};
  std::array<double, kMaxDim> frac{};
  for (int a = 0; a < d; ++a) {
    const double s = (x[a] + g.half_width()) / g.spacing();
    if (s < 0.0 || s > g.points() - 1) return 0.0;
    auto k = static_cast<int>(std::floor(s));
    if (k >= g.points() - 1) k = g.points() - 2;
    base[static_cast<std::size_t>(a)] = static_cast<std::size_t>(k);
    frac[static_cast<std::size_t>(a)] = s - k;
  }
  double acc = 0.0;
  for (unsigned corner = 0; corner < (1u << d); ++corner) {
    double w = 1.0;
    std::size_t idx = 0;
    for (int a = 0; a < d; ++a) {
      const bool up = (corner >> a) & 1u;
      const double f = frac[static_cast<std::size_t>(a)];
      w *= up ? f : 1.0 - f;
      idx += (base[static_cast<std::size_t>(a)] + (up ? 1 : 0)) * g.stride(a);
    }
    if (w != 0.0) acc += w * values[idx];
  }
  return acc;
}

inline double interpolate(const ScalarField& f, const Point& x) {
  return interpolate(f.grid, f.values, x);
}

inline Point interpolate(const VectorField& b, const Point& x) {
  Point out(b.dim());
  for (int a = 0; a < b.dim(); ++a) out[a] = interpolate(b.grid, b.component(a), x);
  return out;
}

}  // namespace sdlab
