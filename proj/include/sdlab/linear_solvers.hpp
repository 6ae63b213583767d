#pragma once

// Matrix-free Krylov solvers on flat arrays. Operators are callables
// `void(const std::vector<double>& x, std::vector<double>& y)` computing y = Ax.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sdlab/errors.hpp"
#include "sdlab/parallel.hpp"

namespace sdlab {

using LinearOperator =
    std::function<void(const std::vector<double>&, std::vector<double>&)>;

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
  std::vector<double> history;
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return parallel_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

// y += alpha * x
inline void axpy(double alpha, const std::vector<double>& x,
                 std::vector<double>& y) {
  parallel_for(y.size(), [&](std::size_t i) { y[i] += alpha * x[i]; });
}

}  // namespace detail

/// Conjugate gradient for symmetric positive definite A. `x` holds the initial
/// guess on entry. Throws SolverError when `max_iter` is exhausted.
inline SolveStats conjugate_gradient(const LinearOperator& A,
                                     const std::vector<double>& rhs,
                                     std::vector<double>& x, double tol,
                                     int max_iter) {
  using detail::axpy;
  using detail::dot;
  SolveStats st;
  const std::size_t n = rhs.size();
  if (x.size() != n) x.assign(n, 0.0);
  const double bnorm = detail::norm(rhs);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return st;
  }
  std::vector<double> r(n), p(n), Ap(n);
  A(x, Ap);
  parallel_for(n, [&](std::size_t i) { r[i] = rhs[i] - Ap[i]; });
  p = r;
  double rr = dot(r, r);
  st.relative_residual = std::sqrt(rr) / bnorm;
  st.history.push_back(st.relative_residual);
  while (st.relative_residual > tol) {
    if (st.iterations >= max_iter)
      throw SolverError("conjugate gradient did not converge (residual " +
                            std::to_string(st.relative_residual) + ")",
                        st.history);
    A(p, Ap);
    const double alpha = rr / dot(p, Ap);
    axpy(alpha, p, x);
    axpy(-alpha, Ap, r);
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    parallel_for(n, [&](std::size_t i) { p[i] = r[i] + beta * p[i]; });
    ++st.iterations;
    st.relative_residual = std::sqrt(rr) / bnorm;
    st.history.push_back(st.relative_residual);
  }
  return st;
}

/// Restarted GMRES(m) with right Jacobi preconditioning. `inv_diag` holds
/// 1/diag(A) (zero entries are treated as identity rows). `x` holds the
/// initial guess on entry. Throws SolverError on stagnation or when
/// `max_iter` total inner iterations are exhausted.
inline SolveStats gmres(const LinearOperator& A, const std::vector<double>& rhs,
                        const std::vector<double>& inv_diag,
                        std::vector<double>& x, double tol, int max_iter,
                        int restart = 40) {
  using detail::dot;
  SolveStats st;
  const std::size_t n = rhs.size();
  if (x.size() != n) x.assign(n, 0.0);
  const double bnorm = detail::norm(rhs);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return st;
  }
  auto precond = [&](const std::vector<double>& v, std::vector<double>& out) {
    out.resize(n);
    parallel_for(n, [&](std::size_t i) {
      out[i] = inv_diag[i] != 0.0 ? inv_diag[i] * v[i] : v[i];
    });
  };
  const auto m = static_cast<std::size_t>(restart);
  std::vector<std::vector<double>> V(m + 1, std::vector<double>(n));
  std::vector<std::vector<double>> H(m + 1, std::vector<double>(m, 0.0));
  std::vector<double> cs(m), sn(m), g(m + 1), w(n), z(n), r(n);
  double last_outer = std::numeric_limits<double>::infinity();

  while (true) {
    A(x, w);
    parallel_for(n, [&](std::size_t i) { r[i] = rhs[i] - w[i]; });
    double beta = detail::norm(r);
    st.relative_residual = beta / bnorm;
    st.history.push_back(st.relative_residual);
    if (st.relative_residual <= tol) return st;
    if (st.iterations >= max_iter)
      throw SolverError("GMRES did not converge (residual " +
                            std::to_string(st.relative_residual) + ")",
                        st.history);
    if (st.relative_residual > 0.999999 * last_outer)
      throw SolverError("GMRES stagnated (residual " +
                            std::to_string(st.relative_residual) + ")",
                        st.history);
    last_outer = st.relative_residual;

    parallel_for(n, [&](std::size_t i) { V[0][i] = r[i] / beta; });
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    std::size_t k = 0;
    for (; k < m; ++k) {
      precond(V[k], z);
      A(z, w);
      for (std::size_t j = 0; j <= k; ++j) {
        H[j][k] = dot(w, V[j]);
        detail::axpy(-H[j][k], V[j], w);
      }
      H[k + 1][k] = detail::norm(w);
      if (H[k + 1][k] > 0.0)
        parallel_for(n, [&](std::size_t i) { V[k + 1][i] = w[i] / H[k + 1][k]; });
      for (std::size_t j = 0; j < k; ++j) {
        const double t = cs[j] * H[j][k] + sn[j] * H[j + 1][k];
        H[j + 1][k] = -sn[j] * H[j][k] + cs[j] * H[j + 1][k];
        H[j][k] = t;
      }
      const double den = std::hypot(H[k][k], H[k + 1][k]);
      cs[k] = H[k][k] / den;
      sn[k] = H[k + 1][k] / den;
      H[k][k] = den;
      H[k + 1][k] = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      ++st.iterations;
      const double est = std::abs(g[k + 1]) / bnorm;
      if (est <= tol * 0.5 || st.iterations >= max_iter) {
        ++k;
        break;
      }
    }
    // back substitution
    std::vector<double> y(k, 0.0);
    for (std::size_t ii = k; ii-- > 0;) {
      double s = g[ii];
      for (std::size_t j = ii + 1; j < k; ++j) s -= H[ii][j] * y[j];
      y[ii] = s / H[ii][ii];
    }
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t j = 0; j < k; ++j) detail::axpy(y[j], V[j], w);
    precond(w, z);
    detail::axpy(1.0, z, x);
  }
}

}  // namespace sdlab
