#pragma once

// Data-parallel loops with reproducible reductions.
//
// Reductions are split into fixed-size blocks whose partial sums are combined
// in block order, so results do not depend on the number of threads.

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sdlab {

inline constexpr std::size_t kReductionBlock = 4096;

inline void set_thread_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

inline int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Applies SDLAB_THREADS from the environment, if set.
inline void apply_thread_env() {
  if (const char* s = std::getenv("SDLAB_THREADS")) {
    int n = std::atoi(s);
    if (n > 0) set_thread_count(n);
  }
}

template <class F>
void parallel_for(std::size_t n, F&& f) {
#ifdef _OPENMP
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n > 16384)
  for (std::ptrdiff_t i = 0; i < sn; ++i) f(static_cast<std::size_t>(i));
#else
  for (std::size_t i = 0; i < n; ++i) f(i);
#endif
}

/// Deterministic sum of f(i) for i in [0, n).
template <class F>
double parallel_sum(std::size_t n, F&& f) {
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  if (blocks <= 1) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += f(i);
    return s;
  }
  std::vector<double> partial(blocks, 0.0);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t lo = b * kReductionBlock;
    const std::size_t hi = std::min(n, lo + kReductionBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += f(i);
    partial[b] = s;
  });
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

/// Deterministic max of f(i) for i in [0, n); returns `init` when n == 0.
template <class F>
double parallel_max(std::size_t n, F&& f, double init) {
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  std::vector<double> partial(blocks, init);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t lo = b * kReductionBlock;
    const std::size_t hi = std::min(n, lo + kReductionBlock);
    double m = init;
    for (std::size_t i = lo; i < hi; ++i) m = std::max(m, f(i));
    partial[b] = m;
  });
  double m = init;
  for (double p : partial) m = std::max(m, p);
  return m;
}

}  // namespace sdlab
