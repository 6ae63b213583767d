#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "sdlab/drift_fields.hpp"
#include "sdlab/parabolic.hpp"

using namespace sdlab;

namespace {

ScalarField lowest_mode(const Grid& g) {
  const double L = g.half_width();
  return sample(g, [&](const Point& x) {
    double v = 1.0;
    for (int a = 0; a < x.dim; ++a) v *= std::sin(std::numbers::pi * (x[a] + L) / (2.0 * L));
    return v;
  });
}

double lowest_eigenvalue(const Grid& g) {
  const double h = g.spacing();
  const double s = std::sin(std::numbers::pi / (2.0 * (g.points() - 1)));
  return g.dim() * 4.0 / (h * h) * s * s;
}

ScalarField gaussian(const Grid& g, const Point& c, double s, double amp = 1.0) {
  return sample(g, [&](const Point& x) { return amp * std::exp(-0.5 * (x - c).norm2() / (s * s)); });
}

EvolutionConfig config(double tau, double T) {
  EvolutionConfig c;
  c.tau = tau;
  c.T = T;
  return c;
}

}  // namespace

TEST(Evolve, EigenmodeDecaysLikeImplicitEuler) {
  Grid g(3, 1.0, 17);
  const ScalarField f = lowest_mode(g);
  const auto run = evolve(f, VectorField(g), config(0.01, 0.1));
  const double factor = std::pow(1.0 + 0.01 * lowest_eigenvalue(g), -10.0);
  const ScalarField& u = run.snapshots.back();
  for (std::size_t i : g.interior()) EXPECT_NEAR(u[i], factor * f[i], 1e-10);
}

TEST(Evolve, GaussianHeatKernel) {
  // ∂_t u = Δu from exp(-|x|²/2s²): (s²/(s²+2t))^{d/2} exp(-|x|²/(2(s²+2t)))
  Grid g(3, 4.0, 41);
  const double s = 0.5, T = 0.1;
  const auto run = evolve(gaussian(g, Point{0.0, 0.0, 0.0}, s), VectorField(g), config(1e-3, T));
  const double v = s * s + 2.0 * T;
  double err = 0.0;
  for (std::size_t i : g.interior()) {
    const double exact = std::pow(s * s / v, 1.5) * std::exp(-0.5 * g.point(i).norm2() / v);
    err = std::max(err, std::abs(run.snapshots.back()[i] - exact));
  }
  EXPECT_LT(err, 0.02 * std::pow(s * s / v, 1.5));
}

TEST(Evolve, StepCountAndTimes) {
  Grid g(3, 1.0, 17);
  EvolutionConfig c = config(0.03, 0.1);
  c.snapshot_stride = 2;
  const auto run = evolve(lowest_mode(g), VectorField(g), c);
  ASSERT_EQ(run.times.size(), 5u);  // ceil(0.1/0.03) = 4 steps
  EXPECT_NEAR(run.tau, 0.025, 1e-15);
  EXPECT_NEAR(run.times.back(), 0.1, 1e-15);
  ASSERT_EQ(run.snapshot_times.size(), 3u);
  EXPECT_NEAR(run.snapshot_times[1], 0.05, 1e-15);
}

TEST(Evolve, SemigroupProperty) {
  Grid g(3, 2.0, 21);
  const auto b = mollify(hardy_drift(3, 1.0), 0.3, g);
  const ScalarField f = gaussian(g, Point{0.3, 0.0, 0.0}, 0.4);
  const double tau = std::min(0.01, cfl_limit(b));
  const auto whole = evolve(f, b, config(tau, 40 * tau));
  const auto first = evolve(f, b, config(tau, 20 * tau));
  const auto second = evolve(first.snapshots.back(), b, config(tau, 20 * tau));
  for (std::size_t i = 0; i < g.size(); ++i)
    EXPECT_NEAR(second.snapshots.back()[i], whole.snapshots.back()[i], 1e-9);
}

TEST(Evolve, MaximumPrincipleAndPositivity) {
  Grid g(3, 2.0, 21);
  const ScalarField f = gaussian(g, Point{0.2, -0.1, 0.0}, 0.3, 2.0);
  for (int sign : {+1, -1})
    for (const VectorField& b : {mollify(hardy_drift(3, 1.0, sign), 0.3, g),
                                 mollify(compact_hardy_drift(3, 3.0, 1.0, sign), 0.3, g)}) {
      const auto run = evolve(f, b, config(std::min(0.02, cfl_limit(b)), 0.3));
      for (std::size_t k = 0; k < run.times.size(); ++k) {
        EXPECT_GE(run.min_value[k], -1e-12);
        EXPECT_LE(run.max_value[k], 2.0 + 1e-12);
      }
    }
}

TEST(Evolve, EnergyInequalityWithoutDrift) {
  // implicit Euler: ||u_n||² + 2 Σ τ ||∇u_k||² ≤ ||u_0||²
  Grid g(3, 2.0, 21);
  EvolutionConfig c = config(0.01, 0.2);
  c.p_list = {2.0};
  const auto run = evolve(gaussian(g, Point{0.0, 0.0, 0.0}, 0.4), VectorField(g), c);
  const auto E = run.cumulative_energy(0.0);
  for (std::size_t k = 0; k < run.times.size(); ++k)
    EXPECT_LE(std::pow(run.lp[k][0], 2) + 2.0 * E[k], std::pow(run.lp[0][0], 2) * (1.0 + 1e-10));
}

TEST(Evolve, RejectsCflViolationAndSingularDrift) {
  Grid g(3, 1.0, 17);
  const auto b = mollify(hardy_drift(3, 4.0), 0.2, g);
  EXPECT_THROW(evolve(lowest_mode(g), b, config(2.0 * cfl_limit(b), 1.0)), ConfigurationError);
  VectorField bad(g);
  bad.component(0)[100] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(evolve(lowest_mode(g), bad, config(0.01, 0.1)), ConfigurationError);
  EXPECT_THROW(evolve(lowest_mode(g), VectorField(g), config(-1.0, 0.1)), ConfigurationError);
}

TEST(Resolvent, EigenmodeWithoutDrift) {
  Grid g(3, 1.0, 17);
  const ScalarField f = lowest_mode(g);
  const double mu = 5.0;
  const ScalarField u = resolvent({mu, f, VectorField(g)}, g);
  for (std::size_t i : g.interior()) EXPECT_NEAR(u[i], f[i] / (mu + lowest_eigenvalue(g)), 1e-9);
}

TEST(Resolvent, PositivityAndSupContraction) {
  Grid g(3, 2.0, 21);
  const ScalarField f = gaussian(g, Point{0.3, 0.1, 0.0}, 0.3);
  for (int sign : {+1, -1}) {
    const auto b = mollify(hardy_drift(3, 2.0, sign), 0.3, g);
    for (double mu : {0.5, 10.0, 1000.0}) {
      SolveStats st;
      const ScalarField u = resolvent({mu, f, b}, g, {}, &st);
      EXPECT_LE(st.relative_residual, 1e-10);
      EXPECT_GE(*std::min_element(u.values.begin(), u.values.end()), -1e-12);
      EXPECT_LE(mu * sup_norm(u), sup_norm(f) * (1.0 + 1e-8));
    }
  }
}

TEST(Resolvent, ResolventIdentity) {
  // R_μ - R_ν = (ν - μ) R_μ R_ν
  Grid g(3, 2.0, 21);
  const auto b = mollify(hardy_drift(3, 1.0), 0.3, g);
  const ScalarField f = gaussian(g, Point{0.0, 0.2, 0.0}, 0.4);
  ResolventOptions o;
  o.tol = 1e-12;
  const double mu = 2.0, nu = 7.0;
  const ScalarField rm = resolvent({mu, f, b}, g, o), rn = resolvent({nu, f, b}, g, o);
  const ScalarField rmrn = resolvent({mu, rn, b}, g, o);
  for (std::size_t i = 0; i < g.size(); ++i)
    EXPECT_NEAR(rm[i] - rn[i], (nu - mu) * rmrn[i], 1e-9);
}

TEST(NormCertificates, RatesAndInterval) {
  EXPECT_DOUBLE_EQ(quasi_contraction_exponent(0.0), 1.0);
  EXPECT_DOUBLE_EQ(quasi_contraction_exponent(1.0), 2.0);
  EXPECT_TRUE(std::isinf(quasi_contraction_exponent(4.0)));
  EXPECT_EQ(lp_rate(1.0, 0.0, 3.0), 0.0);
  EXPECT_DOUBLE_EQ(lp_rate(4.0, 6.0, 3.0), 1.0);
  EXPECT_THROW(lp_rate(0.0, 1.0, 2.0), ParameterError);
}

TEST(NormCertificates, ContractionForHardyDrift) {
  Grid g(3, 2.0, 21);
  const auto b = mollify(hardy_drift(3, 1.0), 0.3, g);
  EvolutionConfig c = config(std::min(0.01, cfl_limit(b)), 0.3);
  c.p_list = {1.5, 3.0, 4.0};
  c.meta.delta = 1.0;
  const auto run = evolve(gaussian(g, Point{0.2, 0.0, 0.0}, 0.4), b, c);
  const auto rep = norm_certificates(run, {1.5, 3.0, 4.0, std::numeric_limits<double>::infinity()}, {});
  ASSERT_EQ(rep.contraction.size(), 4u);
  EXPECT_FALSE(rep.contraction[0].applicable);  // 1.5 < 2/(2-1)
  for (std::size_t k = 1; k < 4; ++k) {
    EXPECT_TRUE(rep.contraction[k].pass);
    EXPECT_EQ(rep.contraction[k].argmax_t, 0.0);
  }
  EXPECT_THROW(norm_certificates(run, {2.5}, {}), ConfigurationError);
}

TEST(NormCertificates, HeatKernelDecaySlope) {
  // exact heat kernel series: ||u(t)||_∞ ∝ t^{-3/2}
  Grid g(3, 1.0, 17);
  SemigroupRun run;
  run.grid = g;
  run.p_list = {1.0};
  for (int k = 0; k <= 20; ++k) {
    const double t = 0.05 * k;
    run.times.push_back(t);
    run.sup.push_back(k == 0 ? 1.0 : std::pow(4.0 * std::numbers::pi * t, -1.5));
    run.lp.push_back({1.0});
  }
  const auto rep = norm_certificates(run, {}, {{1.0, std::numeric_limits<double>::infinity()}});
  EXPECT_NEAR(rep.decay[0].fitted_slope, -1.5, 1e-12);
  EXPECT_TRUE(rep.pass);
}

TEST(Orlicz, ConstantsAndBallVolume) {
  EXPECT_NEAR(ball_volume(3, 2.0), 4.0 / 3.0 * std::numbers::pi * 8.0, 1e-12);
  EXPECT_NEAR(ball_volume(2, 1.0), std::numbers::pi, 1e-14);
  DriftMetadata m;
  m.support_radius = 1.0;
  m.c4 = 0.5;
  m.theta = 0.25;
  const auto k = orlicz_constants(m, 3);
  EXPECT_DOUBLE_EQ(k.c5, 0.5 + 8.0);
  EXPECT_DOUBLE_EQ(k.a, 5.0);
  EXPECT_DOUBLE_EQ(k.lambda, 4.25);
  EXPECT_NEAR(k.G, 8.5 * ball_volume(3, 5.0), 1e-9);
  EXPECT_FALSE(k.split);
  m.b2_sup = 2.0;
  m.b2_l2 = 3.0;
  const auto s = orlicz_constants(m, 3);
  EXPECT_TRUE(s.split);
  EXPECT_DOUBLE_EQ(s.lambda, 4.25 + 2.0);
  EXPECT_NEAR(s.G, k.G + 9.0, 1e-9);
  m.support_radius.reset();
  EXPECT_THROW(orlicz_constants(m, 3), ConfigurationError);
}

TEST(Orlicz, EnergyCertificateHoldsForCompactDrift) {
  Grid g(3, 3.0, 21);
  const DriftSpec spec = compact_hardy_drift(3, 1.0, 1.0);
  const auto b = mollify(spec, 0.3, g);
  EvolutionConfig c = config(std::min(0.02, cfl_limit(b)), 0.2);
  c.meta.delta = 1.0;
  c.meta.support_radius = 1.3;
  const auto run = evolve(gaussian(g, Point{0.3, 0.0, 0.0}, 0.5, 2.0), b, c);
  const auto rep = orlicz_energy_certificate(run);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.rows.size(), run.snapshots.size());
  EXPECT_DOUBLE_EQ(rep.c, rep.f_gauge);
  for (const auto& r : rep.rows) {
    EXPECT_LE(r.star1_lhs, r.star1_rhs);
    EXPECT_LE(r.gauge_lhs, r.gauge_rhs * (1.0 + 1e-9));
  }
}

TEST(Cauchy, ConvergesUnderMollification) {
  Grid g(3, 3.0, 21);
  const DriftSpec spec = compact_hardy_drift(3, 1.0, 1.0);
  std::vector<VectorField> drifts;
  for (double e : {1.2, 0.6, 0.3}) drifts.push_back(mollify(spec, e, g, MollifySampling::cell_average));
  double cfl = 1.0;
  for (const auto& b : drifts) cfl = std::min(cfl, cfl_limit(b));
  const auto rep = semigroup_cauchy(drifts, gaussian(g, Point{0.3, 0.0, 0.0}, 0.5), config(std::min(0.02, cfl), 0.1));
  EXPECT_EQ(rep.pairs.size(), 3u);
  EXPECT_EQ(rep.consecutive_gauge.size(), 2u);
  EXPECT_EQ(rep.grad_ratios.size(), 1u);
  EXPECT_TRUE(rep.gauge_monotone);
  EXPECT_TRUE(rep.grad_monotone);
  EXPECT_THROW(semigroup_cauchy({drifts[0], drifts[1]}, gaussian(g, Point{0.0, 0.0, 0.0}, 0.5),
                                config(0.01, 0.1)),
               ConfigurationError);
}

TEST(Trotter, ResolventConditions) {
  Grid g(3, 3.0, 21);
  const DriftSpec spec = compact_hardy_drift(3, 1.0, 1.0);
  std::vector<VectorField> drifts;
  for (double e : {1.2, 0.6, 0.3}) drifts.push_back(mollify(spec, e, g, MollifySampling::cell_average));
  const ScalarField f = sample(g, [](const Point& x) {
    const double z = x.norm() / 0.8;
    return z < 1.0 ? std::pow(1.0 - z * z, 3) : 0.0;
  });
  const auto rep = trotter_limit_check(drifts, {10.0, 100.0, 1000.0}, f);
  EXPECT_TRUE(rep.condition1);
  EXPECT_TRUE(rep.condition3_decreasing);
  ASSERT_EQ(rep.sup_ratio.size(), 3u);
  ASSERT_EQ(rep.pair_diff.size(), 3u);
  ASSERT_EQ(rep.pair_diff[0].size(), 2u);
  for (const auto& row : rep.sup_ratio)
    for (double r : row) EXPECT_LE(r, 1.0 + 1e-6);
}

TEST(WeakResidual, HeatEquationSatisfiesWeakForm) {
  Grid g(3, 2.0, 21);
  const auto run = evolve(gaussian(g, Point{0.0, 0.0, 0.0}, 0.4), VectorField(g), config(0.01, 0.2));
  SpaceTimeBump psi{0.1, 0.05, Point{0.2, 0.0, 0.0}, 0.8};
  const auto rep = weak_solution_residual(run, VectorField(g), {psi});
  EXPECT_LT(rep.max_relative, 1e-8);
}

TEST(WeakResidual, DriftRunWithinTolerance) {
  Grid g(3, 2.0, 25);
  const auto b = mollify(hardy_drift(3, 1.0), 0.4, g);
  const auto run = evolve(gaussian(g, Point{0.0, 0.0, 0.0}, 0.4), b, config(std::min(0.01, cfl_limit(b)), 0.2));
  std::vector<SpaceTimeBump> fam{{0.1, 0.05, Point{0.2, 0.0, 0.0}, 0.8},
                                 {0.12, 0.06, Point{-0.3, 0.3, 0.0}, 0.6}};
  const auto rep = weak_solution_residual(run, b, fam);
  EXPECT_TRUE(rep.pass) << rep.max_relative;
  SpaceTimeBump bad{0.02, 0.05, Point{0.0, 0.0, 0.0}, 0.5};
  EXPECT_THROW(weak_solution_residual(run, b, {bad}), ParameterError);
}
