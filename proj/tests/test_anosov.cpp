#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "thermolab/anosov.hpp"

using namespace thermolab;

namespace {

constexpr double pi = std::numbers::pi;

SurfaceModel flat_model() { return build_conformal_model(ModelKind::conformal_torus, Expression(0.0)); }

SurfaceModel bumpy_model() {
  return build_conformal_model(ModelKind::conformal_torus, Expression::parse("0.1*sin(2*pi*x)*cos(2*pi*y)"));
}

SurfaceModel hyperbolic_model() {
  return build_synthetic_model(synthetic_from_conformal(Expression::parse("-log(y)"), Domain::plane(-1, 1, 0.5, 2)));
}

std::vector<SMPoint> product_grid(int n_xy, int n_theta) {
  std::vector<SMPoint> g;
  for (int i = 0; i < n_xy; ++i)
    for (int j = 0; j < n_xy; ++j)
      for (int k = 0; k < n_theta; ++k) g.push_back({double(i) / n_xy, double(j) / n_xy, 2 * pi * k / n_theta});
  return g;
}

}  // namespace

TEST(Anosov, CriterionExamples) {
  const auto grid = validation_grid(Domain::torus(), 8);
  const CriterionReport f = curvature_criterion(flat_model(), 0.0, grid);
  EXPECT_EQ(f.sup_value, 0.0);
  EXPECT_FALSE(f.anosov_flag);
  const CriterionReport c = curvature_criterion(flat_model(), 0.7, grid);
  EXPECT_NEAR(c.sup_value, 0.49, 1e-15);
  EXPECT_FALSE(c.anosov_flag);
  const SurfaceModel h = hyperbolic_model();
  const CriterionReport k = curvature_criterion(h, 0.0, validation_grid(h.domain, 6));
  EXPECT_NEAR(k.sup_value, -1.0, 1e-12);
  EXPECT_TRUE(k.anosov_flag);
}

TEST(Anosov, CriterionUnderDirectionRefinement) {
  const SurfaceModel m = bumpy_model();
  // Constant lambda: the criterion does not depend on the direction at all.
  const auto a = curvature_criterion(m, 0.4, product_grid(8, 6)), b = curvature_criterion(m, 0.4, product_grid(8, 24));
  EXPECT_NEAR(a.sup_value, b.sup_value, 1e-12);
  // lambda(x, y): values at the states the grids share are identical, and
  // the refined supremum can only grow since H(lambda) depends on theta.
  const Field lam = Field::parse("0.3*sin(2*pi*x)");
  const Field D = derived_curvatures(m, lam).anosovD;
  const auto coarse = product_grid(8, 6), fine = product_grid(8, 24);
  for (std::size_t i = 0; i < coarse.size(); ++i) EXPECT_NEAR(D(coarse[i]), D(fine[4 * i]), 1e-12);
  EXPECT_GE(curvature_criterion(m, lam, fine).sup_value, curvature_criterion(m, lam, coarse).sup_value);
}

TEST(Anosov, RateFormAndSylvester) {
  EXPECT_TRUE(positive_definite(rate_form(-1.0, 0.0)));
  EXPECT_FALSE(positive_definite(rate_form(0.0, 0.0)));
  EXPECT_FALSE(positive_definite(rate_form(-0.2, 1.0)));  // D = 0.05 > 0
  EXPECT_TRUE(positive_definite(rate_form(-0.3, 1.0)));   // D = -0.05 < 0

  const ThermostatSpec s{bumpy_model(), Field::parse("0.3*sin(2*pi*x) + 0.2*cos(theta)")};
  const SylvesterReport r = sylvester_equivalence(s, validation_grid(Domain::torus(), 10));
  EXPECT_GT(r.checked, 0u);
  EXPECT_EQ(r.mismatches, 0u);
  const ThermostatSpec h{hyperbolic_model(), 0.0};
  const SylvesterReport q = sylvester_equivalence(h, validation_grid(h.model.domain, 6));
  EXPECT_EQ(q.mismatches, 0u);
  EXPECT_EQ(q.skipped, 0u);
}

TEST(Anosov, QuadraticFormRate) {
  // Flat, lambda = 0, (y, z) = (1, 0): Q = y z has rate z^2 = 0 initially.
  const ThermostatSpec f{flat_model(), 0.0};
  JacobiOptions o;
  o.sample_dt = 1e-3;
  const auto ft = quadratic_form_rate(f, integrate_jacobi(f, {0.1, 0.2, 0.3}, {0.0, 1.0, 0.0}, 1.0, o));
  EXPECT_NEAR(ft.samples.front().rate, 0.0, 1e-15);
  EXPECT_FALSE(ft.samples.front().positive_definite);

  const ThermostatSpec h{hyperbolic_model(), 0.0};
  const auto ht = quadratic_form_rate(h, integrate_jacobi(h, {0.0, 1.0, pi / 2}, {0.0, 0.3, 1.0}, 0.6, o));
  for (const auto& q : ht.samples) {
    EXPECT_NEAR(q.rate, q.y * q.y + q.z * q.z, 1e-10);
    EXPECT_TRUE(q.positive_definite);
  }
  EXPECT_LT(ht.max_fd_deviation, 1e-5);

  const ThermostatSpec b{bumpy_model(), Field::parse("0.3*sin(2*pi*x) + 0.2*cos(theta)")};
  o.sample_dt = 5e-4;
  const auto bt = quadratic_form_rate(b, integrate_jacobi(b, {0.3, 0.4, 1.0}, {0.2, 0.5, 1.0}, 1.0, o));
  EXPECT_LT(bt.max_fd_deviation, 1e-5);
}

TEST(Anosov, FiniteTimeLyapunovExponent) {
  const ThermostatSpec h{hyperbolic_model(), 0.0};
  JacobiOptions o;
  o.sample_dt = 0.5;
  // y = sinh t, z = cosh t, so |y| + |z| = e^t exactly.
  EXPECT_NEAR(finite_time_lyapunov(integrate_jacobi(h, {0.0, 1.0, pi / 2}, {0.0, 0.0, 1.0}, 5.0, o)), 1.0, 1e-8);
  const ThermostatSpec f{flat_model(), 0.0};
  EXPECT_LT(finite_time_lyapunov(integrate_jacobi(f, {0, 0, 0}, {0.0, 0.0, 1.0}, 100.0, o)), 0.05);
}

TEST(Anosov, CohomologyRoundTrips) {
  const ThermostatSpec s{bumpy_model(), Field::parse("0.2*cos(theta)")};
  const GridGenerator A(s, 12);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> k(0, 3);
  for (int trial = 0; trial < 10; ++trial) {
    // Random low-frequency grid functions; white noise sits too close to
    // the discrete kernel for the iteration cap.
    std::vector<double> w(A.size(), 0.0), rhs(A.size());
    for (int mode = 0; mode < 4; ++mode) {
      const double c = g(rng), kx = k(rng), ky = k(rng), kt = k(rng), ph = g(rng);
      for (std::size_t i = 0; i < w.size(); ++i) {
        const SMPoint& p = A.nodes()[i];
        w[i] += c * std::sin(2 * pi * (kx * p.x + ky * p.y) + kt * p.theta + ph);
      }
    }
    A.apply(w, rhs);
    const CohomologyResult r = solve_cohomological(A, rhs);
    EXPECT_LT(r.residual, 1e-8) << trial;
  }
}

TEST(Anosov, CohomologyExamples) {
  const ThermostatSpec f{flat_model(), 0.0};
  // theta = d(sin(2 pi x)) = 2 pi cos(2 pi x) dx is exact.
  const CohomologyResult exact = cohomological_residual(f, 0.0, Field::parse("2*pi*cos(2*pi*x)"), 0.0, 12);
  EXPECT_LT(exact.residual, 1e-8);
  // dx is closed but integrates to 1 over the closed orbit along x.
  const CohomologyResult closed = cohomological_residual(f, 0.0, 1.0, 0.0, 12);
  EXPECT_GE(closed.residual, 0.1);

  SolverOptions capped;
  capped.max_iterations = 2;
  EXPECT_THROW(cohomological_residual(f, Field::parse("sin(2*pi*x)"), 0.0, 0.0, 12, capped), SolverDiverged);
  EXPECT_THROW(cohomological_residual(f, 0.0, 1.0, 0.0, 3), ConfigError);
  const ThermostatSpec d{build_conformal_model(ModelKind::conformal_disk, Expression(0.0)), 0.0};
  EXPECT_THROW(cohomological_residual(d, 0.0, 1.0, 0.0, 8), DomainError);
}
