#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "thermolab/xray.hpp"

using namespace thermolab;

namespace {

constexpr double pi = std::numbers::pi;

ThermostatSpec disk(const char* phi, double lambda) {
  return {build_conformal_model(ModelKind::conformal_disk, Expression::parse(phi)), Field(lambda)};
}

RayFan fan(int n) {
  RayFan f;
  f.n_boundary = n;
  f.n_angles = n;
  return f;
}

}  // namespace

TEST(XRay, ChordLengths) {
  const ThermostatSpec s = disk("0", 0.0);
  const PairField one{1.0, 0.0, 0.0};
  const RayRecord r = transform_pair(s, one, {1.0, 0.0, pi});
  EXPECT_NEAR(r.length, 2.0, 1e-9);
  EXPECT_NEAR(r.value, 2.0, 1e-9);
  EXPECT_NEAR(r.entry_angle, 0.0, 1e-12);
  for (double b : {-1.2, -0.5, 0.3, 1.0}) {
    const RayRecord q = transform_pair(s, one, {1.0, 0.0, pi + b});
    EXPECT_NEAR(q.value, 2 * std::cos(b), 1e-9);
    EXPECT_NEAR(q.entry_angle, b, 1e-9);
  }
  // Interior starts integrate over the whole chord through the point.
  EXPECT_NEAR(transform_pair(s, one, {0.0, 0.5, 0.0}).value, 2 * std::sqrt(0.75), 1e-9);
}

TEST(XRay, ArcLengthUnderAConstantThermostat) {
  const double c = 0.5;
  const ThermostatSpec s = disk("0", c);
  // Circle of radius 2 from (1,0) heading in direction pi + b: the chord
  // to the exit subtends an arc of 2 asin(chord / 4) on that circle.
  for (double b : {-0.8, 0.0, 0.6}) {
    const RayRecord r = transform_pair(s, {1.0, 0.0, 0.0}, {1.0, 0.0, pi + b});
    const double chord = std::hypot(r.exit.x - 1.0, r.exit.y);
    EXPECT_NEAR(r.value, 2.0 * 2.0 * std::asin(chord / 4.0), 1e-8);
    EXPECT_NEAR(r.exit.x * r.exit.x + r.exit.y * r.exit.y, 1.0, 1e-9);
  }
}

TEST(XRay, ExactFormsIntegrateToEndpointDifferences) {
  for (double c : {0.0, 0.4}) {
    const ThermostatSpec s{build_conformal_model(ModelKind::conformal_disk, Expression::parse("0.1*x*y")), Field(c)};
    // f = x^2 y + exp(x); df = (2 x y + exp(x)) dx + x^2 dy.
    const PairField df{0.0, Field::parse("2*x*y + exp(x)"), Field::parse("x^2")};
    const auto f = [](double x, double y) { return x * x * y + std::exp(x); };
    const auto entries = fan_entries(fan(10));
    ASSERT_EQ(entries.size(), 100u);
    for (const SMPoint& e : entries) {
      const RayRecord r = transform_pair(s, df, e);
      EXPECT_NEAR(r.value, f(r.exit.x, r.exit.y) - f(r.entry.x, r.entry.y), 1e-8);
    }
  }
}

TEST(XRay, TransformIsAdditive) {
  const ThermostatSpec s = disk("0.1*x*y", 0.3);
  const PairField a{Field::parse("1 + x^2"), Field::parse("y"), 0.0}, b{Field::parse("sin(y)"), 0.0, Field::parse("x*y")};
  const PairField ab{a.phi + b.phi, a.w_x + b.w_x, a.w_y + b.w_y};
  for (const SMPoint& e : fan_entries(fan(5))) {
    EXPECT_NEAR(transform_pair(s, ab, e).value, transform_pair(s, a, e).value + transform_pair(s, b, e).value, 1e-10);
  }
}

TEST(XRay, ChiIsAPrimitiveAlongTheFlow) {
  const ThermostatSpec s = disk("0.1*x*y", 0.3);
  const Field one(1.0);
  const SMPoint p{0.2, -0.1, 0.7};
  EXPECT_NEAR(chi_field(s, one, p).value, exit_time(s, p, -1), 1e-9);
  const Field q = pair_integrand(s.model, {Field::parse("1 + x^2"), Field::parse("y"), 0.0});
  const double h = 1e-4;
  const double fd = (chi_field(s, q, flow_state(s, p, h)).value - chi_field(s, q, flow_state(s, p, -h)).value) / (2 * h);
  EXPECT_NEAR(fd, q(p), 1e-6);
  EXPECT_LT(chi_field(s, q, p).tail_difference, 1e-7);
  EXPECT_EQ(chi_field(s, q, {1.5, 0.0, 0.0}).value, 0.0);
}

TEST(XRay, BoundaryCorrector) {
  const PairField dx{0.0, 1.0, 0.0};
  const Field psi = boundary_corrector(dx);
  const ThermostatSpec s = disk("0", 0.0);
  const Field q = corrected_integrand(s.model, dx, psi);
  const double h = 1e-7;
  for (int k = 0; k < 64; ++k) {
    const double a = 2 * pi * k / 64;
    const double bx = std::cos(a), by = std::sin(a);
    EXPECT_LT(std::abs(psi({bx, by, 0.0})), 1e-12);
    // Inward normal derivative equals w(nu) = -bx.
    const double dn = psi({(1 - h) * bx, (1 - h) * by, 0.0}) / h;
    EXPECT_NEAR(dn, -bx, 1e-6);
    // The corrected form has no normal component on the boundary.
    EXPECT_NEAR(q({0.9999999 * bx, 0.9999999 * by, a + pi}), 0.0, 1e-5);
  }
  EXPECT_EQ(psi({0.0, 0.0, 0.0}), 0.0);
  EXPECT_EQ(psi({0.5, 0.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(smooth_cutoff(0.05), 1.0);
  EXPECT_DOUBLE_EQ(smooth_cutoff(0.25), 0.0);
  EXPECT_NEAR(smooth_cutoff(0.15), 0.5, 1e-12);
}

TEST(XRay, PolynomialBasisIsOrthonormal) {
  const PolynomialBasis b(4);
  EXPECT_EQ(b.size(), 15);
  const Eigen::VectorXd c = b.project([](double x, double y) { return 1.0 + x * y - 2 * y * y * y; });
  for (double x : {0.1, -0.4}) EXPECT_NEAR(c.dot(b.values(x, 0.3)), 1.0 + x * 0.3 - 2 * 0.027, 1e-12);
  // Unit disk: the constant function has norm sqrt(pi).
  const Eigen::VectorXd one = b.project([](double, double) { return 1.0; });
  EXPECT_NEAR(one.norm(), std::sqrt(pi), 1e-12);
}

TEST(XRay, DiscreteOperator) {
  const ThermostatSpec s = disk("0.1*x*y", 0.3);
  const auto entries = fan_entries(fan(12));
  const DiscreteXRayOperator op = assemble_discrete_operator(s, entries, 4);
  EXPECT_EQ(op.dropped, 0u);
  EXPECT_EQ(op.matrix.cols(), 45);
  EXPECT_EQ(op.matrix.rows(), static_cast<Eigen::Index>(entries.size()));
  // Polynomial pairs of degree <= 4 are represented exactly.
  const PairField pair{Field::parse("1 + x^2 - y^3"), Field::parse("x*y"), Field::parse("1 - x")};
  const Eigen::VectorXd pred = op.matrix * op.discretize(pair);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    EXPECT_NEAR(pred[static_cast<Eigen::Index>(i)], transform_pair(s, pair, entries[i]).value, 1e-9);
  }
  EXPECT_LT((op.matrix * op.discretize({0.0, 0.0, 0.0})).norm(), 1e-15);

  const Eigen::MatrixXd G = gauge_basis(op.basis);
  EXPECT_EQ(G.cols(), 10);
  EXPECT_LT((op.matrix * G).norm(), 1e-9 * op.matrix.norm() * G.norm());
}

TEST(XRay, KernelMatchesTheGaugeAndSurvivesRefinement) {
  const ThermostatSpec s = disk("0.1*x*y", 0.3);
  for (int n : {12, 16}) {
    const DiscreteXRayOperator op = assemble_discrete_operator(s, fan_entries(fan(n)), 4);
    const KernelReport k = analyze_kernel(op, gauge_basis(op.basis));
    EXPECT_EQ(k.kernel_dimension, 10) << n;
    EXPECT_EQ(k.gauge_dimension, 10);
    EXPECT_GT(k.gap, 1e4);
    EXPECT_LT(k.max_principal_angle_deg, 1e-4);
  }
}

TEST(XRay, InversionRecoversTheFunctionAndTheCurl) {
  const ThermostatSpec s = disk("0", 0.5);
  const auto entries = fan_entries(fan(14));
  const DiscreteXRayOperator op = assemble_discrete_operator(s, entries, 4);
  const KernelReport k = analyze_kernel(op, gauge_basis(op.basis));
  const PairField pair{Field::parse("1 + x^2"), Field::parse("-y"), Field::parse("x + x*y")};
  Eigen::VectorXd data(static_cast<Eigen::Index>(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) data[static_cast<Eigen::Index>(i)] = transform_pair(s, pair, entries[i]).value;
  const PairEstimate est = reconstruct_pair(op, k, data);
  for (double x : {-0.5, 0.0, 0.3}) {
    for (double y : {-0.2, 0.4}) {
      EXPECT_NEAR(est.phi(x, y), 1 + x * x, 1e-7);
      EXPECT_NEAR(est.dw(x, y), 2.0 + y, 1e-7);
    }
  }
  EXPECT_THROW(reconstruct_pair(op, k, Eigen::VectorXd::Zero(3)), DomainError);
}

TEST(XRay, NarrowFanIsIllConditioned) {
  const ThermostatSpec s = disk("0", 0.0);
  RayFan f;
  f.n_boundary = 6;
  f.n_angles = 4;
  f.arc_length = 0.05;
  f.max_angle_deg = 2.0;
  const DiscreteXRayOperator op = assemble_discrete_operator(s, fan_entries(f), 8);
  EXPECT_THROW(analyze_kernel(op, gauge_basis(op.basis)), IllConditioned);
}

TEST(XRay, NeedsTheDisk) {
  const ThermostatSpec t{build_conformal_model(ModelKind::conformal_torus, Expression(0.0)), Field(0.0)};
  EXPECT_THROW(assemble_discrete_operator(t, fan_entries(fan(2)), 2), DomainError);
}
