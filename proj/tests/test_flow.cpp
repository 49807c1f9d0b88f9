#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "thermolab/flow.hpp"

using namespace thermolab;

namespace {

constexpr double pi = std::numbers::pi;

ThermostatSpec flat_disk(double lambda) {
  return {build_conformal_model(ModelKind::conformal_disk, Expression(0.0)), Field(lambda)};
}

ThermostatSpec bumpy_torus(const char* lambda) {
  return {build_conformal_model(ModelKind::conformal_torus, Expression::parse("0.1*sin(2*pi*x)*cos(2*pi*y)")),
          Field::parse(lambda)};
}

// Euclidean circle of curvature c through p in direction theta.
SMPoint arc(const SMPoint& p, double c, double t) {
  if (c == 0.0) return {p.x + t * std::cos(p.theta), p.y + t * std::sin(p.theta), p.theta};
  const double th = p.theta + c * t;
  return {p.x + (std::sin(th) - std::sin(p.theta)) / c, p.y - (std::cos(th) - std::cos(p.theta)) / c, th};
}

// First time the arc leaves the unit disk, by a fine scan and bisection.
double arc_exit(const SMPoint& p, double c) {
  const auto level = [&](double t) {
    const SMPoint q = arc(p, c, t);
    return 1.0 - q.x * q.x - q.y * q.y;
  };
  double a = 0.0;
  const double dt = 1e-3;
  while (level(a + dt) > 0.0) a += dt;
  double b = a + dt;
  for (int i = 0; i < 100; ++i) {
    const double m = 0.5 * (a + b);
    (level(m) > 0.0 ? a : b) = m;
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST(Flow, StraightSegmentExitsAtUnitTime) {
  const ThermostatSpec s = flat_disk(0.0);
  const Orbit o = integrate_orbit(s, {0.0, 0.0, 0.0}, 5.0);
  ASSERT_TRUE(o.exit_time.has_value());
  EXPECT_NEAR(*o.exit_time, 1.0, 1e-9);
  EXPECT_NEAR(o.back().p.x, 1.0, 1e-9);
  EXPECT_NEAR(o.back().p.y, 0.0, 1e-12);
  EXPECT_NEAR(exit_time(s, {0.0, 0.0, 0.0}), 1.0, 1e-9);
  EXPECT_NEAR(exit_time(s, {0.0, 0.0, 0.0}, -1), 1.0, 1e-9);
  for (std::size_t i = 1; i < o.samples.size(); ++i) EXPECT_GT(o.samples[i].t, o.samples[i - 1].t);
}

TEST(Flow, ConstantThermostatTracesCircles) {
  const double c = 0.8;
  const ThermostatSpec s{build_conformal_model(ModelKind::conformal_torus, Expression(0.0)), Field(c)};
  const SMPoint p0{0.2, 0.3, 0.7};
  const SMPoint p = flow_state(s, p0, 2 * pi / c);
  EXPECT_NEAR(p.x, p0.x, 1e-8);
  EXPECT_NEAR(p.y, p0.y, 1e-8);
  EXPECT_NEAR(p.theta, p0.theta + 2 * pi, 1e-8);
  const SMPoint h = flow_state(s, p0, 1.3), e = arc(p0, c, 1.3);
  EXPECT_NEAR(h.x, e.x, 1e-9);
  EXPECT_NEAR(h.y, e.y, 1e-9);
}

TEST(Flow, UnitSpeedIsPreserved) {
  const ThermostatSpec s = bumpy_torus("0.3*sin(2*pi*x) + 0.2*cos(theta)");
  const Orbit o = integrate_orbit(s, {0.1, 0.4, 1.0}, 20.0);
  EXPECT_FALSE(o.exit_time.has_value());
  EXPECT_LT(o.speed_defect, 1e-8);
}

TEST(Flow, ChordExitTimes) {
  const ThermostatSpec s = flat_disk(0.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.6, 0.6), a(0, 2 * pi);
  for (int i = 0; i < 20; ++i) {
    const SMPoint p{u(rng), u(rng), a(rng)};
    const double pv = p.x * std::cos(p.theta) + p.y * std::sin(p.theta);
    const double chord = -pv + std::sqrt(pv * pv + 1.0 - p.x * p.x - p.y * p.y);
    EXPECT_NEAR(exit_time(s, p), chord, 1e-8);
  }
}

TEST(Flow, ArcExitTimes) {
  const ThermostatSpec s = flat_disk(0.5);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.6, 0.6), a(0, 2 * pi);
  for (int i = 0; i < 20; ++i) {
    const SMPoint p{u(rng), u(rng), a(rng)};
    EXPECT_NEAR(exit_time(s, p), arc_exit(p, 0.5), 1e-8);
  }
}

TEST(Flow, ExpMapClosedForms) {
  for (double c : {0.0, 0.5, -1.2}) {
    const ThermostatSpec s{build_conformal_model(ModelKind::conformal_torus, Expression(0.0)), Field(c)};
    for (double t : {0.0, 0.4, 2.5}) {
      const BasePoint b = exp_map(s, 0.1, -0.2, 1.1, t);
      const SMPoint e = arc({0.1, -0.2, 1.1}, c, t);
      EXPECT_NEAR(b.x, e.x, 1e-9);
      EXPECT_NEAR(b.y, e.y, 1e-9);
    }
    EXPECT_THROW(exp_map(s, 0, 0, 0, -1.0), DomainError);
  }
}

TEST(Flow, Regularity) {
  const ThermostatSpec s = flat_disk(0.0);
  const RegularityReport r = scan_regularity(s, {0.0, 0.0, 0.3});
  EXPECT_TRUE(r.regular);
  EXPECT_NEAR(r.forward_transversality, 1.0, 1e-9);
  EXPECT_NEAR(r.backward_exit, 1.0, 1e-9);
  const RegularityReport q = scan_regularity(s, {0.5, 0.0, pi / 2});
  EXPECT_NEAR(q.forward_transversality, std::sqrt(0.75), 1e-8);
  EXPECT_NEAR(q.forward_exit, std::sqrt(0.75), 1e-8);

  const ThermostatSpec m = flat_disk(0.5);
  const auto states = disk_state_grid(5, 6, 8);
  int regular = 0;
  for (const SMPoint& p : states) regular += scan_regularity(m, p).regular ? 1 : 0;
  EXPECT_GE(regular, static_cast<int>(0.99 * states.size()));

  EXPECT_THROW(scan_regularity(flat_disk(5.0), {0.0, 0.0, 0.0}, 10.0), TrappedOrbit);
}

TEST(Flow, NontrappingScan) {
  const auto states = disk_state_grid(4, 4, 4);
  EXPECT_TRUE(nontrapping_scan(flat_disk(0.0), states, 3.0).trapped.empty());
  EXPECT_TRUE(nontrapping_scan(flat_disk(0.5), states, 20.0).trapped.empty());
  const NontrappingReport r = nontrapping_scan(flat_disk(5.0), states, 20.0);
  EXPECT_EQ(r.sampled, states.size());
  EXPECT_FALSE(r.trapped.empty());
  EXPECT_THROW(exit_time(flat_disk(5.0), {0.0, 0.0, 0.0}, 1, 10.0), TrappedOrbit);
}

TEST(Flow, DomainChecks) {
  EXPECT_THROW(integrate_orbit(flat_disk(0.0), {1.5, 0.0, 0.0}, 1.0), DomainError);
  const ThermostatSpec t = bumpy_torus("0");
  EXPECT_THROW(exit_time(t, {0.1, 0.1, 0.0}), DomainError);
}

TEST(Flow, GroupProperty) {
  const ThermostatSpec s = bumpy_torus("0.3*sin(2*pi*x) + 0.2*cos(theta)");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 10; ++i) {
    const SMPoint p{u(rng), u(rng), 2 * pi * u(rng)};
    const double a = 3 * u(rng), b = 3 * u(rng);
    const SMPoint direct = flow_state(s, p, a + b), composed = flow_state(s, flow_state(s, p, a), b);
    EXPECT_NEAR(direct.x, composed.x, 1e-8);
    EXPECT_NEAR(direct.y, composed.y, 1e-8);
    EXPECT_NEAR(direct.theta, composed.theta, 1e-8);
    const SMPoint back = flow_state(s, flow_state(s, p, a), -a);
    EXPECT_NEAR(back.x, p.x, 1e-8);
    EXPECT_NEAR(back.theta, p.theta, 1e-8);
  }
}

TEST(Flow, ReversingTheVelocityRetracesOnlyGeodesics) {
  const SMPoint p{0.1, 0.2, 0.5};
  const auto retrace_error = [&](const ThermostatSpec& s) {
    const SMPoint q = flow_state(s, p, 2.0);
    const SMPoint r = flow_state(s, {q.x, q.y, q.theta + pi}, 2.0);
    return std::hypot(r.x - p.x, r.y - p.y);
  };
  EXPECT_LT(retrace_error(bumpy_torus("0")), 1e-8);
  EXPECT_GT(retrace_error(bumpy_torus("0.4")), 0.1);
}
