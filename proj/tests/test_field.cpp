#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "thermolab/field.hpp"

using namespace thermolab;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST(Field, AnalyticAndFiniteDifferencePartialsAgree) {
  const Field f = Field::parse("sin(2*pi*x)*cos(2*pi*y) + x*sin(theta)");
  const Field g = f.as_finite_difference();
  EXPECT_TRUE(f.analytic());
  EXPECT_FALSE(g.analytic());
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 50; ++i) {
    const SMPoint p{u(rng), u(rng), 2 * pi * u(rng)};
    EXPECT_EQ(f(p), g(p));
    for (Var v : {Var::x, Var::y, Var::theta}) {
      // O(h^4) with h = 1e-4 leaves roundoff as the dominant error.
      EXPECT_NEAR(f.partial(v)(p), g.partial(v)(p), 1e-9);
      EXPECT_NEAR(f.partial_at(v, p), g.partial_at(v, p), 1e-9);
    }
  }
}

TEST(Field, FiniteDifferenceErrorIsFourthOrder) {
  const Field f = Field::parse("sin(3*x)");
  const SMPoint p{0.4, 0.0, 0.0};
  const double exact = 3 * std::cos(1.2);
  const double e1 = std::abs(f.as_finite_difference({1e-2}).partial_at(Var::x, p) - exact);
  const double e2 = std::abs(f.as_finite_difference({5e-3}).partial_at(Var::x, p) - exact);
  EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.2);
}

TEST(Field, OneSidedStencilStaysInsideTheDisk) {
  int calls_outside = 0;
  const Field f = Field::from_function(
      [&](const SMPoint& p) {
        if (p.x * p.x + p.y * p.y > 1.0 + 1e-15) ++calls_outside;
        return p.x * p.x * p.x;
      },
      {1e-3, true});
  const SMPoint p{0.9999, 0.0, 0.0};
  EXPECT_NEAR(f.partial_at(Var::x, p), 3 * 0.9999 * 0.9999, 1e-7);
  EXPECT_EQ(calls_outside, 0);
}

TEST(Field, ArithmeticKeepsAnalyticMode) {
  const Field a = Field::parse("x"), b = Field::parse("sin(theta)");
  const Field c = a * b + 2.0 - a / (b + 3.0);
  EXPECT_TRUE(c.analytic());
  const Field d = c * a.as_finite_difference();
  EXPECT_FALSE(d.analytic());
  const SMPoint p{0.3, 0.0, 1.1};
  EXPECT_NEAR(c(p), 0.3 * std::sin(1.1) + 2.0 - 0.3 / (std::sin(1.1) + 3.0), 1e-15);
  EXPECT_NEAR(d(p), c(p) * 0.3, 1e-15);
  EXPECT_NEAR((-a)(p), -0.3, 0.0);
  EXPECT_NEAR(a.squared()(p), 0.09, 1e-16);
}

TEST(Field, JetCollectsValueAndPartials) {
  const Field f = Field::parse("x^2*y + theta");
  const Jet j = f.jet({1.0, 2.0, 0.5});
  EXPECT_DOUBLE_EQ(j.value, 2.5);
  EXPECT_DOUBLE_EQ(j.dx, 4.0);
  EXPECT_DOUBLE_EQ(j.dy, 1.0);
  EXPECT_DOUBLE_EQ(j.dtheta, 1.0);
}

TEST(Field, AngleNormalization) {
  EXPECT_DOUBLE_EQ(normalize_angle(-0.5), 2 * pi - 0.5);
  EXPECT_DOUBLE_EQ(normalize_angle(2 * pi), 0.0);
  EXPECT_NEAR(normalize_angle(7 * pi), pi, 1e-14);
  EXPECT_GE(normalize_angle(-1e-18), 0.0);
  EXPECT_LT(normalize_angle(-1e-18), 2 * pi);
}
