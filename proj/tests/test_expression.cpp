#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "thermolab/expression.hpp"

using namespace thermolab;

namespace {

double eval(const std::string& s, double x = 0.0, double y = 0.0, double t = 0.0) {
  return parse_expression(s).evaluate(x, y, t);
}

}  // namespace

TEST(Expression, EvaluatesSimpleForms) {
  EXPECT_NEAR(eval("sin(2*pi*x)", 0.25), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(eval("2+3*4"), 14.0);
  EXPECT_DOUBLE_EQ(eval("(2+3)*4"), 20.0);
  EXPECT_DOUBLE_EQ(eval("10-4-3"), 3.0);
  EXPECT_DOUBLE_EQ(eval("12/3/2"), 2.0);
  EXPECT_DOUBLE_EQ(eval("x*y+theta", 2.0, 3.0, 0.5), 6.5);
  EXPECT_DOUBLE_EQ(eval("1.5e2"), 150.0);
}

TEST(Expression, PowerIsRightAssociativeAndBindsTighterThanUnaryMinus) {
  EXPECT_DOUBLE_EQ(eval("2^3^2"), 512.0);
  EXPECT_DOUBLE_EQ(eval("-2^2"), -4.0);
  EXPECT_DOUBLE_EQ(eval("2*-3"), -6.0);
  EXPECT_DOUBLE_EQ(eval("--3"), 3.0);
  EXPECT_DOUBLE_EQ(eval("2^-1"), 0.5);
}

TEST(Expression, AllFunctions) {
  const double v = 0.3;
  EXPECT_DOUBLE_EQ(eval("sin(x)", v), std::sin(v));
  EXPECT_DOUBLE_EQ(eval("cos(x)", v), std::cos(v));
  EXPECT_DOUBLE_EQ(eval("tan(x)", v), std::tan(v));
  EXPECT_DOUBLE_EQ(eval("exp(x)", v), std::exp(v));
  EXPECT_DOUBLE_EQ(eval("log(x)", v), std::log(v));
  EXPECT_DOUBLE_EQ(eval("sqrt(x)", v), std::sqrt(v));
  EXPECT_DOUBLE_EQ(eval("tanh(x)", v), std::tanh(v));
  EXPECT_DOUBLE_EQ(eval("abs(x)", -v), v);
  EXPECT_DOUBLE_EQ(eval("pi"), std::numbers::pi);
}

TEST(Expression, UnknownIdentifierReportsOffset) {
  try {
    parse_expression("siin(x)");
    FAIL() << "expected UnknownIdentifier";
  } catch (const UnknownIdentifier& e) {
    EXPECT_EQ(e.offset(), 0u);
    EXPECT_EQ(e.name(), "siin");
  }
  try {
    parse_expression("x + foo");
    FAIL() << "expected UnknownIdentifier";
  } catch (const UnknownIdentifier& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
}

TEST(Expression, ParseErrorsCarryOffsets) {
  try {
    parse_expression("1 + * 2");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
    EXPECT_EQ(e.error_class(), ErrorClass::config);
  }
  EXPECT_THROW(parse_expression(""), ParseError);
  EXPECT_THROW(parse_expression("   "), ParseError);
  EXPECT_THROW(parse_expression("(1+2"), ParseError);
  EXPECT_THROW(parse_expression("1+2)"), ParseError);
  EXPECT_THROW(parse_expression("sin x"), ParseError);
}

TEST(Expression, PrintReparseRoundTrip) {
  const std::vector<std::string> sources{
      "sin(2*pi*x)*cos(2*pi*y)",  "-x^2 + 3*y/(1+theta^2)", "exp(-x)*tanh(y) - log(2+sin(theta))",
      "abs(x-y)^1.5 + sqrt(1+x^2)", "2^abs(x)^0.5 - -y",          "tan(0.3*x)/(2+cos(y+theta))"};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  for (const auto& s : sources) {
    const Expression e = parse_expression(s);
    const Expression r = parse_expression(e.to_string());
    for (int i = 0; i < 100; ++i) {
      const double x = u(rng), y = u(rng), t = 3 * u(rng);
      const double a = e.evaluate(x, y, t), b = r.evaluate(x, y, t);
      EXPECT_LT(std::abs(a - b), 1e-15 * std::max(1.0, std::abs(a))) << s;
    }
  }
}

TEST(Expression, SymbolicDerivativeMatchesCentralDifferences) {
  const std::vector<std::string> sources{"sin(x*y)", "cos(x+2*theta)", "tan(0.5*y)", "exp(x*theta)",
                                         "log(2+x*y)", "sqrt(2+sin(x))", "tanh(x-y)", "abs(x+2)",
                                         "x^3*y^2",   "(1+x^2)^(y+2)",  "x/(2+y*theta)", "-(x*y)^2"};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  const double h = 1e-6;
  for (const auto& s : sources) {
    const Expression e = parse_expression(s);
    for (Var v : {Var::x, Var::y, Var::theta}) {
      const Expression d = e.derivative(v);
      for (int i = 0; i < 20; ++i) {
        double p[3] = {u(rng), u(rng), u(rng)};
        const int k = static_cast<int>(v);
        double q[3] = {p[0], p[1], p[2]}, r[3] = {p[0], p[1], p[2]};
        q[k] += h;
        r[k] -= h;
        const double fd = (e.evaluate(q[0], q[1], q[2]) - e.evaluate(r[0], r[1], r[2])) / (2 * h);
        const double an = d.evaluate(p[0], p[1], p[2]);
        EXPECT_LT(std::abs(fd - an), 1e-6 * std::max(1.0, std::abs(an))) << s;
      }
    }
  }
}

TEST(Expression, ConstantFoldingAndSimplification) {
  EXPECT_TRUE(parse_expression("2*3+1").is_constant(7.0));
  EXPECT_TRUE(parse_expression("x*0").is_constant(0.0));
  EXPECT_TRUE(parse_expression("sin(x)").derivative(Var::y).is_constant(0.0));
  EXPECT_TRUE(parse_expression("x + y").derivative(Var::theta).is_constant(0.0));
}

TEST(Expression, CompiledMatchesTreeEvaluation) {
  const Expression e = parse_expression("exp(-x^2)*sin(3*y+theta) + sqrt(1+y^2)/(2+cos(x))");
  const CompiledExpression c(e);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 200; ++i) {
    const double x = u(rng), y = u(rng), t = u(rng);
    EXPECT_EQ(c(x, y, t), e.evaluate(x, y, t));
  }
}
