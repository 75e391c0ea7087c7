#include <gtest/gtest.h>

#include <cmath>

#include "schauder/core/expression.hpp"

using schauder::ConfigError;
using schauder::Expression;

TEST(Expression, Arithmetic) {
  auto e = Expression::parse("1 + 2*x - x^2/4", {"x"});
  EXPECT_DOUBLE_EQ(e({2.0}), 1 + 4 - 1);
  EXPECT_DOUBLE_EQ(Expression::parse("-2^2", {})({}), -4.0);
  EXPECT_DOUBLE_EQ(Expression::parse("2^3^2", {})({}), 512.0);  // right-associative
}

TEST(Expression, FunctionsAndPi) {
  auto e = Expression::parse("sin(pi*x1)*cos(x2) + exp(0) + sqrt(abs(-4))", {"x1", "x2"});
  EXPECT_NEAR(e({0.5, 0.0}), 1 + 1 + 2, 1e-15);
  EXPECT_NEAR(Expression::parse("cosh(x)^2 - sinh(x)^2", {"x"})({1.3}), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(Expression::parse("sign(x)", {"x"})({-3.0}), -1.0);
}

TEST(Expression, DerivativeMatchesCentralDifference) {
  const char* cases[] = {"u*(1-u)", "sin(u)^2", "exp(-u^2)", "log(1+u^2)", "sqrt(2+u)", "u^3 - 2*u"};
  for (const char* src : cases) {
    auto f = Expression::parse(src, {"u"});
    auto df = f.derivative("u");
    for (double x : {-0.7, 0.1, 0.9}) {
      double h = 1e-5;
      double fd = (f({x + h}) - f({x - h})) / (2 * h);
      EXPECT_NEAR(df({x}), fd, 1e-7) << src << " at " << x;
    }
  }
}

TEST(Expression, ConstantFolding) {
  auto f = Expression::parse("2*u + 3", {"u"});
  auto d = f.derivative("u");
  EXPECT_TRUE(d.is_constant());
  EXPECT_DOUBLE_EQ(d({0.0}), 2.0);
  EXPECT_FALSE(f.depends_on("v"));
  EXPECT_TRUE(f.depends_on("u"));
}

TEST(Expression, RejectsUnknownNames) {
  EXPECT_THROW(Expression::parse("tan(x)", {"x"}), ConfigError);
  EXPECT_THROW(Expression::parse("y + 1", {"x"}), ConfigError);
  EXPECT_THROW(Expression::parse("(x + 1", {"x"}), ConfigError);
  EXPECT_THROW(Expression::parse("x +", {"x"}), ConfigError);
}
