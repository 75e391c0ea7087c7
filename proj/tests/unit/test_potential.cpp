#include <gtest/gtest.h>

#include <cmath>

#include "schauder/potential.hpp"

using namespace schauder;

namespace {

// Radial oracle for f = 1 on the unit ball in n = 3 (Laplace u = 1 inside,
// matched to -1/(3r) outside): u = r^2/6 - 1/2, grad u = x/3.
double oracle_u(double r) { return r <= 1 ? r * r / 6 - 0.5 : -1.0 / (3 * r); }

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

}  // namespace

TEST(Kernel, NormalisationAndSymmetry) {
  EXPECT_NEAR(unit_ball_volume(3), 4 * M_PI / 3, 1e-14);
  EXPECT_NEAR(unit_ball_volume(2), M_PI, 1e-14);
  EXPECT_NEAR(newton_kernel(3, 2.0), -1 / (8 * M_PI), 1e-15);
  Point P = pt({0.1, 0.2, -0.3}), Q = pt({-0.4, 0.5, 0.0});
  EXPECT_EQ(newton_kernel(3, (P - Q).norm()), newton_kernel(3, (Q - P).norm()));
  // Kernel derivatives against central differences of g.
  Eigen::VectorXd x = pt({0.3, -0.2, 0.5});
  auto G = newton_kernel_gradient(x);
  auto H = newton_kernel_hessian(x);
  const double e = 1e-5;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd d = Eigen::VectorXd::Unit(3, i) * e;
    EXPECT_NEAR(G[i], (newton_kernel(3, (x + d).norm()) - newton_kernel(3, (x - d).norm())) / (2 * e), 1e-8);
    Eigen::VectorXd dg = (newton_kernel_gradient(x + d) - newton_kernel_gradient(x - d)) / (2 * e);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(H(j, i), dg[j], 1e-6);
  }
  EXPECT_NEAR(H.trace(), 0.0, 1e-14);  // harmonic away from the pole
}

TEST(Kernel, HessianMeanValueOnSphere) {
  // Average of d_ij g over a sphere about the pole vanishes.
  auto sq = detail::sphere_quadrature(3, 64);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(3, 3);
  double area = 0;
  for (std::size_t k = 0; k < sq.nodes.size(); ++k) {
    acc += newton_kernel_hessian(0.7 * sq.nodes[k]) * sq.weights[k];
    area += sq.weights[k];
  }
  EXPECT_NEAR(area, 4 * M_PI, 1e-12);
  EXPECT_LT((acc / area).cwiseAbs().maxCoeff(), 2e-3 * newton_kernel_hessian(pt({0.7, 0, 0})).norm());
}

TEST(NewtonianPotential, RadialReductionHitsCentreValue) {
  auto one = [](double) { return 1.0; };
  EXPECT_NEAR(newtonian_potential_radial(3, one, 1.0, 0.0, 64), -0.5, 1e-3);
  EXPECT_NEAR(newtonian_potential_radial(3, one, 1.0, 2.0, 64), -1.0 / 6, 1e-4);  // midpoint on r^2
  EXPECT_NEAR(newtonian_potential_radial(3, one, 1.0, 0.5, 256), oracle_u(0.5), 1e-4);
}

TEST(NewtonianPotential, LatticeQuadratureAgainstOracle) {
  auto g = Grid::build(DomainSpec::ball(3, 1.0), 31);
  auto f = GridFunction::sample(g, [](const Point&) { return 1.0; });
  auto centre = newtonian_potential(f, pt({0, 0, 0}));
  EXPECT_FALSE(centre.exterior);
  EXPECT_NEAR(centre.value, -0.5, 2e-2);
  auto far = newtonian_potential(f, pt({2, 0, 0}));
  EXPECT_TRUE(far.exterior);
  // The discrete ball has the lattice's mass, not exactly 4 pi / 3.
  double mass = static_cast<double>(g->active_nodes().size()) * g->cell_volume();
  EXPECT_NEAR(far.value, -mass / (4 * M_PI) / 2, 2e-3);
  EXPECT_NEAR(far.value, -1.0 / 6, 5e-3);
  auto zero = GridFunction::zeros(g);
  EXPECT_EQ(newtonian_potential(zero, pt({0.2, 0.1, 0})).value, 0.0);
}

TEST(NewtonianPotential, Linearity) {
  auto g = Grid::build(DomainSpec::ball(3, 1.0), 15);
  auto a = GridFunction::sample(g, [](const Point& x) { return x[0] + 1; });
  auto b = GridFunction::sample(g, [](const Point& x) { return std::cos(x[1]); });
  GridFunction ab(g, 2 * a.values - 3 * b.values);
  Point P = pt({0.13, -0.2, 0.31});
  double lhs = newtonian_potential(ab, P).value;
  double rhs = 2 * newtonian_potential(a, P).value - 3 * newtonian_potential(b, P).value;
  EXPECT_NEAR(lhs, rhs, 1e-13);
}

TEST(NewtonianPotential, ExteriorHarmonicity) {
  auto g = Grid::build(DomainSpec::ball(3, 1.0), 15);
  auto f = GridFunction::sample(g, [](const Point& x) { return 1 + x[0] * x[1]; });
  Point P = pt({1.6, 0.3, -0.2});
  const double s = 0.05;
  double lap = -6 * newtonian_potential(f, P).value;
  for (int a = 0; a < 3; ++a)
    for (int sg : {-1, 1}) lap += newtonian_potential(f, P + sg * s * Eigen::VectorXd::Unit(3, a)).value;
  lap /= s * s;
  EXPECT_LT(std::abs(lap), 1e-3);
}

TEST(Wij, ConstantDensityAtCentre) {
  auto g = Grid::build(DomainSpec::ball(3, 1.0), 31);
  auto f = GridFunction::sample(g, [](const Point&) { return 1.0; });
  auto W = potential_hessian_wij(f, pt({0, 0, 0}));
  EXPECT_LT((W - Eigen::MatrixXd::Identity(3, 3) / 3).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_NEAR(W.trace(), 1.0, 5e-2);
}

TEST(Wij, TraceIsDensityForLinearDensity) {
  auto g = Grid::build(DomainSpec::ball(3, 1.0), 31);
  auto f = GridFunction::sample(g, [](const Point& x) { return x[0]; });
  auto W = potential_hessian_wij(f, pt({0, 0, 0}));
  EXPECT_NEAR(W.trace(), 0.0, 5e-2);
  // Oracle: discrete Laplacian of the potential itself on a small stencil.
  const double s = 0.1;
  double lap = -6 * newtonian_potential(f, pt({0, 0, 0})).value;
  for (int a = 0; a < 3; ++a)
    for (int sg : {-1, 1}) lap += newtonian_potential(f, sg * s * Eigen::VectorXd::Unit(3, a)).value;
  lap /= s * s;
  EXPECT_NEAR(W.trace(), lap, 5e-2);
}

TEST(Wij, SupportAwayFromPoleMatchesDirectDifferentiation) {
  auto g = Grid::build(DomainSpec::ball(3, 1.0), 21);
  auto f = GridFunction::sample(g, [](const Point& x) { return x[0] > 0.5 ? 1.0 : 0.0; });
  Point P = pt({-0.3, 0.1, 0.0});
  auto W = potential_hessian_wij(f, P);
  Eigen::MatrixXd direct = Eigen::MatrixXd::Zero(3, 3);
  for (std::size_t q : g->active_nodes())
    if (f[q] != 0) direct += newton_kernel_hessian(P - g->point(q)) * f[q] * g->cell_volume();
  EXPECT_LT((W - direct).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Wij, RejectsPointsNearBoundary) {
  auto g = Grid::build(DomainSpec::ball(3, 1.0), 15);
  auto f = GridFunction::sample(g, [](const Point&) { return 1.0; });
  EXPECT_THROW(potential_hessian_wij(f, pt({0.95, 0, 0})), DomainError);
}

TEST(InteriorProbe, FirstOrderConstantDensity) {
  auto rep = interior_estimate_probe([](const Point&) { return 1.0; }, 3, 0.5, 1.0, 21);
  ASSERT_TRUE(rep.first_order_ratio);
  // Oracle: sup_{B_1}(|u| + |grad u|) = 2/3 for f = 1_{B_1}.
  EXPECT_LE(*rep.first_order_ratio, 2.0);
  EXPECT_NEAR(rep.first_order_sup, 2.0 / 3, 0.1);
  ASSERT_TRUE(rep.c_emp);
  EXPECT_GT(*rep.c_emp, 0.0);
}

TEST(InteriorProbe, ZeroDensity) {
  auto rep = interior_estimate_probe([](const Point&) { return 0.0; }, 3, 0.5, 1.0, 15);
  EXPECT_FALSE(rep.c_emp);
  EXPECT_FALSE(rep.first_order_ratio);
  EXPECT_EQ(rep.sup_u, 0.0);
  EXPECT_EQ(rep.sup_hess_u, 0.0);
  EXPECT_FALSE(rep.to_json().contains("c_emp"));
}

TEST(InteriorProbe, ScaleRobustSqrtDensity) {
  std::vector<double> c;
  for (double R : {0.25, 0.5, 1.0}) {
    auto rep = interior_estimate_probe([](const Point& x) { return std::sqrt(x.norm()); }, 3, 0.5, R, 17);
    ASSERT_TRUE(rep.c_emp);
    c.push_back(*rep.c_emp);
  }
  double lo = *std::min_element(c.begin(), c.end()), hi = *std::max_element(c.begin(), c.end());
  EXPECT_LT(hi / lo, 4.0);
}

TEST(HarmonicDecay, LinearConstantAndSaddle) {
  auto g = Grid::build(DomainSpec::rectangle({2.0, 2.0}, {-1.0, -1.0}), 101);
  Point x0 = pt({0, 0});
  std::vector<double> radii{0.1, 0.2, 0.3, 0.4, 0.5};
  auto lin = GridFunction::sample(g, [](const Point& x) { return x[0]; });
  auto rl = harmonic_decay_probe(lin, x0, 0.8, radii);
  for (double r : rl.ratios) EXPECT_NEAR(r, 1.0, 0.15);
  auto c = GridFunction::sample(g, [](const Point&) { return 3.0; });
  auto rc = harmonic_decay_probe(c, x0, 0.8, radii);
  EXPECT_EQ(rc.max_ratio, 0.0);
  auto saddle = GridFunction::sample(g, [](const Point& x) { return x[0] * x[0] - x[1] * x[1]; });
  auto rs = harmonic_decay_probe(saddle, x0, 0.8, {0.1, 0.2, 0.4});
  EXPECT_TRUE(rs.passes);
  EXPECT_LE(rs.max_ratio, 10.0);
  auto bump = GridFunction::sample(g, [](const Point& x) { return x[0] * x[0]; });
  EXPECT_THROW(harmonic_decay_probe(bump, x0, 0.8, radii), DomainError);
}
