#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "schauder/elliptic_solver.hpp"

using namespace schauder;

namespace {

GridPtr unit_square(int N) { return Grid::build(DomainSpec::rectangle({1.0, 1.0}), N); }

GridFunction constant(const GridPtr& g, double v) {
  return GridFunction::sample(g, [v](const Point&) { return v; });
}

double entry(const SparseMatrix& A, std::size_t r, std::size_t c) {
  return A.coeff(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

// Third documented homotopy problem: d11 + 2 d22 - x1^2.
EllipticOperator documented_operator(const GridPtr& g) {
  return EllipticOperator::from_functions(
      g, [](const Point&) { Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2); A(0, 0) = 1; A(1, 1) = 2; return A; },
      nullptr, [](const Point& x) { return -x[0] * x[0]; });
}

}  // namespace

TEST(Assemble, FivePointLaplacian) {
  auto g = unit_square(9);
  auto sys = assemble_operator(EllipticOperator::laplacian(g));
  const double h = g->spacing(0);
  std::size_t idx = g->linear_index({4, 4});
  EXPECT_NEAR(entry(sys.A, idx, idx), -4 / (h * h), 1e-9);
  EXPECT_NEAR(entry(sys.A, idx, *g->neighbor(idx, 0, 1)), 1 / (h * h), 1e-9);
  EXPECT_NEAR(entry(sys.A, idx, *g->neighbor(idx, 1, -1)), 1 / (h * h), 1e-9);
  EXPECT_EQ(entry(sys.A, 0, 0), 1.0);  // boundary identity row
  EXPECT_TRUE(sys.m_matrix);
  EXPECT_FALSE(sys.cross_terms);
}

TEST(Assemble, ZerothOrderShift) {
  auto g = unit_square(9);
  auto L = EllipticOperator::from_functions(g, nullptr, nullptr, [](const Point&) { return -1.0; });
  auto sys = assemble_operator(L);
  const double h = g->spacing(0);
  std::size_t idx = g->linear_index({3, 5});
  EXPECT_NEAR(entry(sys.A, idx, idx), -4 / (h * h) - 1, 1e-9);
  EXPECT_TRUE(sys.m_matrix);
}

TEST(Assemble, DriftUpwindKeepsMonotoneSigns) {
  auto g = unit_square(9);
  auto L = EllipticOperator::from_functions(
      g, nullptr, [](const Point&) { Eigen::VectorXd b(2); b << 10, 0; return b; }, nullptr);
  auto sys = assemble_operator(L);
  const double h = g->spacing(0);
  std::size_t idx = g->linear_index({4, 4});
  // Oracle: sign check of every assembled row entry.
  EXPECT_NEAR(entry(sys.A, idx, *g->neighbor(idx, 0, 1)), 1 / (h * h) + 10 / h, 1e-9);
  EXPECT_NEAR(entry(sys.A, idx, *g->neighbor(idx, 0, -1)), 1 / (h * h), 1e-9);
  EXPECT_NEAR(entry(sys.A, idx, idx), -4 / (h * h) - 10 / h, 1e-9);
  for (std::size_t r = 0; r < g->size(); ++r) {
    if (!g->interior(r)) continue;
    for (std::size_t c = 0; c < g->size(); ++c) {
      if (c == r) continue;
      EXPECT_GE(entry(sys.A, r, c), 0.0);
    }
  }
  EXPECT_TRUE(sys.m_matrix);
}

TEST(Assemble, CrossTermsClearFlagAndEllipticityIsChecked) {
  auto g = unit_square(9);
  auto L = EllipticOperator::from_functions(
      g, [](const Point&) { Eigen::MatrixXd A(2, 2); A << 2, 0.5, 0.5, 1; return A; }, nullptr, nullptr);
  auto sys = assemble_operator(L);
  EXPECT_TRUE(sys.cross_terms);
  EXPECT_FALSE(sys.m_matrix);
  auto bad = EllipticOperator::from_functions(
      g, [](const Point&) { Eigen::MatrixXd A(2, 2); A << 1, 2, 2, 1; return A; }, nullptr, nullptr);
  EXPECT_THROW(assemble_operator(bad), DomainError);
}

TEST(SolveDirichlet, HarmonicLinearIsExact) {
  auto g = unit_square(17);
  auto gx = GridFunction::sample(g, [](const Point& x) { return x[0]; });
  auto res = solve_dirichlet(EllipticOperator::laplacian(g), GridFunction::zeros(g), gx);
  EXPECT_LT((res.u.values - gx.values).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(res.stats.residual, 1e-8);
}

TEST(SolveDirichlet, BallRadialOracle) {
  auto g = Grid::build(DomainSpec::ball(3, 1.0), 25);
  auto res = solve_dirichlet(EllipticOperator::laplacian(g), constant(g, 1.0), GridFunction::zeros(g));
  // Oracle u = (r^2 - 1)/6; boundary data imposed at cell centres within h of
  // the sphere shifts the solution by O(h).
  double err = 0;
  for (std::size_t idx : g->active_nodes()) {
    double r = g->point(idx).norm();
    err = std::max(err, std::abs(res.u[idx] - (r * r - 1) / 6));
  }
  EXPECT_LT(err, 0.05);
  EXPECT_NEAR(res.u[g->nearest_node(Point::Zero(3))], -1.0 / 6, 0.03);
}

TEST(SolveDirichlet, ConstantSolutionOfShiftedOperator) {
  auto g = unit_square(13);
  auto L = EllipticOperator::from_functions(g, nullptr, nullptr, [](const Point&) { return -1.0; });
  auto res = solve_dirichlet(L, constant(g, -1.0), constant(g, 1.0));
  EXPECT_LT((res.u.values.array() - 1.0).abs().maxCoeff(), 1e-12);
  ASSERT_TRUE(res.stats.max_principle_constant);
}

TEST(SolveDirichlet, SingularSystemIsReported) {
  // Discrete Dirichlet eigenvalue of Laplace_h for sin(pi x) sin(pi y).
  auto g = unit_square(11);
  const double h = g->spacing(0);
  double lam = 2 * (4 / (h * h)) * std::pow(std::sin(M_PI * h / 2), 2);
  auto L = EllipticOperator::from_functions(g, nullptr, nullptr, [lam](const Point&) { return lam; });
  try {
    solve_dirichlet(L, constant(g, 1.0), GridFunction::zeros(g));
    FAIL() << "expected a singular system";
  } catch (const SolveError& e) {
    EXPECT_EQ(e.kind(), "eigenvalue crossing");
  }
}

TEST(SolveDirichlet, MeshConvergenceRates) {
  auto exact = [](const Point& x) { return std::sin(M_PI * x[0]) * std::exp(x[1]); };
  auto rhs_plain = [](const Point& x) { return (1 - M_PI * M_PI) * std::sin(M_PI * x[0]) * std::exp(x[1]); };
  auto rhs_drift = [](const Point& x) {
    return (1 - M_PI * M_PI) * std::sin(M_PI * x[0]) * std::exp(x[1]) + 3 * M_PI * std::cos(M_PI * x[0]) * std::exp(x[1]);
  };
  std::vector<double> e_plain, e_drift;
  for (int N : {17, 33, 65}) {
    auto g = unit_square(N);
    auto gb = GridFunction::sample(g, exact);
    auto L0 = EllipticOperator::laplacian(g);
    auto L1 = EllipticOperator::from_functions(g, nullptr, [](const Point&) { Eigen::VectorXd b(2); b << 3, 0; return b; }, nullptr);
    auto u0 = solve_dirichlet(L0, GridFunction::sample(g, rhs_plain), gb).u;
    auto u1 = solve_dirichlet(L1, GridFunction::sample(g, rhs_drift), gb).u;
    e_plain.push_back((u0.values - gb.values).cwiseAbs().maxCoeff());
    e_drift.push_back((u1.values - gb.values).cwiseAbs().maxCoeff());
  }
  for (std::size_t k = 1; k < 3; ++k) {
    EXPECT_NEAR(std::log2(e_plain[k - 1] / e_plain[k]), 2.0, 0.3);
    EXPECT_NEAR(std::log2(e_drift[k - 1] / e_drift[k]), 1.0, 0.3);
  }
}

TEST(MaximumPrinciple, SignAndComparison) {
  auto g = unit_square(15);
  auto L = EllipticOperator::from_functions(
      g, [](const Point& x) { Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2); A(0, 0) += x[1]; return A; },
      [](const Point& x) { Eigen::VectorXd b(2); b << std::sin(5 * x[1]) * 4, -2; return b; },
      [](const Point& x) { return -x[0]; });
  auto f1 = GridFunction::sample(g, [](const Point& x) { return x[0] * x[1]; });
  auto f2 = GridFunction::sample(g, [](const Point& x) { return x[0] * x[1] + 0.5; });
  auto gb = GridFunction::sample(g, [](const Point& x) { return -x[0]; });
  auto u1 = solve_dirichlet(L, f1, gb).u, u2 = solve_dirichlet(L, f2, gb).u;
  EXPECT_LE(u1.values.maxCoeff(), 1e-11);
  EXPECT_GE((u1.values - u2.values).minCoeff(), -1e-11);
}

TEST(Continuity, LaplacianTakesOneStep) {
  auto g = unit_square(17);
  auto f = GridFunction::sample(g, [](const Point& x) { return x[0] - x[1]; });
  auto L = EllipticOperator::laplacian(g);
  auto hom = continuity_method(L, f, GridFunction::zeros(g));
  auto dir = solve_dirichlet(L, f, GridFunction::zeros(g));
  EXPECT_EQ(hom.stats.homotopy_steps, 1);
  EXPECT_LT((hom.u.values - dir.u.values).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Continuity, ConstantSolutionAlongPath) {
  auto g = unit_square(17);
  auto L = EllipticOperator::from_functions(g, nullptr, nullptr, [](const Point&) { return -1.0; });
  auto hom = continuity_method(L, constant(g, -1.0), constant(g, 1.0));
  EXPECT_LT((hom.u.values.array() - 1.0).abs().maxCoeff(), 1e-10);
}

TEST(Continuity, DocumentedProblemMatchesDirectSolve) {
  auto g = unit_square(33);
  auto L = documented_operator(g);
  auto f = GridFunction::sample(g, [](const Point& x) { return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); });
  auto dir = solve_dirichlet(L, f, GridFunction::zeros(g));
  std::vector<Eigen::VectorXd> finals;
  for (double delta : {0.5, 0.25, 0.1}) {
    ContinuityOptions opt;
    opt.step = delta;
    auto hom = continuity_method(L, f, GridFunction::zeros(g), opt);
    EXPECT_LE((hom.u.values - dir.u.values).cwiseAbs().maxCoeff(), 1e-8) << delta;
    for (double cf : hom.stats.contraction_factors) EXPECT_LT(cf, 1.0);
    finals.push_back(hom.u.values);
  }
  EXPECT_LE((finals[0] - finals[2]).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Continuity, HalvesStepWhenContractionFails) {
  auto g = unit_square(17);
  // Strong anisotropy: the full step from t = 0 does not contract.
  auto L = EllipticOperator::from_functions(
      g, [](const Point&) { Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2); A(1, 1) = 40; return A; }, nullptr, nullptr);
  auto f = constant(g, 1.0);
  ContinuityOptions opt;
  opt.step = 1.0;
  auto hom = continuity_method(L, f, GridFunction::zeros(g), opt);
  EXPECT_GT(hom.stats.halvings, 0);
  auto dir = solve_dirichlet(L, f, GridFunction::zeros(g));
  EXPECT_LE((hom.u.values - dir.u.values).cwiseAbs().maxCoeff(), 1e-8);
  opt.step_min = 0.6;
  EXPECT_THROW(continuity_method(L, f, GridFunction::zeros(g), opt), SolveError);
}

TEST(Continuity, RejectsPositiveZerothOrder) {
  auto g = unit_square(9);
  auto L = EllipticOperator::from_functions(g, nullptr, nullptr, [](const Point&) { return 1.0; });
  EXPECT_THROW(continuity_method(L, constant(g, 1.0), GridFunction::zeros(g)), DomainError);
}

TEST(EstimateProbes, PlugInExamples) {
  auto g = Grid::build(DomainSpec::rectangle({4.0, 4.0}, {-2.0, -2.0}), 41);
  auto L = EllipticOperator::laplacian(g);
  auto xn = GridFunction::sample(g, [](const Point& x) { return x[1]; });
  auto rep = estimate_probes(xn, GridFunction::zeros(g), L, Point::Zero(2), 1.0);
  EXPECT_NEAR(rep.c1_lhs, 1.0, 1e-12);
  EXPECT_NEAR(rep.c1_rhs, 2.0, 1e-12);
  EXPECT_TRUE(rep.c1_holds);
  auto quad = GridFunction::sample(g, [](const Point& x) { return x[1] * x[1] / 2; });
  auto rq = estimate_probes(quad, constant(g, 1.0), L, Point::Zero(2), 1.0);
  EXPECT_NEAR(rq.c1_lhs, 0.0, 1e-12);
  EXPECT_NEAR(rq.c1_margin, rq.c1_rhs, 1e-12);
  EXPECT_THROW(estimate_probes(xn, GridFunction::zeros(g), L, Point::Zero(2), 2.5), DomainError);
}

TEST(EstimateProbes, WeightedGradientIsScaleFree) {
  auto g = Grid::build(DomainSpec::ball(2, 1.0), 81);
  auto L = EllipticOperator::laplacian(g);
  auto f = constant(g, 1.0);
  auto u = solve_dirichlet(L, f, GridFunction::zeros(g)).u;
  EstimateProbeOptions opt;
  opt.d_levels = {0.1, 0.05, 0.025};
  auto rep = estimate_probes(u, f, L, Point::Zero(2), 0.3, opt);
  // Oracle: |grad u| = r/2 <= 1/2, so d |grad u| <= d/2 on each level band.
  for (std::size_t k = 0; k < opt.d_levels.size(); ++k)
    EXPECT_LE(rep.d_grad_by_level[k], 2 * opt.d_levels[k] / 2 * 1.3);
  EXPECT_TRUE(rep.weighted_holds);
  ASSERT_TRUE(rep.mp_holds);
  EXPECT_TRUE(*rep.mp_holds);
  EXPECT_TRUE(rep.c1_holds);
}
