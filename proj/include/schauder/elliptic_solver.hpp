#pragma once

// Finite-difference Dirichlet problems L u = f in Omega, u = g on the
// boundary nodes, for L = a^{ij} d_ij + b^i d_i + c.
//
// Interior rows carry the stencil of L_h; boundary and exterior rows are
// identity rows. Second derivatives are central (4-corner stencil for mixed
// terms), drift terms are upwinded toward the side whose coefficient keeps
// every off-diagonal entry of L_h nonnegative.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <json.hpp>

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "schauder/geometry.hpp"

namespace schauder {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Coefficients sampled on the nodes of one grid: a is N x n*n (row-major
/// per node, symmetric), b is N x n, c has length N.
struct EllipticOperator {
  GridPtr grid;
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Eigen::VectorXd c;

  static EllipticOperator from_functions(GridPtr g, const std::function<Eigen::MatrixXd(const Point&)>& a_fn,
                                         const std::function<Eigen::VectorXd(const Point&)>& b_fn,
                                         const std::function<double(const Point&)>& c_fn) {
    const int n = g->dim();
    const auto N = static_cast<Eigen::Index>(g->size());
    EllipticOperator L{g, Eigen::MatrixXd::Zero(N, n * n), Eigen::MatrixXd::Zero(N, n), Eigen::VectorXd::Zero(N)};
    for (std::size_t idx : g->active_nodes()) {
      Point x = g->point(idx);
      auto r = static_cast<Eigen::Index>(idx);
      Eigen::MatrixXd A = a_fn ? a_fn(x) : Eigen::MatrixXd::Identity(n, n);
      if (A.rows() != n || A.cols() != n) throw DomainError("coefficient a must be n x n");
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) L.a(r, i * n + j) = 0.5 * (A(i, j) + A(j, i));
      if (b_fn) L.b.row(r) = b_fn(x).transpose();
      if (c_fn) L.c[r] = c_fn(x);
    }
    return L;
  }

  static EllipticOperator laplacian(GridPtr g) { return from_functions(std::move(g), nullptr, nullptr, nullptr); }

  /// t L + (1 - t) Laplace.
  EllipticOperator blend(double t) const {
    EllipticOperator D = laplacian(grid);
    return EllipticOperator{grid, t * a + (1 - t) * D.a, t * b, t * c};
  }

  Eigen::MatrixXd a_at(std::size_t idx) const {
    const int n = grid->dim();
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = a(static_cast<Eigen::Index>(idx), i * n + j);
    return A;
  }

  /// Smallest eigenvalue of a over the interior nodes; throws naming the
  /// first node where it is not strictly positive.
  double ellipticity_floor() const {
    double floor = std::numeric_limits<double>::infinity();
    for (std::size_t idx : grid->active_nodes()) {
      if (!grid->interior(idx)) continue;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a_at(idx), Eigen::EigenvaluesOnly);
      double lam = es.eigenvalues().minCoeff();
      if (!(lam > 0)) {
        std::ostringstream msg;
        msg << "ellipticity violated at node " << idx << " (x = " << grid->point(idx).transpose()
            << ", lambda_min = " << lam << ")";
        throw DomainError(msg.str());
      }
      floor = std::min(floor, lam);
    }
    return floor;
  }

  bool has_cross_terms() const {
    const int n = grid->dim();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && a.col(i * n + j).cwiseAbs().maxCoeff() > 0) return true;
    return false;
  }

  double max_c() const {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t idx : grid->active_nodes())
      if (grid->interior(idx)) m = std::max(m, c[static_cast<Eigen::Index>(idx)]);
    return m;
  }
};

struct AssembledSystem {
  SparseMatrix A;
  bool m_matrix = false;     ///< -L_h rows: positive diagonal, nonpositive off-diagonals, row sums >= 0
  bool cross_terms = false;
  double lambda_min = 0.0;
};

inline AssembledSystem assemble_operator(const EllipticOperator& L) {
  const Grid& g = *L.grid;
  const int n = g.dim();
  AssembledSystem sys;
  sys.lambda_min = L.ellipticity_floor();
  sys.cross_terms = L.has_cross_terms();
  std::vector<Eigen::Triplet<double>> trip;
  bool mono = !sys.cross_terms;
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    const auto row = static_cast<int>(idx);
    if (!g.interior(idx)) {
      trip.emplace_back(row, row, 1.0);
      continue;
    }
    const auto r = static_cast<Eigen::Index>(idx);
    std::vector<std::pair<int, double>> entries;
    double diag = L.c[r];
    for (int i = 0; i < n; ++i) {
      double h = g.spacing(i);
      double aii = L.a(r, i * n + i);
      auto p = *g.neighbor(idx, i, 1), m = *g.neighbor(idx, i, -1);
      entries.emplace_back(static_cast<int>(p), aii / (h * h));
      entries.emplace_back(static_cast<int>(m), aii / (h * h));
      diag -= 2 * aii / (h * h);
      double bi = L.b(r, i);
      if (bi > 0) {
        entries.emplace_back(static_cast<int>(p), bi / h);
        diag -= bi / h;
      } else if (bi < 0) {
        entries.emplace_back(static_cast<int>(m), -bi / h);
        diag += bi / h;
      }
      for (int j = i + 1; j < n; ++j) {
        double aij = L.a(r, i * n + j);
        if (aij == 0) continue;
        double coef = 2 * aij / (4 * h * g.spacing(j));
        for (int si : {-1, 1})
          for (int sj : {-1, 1}) {
            auto q = g.neighbor(idx, i, si);
            std::optional<std::size_t> corner = q ? g.neighbor(*q, j, sj) : std::nullopt;
            if (!corner || !g.active(*corner))
              throw DomainError("assemble_operator: mixed-derivative corner outside the domain at node " +
                                std::to_string(idx));
            entries.emplace_back(static_cast<int>(*corner), si * sj * coef);
          }
      }
    }
    double rowsum = diag;
    for (auto& [col, v] : entries) {
      trip.emplace_back(row, col, v);
      rowsum += v;
    }
    trip.emplace_back(row, row, diag);
    if (!(diag < 0) || rowsum > 1e-9 * std::abs(diag)) mono = false;
  }
  sys.A.resize(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
  sys.A.setFromTriplets(trip.begin(), trip.end());
  sys.A.makeCompressed();
  if (mono) {
    // Off-diagonals of L_h must be nonnegative once duplicates are summed.
    for (Eigen::Index k = 0; k < sys.A.outerSize() && mono; ++k)
      for (SparseMatrix::InnerIterator it(sys.A, k); it; ++it)
        if (it.row() != it.col() && it.value() < 0) {
          mono = false;
          break;
        }
  }
  sys.m_matrix = mono;
  return sys;
}

/// Right-hand side: f on interior nodes, g on boundary nodes, 0 elsewhere.
inline Eigen::VectorXd dirichlet_rhs(const GridFunction& f, const GridFunction& g) {
  const Grid& grid = *f.grid;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    auto r = static_cast<Eigen::Index>(idx);
    if (grid.interior(idx))
      rhs[r] = f.values[r];
    else if (grid.node_class(idx) == NodeClass::boundary)
      rhs[r] = g.values[r];
  }
  return rhs;
}

/// Sparse LU of an assembled matrix with a singularity guard.
class Factorization {
 public:
  explicit Factorization(const SparseMatrix& A, double max_condition = 1e13) {
    lu_.analyzePattern(A);
    lu_.factorize(A);
    if (lu_.info() != Eigen::Success)
      throw SolveError("eigenvalue crossing", "sparse LU failed: " + lu_.lastErrorMessage());
    // Lower bound on ||A^{-1}||_inf from two solves.
    const Eigen::Index N = A.rows();
    double inv_norm = 0;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(-1, 1);
    Eigen::VectorXd x1 = Eigen::VectorXd::Ones(N), x2(N);
    for (Eigen::Index i = 0; i < N; ++i) x2[i] = uni(rng);
    for (const Eigen::VectorXd& x : {x1, x2}) {
      Eigen::VectorXd y = lu_.solve(x);
      if (!y.allFinite()) throw SolveError("eigenvalue crossing", "non-finite solution");
      inv_norm = std::max(inv_norm, y.cwiseAbs().maxCoeff() / x.cwiseAbs().maxCoeff());
    }
    double a_norm = 0;
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(N);
    for (Eigen::Index k = 0; k < A.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(A, k); it; ++it) rows[it.row()] += std::abs(it.value());
    a_norm = rows.maxCoeff();
    condition_ = a_norm * inv_norm;
    // Rows that are exactly e_i^T (Dirichlet and exterior nodes).
    Eigen::VectorXi nnz = Eigen::VectorXi::Zero(N);
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(N);
    for (Eigen::Index k = 0; k < A.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(A, k); it; ++it)
        if (it.value() != 0) {
          ++nnz[it.row()];
          if (it.row() == it.col()) diag[it.row()] = it.value();
        }
    for (Eigen::Index i = 0; i < N; ++i)
      if (nnz[i] == 1 && diag[i] == 1) identity_rows_.push_back(i);
    if (!(condition_ < max_condition))
      throw SolveError("eigenvalue crossing", "system is numerically singular (condition ~ " +
                                                  std::to_string(condition_) + ")");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = lu_.solve(rhs);
    if (!x.allFinite()) throw SolveError("eigenvalue crossing", "non-finite solution");
    for (Eigen::Index i : identity_rows_) x[i] = rhs[i];  // pivoting leaves ~1e-15 here otherwise
    return x;
  }

  double condition_estimate() const { return condition_; }

 private:
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
  double condition_ = 0.0;
  std::vector<Eigen::Index> identity_rows_;
};

struct SolveStats {
  int homotopy_steps = 0;
  std::vector<int> contraction_iterations;  ///< per accepted step
  std::vector<double> step_sizes;
  std::vector<double> contraction_factors;  ///< largest observed ratio per accepted step
  int halvings = 0;
  double residual = 0.0;                     ///< sup |L_h u - f| on interior nodes
  std::optional<double> max_principle_constant;  ///< sup|u| / sup|f| when c <= 0
  double condition_estimate = 0.0;
  bool m_matrix = false;

  nlohmann::json to_json() const {
    nlohmann::json j{{"homotopy_steps", homotopy_steps},
                     {"contraction_iterations", contraction_iterations},
                     {"step_sizes", step_sizes},
                     {"contraction_factors", contraction_factors},
                     {"halvings", halvings},
                     {"residual", residual},
                     {"condition_estimate", condition_estimate},
                     {"m_matrix", m_matrix}};
    if (max_principle_constant) j["max_principle_constant"] = *max_principle_constant;
    return j;
  }
};

struct SolveResult {
  GridFunction u;
  SolveStats stats;
};

namespace detail {

inline double interior_residual(const Grid& g, const SparseMatrix& A, const Eigen::VectorXd& u,
                                const Eigen::VectorXd& f) {
  Eigen::VectorXd Au = A * u;
  double res = 0;
  for (std::size_t idx : g.active_nodes())
    if (g.interior(idx)) res = std::max(res, std::abs(Au[static_cast<Eigen::Index>(idx)] - f[static_cast<Eigen::Index>(idx)]));
  return res;
}

inline void finish_stats(SolveStats& st, const EllipticOperator& L, const GridFunction& u, const GridFunction& f) {
  if (L.max_c() <= 0) {
    double sf = 0;
    for (std::size_t idx : u.grid->active_nodes())
      if (u.grid->interior(idx)) sf = std::max(sf, std::abs(f[idx]));
    if (sf > 0) st.max_principle_constant = u.sup_abs() / sf;
  }
}

}  // namespace detail

inline SolveResult solve_dirichlet(const EllipticOperator& L, const GridFunction& f, const GridFunction& g) {
  if (f.grid != L.grid || g.grid != L.grid) throw DomainError("solve_dirichlet: fields must share the operator's grid");
  auto sys = assemble_operator(L);
  Factorization lu(sys.A);
  Eigen::VectorXd rhs = dirichlet_rhs(f, g);
  SolveResult out{GridFunction(L.grid, lu.solve(rhs)), {}};
  out.stats.homotopy_steps = 0;
  out.stats.residual = detail::interior_residual(*L.grid, sys.A, out.u.values, f.values);
  out.stats.condition_estimate = lu.condition_estimate();
  out.stats.m_matrix = sys.m_matrix;
  detail::finish_stats(out.stats, L, out.u, f);
  return out;
}

struct ContinuityOptions {
  double step = 0.5;       ///< initial delta
  double step_min = 1e-3;  ///< abort below this
  double tol = 1e-12;      ///< fixed-point tolerance, relative to max(1, sup|u|)
  int max_iterations = 200;
};

/// Method of continuity along L_t = t L + (1 - t) Laplace from t = 0 to 1.
/// Each step s = t + delta solves u = L_t^{-1}(f + (s - t)(L_0 - L_1) u) by
/// fixed-point iteration; a step whose contraction factor reaches 1 or that
/// exhausts the iteration cap is retried with half the step.
inline SolveResult continuity_method(const EllipticOperator& L, const GridFunction& f, const GridFunction& g,
                                     const ContinuityOptions& opt = {}) {
  if (L.max_c() > 0) throw DomainError("continuity_method: requires c <= 0 everywhere");
  if (!(opt.step > 0) || !(opt.step_min > 0)) throw DomainError("continuity_method: step sizes must be positive");
  const Grid& grid = *L.grid;
  auto sys1 = assemble_operator(L);
  auto sys0 = assemble_operator(EllipticOperator::laplacian(L.grid));
  const SparseMatrix D = sys0.A - sys1.A;  // L_0 - L_1, zero on identity rows
  const Eigen::VectorXd rhs = dirichlet_rhs(f, g);
  SolveResult out;
  SolveStats& st = out.stats;
  st.m_matrix = sys1.m_matrix;

  Eigen::VectorXd u;
  bool trivial = D.norm() == 0;
  if (trivial) {
    Factorization lu(sys1.A);
    u = lu.solve(rhs);
    st.homotopy_steps = 1;
    st.contraction_iterations.push_back(0);
    st.step_sizes.push_back(1.0);
    st.contraction_factors.push_back(0.0);
    st.condition_estimate = lu.condition_estimate();
  } else {
    Factorization lu0(sys0.A);
    u = lu0.solve(rhs);
    double t = 0, delta = opt.step;
    while (t < 1 - 1e-15) {
      double s = std::min(1.0, t + delta);
      SparseMatrix At = t * sys1.A + (1 - t) * sys0.A;
      Factorization lu(At);
      st.condition_estimate = std::max(st.condition_estimate, lu.condition_estimate());
      Eigen::VectorXd cur = u, prev_diff;
      double worst = 0;
      int it = 0;
      bool ok = false;
      for (; it < opt.max_iterations; ++it) {
        // Correction form: same map, but the LU error scales with the residual
        // instead of with |u|, which keeps the floor well under tol.
        Eigen::VectorXd next = cur + lu.solve(rhs + (s - t) * (D * cur) - At * cur);
        Eigen::VectorXd diff = next - cur;
        double dn = diff.cwiseAbs().maxCoeff();
        if (prev_diff.size() > 0) {
          double pn = prev_diff.cwiseAbs().maxCoeff();
          if (pn > 0) {
            double factor = dn / pn;
            worst = std::max(worst, factor);
            if (factor >= 1 && dn > opt.tol * std::max(1.0, next.cwiseAbs().maxCoeff())) break;
          }
        }
        cur = std::move(next);
        prev_diff = std::move(diff);
        if (dn <= opt.tol * std::max(1.0, cur.cwiseAbs().maxCoeff())) {
          ok = true;
          ++it;
          break;
        }
      }
      if (!ok) {
        delta *= 0.5;
        ++st.halvings;
        if (delta < opt.step_min)
          throw SolveError("continuity stalled", "step fell below delta_min at t = " + std::to_string(t) +
                                                     " (contraction factor " + std::to_string(worst) + ")");
        continue;
      }
      u = std::move(cur);
      ++st.homotopy_steps;
      st.contraction_iterations.push_back(it);
      st.step_sizes.push_back(s - t);
      st.contraction_factors.push_back(worst);
      t = s;
    }
  }
  out.u = GridFunction(L.grid, std::move(u));
  st.residual = detail::interior_residual(grid, sys1.A, out.u.values, f.values);
  detail::finish_stats(st, L, out.u, f);
  return out;
}

struct EstimateProbeReport {
  // (i) C^1 bound on the box K = {|x_i - centre_i| < s}
  double c1_lhs = 0.0;  ///< |d_n u(centre)|
  double c1_rhs = 0.0;  ///< (n/s) sup_K|u| + (s/2) sup_K|f|
  double c1_margin = 0.0;
  bool c1_holds = false;
  // (ii) weighted gradient bound
  double weighted_ratio = 0.0;  ///< sup d|grad u| / (sup|u| + sup d^2|f|)
  double weighted_constant = 0.0;
  bool weighted_holds = false;
  std::vector<double> d_levels;
  std::vector<double> d_grad_by_level;  ///< sup of d|grad u| over d in [level, 2 level)
  // (iii) maximum principle, only when c <= 0 and the stencil is monotone
  std::optional<double> mp_ratio;
  double mp_constant = 0.0;
  std::optional<bool> mp_holds;

  nlohmann::json to_json() const {
    nlohmann::json j{{"c1_lhs", c1_lhs},
                     {"c1_rhs", c1_rhs},
                     {"c1_margin", c1_margin},
                     {"c1_holds", c1_holds},
                     {"weighted_ratio", weighted_ratio},
                     {"weighted_constant", weighted_constant},
                     {"weighted_holds", weighted_holds},
                     {"d_levels", d_levels},
                     {"d_grad_by_level", d_grad_by_level}};
    if (mp_ratio) {
      j["mp_ratio"] = *mp_ratio;
      j["mp_constant"] = mp_constant;
      j["mp_holds"] = *mp_holds;
    }
    return j;
  }
};

struct EstimateProbeOptions {
  double weighted_constant = 4.0;  ///< C_rec for probe (ii)
  double mp_constant = 1.0;        ///< C_rec' for probe (iii)
  std::vector<double> d_levels;
};

namespace detail {

inline bool box_inside(const DomainSpec& dom, const Point& c, double s) {
  const int n = dom.n;
  switch (dom.kind) {
    case DomainKind::torus: return true;
    case DomainKind::strip: return c[n - 1] - s >= 0 && c[n - 1] + s <= dom.theta;
    case DomainKind::rectangle:
      for (int i = 0; i < n; ++i)
        if (c[i] - s < dom.origin[static_cast<std::size_t>(i)] ||
            c[i] + s > dom.origin[static_cast<std::size_t>(i)] + dom.sides[static_cast<std::size_t>(i)])
          return false;
      return true;
    case DomainKind::ball:
    case DomainKind::annulus: {
      // Farthest corner inside the outer sphere; nearest box point outside the hole.
      Point cc = c - dom.center_point();
      double far = 0, near = 0;
      for (int i = 0; i < n; ++i) {
        double hi = std::abs(cc[i]) + s;
        far += hi * hi;
        double lo = std::max(0.0, std::abs(cc[i]) - s);
        near += lo * lo;
      }
      double R = dom.kind == DomainKind::ball ? dom.r0 : dom.r_out;
      if (std::sqrt(far) > R) return false;
      return dom.kind == DomainKind::ball || std::sqrt(near) >= dom.r_in;
    }
  }
  return false;
}

}  // namespace detail

inline EstimateProbeReport estimate_probes(const GridFunction& u, const GridFunction& f, const EllipticOperator& L,
                                           const Point& centre, double s, const EstimateProbeOptions& opt = {}) {
  const Grid& g = *u.grid;
  const int n = g.dim();
  if (!(s > 0)) throw DomainError("estimate_probes: box half-width s must be positive");
  if (!detail::box_inside(g.domain(), centre, s)) throw DomainError("estimate_probes: box K is not contained in the domain");
  EstimateProbeReport rep;
  auto der = fd_derivatives(u);

  double sup_u_K = 0, sup_f_K = 0;
  for (std::size_t idx : g.active_nodes()) {
    Point x = g.point(idx);
    if ((x - centre).cwiseAbs().maxCoeff() > s + 1e-12) continue;
    sup_u_K = std::max(sup_u_K, std::abs(u[idx]));
    sup_f_K = std::max(sup_f_K, std::abs(f[idx]));
  }
  std::size_t c_idx = g.nearest_node(centre);
  rep.c1_lhs = std::abs(der.gradient(static_cast<Eigen::Index>(c_idx), n - 1));
  rep.c1_rhs = n / s * sup_u_K + s / 2 * sup_f_K;
  rep.c1_margin = rep.c1_rhs - rep.c1_lhs;
  rep.c1_holds = rep.c1_margin >= -1e-12 * std::max(1.0, rep.c1_rhs);

  if (g.domain().has_boundary()) {
    auto d = distance_field(u.grid);
    double sup_dgrad = 0, sup_u = 0, sup_d2f = 0;
    rep.d_levels = opt.d_levels;
    rep.d_grad_by_level.assign(opt.d_levels.size(), 0.0);
    for (std::size_t idx : g.active_nodes()) {
      auto r = static_cast<Eigen::Index>(idx);
      double di = std::max(0.0, d[idx]);
      double dg = di * der.gradient.row(r).norm();
      sup_dgrad = std::max(sup_dgrad, dg);
      sup_u = std::max(sup_u, std::abs(u[idx]));
      sup_d2f = std::max(sup_d2f, di * di * std::abs(f[idx]));
      for (std::size_t k = 0; k < opt.d_levels.size(); ++k)
        if (di >= opt.d_levels[k] && di < 2 * opt.d_levels[k])
          rep.d_grad_by_level[k] = std::max(rep.d_grad_by_level[k], dg);
    }
    double denom = sup_u + sup_d2f;
    rep.weighted_ratio = denom > 0 ? sup_dgrad / denom : 0.0;
    rep.weighted_constant = opt.weighted_constant;
    rep.weighted_holds = rep.weighted_ratio <= opt.weighted_constant;
  }

  if (L.max_c() <= 0 && !L.has_cross_terms()) {
    double sf = 0;
    for (std::size_t idx : g.active_nodes())
      if (g.interior(idx)) sf = std::max(sf, std::abs(f[idx]));
    if (sf > 0) {
      rep.mp_ratio = u.sup_abs() / sf;
      rep.mp_constant = opt.mp_constant;
      rep.mp_holds = *rep.mp_ratio <= opt.mp_constant;
    }
  }
  return rep;
}

}  // namespace schauder
