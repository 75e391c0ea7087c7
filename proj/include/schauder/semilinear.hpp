#pragma once

// Monotone sub/supersolution iteration for -Laplace(u) = f(u), u = g on the
// boundary. Both sequences solve (-Laplace_h + m) u_j = f(u_{j-1}) + m u_{j-1}
// with one factorization of (Laplace_h - m).

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "schauder/core/expression.hpp"
#include "schauder/elliptic_solver.hpp"

namespace schauder {

/// f(u) with its symbolic derivative and the monotonizing shift m, valid on
/// the working interval [lo, hi].
struct Nonlinearity {
  Expression f;
  Expression df;
  double lo = 0.0;
  double hi = 0.0;
  double fprime_bound = 0.0;  ///< sup |f'| sampled on [lo, hi]
  double shift = 0.0;         ///< m

  static constexpr int kSamples = 4097;

  /// Default shift is fprime_bound + 1. An explicit shift must keep
  /// f' + m >= 0 at every sample.
  static Nonlinearity make(const Expression& f, double lo, double hi, std::optional<double> shift = std::nullopt) {
    if (f.variables().size() != 1 || f.variables()[0] != "u")
      throw DomainError("nonlinearity must be an expression in the single variable u");
    if (!(hi >= lo)) throw DomainError("nonlinearity: empty working interval");
    Nonlinearity N{f, f.derivative("u"), lo, hi, 0.0, 0.0};
    double min_df = 0;
    for (int i = 0; i < kSamples; ++i) {
      double u = lo + (hi - lo) * i / (kSamples - 1);
      double d = N.df({u});
      if (!std::isfinite(d) || !std::isfinite(N.f({u})))
        throw DomainError("nonlinearity is not finite at u = " + std::to_string(u));
      N.fprime_bound = std::max(N.fprime_bound, std::abs(d));
      min_df = std::min(min_df, d);
    }
    N.shift = shift.value_or(N.fprime_bound + 1.0);
    if (min_df + N.shift < 0)
      throw DomainError("shift m = " + std::to_string(N.shift) + " leaves f + m u decreasing on the working interval");
    return N;
  }

  static Nonlinearity parse(const std::string& text, double lo, double hi, std::optional<double> shift = std::nullopt) {
    return make(Expression::parse(text, {"u"}), lo, hi, shift);
  }

  double operator()(double u) const { return f({u}); }
  double derivative(double u) const { return df({u}); }
  double monotone(double u) const { return f({u}) + shift * u; }

  nlohmann::json to_json() const {
    return {{"f", f.to_string()}, {"df", df.to_string()}, {"interval", {lo, hi}},
            {"fprime_bound", fprime_bound}, {"shift", shift}};
  }
};

struct OrderedPairReport {
  double order_margin = 0.0;  ///< min (w0 - v0)
  double sub_margin = 0.0;    ///< min (f(v0) + Laplace_h v0) over interior nodes
  double super_margin = 0.0;  ///< min (-Laplace_h w0 - f(w0)) over interior nodes
  double boundary_margin = 0.0;  ///< min over boundary of (g - v0) and (w0 - g)
  std::size_t worst_node = 0;
  bool ordered = false;

  nlohmann::json to_json() const {
    return {{"order_margin", order_margin}, {"sub_margin", sub_margin}, {"super_margin", super_margin},
            {"boundary_margin", boundary_margin}, {"ordered", ordered}};
  }
};

namespace detail {

inline void require_same_grid(const GridFunction& a, const GridFunction& b, const char* who) {
  if (a.grid != b.grid) throw DomainError(std::string(who) + ": fields must share a grid");
}

}  // namespace detail

/// Margins of v0 <= w0, -Laplace_h v0 <= f(v0) and -Laplace_h w0 >= f(w0).
/// Throws DomainError "not an ordered pair" if any margin is below -tol.
/// The boundary data g defaults to zero.
inline OrderedPairReport verify_ordered_pair(const GridFunction& v0, const GridFunction& w0, const Nonlinearity& f,
                                             const std::optional<GridFunction>& g = std::nullopt,
                                             double tol = 1e-10) {
  detail::require_same_grid(v0, w0, "verify_ordered_pair");
  const Grid& grid = *v0.grid;
  GridFunction bdry = g ? *g : GridFunction::zeros(v0.grid);
  detail::require_same_grid(v0, bdry, "verify_ordered_pair");
  auto sys = assemble_operator(EllipticOperator::laplacian(v0.grid));
  Eigen::VectorXd lv = sys.A * v0.values, lw = sys.A * w0.values;

  OrderedPairReport rep;
  rep.order_margin = rep.sub_margin = rep.super_margin = rep.boundary_margin =
      std::numeric_limits<double>::infinity();
  double worst = rep.order_margin;
  auto note = [&](double& slot, double value, std::size_t idx) {
    slot = std::min(slot, value);
    if (value < worst) {
      worst = value;
      rep.worst_node = idx;
    }
  };
  for (std::size_t idx : grid.active_nodes()) {
    auto r = static_cast<Eigen::Index>(idx);
    note(rep.order_margin, w0.values[r] - v0.values[r], idx);
    if (grid.interior(idx)) {
      note(rep.sub_margin, f(v0.values[r]) + lv[r], idx);
      note(rep.super_margin, -lw[r] - f(w0.values[r]), idx);
    } else {
      note(rep.boundary_margin, std::min(bdry.values[r] - v0.values[r], w0.values[r] - bdry.values[r]), idx);
    }
  }
  for (double* m : {&rep.order_margin, &rep.sub_margin, &rep.super_margin, &rep.boundary_margin})
    if (std::isinf(*m)) *m = 0.0;
  rep.ordered = worst >= -tol;
  if (!rep.ordered) {
    std::ostringstream msg;
    msg << "not an ordered pair: margin " << worst << " at node " << rep.worst_node << " (order "
        << rep.order_margin << ", sub " << rep.sub_margin << ", super " << rep.super_margin << ", boundary "
        << rep.boundary_margin << ")";
    throw DomainError(msg.str());
  }
  return rep;
}

struct MonotoneIterate {
  double lower_step = 0.0;  ///< min (v_j - v_{j-1})
  double upper_step = 0.0;  ///< min (w_{j-1} - w_j)
  double gap = 0.0;         ///< min (w_j - v_j)
  double lower_change = 0.0;
  double upper_change = 0.0;
};

struct MonotoneResult {
  GridFunction u_lower;
  GridFunction u_upper;
  std::vector<MonotoneIterate> trace;
  int iterations = 0;
  double gap = 0.0;  ///< sup |u_upper - u_lower|
  double residual_lower = 0.0;
  double residual_upper = 0.0;
  double shift = 0.0;

  double min_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& t : trace) m = std::min({m, t.lower_step, t.upper_step, t.gap});
    return trace.empty() ? 0.0 : m;
  }

  nlohmann::json to_json() const {
    nlohmann::json tr = nlohmann::json::array();
    for (const auto& t : trace)
      tr.push_back({{"lower_step", t.lower_step}, {"upper_step", t.upper_step}, {"gap", t.gap},
                    {"lower_change", t.lower_change}, {"upper_change", t.upper_change}});
    return {{"iterations", iterations},
            {"gap", gap},
            {"residual_lower", residual_lower},
            {"residual_upper", residual_upper},
            {"shift", shift},
            {"min_margin", min_margin()},
            {"sup_lower", u_lower.values.maxCoeff()},
            {"sup_upper", u_upper.values.maxCoeff()},
            {"trace", tr}};
  }
};

struct MonotoneOptions {
  double tol = 1e-10;
  int max_iterations = 500;
  double monotone_tol = 1e-10;
};

/// sup over interior nodes of |-Laplace_h u - f(u)|.
inline double semilinear_residual(const GridFunction& u, const Nonlinearity& f) {
  auto sys = assemble_operator(EllipticOperator::laplacian(u.grid));
  Eigen::VectorXd lu = sys.A * u.values;
  double res = 0;
  for (std::size_t idx : u.grid->active_nodes())
    if (u.grid->interior(idx)) {
      auto r = static_cast<Eigen::Index>(idx);
      res = std::max(res, std::abs(-lu[r] - f(u.values[r])));
    }
  return res;
}

/// Iterates from the ordered pair (v0, w0) until both sequences change by
/// less than tol in sup norm and both limits have residual <= 10 tol.
inline MonotoneResult monotone_iterate(const Nonlinearity& f, const GridFunction& v0, const GridFunction& w0,
                                       const std::optional<GridFunction>& g = std::nullopt,
                                       const MonotoneOptions& opt = {}) {
  verify_ordered_pair(v0, w0, f, g, opt.monotone_tol);
  const GridPtr& grid = v0.grid;
  GridFunction bdry = g ? *g : GridFunction::zeros(grid);
  const double m = f.shift;
  const Eigen::Index N = static_cast<Eigen::Index>(grid->size());
  for (std::size_t idx : grid->active_nodes()) {
    double a = v0[idx], b = w0[idx];
    if (a < f.lo - 1e-12 || b > f.hi + 1e-12)
      throw DomainError("monotone_iterate: ordered pair leaves the nonlinearity's working interval");
  }

  EllipticOperator op = EllipticOperator::laplacian(grid);
  op.c = Eigen::VectorXd::Constant(N, -m);
  auto sys = assemble_operator(op);
  Factorization lu(sys.A);

  // (Laplace_h - m) u_j = -(f + m)(u_{j-1}) in the interior, u_j = g on the boundary.
  auto step = [&](const GridFunction& prev) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
    for (std::size_t idx = 0; idx < grid->size(); ++idx) {
      auto r = static_cast<Eigen::Index>(idx);
      if (grid->interior(idx))
        rhs[r] = -f.monotone(prev.values[r]);
      else if (grid->node_class(idx) == NodeClass::boundary)
        rhs[r] = bdry.values[r];
    }
    // Solved as a correction to prev so the LU error shrinks with the residual.
    return GridFunction(grid, prev.values + lu.solve(rhs - sys.A * prev.values));
  };

  MonotoneResult out;
  out.shift = m;
  GridFunction v = v0, w = w0;
  for (int j = 1;; ++j) {
    if (j > opt.max_iterations)
      throw SolveError("slow convergence", "no convergence after " + std::to_string(opt.max_iterations) + " iterations");
    GridFunction vn = step(v), wn = step(w);
    MonotoneIterate it;
    it.lower_step = it.upper_step = it.gap = std::numeric_limits<double>::infinity();
    for (std::size_t idx : grid->active_nodes()) {
      double ls = vn[idx] - v[idx], us = w[idx] - wn[idx], gp = wn[idx] - vn[idx];
      it.lower_step = std::min(it.lower_step, ls);
      it.upper_step = std::min(it.upper_step, us);
      it.gap = std::min(it.gap, gp);
      if (std::min({ls, us, gp}) < -opt.monotone_tol) {
        std::ostringstream msg;
        msg << "iteration " << j << " at node " << idx << ": lower step " << ls << ", upper step " << us
            << ", gap " << gp;
        throw SolveError("monotonicity violated", msg.str());
      }
    }
    it.lower_change = (vn.values - v.values).cwiseAbs().maxCoeff();
    it.upper_change = (wn.values - w.values).cwiseAbs().maxCoeff();
    out.trace.push_back(it);
    v = std::move(vn);
    w = std::move(wn);
    if (it.lower_change < opt.tol && it.upper_change < opt.tol) {
      out.residual_lower = semilinear_residual(v, f);
      out.residual_upper = semilinear_residual(w, f);
      if (out.residual_lower <= 10 * opt.tol && out.residual_upper <= 10 * opt.tol) {
        out.iterations = j;
        break;
      }
    }
  }
  out.gap = (w.values - v.values).cwiseAbs().maxCoeff();
  out.u_lower = std::move(v);
  out.u_upper = std::move(w);
  return out;
}

}  // namespace schauder
