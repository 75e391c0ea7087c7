#pragma once

// Boundary blow-up for -Laplace(u) + n(n-2) u^{(n+2)/(n-2)} = 0 on radial
// domains, the renormalised unknown w = (v - 2d)/d^2 with v = u^{-2/(n-2)},
// the half-strip model operator L0 = (D+2)(D+1-n) + T^2 Laplace_Y with
// D = T d/dT, its right inverse G, and scaled-regularity probes.
//
// The Dirichlet problems u = m on the boundary are solved by damped Newton
// in the variable v, which satisfies v Laplace(v) = (n/2)(|grad v|^2 - 4)
// with v = m^{-2/(n-2)} on the boundary. v stays bounded as m grows, so the
// ladder can be pushed far enough that the finite-m error in w is below the
// solver tolerance at the finest layer.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <json.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "schauder/core/expression.hpp"
#include "schauder/core/kv_config.hpp"
#include "schauder/geometry.hpp"
#include "schauder/holder_norms.hpp"

namespace schauder {

// ---------------------------------------------------------------------------
// Radial Loewner-Nirenberg solver

struct BlowupOptions {
  int n = 3;
  std::vector<double> ladder;  ///< explicit m values; empty means 2^0, 2^1, ... 2^max_exponent
  int max_exponent = 40;
  double tol = 1e-8;
  double d_min = 1e-3;  ///< smallest cell, in units of the domain's radial scale
  double ratio = 0.9;   ///< geometric grading toward each boundary
  double h_max = 0.01;  ///< largest cell, in units of the radial scale
  double stable_d = 0.05;  ///< stabilisation is measured on {d > stable_d * scale}
  int max_newton = 60;
  int max_refinements = 2;
};

struct BoundaryTrace {
  std::string component;  ///< "outer" or "inner"
  double H = 0.0;         ///< mean curvature of the component
  double w_trace = 0.0;   ///< w extrapolated to d = 0
  double reference = 0.0; ///< -H
};

struct LadderStep {
  double m = 0.0;
  int newton_iterations = 0;
  double residual = 0.0;
  double change = 0.0;       ///< sup |u_m - u_prev| on the stabilisation set
  double w_change = 0.0;     ///< |w_m - w_prev| at the finest layer(s)
  double monotone_margin = 0.0;  ///< min (u_m - u_prev) / u_prev
};

struct BlowupResult {
  DomainSpec domain;
  int n = 3;
  double tol = 0.0;
  std::vector<double> r;
  std::vector<double> d;
  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> w;  ///< at d = 0 the extrapolated trace is stored
  std::vector<LadderStep> ladder;
  std::vector<BoundaryTrace> traces;
  bool stabilized = false;
  int refinements = 0;

  double m_final() const { return ladder.empty() ? 0.0 : ladder.back().m; }

  /// Which boundary component node i is closest to.
  std::string component_of(std::size_t i) const {
    if (domain.kind == DomainKind::ball) return "outer";
    return (r[i] - domain.r_in <= domain.r_out - r[i]) ? "inner" : "outer";
  }

  const BoundaryTrace& trace(const std::string& component) const {
    for (const auto& t : traces)
      if (t.component == component) return t;
    throw DomainError("no boundary component named " + component);
  }

  std::string w_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "r,d,u,v,w\n";
    for (std::size_t i = 0; i < r.size(); ++i) {
      out << r[i] << "," << d[i] << ",";
      if (std::isfinite(u[i]))
        out << u[i];
      else
        out << "inf";
      out << "," << v[i] << "," << w[i] << "\n";
    }
    return out.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json lad = nlohmann::json::array();
    for (const auto& s : ladder)
      lad.push_back({{"m", s.m}, {"newton_iterations", s.newton_iterations}, {"residual", s.residual},
                     {"change", s.change}, {"w_change", s.w_change}, {"monotone_margin", s.monotone_margin}});
    nlohmann::json tr = nlohmann::json::array();
    for (const auto& t : traces)
      tr.push_back({{"component", t.component}, {"H", t.H}, {"w_trace", t.w_trace}, {"reference", t.reference}});
    return {{"n", n},         {"nodes", r.size()},     {"m_final", m_final()}, {"stabilized", stabilized},
            {"refinements", refinements}, {"ladder", lad}, {"traces", tr}, {"w_csv", w_csv()}};
  }
};

namespace detail {

/// Three-point weights on a nonuniform mesh, exact for quadratics.
struct RadialStencil {
  double d1m, d10, d1p;  // first derivative
  double d2m, d20, d2p;  // second derivative
};

inline RadialStencil radial_stencil(double hm, double hp) {
  RadialStencil s{};
  double den = hm * hp * (hm + hp);
  s.d1m = -hp * hp / den;
  s.d10 = (hp * hp - hm * hm) / den;
  s.d1p = hm * hm / den;
  s.d2m = 2 / (hm * (hm + hp));
  s.d20 = -2 / (hm * hp);
  s.d2p = 2 / (hp * (hm + hp));
  return s;
}

/// Residual and tridiagonal Jacobian of v Laplace(v) - (n/2)(|v'|^2 - 4) on
/// the radial mesh; boundary rows impose v = b.
class RadialLN {
 public:
  RadialLN(const std::vector<double>& r, int n, bool ball) : r_(r), n_(n), ball_(ball) {
    const std::size_t K = r.size();
    st_.resize(K);
    for (std::size_t i = 1; i + 1 < K; ++i) st_[i] = radial_stencil(r[i] - r[i - 1], r[i + 1] - r[i]);
  }

  bool dirichlet(std::size_t i) const { return i + 1 == r_.size() || (!ball_ && i == 0); }

  Eigen::VectorXd residual(const Eigen::VectorXd& v, double b) const {
    const auto K = static_cast<Eigen::Index>(r_.size());
    Eigen::VectorXd R(K);
    for (Eigen::Index i = 0; i < K; ++i) {
      auto ui = static_cast<std::size_t>(i);
      if (dirichlet(ui)) {
        R[i] = v[i] - b;
      } else if (i == 0) {  // centre of the ball: Laplace v = 2n (v1 - v0)/r1^2, v' = 0
        R[i] = 2 * n_ * v[0] * (v[1] - v[0]) / (r_[1] * r_[1]) + 2 * n_;
      } else {
        const auto& s = st_[ui];
        double d1 = s.d1m * v[i - 1] + s.d10 * v[i] + s.d1p * v[i + 1];
        double d2 = s.d2m * v[i - 1] + s.d20 * v[i] + s.d2p * v[i + 1];
        R[i] = v[i] * (d2 + (n_ - 1) * d1 / r_[ui]) - 0.5 * n_ * (d1 * d1 - 4);
      }
    }
    return R;
  }

  Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& v) const {
    const auto K = static_cast<Eigen::Index>(r_.size());
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(3 * K));
    for (Eigen::Index i = 0; i < K; ++i) {
      auto ui = static_cast<std::size_t>(i);
      if (dirichlet(ui)) {
        t.emplace_back(i, i, 1.0);
      } else if (i == 0) {
        double c = 2.0 * n_ / (r_[1] * r_[1]);
        t.emplace_back(0, 0, c * (v[1] - 2 * v[0]));
        t.emplace_back(0, 1, c * v[0]);
      } else {
        const auto& s = st_[ui];
        double q = (n_ - 1) / r_[ui];
        double am = s.d2m + q * s.d1m, a0 = s.d20 + q * s.d10, ap = s.d2p + q * s.d1p;
        double d1 = s.d1m * v[i - 1] + s.d10 * v[i] + s.d1p * v[i + 1];
        double lap = am * v[i - 1] + a0 * v[i] + ap * v[i + 1];
        t.emplace_back(i, i - 1, v[i] * am - n_ * d1 * s.d1m);
        t.emplace_back(i, i, lap + v[i] * a0 - n_ * d1 * s.d10);
        t.emplace_back(i, i + 1, v[i] * ap - n_ * d1 * s.d1p);
      }
    }
    Eigen::SparseMatrix<double> J(K, K);
    J.setFromTriplets(t.begin(), t.end());
    return J;
  }

 private:
  std::vector<double> r_;
  int n_;
  bool ball_;
  std::vector<RadialStencil> st_;
};

struct NewtonOutcome {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

inline NewtonOutcome damped_newton(const RadialLN& sys, Eigen::VectorXd& v, double b, int max_iter) {
  NewtonOutcome out;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (sys.dirichlet(static_cast<std::size_t>(i))) v[i] = b;
  Eigen::VectorXd R = sys.residual(v, b);
  double rn = R.cwiseAbs().maxCoeff();
  // The residual stalls at a roundoff floor (stencil weights ~ 1/d_min^2), so
  // convergence is declared on the Newton step.
  for (int it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(sys.jacobian(v));
    if (lu.info() != Eigen::Success) break;
    Eigen::VectorXd step = lu.solve(-R);
    if (!step.allFinite()) break;
    const double sn = step.cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
    if (sn < 1e-9 * scale) {  // quadratic regime: take the step unconditionally
      v += step;
      out.residual = sys.residual(v, b).cwiseAbs().maxCoeff();
      if (sn < 1e-13 * scale || it == max_iter) {
        out.converged = true;
        return out;
      }
      R = sys.residual(v, b);
      rn = out.residual;
      continue;
    }
    double lam = 1.0;
    bool accepted = false;
    while (lam > 1e-10) {
      Eigen::VectorXd trial = v + lam * step;
      bool positive = true;
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!sys.dirichlet(static_cast<std::size_t>(i)) && !(trial[i] > 0)) positive = false;
      if (positive) {
        Eigen::VectorXd Rt = sys.residual(trial, b);
        double rt = Rt.cwiseAbs().maxCoeff();
        if (rt < (1 - 1e-4 * lam) * rn) {
          v = std::move(trial);
          R = std::move(Rt);
          rn = rt;
          accepted = true;
          break;
        }
      }
      lam /= 2;
    }
    if (!accepted) break;
  }
  out.residual = rn;
  return out;
}

inline double interp_linear(const std::vector<double>& x, const std::vector<double>& y, double t) {
  if (t <= x.front()) return y.front();
  if (t >= x.back()) return y.back();
  auto it = std::upper_bound(x.begin(), x.end(), t);
  std::size_t k = static_cast<std::size_t>(it - x.begin());
  double s = (t - x[k - 1]) / (x[k] - x[k - 1]);
  return (1 - s) * y[k - 1] + s * y[k];
}

inline double radial_scale(const DomainSpec& dom) {
  return dom.kind == DomainKind::ball ? dom.r0 : 0.5 * (dom.r_out - dom.r_in);
}

}  // namespace detail

/// Maximal solution as the limit of the Dirichlet problems u = m.
inline BlowupResult loewner_nirenberg_solve(const DomainSpec& dom, const BlowupOptions& opt = {}) {
  if (dom.kind != DomainKind::ball && dom.kind != DomainKind::annulus)
    throw DomainError("loewner_nirenberg_solve: domain must be a ball or an annulus");
  if (opt.n < 3) throw DomainError("loewner_nirenberg_solve: dimension n >= 3 required");
  dom.validate();
  std::vector<double> ladder = opt.ladder;
  if (ladder.empty())
    for (int k = 0; k <= opt.max_exponent; ++k) ladder.push_back(std::ldexp(1.0, k));
  for (std::size_t i = 0; i < ladder.size(); ++i)
    if (!(ladder[i] > 0) || (i > 0 && !(ladder[i] > ladder[i - 1])))
      throw DomainError("m-ladder must be positive and strictly increasing");

  const int n = opt.n;
  const double p = 0.5 * (n - 2);  // u = v^{-p}
  const double scale = detail::radial_scale(dom);
  const bool ball = dom.kind == DomainKind::ball;
  double d_min = opt.d_min * scale, h_max = opt.h_max * scale;

  BlowupResult res;
  res.domain = dom;
  res.n = n;
  res.tol = opt.tol;

  RadialGrid rg = RadialGrid::graded(dom, d_min, opt.ratio, h_max);
  auto distances = [&](const RadialGrid& g) {
    std::vector<double> d(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) d[i] = g.distance(i);
    return d;
  };
  std::vector<double> d = distances(rg);
  double dmax = *std::max_element(d.begin(), d.end());
  auto boundary_value = [&](double m) { return std::pow(m, -1.0 / p); };
  Eigen::VectorXd v(static_cast<Eigen::Index>(rg.size()));
  {
    double b = boundary_value(ladder.front());
    for (std::size_t i = 0; i < rg.size(); ++i) v[static_cast<Eigen::Index>(i)] = b + 2 * d[i] - d[i] * d[i] / dmax;
  }
  std::optional<Eigen::VectorXd> prev;
  // Finest layers next to each boundary component, for the w stabilisation test.
  auto finest = [&](const std::vector<double>& dd) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < dd.size(); ++i) {
      bool next_to_boundary = (i > 0 && dd[i - 1] == 0.0) || (i + 1 < dd.size() && dd[i + 1] == 0.0);
      if (dd[i] > 0 && next_to_boundary) idx.push_back(i);
    }
    return idx;
  };

  for (double m : ladder) {
    const double b = boundary_value(m);
    detail::NewtonOutcome nt;
    for (;;) {
      detail::RadialLN sys(rg.r, n, ball);
      Eigen::VectorXd trial = v;
      nt = detail::damped_newton(sys, trial, b, opt.max_newton);
      if (nt.converged) {
        v = std::move(trial);
        break;
      }
      if (res.refinements >= opt.max_refinements)
        throw SolveError("newton divergence", "no convergence at m = " + std::to_string(m) + " after " +
                                                  std::to_string(res.refinements) + " mesh refinements");
      // Refine and carry the current iterate (and the previous rung) over.
      ++res.refinements;
      d_min *= 0.5;
      h_max *= 0.5;
      RadialGrid fine = RadialGrid::graded(dom, d_min, opt.ratio, h_max);
      auto carry = [&](const Eigen::VectorXd& src) {
        std::vector<double> ys(src.data(), src.data() + src.size());
        Eigen::VectorXd out(static_cast<Eigen::Index>(fine.size()));
        for (std::size_t i = 0; i < fine.size(); ++i)
          out[static_cast<Eigen::Index>(i)] = detail::interp_linear(rg.r, ys, fine.r[i]);
        return out;
      };
      v = carry(v);
      if (prev) prev = carry(*prev);
      rg = fine;
      d = distances(rg);
    }

    LadderStep step;
    step.m = m;
    step.newton_iterations = nt.iterations;
    step.residual = nt.residual;
    step.monotone_margin = 0.0;
    if (prev) {
      double change = 0, wchange = 0, margin = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < rg.size(); ++i) {
        auto k = static_cast<Eigen::Index>(i);
        if (d[i] == 0.0) continue;
        double un = std::pow(v[k], -p), uo = std::pow((*prev)[k], -p);
        margin = std::min(margin, (un - uo) / uo);
        if (d[i] > opt.stable_d * scale) change = std::max(change, std::abs(un - uo));
      }
      for (std::size_t i : finest(d)) {
        auto k = static_cast<Eigen::Index>(i);
        wchange = std::max(wchange, std::abs(v[k] - (*prev)[k]) / (d[i] * d[i]));
      }
      step.change = change;
      step.w_change = wchange;
      step.monotone_margin = margin;
      if (margin < -opt.tol) {
        res.ladder.push_back(step);
        throw SolveError("monotonicity violated", "u_m decreased by relative " + std::to_string(-margin) +
                                                       " at m = " + std::to_string(m));
      }
    }
    res.ladder.push_back(step);
    bool done = prev && step.change < opt.tol && step.w_change < opt.tol;
    prev = v;
    if (done) {
      res.stabilized = true;
      break;
    }
  }

  const std::size_t K = rg.size();
  res.r = rg.r;
  res.d = d;
  res.u.resize(K);
  res.v.resize(K);
  res.w.resize(K);
  for (std::size_t i = 0; i < K; ++i) {
    double vi = v[static_cast<Eigen::Index>(i)];
    res.v[i] = vi;
    res.u[i] = std::pow(vi, -p);
    res.w[i] = d[i] > 0 ? (vi - 2 * d[i]) / (d[i] * d[i]) : 0.0;
  }
  // Boundary traces by linear extrapolation from the two finest layers.
  auto add_trace = [&](const std::string& name, std::size_t bnode, int dir) {
    std::size_t i1 = bnode + static_cast<std::size_t>(dir), i2 = bnode + static_cast<std::size_t>(2 * dir);
    if (dir < 0) {
      i1 = bnode - 1;
      i2 = bnode - 2;
    }
    double d1 = d[i1], d2 = d[i2];
    double trace = res.w[i1] - d1 * (res.w[i2] - res.w[i1]) / (d2 - d1);
    Point x = Point::Zero(dom.n);
    x[0] = rg.r[bnode];
    x += dom.center_point();
    double H = mean_curvature(dom, x);
    res.traces.push_back({name, H, trace, -H});
    res.w[bnode] = trace;
  };
  if (ball) {
    add_trace("outer", K - 1, -1);
  } else {
    add_trace("inner", 0, 1);
    add_trace("outer", K - 1, -1);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Comparison envelopes

struct EnvelopeReport {
  std::string component;
  double r0 = 0.0;
  bool interior_sphere_ok = false;  ///< a sphere of radius r0 fits inside, tangent to the component
  bool exterior_sphere_ok = false;  ///< a sphere of radius r0 fits outside, tangent to the component
  std::size_t probed = 0;
  std::size_t excluded = 0;  ///< nodes of the component with d >= r0
  double upper_margin = 0.0;  ///< min over nodes of 1 - u / (2d - d^2/r0)^{1-n/2}
  double lower_margin = 0.0;  ///< min over nodes of 1 - (2d + d^2/r0)^{1-n/2} / u
  double upper_gap = 0.0;     ///< max of the same quantity (0 when the bound is attained)
  double lower_gap = 0.0;
  double finest_d = 0.0;
  double finest_upper_gap = 0.0;  ///< both relative gaps at the layer closest to the boundary
  double finest_lower_gap = 0.0;

  /// Only inequalities backed by a tangent sphere of radius r0 are asserted.
  bool holds(double tol) const {
    return (!interior_sphere_ok || upper_margin >= -tol) && (!exterior_sphere_ok || lower_margin >= -tol);
  }

  nlohmann::json to_json() const {
    return {{"component", component},   {"r0", r0},
            {"interior_sphere_ok", interior_sphere_ok}, {"exterior_sphere_ok", exterior_sphere_ok},
            {"probed", probed},         {"excluded", excluded},
            {"upper_margin", upper_margin}, {"lower_margin", lower_margin},
            {"upper_gap", upper_gap},   {"lower_gap", lower_gap},
            {"finest_d", finest_d},     {"finest_upper_gap", finest_upper_gap},
            {"finest_lower_gap", finest_lower_gap}};
  }
};

/// (2d + d^2/r0)^{1-n/2} <= u <= (2d - d^2/r0)^{1-n/2} on the nodes of one
/// boundary component with 0 < d < r0, as relative margins.
inline EnvelopeReport envelope_check(const BlowupResult& res, double r0, std::string component = "outer") {
  const auto& dom = res.domain;
  if (!(r0 > 0)) throw DomainError("envelope_check: r0 must be positive");
  if (component != "outer" && !(component == "inner" && dom.kind == DomainKind::annulus))
    throw DomainError("envelope_check: unknown boundary component " + component);
  EnvelopeReport rep;
  rep.component = component;
  rep.r0 = r0;
  double interior_limit = detail::radial_scale(dom);
  double exterior_limit = component == "inner" ? dom.r_in : std::numeric_limits<double>::infinity();
  rep.interior_sphere_ok = r0 <= interior_limit * (1 + 1e-12);
  rep.exterior_sphere_ok = r0 <= exterior_limit;
  if (!rep.interior_sphere_ok && !rep.exterior_sphere_ok)
    throw DomainError("envelope_check: no sphere of radius r0 is tangent to the " + component + " boundary");
  const double e = 1 - 0.5 * res.n;
  rep.upper_margin = rep.lower_margin = std::numeric_limits<double>::infinity();
  double dbest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < res.r.size(); ++i) {
    double di = res.d[i];
    if (di <= 0 || res.component_of(i) != component) continue;
    if (di >= r0) {
      ++rep.excluded;
      continue;
    }
    ++rep.probed;
    double ui = std::pow(2 * di - di * di / r0, e), ue = std::pow(2 * di + di * di / r0, e);
    double up = 1 - res.u[i] / ui, lo = 1 - ue / res.u[i];
    rep.upper_margin = std::min(rep.upper_margin, up);
    rep.lower_margin = std::min(rep.lower_margin, lo);
    rep.upper_gap = std::max(rep.upper_gap, std::abs(up));
    rep.lower_gap = std::max(rep.lower_gap, std::abs(lo));
    if (di < dbest) {
      dbest = di;
      rep.finest_d = di;
      rep.finest_upper_gap = std::abs(up);
      rep.finest_lower_gap = std::abs(lo);
    }
  }
  if (rep.probed == 0) rep.upper_margin = rep.lower_margin = 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Fuchsian residual L w + 2 Laplace(d) - M_w(w) on the radial collar

struct FuchsianResidualReport {
  double collar = 0.0;
  std::size_t nodes = 0;
  double sup = 0.0;
  double sup_at_d = 0.0;
  std::vector<double> d;
  std::vector<double> value;

  nlohmann::json to_json() const {
    return {{"collar", collar}, {"nodes", nodes}, {"sup", sup}, {"sup_at_d", sup_at_d}};
  }
};

/// Residual with L = d^2 Laplace + (4-n) d grad d . grad + (2-2n) and
/// M_w(f) = n d^2/(2(2+dw)) [2 f grad d . grad w + d grad w . grad f] - 2 d f Laplace(d),
/// derivatives of w by three-point radial differences.
inline FuchsianResidualReport fuchsian_residual(const BlowupResult& res, double collar) {
  FuchsianResidualReport rep;
  rep.collar = collar;
  const int n = res.n;
  const auto& r = res.r;
  const auto& w = res.w;
  for (std::size_t i = 1; i + 1 < r.size(); ++i) {
    double d = res.d[i];
    if (!(d > 0) || d > collar) continue;
    // Skip stencils that straddle the cut locus between two components.
    if (res.component_of(i - 1) != res.component_of(i) || res.component_of(i + 1) != res.component_of(i)) continue;
    auto s = detail::radial_stencil(r[i] - r[i - 1], r[i + 1] - r[i]);
    double w1 = s.d1m * w[i - 1] + s.d10 * w[i] + s.d1p * w[i + 1];
    double w2 = s.d2m * w[i - 1] + s.d20 * w[i] + s.d2p * w[i + 1];
    double lap_w = w2 + (n - 1) * w1 / r[i];
    // grad d = -e_r toward the outer component, +e_r toward the inner one.
    double sgn = res.component_of(i) == "outer" ? -1.0 : 1.0;
    double lap_d = sgn * (n - 1) / r[i];
    double dd_w = sgn * w1;
    double L = d * d * lap_w + (4 - n) * d * dd_w + (2 - 2 * n) * w[i];
    double M = n * d * d / (2 * (2 + d * w[i])) * (2 * w[i] * dd_w + d * w1 * w1) - 2 * d * w[i] * lap_d;
    double val = L + 2 * lap_d - M;
    rep.d.push_back(d);
    rep.value.push_back(val);
    ++rep.nodes;
    if (std::abs(val) > rep.sup) {
      rep.sup = std::abs(val);
      rep.sup_at_d = d;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Half-strip model: D = T d/dT, L0, L0' and the solution operator G

namespace detail {

inline void require_strip(const Grid& g, const char* who) {
  if (g.domain().kind != DomainKind::strip) throw DomainError(std::string(who) + ": strip grid required");
}

/// Five-point weights for the first and second derivative at offset position
/// `at` (in cells) within nodes 0..4; exact for quartics.
inline std::pair<Eigen::Matrix<double, 5, 1>, Eigen::Matrix<double, 5, 1>> five_point_weights(int at, double h) {
  Eigen::Matrix<double, 5, 5> V;
  for (int k = 0; k < 5; ++k)
    for (int j = 0; j < 5; ++j) V(k, j) = std::pow(static_cast<double>(j - at), k);
  Eigen::Matrix<double, 5, 1> e1 = Eigen::Matrix<double, 5, 1>::Zero(), e2 = e1;
  e1[1] = 1.0 / h;
  e2[2] = 2.0 / (h * h);
  auto lu = V.fullPivLu();
  return {lu.solve(e1), lu.solve(e2)};
}

/// dw/dT and d2w/dT2 along the last axis with five-point stencils.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> strip_t_derivatives(const GridFunction& w) {
  const Grid& g = *w.grid;
  const int ta = g.dim() - 1;
  const int NT = g.count(ta);
  if (NT < 5) throw DomainError("strip needs at least 5 nodes across T");
  const double h = g.spacing(ta);
  const std::size_t stride = g.stride(ta);
  std::vector<std::pair<Eigen::Matrix<double, 5, 1>, Eigen::Matrix<double, 5, 1>>> wts;
  for (int at = 0; at < 5; ++at) wts.push_back(five_point_weights(at, h));
  Eigen::VectorXd d1 = Eigen::VectorXd::Zero(w.values.size()), d2 = d1;
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    int i = g.multi_index(idx)[static_cast<std::size_t>(ta)];
    int start = std::clamp(i - 2, 0, NT - 5);
    const auto& wt = wts[static_cast<std::size_t>(i - start)];
    std::size_t base = idx - static_cast<std::size_t>(i - start) * stride;
    double a = 0, b = 0;
    for (int j = 0; j < 5; ++j) {
      double val = w.values[static_cast<Eigen::Index>(base + static_cast<std::size_t>(j) * stride)];
      a += wt.first[j] * val;
      b += wt.second[j] * val;
    }
    d1[static_cast<Eigen::Index>(idx)] = a;
    d2[static_cast<Eigen::Index>(idx)] = b;
  }
  return {d1, d2};
}

/// Spectral Laplacian in the periodic Y variables.
inline Eigen::VectorXd strip_y_laplacian(const GridFunction& w) {
  const Grid& g = *w.grid;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(w.values.size());
  Eigen::FFT<double> fft;
  for (int a = 0; a + 1 < g.dim(); ++a) {
    const int N = g.count(a);
    const std::size_t stride = g.stride(a);
    const double L = g.spacing(a) * N;
    std::vector<std::complex<double>> line(static_cast<std::size_t>(N)), hat;
    std::vector<std::complex<double>> back;
    for (std::size_t base = 0; base < g.size(); ++base) {
      if ((base / stride) % static_cast<std::size_t>(N) != 0) continue;
      for (int i = 0; i < N; ++i) line[static_cast<std::size_t>(i)] = w.values[static_cast<Eigen::Index>(base + static_cast<std::size_t>(i) * stride)];
      fft.fwd(hat, line);
      for (int k = 0; k < N; ++k) {
        int kk = k > N / 2 ? k - N : k;
        double xi = 2 * M_PI * kk / L;
        hat[static_cast<std::size_t>(k)] *= -xi * xi;
      }
      fft.inv(back, hat);
      for (int i = 0; i < N; ++i)
        out[static_cast<Eigen::Index>(base + static_cast<std::size_t>(i) * stride)] += back[static_cast<std::size_t>(i)].real();
    }
  }
  return out;
}

inline Eigen::VectorXd strip_t_coordinate(const Grid& g) {
  Eigen::VectorXd T(static_cast<Eigen::Index>(g.size()));
  for (std::size_t idx = 0; idx < g.size(); ++idx) T[static_cast<Eigen::Index>(idx)] = g.point(idx)[g.dim() - 1];
  return T;
}

}  // namespace detail

/// D w = T w_T.
inline GridFunction fuchsian_apply_D(const GridFunction& w) {
  detail::require_strip(*w.grid, "fuchsian_apply_D");
  auto [d1, d2] = detail::strip_t_derivatives(w);
  (void)d2;
  Eigen::VectorXd T = detail::strip_t_coordinate(*w.grid);
  return GridFunction(w.grid, (T.array() * d1.array()).matrix());
}

/// L0 w = (D+2)(D+1-n) w + T^2 Laplace_Y w = T^2 w_TT + (4-n) T w_T + 2(1-n) w + T^2 Laplace_Y w.
inline GridFunction fuchsian_apply_L0(const GridFunction& w, int n) {
  detail::require_strip(*w.grid, "fuchsian_apply_L0");
  auto [d1, d2] = detail::strip_t_derivatives(w);
  Eigen::ArrayXd T = detail::strip_t_coordinate(*w.grid).array();
  Eigen::ArrayXd ly = detail::strip_y_laplacian(w).array();
  Eigen::ArrayXd out = T * T * (d2.array() + ly) + (4 - n) * T * d1.array() + 2.0 * (1 - n) * w.values.array();
  return GridFunction(w.grid, out.matrix());
}

/// L0' = L0 + (n-2)(D+2) = (D+2)(D-1) + T^2 Laplace_Y.
inline GridFunction fuchsian_apply_L0_prime(const GridFunction& w) {
  detail::require_strip(*w.grid, "fuchsian_apply_L0_prime");
  auto [d1, d2] = detail::strip_t_derivatives(w);
  Eigen::ArrayXd T = detail::strip_t_coordinate(*w.grid).array();
  Eigen::ArrayXd ly = detail::strip_y_laplacian(w).array();
  Eigen::ArrayXd out = T * T * (d2.array() + ly) + 2 * T * d1.array() - 2 * w.values.array();
  return GridFunction(w.grid, out.matrix());
}

struct FuchsianModelProblem {
  double theta = 1.0;
  std::function<double(double, double)> k;  ///< k(Y, T)
  std::string k_text;
  int n = 3;
  int ny = 256;  ///< nodes across the period in Y
  int nt = 64;   ///< nodes across [0, theta] in T
  int sigma_points = 256;
  double residual_tol = 1e-2;

  static FuchsianModelProblem from_expression(const std::string& text, double theta, int n = 3) {
    auto e = Expression::parse(text, {"Y", "T"});
    FuchsianModelProblem p;
    p.theta = theta;
    p.n = n;
    p.k_text = text;
    p.k = [e](double Y, double T) { return e({Y, T}); };
    return p;
  }

  /// Keys: theta, k (expression in Y and T), n, ny, nt, sigma_points, residual_tol.
  static FuchsianModelProblem from_config(const KeyValueConfig& cfg) {
    auto p = from_expression(cfg.get_string("k"), cfg.get_double("theta", 1.0),
                             static_cast<int>(cfg.get_int("n", 3)));
    p.ny = static_cast<int>(cfg.get_int("ny", 256));
    p.nt = static_cast<int>(cfg.get_int("nt", 64));
    p.sigma_points = static_cast<int>(cfg.get_int("sigma_points", 256));
    p.residual_tol = cfg.get_double("residual_tol", 1e-2);
    return p;
  }
};

struct FuchsianModelResult {
  GridPtr grid;
  GridFunction k;
  GridFunction k_tilde;
  GridFunction h;
  GridFunction f0;
  GridFunction f;          ///< f0 / (n-1): boundary value k/(2-2n)
  double residual = 0.0;   ///< sup |L0' f0 - k| on T >= 4 h_T
  double boundary_identity = 0.0;  ///< sup |f0(Y,0) + k(Y,0)/2|
  double boundary_identity_f = 0.0;  ///< sup |f(Y,0) - k(Y,0)/(2-2n)|
  double seam_mismatch = 0.0;
  bool within_tolerance = false;

  nlohmann::json to_json() const {
    return {{"ny", grid->count(0)},
            {"nt", grid->count(grid->dim() - 1)},
            {"residual", residual},
            {"boundary_identity", boundary_identity},
            {"boundary_identity_f", boundary_identity_f},
            {"seam_mismatch", seam_mismatch},
            {"within_tolerance", within_tolerance},
            {"f0_min", f0.values.minCoeff()},
            {"f0_max", f0.values.maxCoeff()}};
  }
};

namespace detail {

/// Cubic Lagrange interpolation along the node column `col` (values at
/// T_j = j h) evaluated at T.
inline double column_interp(const std::vector<double>& col, double h, double T) {
  const int N = static_cast<int>(col.size());
  double s = T / h;
  int i = std::clamp(static_cast<int>(std::floor(s)) - 1, 0, N - 4);
  double out = 0;
  for (int a = 0; a < 4; ++a) {
    double l = 1;
    for (int b = 0; b < 4; ++b)
      if (b != a) l *= (s - (i + b)) / static_cast<double>(a - b);
    out += l * col[static_cast<std::size_t>(i + a)];
  }
  return out;
}

}  // namespace detail

/// f0 = G[k]: k~ by the sigma quadrature with constant continuation beyond
/// theta, h from (d_TT + Laplace_Y) h = -k~ with h(Y,0) = h_T(Y,theta) = 0
/// (Fourier in Y, second-order differences in T), f0 = int_0^1 s h_TT(Y, sT) ds.
inline FuchsianModelResult fuchsian_model_solve(const FuchsianModelProblem& P) {
  if (!P.k) throw DomainError("fuchsian_model_solve: k is not set");
  if (!(P.theta > 0)) throw DomainError("fuchsian_model_solve: theta must be positive");
  if (P.nt < 5 || P.ny < 4 || P.sigma_points < 1) throw DomainError("fuchsian_model_solve: resolution too small");
  const double th = P.theta;
  // Seam check on a T sample.
  double seam = 0, kmax = 0;
  for (int j = 0; j <= 16; ++j) {
    double T = th * j / 16.0;
    double a = P.k(-th, T), b = P.k(th, T);
    seam = std::max(seam, std::abs(a - b));
    kmax = std::max({kmax, std::abs(a), std::abs(b)});
  }
  if (seam > 1e-10 * std::max(1.0, kmax)) {
    std::ostringstream msg;
    msg << "fuchsian_model_solve: k is not 2 theta periodic in Y (seam mismatch " << seam << ")";
    throw DomainError(msg.str());
  }

  FuchsianModelResult out;
  out.seam_mismatch = seam;
  auto g = Grid::build(DomainSpec::strip(th, 2), std::vector<int>{P.ny, P.nt});
  out.grid = g;
  const int NY = P.ny, NT = P.nt;
  const double hT = g->spacing(1);
  auto at = [&](int iy, int it) { return static_cast<Eigen::Index>(g->linear_index({iy, it})); };

  Eigen::VectorXd kv(static_cast<Eigen::Index>(g->size())), kt = kv;
  const int S = P.sigma_points;
  for (std::size_t idx = 0; idx < g->size(); ++idx) {
    Point x = g->point(idx);
    double Y = x[0], T = x[1];
    kv[static_cast<Eigen::Index>(idx)] = P.k(Y, T);
    // k~(Y,T) = int_1^inf F1[k](Y, T s) ds/s^2 = int_0^1 F1[k](Y, T/t) dt.
    double acc = 0;
    for (int j = 0; j < S; ++j) {
      double t = (j + 0.5) / S;
      acc += P.k(Y, std::min(T / t, th));
    }
    kt[static_cast<Eigen::Index>(idx)] = acc / S;
  }
  out.k = GridFunction(g, kv);
  out.k_tilde = GridFunction(g, kt);

  // Fourier coefficients of k~ on each T row.
  Eigen::FFT<double> fft;
  std::vector<std::vector<std::complex<double>>> khat(static_cast<std::size_t>(NT));
  for (int it = 0; it < NT; ++it) {
    std::vector<double> row(static_cast<std::size_t>(NY));
    for (int iy = 0; iy < NY; ++iy) row[static_cast<std::size_t>(iy)] = kt[at(iy, it)];
    fft.fwd(khat[static_cast<std::size_t>(it)], row);
  }
  // Per mode: h'' - xi^2 h = -k~ on nodes 1..NT-1, h_0 = 0, Neumann at theta via ghost node.
  std::vector<std::vector<std::complex<double>>> hhat(static_cast<std::size_t>(NT),
                                                     std::vector<std::complex<double>>(static_cast<std::size_t>(NY)));
  std::vector<std::vector<std::complex<double>>> htt = hhat;
  const int M = NT - 1;
  for (int q = 0; q < NY; ++q) {
    int qq = q > NY / 2 ? q - NY : q;
    double xi = M_PI * qq / th;
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < M; ++i) {  // unknown i <-> node i+1
      double c = 1 / (hT * hT);
      trip.emplace_back(i, i, -2 * c - xi * xi);
      if (i > 0) trip.emplace_back(i, i - 1, c);
      if (i + 1 < M) trip.emplace_back(i, i + 1, c);
      if (i + 1 == M && i > 0) trip.emplace_back(i, i - 1, c);  // ghost h_{NT} = h_{NT-2}
    }
    Eigen::SparseMatrix<double> A(M, M);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
    Eigen::VectorXd re(M), im(M);
    for (int i = 0; i < M; ++i) {
      auto val = -khat[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(q)];
      re[i] = val.real();
      im[i] = val.imag();
    }
    Eigen::VectorXd xr = lu.solve(re), xim = lu.solve(im);
    for (int it = 0; it < NT; ++it) {
      std::complex<double> hv = it == 0 ? 0.0 : std::complex<double>(xr[it - 1], xim[it - 1]);
      hhat[static_cast<std::size_t>(it)][static_cast<std::size_t>(q)] = hv;
      // h_TT from the equation itself.
      htt[static_cast<std::size_t>(it)][static_cast<std::size_t>(q)] =
          xi * xi * hv - khat[static_cast<std::size_t>(it)][static_cast<std::size_t>(q)];
    }
  }
  Eigen::VectorXd hv(static_cast<Eigen::Index>(g->size())), httv = hv;
  std::vector<std::vector<double>> htt_cols(static_cast<std::size_t>(NY), std::vector<double>(static_cast<std::size_t>(NT)));
  for (int it = 0; it < NT; ++it) {
    std::vector<std::complex<double>> a, b;
    fft.inv(a, hhat[static_cast<std::size_t>(it)]);
    fft.inv(b, htt[static_cast<std::size_t>(it)]);
    for (int iy = 0; iy < NY; ++iy) {
      hv[at(iy, it)] = a[static_cast<std::size_t>(iy)].real();
      httv[at(iy, it)] = b[static_cast<std::size_t>(iy)].real();
      htt_cols[static_cast<std::size_t>(iy)][static_cast<std::size_t>(it)] = b[static_cast<std::size_t>(iy)].real();
    }
  }
  out.h = GridFunction(g, hv);

  Eigen::VectorXd f0(static_cast<Eigen::Index>(g->size()));
  for (int iy = 0; iy < NY; ++iy)
    for (int it = 0; it < NT; ++it) {
      double T = it * hT, acc = 0;
      for (int j = 0; j < S; ++j) {
        double s = (j + 0.5) / S;
        acc += s * detail::column_interp(htt_cols[static_cast<std::size_t>(iy)], hT, T * s);
      }
      f0[at(iy, it)] = acc / S;
    }
  out.f0 = GridFunction(g, f0);
  out.f = GridFunction(g, f0 / (P.n - 1));

  auto Lf = fuchsian_apply_L0_prime(out.f0);
  for (std::size_t idx = 0; idx < g->size(); ++idx) {
    auto r = static_cast<Eigen::Index>(idx);
    double T = g->point(idx)[1];
    if (T >= 4 * hT - 1e-12) out.residual = std::max(out.residual, std::abs(Lf.values[r] - kv[r]));
    if (g->multi_index(idx)[1] == 0) {
      out.boundary_identity = std::max(out.boundary_identity, std::abs(f0[r] + 0.5 * kv[r]));
      out.boundary_identity_f =
          std::max(out.boundary_identity_f, std::abs(out.f.values[r] - kv[r] / (2.0 - 2.0 * P.n)));
    }
  }
  out.within_tolerance = out.residual <= P.residual_tol;
  return out;
}

// ---------------------------------------------------------------------------
// Scaled regularity near T = 0

struct ScaledProbeOptions {
  double rho = 1.0;     ///< reference box is {1/2 <= T <= 1, |Y| <= rho/2}
  double y0 = 0.0;
  double alpha = 0.5;
  int reference_nodes = 17;
  int min_layers = 8;
  double bound_factor = 3.0;
};

struct ScaledProbeEntry {
  double eps = 0.0;
  double c1_norm = 0.0;       ///< sup|g_eps| + sup|grad g_eps| on the reference box
  double c1_alpha_norm = 0.0;  ///< C^1 norm plus [grad g_eps]_alpha
  double t_grad_sup = 0.0;     ///< sup T |grad g_eps| on the reference box (scale invariant)
  std::optional<double> f_alpha_norm;  ///< C^alpha norm of f_eps when f is supplied
};

struct ScaledProbeReport {
  std::vector<ScaledProbeEntry> entries;
  std::vector<double> skipped;
  std::vector<std::string> warnings;
  double c1_ratio = 1.0;  ///< max / min of the C^1 norms over the ladder
  double c1_alpha_ratio = 1.0;
  bool bounded = false;
  double sup_t_grad = 0.0;        ///< sup T |grad g| on the collar
  double t2_grad_alpha_norm = 0.0;  ///< C^alpha norm of T^2 grad g on the collar

  nlohmann::json to_json() const {
    nlohmann::json e = nlohmann::json::array();
    for (const auto& x : entries) {
      nlohmann::json j{{"eps", x.eps}, {"c1_norm", x.c1_norm}, {"c1_alpha_norm", x.c1_alpha_norm},
                       {"t_grad_sup", x.t_grad_sup}};
      if (x.f_alpha_norm) j["f_alpha_norm"] = *x.f_alpha_norm;
      e.push_back(j);
    }
    return {{"entries", e},         {"skipped", skipped},     {"warnings", warnings},
            {"c1_ratio", c1_ratio}, {"c1_alpha_ratio", c1_alpha_ratio}, {"bounded", bounded},
            {"sup_t_grad", sup_t_grad}, {"t2_grad_alpha_norm", t2_grad_alpha_norm}};
  }
};

namespace detail {

/// Bilinear interpolation on a 2-D strip grid, periodic in Y.
inline double strip_interp(const GridFunction& u, double Y, double T) {
  const Grid& g = *u.grid;
  const int NY = g.count(0), NT = g.count(1);
  double sy = (Y - g.lower(0)) / g.spacing(0);
  double st = std::clamp(T / g.spacing(1), 0.0, static_cast<double>(NT - 1));
  int iy = static_cast<int>(std::floor(sy));
  double fy = sy - iy;
  int it = std::min(static_cast<int>(std::floor(st)), NT - 2);
  double ft = st - it;
  auto val = [&](int a, int b) {
    int aa = ((a % NY) + NY) % NY;
    return u[g.linear_index({aa, b})];
  };
  return (1 - fy) * ((1 - ft) * val(iy, it) + ft * val(iy, it + 1)) +
         fy * ((1 - ft) * val(iy + 1, it) + ft * val(iy + 1, it + 1));
}

}  // namespace detail

/// Resamples g_eps(Y,T) = g(y0 + eps Y, eps T) on the fixed reference box and
/// compares its C^1 and C^{1+alpha} norms across the ladder.
inline ScaledProbeReport scaled_regularity_probe(const GridFunction& g, const std::optional<GridFunction>& f,
                                                 const std::vector<double>& eps_ladder,
                                                 const ScaledProbeOptions& opt = {}) {
  detail::require_strip(*g.grid, "scaled_regularity_probe");
  if (g.grid->dim() != 2) throw DomainError("scaled_regularity_probe: 2-D strip grid required");
  if (f && f->grid != g.grid) throw DomainError("scaled_regularity_probe: f must share the grid of g");
  if (eps_ladder.empty()) throw DomainError("scaled_regularity_probe: empty eps ladder");
  const Grid& grid = *g.grid;
  const double hT = grid.spacing(1);
  double emax = *std::max_element(eps_ladder.begin(), eps_ladder.end());
  if (2 * emax > grid.domain().theta + 1e-12)
    throw DomainError("scaled_regularity_probe: collar 0 < T <= 2 max(eps) exceeds the strip");

  ScaledProbeReport rep;
  auto ref = Grid::build(DomainSpec::rectangle({opt.rho, 0.5}, {-0.5 * opt.rho, 0.5}), opt.reference_nodes);
  for (double eps : eps_ladder) {
    if (0.5 * eps < opt.min_layers * hT) {
      rep.skipped.push_back(eps);
      rep.warnings.push_back("eps = " + std::to_string(eps) + " resolves fewer than " +
                             std::to_string(opt.min_layers) + " grid layers; skipped");
      continue;
    }
    auto resample = [&](const GridFunction& src) {
      return GridFunction::sample(ref, [&](const Point& x) {
        return detail::strip_interp(src, opt.y0 + eps * x[0], eps * x[1]);
      });
    };
    GridFunction ge = resample(g);
    ScaledProbeEntry e;
    e.eps = eps;
    auto der = fd_derivatives(ge);
    double sup_grad = 0;
    for (std::size_t i = 0; i < ref->size(); ++i) {
      double gn = der.gradient.row(static_cast<Eigen::Index>(i)).norm();
      sup_grad = std::max(sup_grad, gn);
      e.t_grad_sup = std::max(e.t_grad_sup, ref->point(i)[1] * gn);
    }
    e.c1_norm = ge.sup_abs() + sup_grad;
    e.c1_alpha_norm = holder_norm(ge, 1, opt.alpha);
    if (f) e.f_alpha_norm = holder_norm(resample(*f), 0, opt.alpha);
    rep.entries.push_back(e);
  }
  if (!rep.entries.empty()) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0, lo2 = lo, hi2 = 0;
    for (const auto& e : rep.entries) {
      lo = std::min(lo, e.c1_norm);
      hi = std::max(hi, e.c1_norm);
      lo2 = std::min(lo2, e.c1_alpha_norm);
      hi2 = std::max(hi2, e.c1_alpha_norm);
    }
    rep.c1_ratio = lo > 0 ? hi / lo : (hi > 0 ? std::numeric_limits<double>::infinity() : 1.0);
    rep.c1_alpha_ratio = lo2 > 0 ? hi2 / lo2 : (hi2 > 0 ? std::numeric_limits<double>::infinity() : 1.0);
    rep.bounded = rep.c1_ratio < opt.bound_factor && rep.c1_alpha_ratio < opt.bound_factor;
  }

  // Collar quantities on 0 < T <= 2 max(eps).
  auto der = fd_derivatives(g);
  std::vector<std::size_t> collar;
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    double T = grid.point(idx)[1];
    if (T > 0 && T <= 2 * emax + 1e-12) collar.push_back(idx);
  }
  Eigen::MatrixXd t2(static_cast<Eigen::Index>(collar.size()), 2);
  double sup_t2 = 0;
  for (std::size_t k = 0; k < collar.size(); ++k) {
    std::size_t idx = collar[k];
    double T = grid.point(idx)[1];
    Eigen::VectorXd gr = der.gradient.row(static_cast<Eigen::Index>(idx)).transpose();
    rep.sup_t_grad = std::max(rep.sup_t_grad, T * gr.norm());
    t2.row(static_cast<Eigen::Index>(k)) = (T * T * gr).transpose();
    sup_t2 = std::max(sup_t2, T * T * gr.norm());
  }
  rep.t2_grad_alpha_norm = sup_t2 + detail::scan_pairs(grid, collar, t2, opt.alpha, nullptr, 0.0, {}).value;
  return rep;
}

/// Strip field g(Y, T) = w(d = T) built from a radial result near one
/// boundary component.
inline GridFunction collar_field(const BlowupResult& res, const GridPtr& strip, const std::string& component = "outer") {
  detail::require_strip(*strip, "collar_field");
  std::vector<double> dd, ww;
  for (std::size_t i = 0; i < res.r.size(); ++i)
    if (res.component_of(i) == component) {
      dd.push_back(res.d[i]);
      ww.push_back(res.w[i]);
    }
  std::vector<std::size_t> order(dd.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dd[a] < dd[b]; });
  std::vector<double> ds, ws;
  for (std::size_t i : order) {
    ds.push_back(dd[i]);
    ws.push_back(ww[i]);
  }
  Eigen::VectorXd vals(static_cast<Eigen::Index>(strip->size()));
  for (std::size_t idx = 0; idx < strip->size(); ++idx)
    vals[static_cast<Eigen::Index>(idx)] = detail::interp_linear(ds, ws, strip->point(idx)[strip->dim() - 1]);
  return GridFunction(strip, vals);
}

}  // namespace schauder
