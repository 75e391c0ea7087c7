#pragma once

// Newtonian potential u = g * f with g the fundamental solution normalised
// so that Laplace(g) = delta (hence Laplace(u) = f and u < 0 for positive
// mass when n >= 3), the Hessian representation w_ij, and empirical probes
// of the interior estimates.

#include <json.hpp>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "schauder/geometry.hpp"
#include "schauder/holder_norms.hpp"

namespace schauder {

/// Volume of the unit ball in R^n.
inline double unit_ball_volume(int n) { return std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1); }

/// g(r) = r^{2-n} / ((2-n) n omega_n) for n >= 3, ln(r) / (2 pi) for n = 2.
inline double newton_kernel(int n, double r) {
  if (n < 2) throw DomainError("newton_kernel: n >= 2 required");
  if (n == 2) return std::log(r) / (2 * M_PI);
  return std::pow(r, 2 - n) / ((2 - n) * n * unit_ball_volume(n));
}

/// d g / d x_i at displacement x = P - Q.
inline Eigen::VectorXd newton_kernel_gradient(const Eigen::VectorXd& x) {
  const auto n = static_cast<int>(x.size());
  double r = x.norm();
  return x / (n * unit_ball_volume(n) * std::pow(r, n));
}

/// d^2 g / d x_i d x_j = (delta_ij |x|^2 - n x_i x_j) / (n omega_n |x|^{n+2}).
inline Eigen::MatrixXd newton_kernel_hessian(const Eigen::VectorXd& x) {
  const auto n = static_cast<int>(x.size());
  double r2 = x.squaredNorm();
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n) * r2 - n * x * x.transpose();
  return H / (n * unit_ball_volume(n) * std::pow(r2, 0.5 * (n + 2)));
}

/// Integral of g over the ball of radius delta about its pole.
inline double newton_kernel_ball_integral(int n, double delta) {
  if (n == 2) return delta * delta * std::log(delta) / 2 - delta * delta / 4;
  return delta * delta / (2.0 * (2 - n));
}

/// f at an arbitrary point by multilinear interpolation of the lattice
/// values (exterior and out-of-box nodes count as 0).
inline double interpolate(const GridFunction& f, const Point& x) {
  const Grid& g = *f.grid;
  const int n = g.dim();
  std::vector<int> base(static_cast<std::size_t>(n));
  std::vector<double> frac(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    double t = (x[a] - g.lower(a)) / g.spacing(a);
    double fl = std::floor(t);
    base[static_cast<std::size_t>(a)] = static_cast<int>(fl);
    frac[static_cast<std::size_t>(a)] = t - fl;
  }
  double acc = 0;
  for (int corner = 0; corner < (1 << n); ++corner) {
    double w = 1;
    std::vector<int> m(static_cast<std::size_t>(n));
    bool inside = true;
    for (int a = 0; a < n; ++a) {
      auto ua = static_cast<std::size_t>(a);
      int bit = (corner >> a) & 1;
      w *= bit ? frac[ua] : 1 - frac[ua];
      int pos = base[ua] + bit;
      if (g.periodic(a)) {
        pos %= g.count(a);
        if (pos < 0) pos += g.count(a);
      } else if (pos < 0 || pos >= g.count(a)) {
        inside = false;
      }
      m[ua] = pos;
    }
    if (w == 0 || !inside) continue;
    std::size_t idx = g.linear_index(m);
    if (g.active(idx)) acc += w * f[idx];
  }
  return acc;
}

struct PotentialValue {
  double value = 0.0;
  bool exterior = false;  ///< P outside the support's closure (harmonic regime)
};

struct PotentialOptions {
  double delta_cells = 3.0;  ///< singular neighbourhood radius in units of h
};

/// u(P) = int g(P,Q) f(Q) dQ by the midpoint rule, with f(P) 1_{B_delta(P)}
/// split off and integrated in closed form.
inline PotentialValue newtonian_potential(const GridFunction& f, const Point& P,
                                          const PotentialOptions& opt = {}) {
  const Grid& g = *f.grid;
  const int n = g.dim();
  if (n < 2) throw DomainError("newtonian_potential: n >= 2 required");
  if (P.size() != n) throw DomainError("newtonian_potential: point dimension mismatch");
  const double h = g.max_spacing();
  const double delta = opt.delta_cells * h;
  const double vol = g.cell_volume();
  PotentialValue out;
  out.exterior = !g.domain().contains(P);
  const double fP = out.exterior ? 0.0 : interpolate(f, P);

  double acc = 0;
  for (std::size_t q : g.active_nodes()) {
    Point dq = g.point(q) - P;
    double r = dq.norm();
    if (r <= 0) continue;
    if (r > delta)
      acc += newton_kernel(n, r) * f[q];
    else
      acc += newton_kernel(n, r) * (f[q] - fP);
  }
  if (fP != 0) {
    // Lattice nodes of B_delta(P) outside the active set carry f = 0.
    const int reach = static_cast<int>(std::ceil(opt.delta_cells)) + 1;
    std::vector<int> lo(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a)
      lo[static_cast<std::size_t>(a)] = static_cast<int>(std::floor((P[a] - g.lower(a)) / g.spacing(a))) - reach;
    const int span = 2 * reach + 2;
    std::vector<int> off(static_cast<std::size_t>(n), 0);
    std::vector<int> m(static_cast<std::size_t>(n));
    while (true) {
      Point q(n);
      bool in_box = true;
      for (int a = 0; a < n; ++a) {
        auto ua = static_cast<std::size_t>(a);
        m[ua] = lo[ua] + off[ua];
        q[a] = g.lower(a) + m[ua] * g.spacing(a);
        if (m[ua] < 0 || m[ua] >= g.count(a)) in_box = false;
      }
      double r = (q - P).norm();
      if (r > 0 && r <= delta && (!in_box || !g.active(g.linear_index(m))))
        acc += newton_kernel(n, r) * (-fP);
      int a = 0;
      while (a < n && ++off[static_cast<std::size_t>(a)] == span) off[static_cast<std::size_t>(a++)] = 0;
      if (a == n) break;
    }
  }
  out.value = acc * vol + fP * newton_kernel_ball_integral(n, delta);
  return out;
}

/// Radial reduction for f = f(r) supported in B_support:
/// u(rho) = int_0^support f(r) n omega_n r^{n-1} g(max(rho, r)) dr, midpoint rule.
inline double newtonian_potential_radial(int n, const std::function<double(double)>& f, double support,
                                         double rho, int cells) {
  if (cells < 1 || !(support > 0)) throw DomainError("newtonian_potential_radial: bad quadrature");
  const double dr = support / cells;
  const double area = n * unit_ball_volume(n);
  double acc = 0;
  for (int i = 0; i < cells; ++i) {
    double r = (i + 0.5) * dr;
    acc += f(r) * area * std::pow(r, n - 1) * newton_kernel(n, std::max(rho, r));
  }
  return acc * dr;
}

namespace detail {

struct SphereQuad {
  std::vector<Point> nodes;    ///< unit outward normals
  std::vector<double> weights;  ///< surface weights on the unit sphere
};

inline SphereQuad sphere_quadrature(int n, int resolution) {
  SphereQuad s;
  if (n == 2) {
    for (int k = 0; k < 4 * resolution; ++k) {
      double t = 2 * M_PI * (k + 0.5) / (4 * resolution);
      Point p(2);
      p << std::cos(t), std::sin(t);
      s.nodes.push_back(p);
      s.weights.push_back(2 * M_PI / (4 * resolution));
    }
  } else if (n == 3) {
    const int nt = resolution, np = 2 * resolution;
    const double dt = M_PI / nt, dp = 2 * M_PI / np;
    for (int i = 0; i < nt; ++i) {
      double t = (i + 0.5) * dt;
      // Exact band area instead of sin(t) dt keeps the total at 4 pi.
      double band = (std::cos(i * dt) - std::cos((i + 1) * dt)) * dp;
      for (int j = 0; j < np; ++j) {
        double p = (j + 0.5) * dp;
        Point x(3);
        x << std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t);
        s.nodes.push_back(x);
        s.weights.push_back(band);
      }
    }
  } else {
    throw DomainError("sphere quadrature implemented for n = 2, 3");
  }
  return s;
}

}  // namespace detail

struct WijOptions {
  int sphere_resolution = 96;
};

/// w_ij(P) = sum_Q d_ij g(P-Q) (f(Q) - f(P)) h^n - f(P) oint d_i g(P-Q) n_j ds(Q).
inline Eigen::MatrixXd potential_hessian_wij(const GridFunction& f, const Point& P, const WijOptions& opt = {}) {
  const Grid& g = *f.grid;
  const DomainSpec& dom = g.domain();
  const int n = g.dim();
  if (dom.kind != DomainKind::ball) throw DomainError("potential_hessian_wij: ball domain required");
  if (!dom.contains(P) || dom.distance(P) < 2 * g.max_spacing())
    throw DomainError("potential_hessian_wij: P within 2h of the boundary (boundary quadrature unresolved)");
  const double fP = interpolate(f, P);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t q : g.active_nodes()) {
    Eigen::VectorXd x = P - g.point(q);
    if (x.norm() <= 0) continue;
    double df = f[q] - fP;
    if (df != 0) W += newton_kernel_hessian(x) * df;
  }
  W *= g.cell_volume();
  if (fP != 0) {
    auto sq = detail::sphere_quadrature(n, opt.sphere_resolution);
    const Point c = dom.center_point();
    const double R = dom.r0;
    const double scale = std::pow(R, n - 1);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < sq.nodes.size(); ++k) {
      Point Q = c + R * sq.nodes[k];
      B += newton_kernel_gradient(P - Q) * sq.nodes[k].transpose() * (sq.weights[k] * scale);
    }
    W -= fP * B;
  }
  return W;
}

/// Gradient of the potential, grad u(P) = sum_{Q != P} d g(P-Q) f(Q) h^n.
inline Eigen::VectorXd newtonian_potential_gradient(const GridFunction& f, const Point& P) {
  const Grid& g = *f.grid;
  Eigen::VectorXd G = Eigen::VectorXd::Zero(g.dim());
  for (std::size_t q : g.active_nodes()) {
    Eigen::VectorXd x = P - g.point(q);
    if (x.norm() <= 0 || f[q] == 0) continue;
    G += newton_kernel_gradient(x) * f[q];
  }
  return G * g.cell_volume();
}

struct PotentialProbeReport {
  double R = 0.0;
  double alpha = 0.0;
  std::size_t nodes_in_ball = 0;
  double sup_u = 0.0;
  double sup_grad_u = 0.0;
  double sup_hess_u = 0.0;
  double holder_hess_u = 0.0;
  double sup_f = 0.0;
  double holder_f = 0.0;
  std::optional<double> c_emp;  ///< (sup|D^2u| + [D^2u]_a) / (sup|f| + R^a [f]_a); absent when f = 0
  double first_order_sup = 0.0;  ///< sup_{B_R}(|u| + |grad u|) for the density f 1_{B_R}
  std::optional<double> first_order_ratio;  ///< first_order_sup / (R^2 sup f)

  nlohmann::json to_json() const {
    nlohmann::json j{{"R", R},
                     {"alpha", alpha},
                     {"nodes_in_ball", nodes_in_ball},
                     {"sup_u", sup_u},
                     {"sup_grad_u", sup_grad_u},
                     {"sup_hess_u", sup_hess_u},
                     {"holder_hess_u", holder_hess_u},
                     {"sup_f", sup_f},
                     {"holder_f", holder_f},
                     {"first_order_sup", first_order_sup}};
    if (c_emp) j["c_emp"] = *c_emp;
    if (first_order_ratio) j["first_order_ratio"] = *first_order_ratio;
    return j;
  }
};

/// Interior estimate probe on B_R(c) for a density f sampled on B_2R(c).
inline PotentialProbeReport interior_estimate_probe(const GridFunction& f, double alpha, double R,
                                                    const WijOptions& wopt = {}) {
  detail::check_alpha(alpha);
  const Grid& g = *f.grid;
  const DomainSpec& dom = g.domain();
  if (dom.kind != DomainKind::ball || std::abs(dom.r0 - 2 * R) > 1e-12 * R)
    throw DomainError("interior_estimate_probe: density must live on a ball of radius 2R");
  const int n = g.dim();
  const Point c = dom.center_point();
  PotentialProbeReport rep;
  rep.R = R;
  rep.alpha = alpha;

  std::vector<std::size_t> inner;
  for (std::size_t idx : g.active_nodes())
    if ((g.point(idx) - c).norm() < R) inner.push_back(idx);
  rep.nodes_in_ball = inner.size();
  if (inner.size() < 2) throw DomainError("interior_estimate_probe: fewer than 2 nodes in B_R");

  GridFunction f_inner = f;
  for (std::size_t idx : g.active_nodes())
    if ((g.point(idx) - c).norm() >= R) f_inner.values[static_cast<Eigen::Index>(idx)] = 0;

  Eigen::MatrixXd hess(static_cast<Eigen::Index>(inner.size()), n * n);
  for (std::size_t k = 0; k < inner.size(); ++k) {
    Point P = g.point(inner[k]);
    Eigen::MatrixXd W = potential_hessian_wij(f, P, wopt);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) hess(static_cast<Eigen::Index>(k), i * n + j) = W(i, j);
    rep.sup_hess_u = std::max(rep.sup_hess_u, W.norm());
    rep.sup_u = std::max(rep.sup_u, std::abs(newtonian_potential(f, P).value));
    rep.sup_grad_u = std::max(rep.sup_grad_u, newtonian_potential_gradient(f, P).norm());
    double u1 = std::abs(newtonian_potential(f_inner, P).value);
    double g1 = newtonian_potential_gradient(f_inner, P).norm();
    rep.first_order_sup = std::max(rep.first_order_sup, u1 + g1);
  }
  rep.holder_hess_u = detail::scan_pairs(g, inner, hess, alpha, nullptr, 0.0, {}).value;
  rep.sup_f = f.sup_abs();
  rep.holder_f = holder_seminorm(f, alpha).value;
  double denom = rep.sup_f + std::pow(R, alpha) * rep.holder_f;
  if (denom > 0) rep.c_emp = (rep.sup_hess_u + rep.holder_hess_u) / denom;
  double sup_f_inner = f_inner.sup_abs();
  if (sup_f_inner > 0) rep.first_order_ratio = rep.first_order_sup / (R * R * sup_f_inner);
  return rep;
}

/// Builds the probe grid (B_2R about the origin, `cells` per axis) for an
/// analytic density and runs the probe.
inline PotentialProbeReport interior_estimate_probe(const std::function<double(const Point&)>& f, int n,
                                                    double alpha, double R, int cells = 25,
                                                    const WijOptions& wopt = {}) {
  auto grid = Grid::build(DomainSpec::ball(n, 2 * R), cells);
  return interior_estimate_probe(GridFunction::sample(grid, f), alpha, R, wopt);
}

struct HarmonicDecayReport {
  double R = 0.0;
  std::vector<double> radii;
  std::vector<double> second_moment;  ///< F(r)
  std::vector<double> ratios;         ///< F(r) (R/r)^{n+2} / F(R)
  double max_ratio = 0.0;
  double laplacian_residual = 0.0;    ///< sup |Laplace_h u| on interior nodes of B_R
  double bound = 0.0;
  bool passes = false;
};

/// F(r) = h^n sum over active Q in B_r(x0) of (u - mean)^2.
inline double ball_second_moment(const GridFunction& u, const Point& x0, double r) {
  const Grid& g = *u.grid;
  double mean = 0, m2 = 0;
  std::size_t cnt = 0;
  for (std::size_t q : g.active_nodes()) {
    if ((g.point(q) - x0).norm() > r) continue;
    ++cnt;
    double d = u[q] - mean;
    mean += d / static_cast<double>(cnt);
    m2 += d * (u[q] - mean);
  }
  return m2 * g.cell_volume();
}

inline HarmonicDecayReport harmonic_decay_probe(const GridFunction& u, const Point& x0, double R,
                                                const std::vector<double>& radii, double harmonic_tol = 1e-8,
                                                double bound = 10.0) {
  const Grid& g = *u.grid;
  const int n = g.dim();
  HarmonicDecayReport rep;
  rep.R = R;
  rep.bound = bound;
  for (std::size_t idx : g.active_nodes()) {
    if (!g.interior(idx) || (g.point(idx) - x0).norm() > R) continue;
    double lap = 0;
    for (int a = 0; a < n; ++a) {
      double h = g.spacing(a);
      lap += (u[*g.neighbor(idx, a, 1)] - 2 * u[idx] + u[*g.neighbor(idx, a, -1)]) / (h * h);
    }
    rep.laplacian_residual = std::max(rep.laplacian_residual, std::abs(lap));
  }
  double scale = std::max(1.0, u.sup_abs());
  if (rep.laplacian_residual > harmonic_tol * scale)
    throw DomainError("harmonic_decay_probe: u is not discretely harmonic (|Laplace_h u| = " +
                      std::to_string(rep.laplacian_residual) + ")");
  const double FR = ball_second_moment(u, x0, R);
  for (double r : radii) {
    if (!(r > 0 && r <= R)) throw DomainError("harmonic_decay_probe: radii must lie in (0, R]");
    double F = ball_second_moment(u, x0, r);
    double ratio = FR > 0 ? F * std::pow(R / r, n + 2) / FR : 0.0;
    rep.radii.push_back(r);
    rep.second_moment.push_back(F);
    rep.ratios.push_back(ratio);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
  }
  rep.passes = rep.max_ratio <= bound;
  return rep;
}

}  // namespace schauder
