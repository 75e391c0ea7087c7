#pragma once

// Discrete Hölder-type norms on grid functions.
//
// All suprema run over active (non-exterior) nodes. Pair suprema are exact
// for up to `exact_pair_limit` nodes; larger grids fall back to seeded
// sampling stratified by distance decade, and the result says so.
// Derivative tensors are measured in the Euclidean (Frobenius) norm.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "schauder/geometry.hpp"

namespace schauder {

struct PairScanOptions {
  std::size_t exact_pair_limit = 10000;  ///< node count up to which all pairs are visited
  std::size_t sample_pairs = 2000000;    ///< total sampled pairs above the limit
  std::uint64_t seed = 12345;
};

struct PairScan {
  double value = 0.0;
  std::size_t pairs = 0;
  bool exact = true;
};

namespace detail {

/// sup over pairs P != Q of weight(P,Q) * |V(P) - V(Q)| / |P - Q|^alpha,
/// V given row-wise for `nodes`. `dist_w` (optional) holds d(P) per node and
/// enters as min(d(P), d(Q))^weight_exp.
inline PairScan scan_pairs(const Grid& g, const std::vector<std::size_t>& nodes,
                           const Eigen::MatrixXd& V, double alpha,
                           const Eigen::VectorXd* dist_w, double weight_exp,
                           const PairScanOptions& opt) {
  PairScan out;
  const std::size_t N = nodes.size();
  if (N < 2) return out;
  const int n = g.dim();
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(N));
  for (std::size_t i = 0; i < N; ++i) X.col(static_cast<Eigen::Index>(i)) = g.point(nodes[i]);
  bool any_periodic = false;
  for (int a = 0; a < n; ++a) any_periodic = any_periodic || g.periodic(a);

  auto eval = [&](std::size_t i, std::size_t j) {
    auto ei = static_cast<Eigen::Index>(i), ej = static_cast<Eigen::Index>(j);
    double dx = any_periodic ? g.displacement(X.col(ei), X.col(ej)).norm() : (X.col(ei) - X.col(ej)).norm();
    if (dx <= 0) return 0.0;
    double diff = V.cols() == 1 ? std::abs(V(ei, 0) - V(ej, 0)) : (V.row(ei) - V.row(ej)).norm();
    if (diff == 0) return 0.0;
    double w = 1.0;
    if (dist_w) w = std::pow(std::min((*dist_w)[ei], (*dist_w)[ej]), weight_exp);
    return w * diff / std::pow(dx, alpha);
  };

  if (N <= opt.exact_pair_limit) {
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = i + 1; j < N; ++j) out.value = std::max(out.value, eval(i, j));
    out.pairs = N * (N - 1) / 2;
    out.exact = true;
    return out;
  }

  // Stratified sampling: equal budgets per distance decade between h and the
  // diameter; the partner node is the lattice node nearest to P + r*e.
  std::vector<std::size_t> pos_of(g.size(), static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < N; ++i) pos_of[nodes[i]] = i;
  const double lo = std::log10(g.min_spacing());
  const double hi = std::log10(g.domain().diameter());
  const int d_lo = static_cast<int>(std::floor(lo)), d_hi = static_cast<int>(std::ceil(hi));
  const int decades = std::max(1, d_hi - d_lo);
  const std::size_t per = opt.sample_pairs / static_cast<std::size_t>(decades);
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<std::size_t> pick(0, N - 1);
  std::normal_distribution<double> gauss;
  for (int dec = d_lo; dec < d_lo + decades; ++dec) {
    std::uniform_real_distribution<double> logr(std::max<double>(dec, lo), std::min<double>(dec + 1, hi));
    for (std::size_t s = 0; s < per; ++s) {
      std::size_t i = pick(rng);
      Eigen::VectorXd e(n);
      for (int a = 0; a < n; ++a) e[a] = gauss(rng);
      double en = e.norm();
      if (en == 0) continue;
      Point q = X.col(static_cast<Eigen::Index>(i)) + std::pow(10.0, logr(rng)) * e / en;
      std::size_t qi = g.nearest_node(q);
      std::size_t j = pos_of[qi];
      if (j == static_cast<std::size_t>(-1) || j == i) continue;
      out.value = std::max(out.value, eval(i, j));
      ++out.pairs;
    }
  }
  out.exact = false;
  return out;
}

inline Eigen::MatrixXd active_rows(const Eigen::MatrixXd& M, const std::vector<std::size_t>& nodes) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(nodes.size()), M.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = M.row(static_cast<Eigen::Index>(nodes[i]));
  return out;
}

inline void check_alpha(double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw DomainError("Hölder exponent alpha must lie in (0,1)");
}

inline Eigen::VectorXd active_distances(const GridFunction& u) {
  auto d = distance_field(u.grid);
  Eigen::VectorXd out(static_cast<Eigen::Index>(u.grid->active_nodes().size()));
  for (std::size_t i = 0; i < u.grid->active_nodes().size(); ++i)
    out[static_cast<Eigen::Index>(i)] = std::max(0.0, d[u.grid->active_nodes()[i]]);
  return out;
}

/// Rows of the k-th derivative tensor (k = 0,1,2) on every node.
inline Eigen::MatrixXd derivative_tensor(const GridFunction& u, int k) {
  if (k == 0) return u.values;
  auto der = fd_derivatives(u);
  return k == 1 ? der.gradient : der.hessian;
}

}  // namespace detail

/// [u]_alpha = sup |u(P) - u(Q)| / |P - Q|^alpha.
inline PairScan holder_seminorm(const GridFunction& u, double alpha, const PairScanOptions& opt = {}) {
  detail::check_alpha(alpha);
  const auto& nodes = u.grid->active_nodes();
  if (nodes.size() < 2) throw DomainError("holder_seminorm needs at least 2 nodes");
  Eigen::MatrixXd V = detail::active_rows(u.values, nodes);
  return detail::scan_pairs(*u.grid, nodes, V, alpha, nullptr, 0.0, opt);
}

/// Hölder seminorm of a vector-valued field given row-wise on all nodes.
inline PairScan holder_seminorm_rows(const Grid& g, const Eigen::MatrixXd& rows, double alpha,
                                     const PairScanOptions& opt = {}) {
  detail::check_alpha(alpha);
  const auto& nodes = g.active_nodes();
  return detail::scan_pairs(g, nodes, detail::active_rows(rows, nodes), alpha, nullptr, 0.0, opt);
}

struct WeightedSeminorm {
  int k = 0;
  double alpha = 0.0;
  double sup_part = 0.0;     ///< sup d^k |grad^k u|
  double holder_part = 0.0;  ///< sup d_{PQ}^{k+alpha} |grad^k u(P) - grad^k u(Q)| / |P-Q|^alpha
  std::size_t pairs = 0;
  bool exact = true;
};

inline WeightedSeminorm weighted_seminorm(const GridFunction& u, int k, double alpha,
                                          const PairScanOptions& opt = {}) {
  if (k < 0 || k > 2) throw DomainError("weighted_seminorm: order k > 2 unsupported");
  detail::check_alpha(alpha);
  if (!u.grid->domain().has_boundary()) throw DomainError("weighted_seminorm: domain has no boundary");
  const auto& nodes = u.grid->active_nodes();
  Eigen::VectorXd d = detail::active_distances(u);
  Eigen::MatrixXd V = detail::active_rows(detail::derivative_tensor(u, k), nodes);
  WeightedSeminorm out{k, alpha, 0.0, 0.0, 0, true};
  for (Eigen::Index i = 0; i < V.rows(); ++i)
    out.sup_part = std::max(out.sup_part, std::pow(d[i], k) * V.row(i).norm());
  auto scan = detail::scan_pairs(*u.grid, nodes, V, alpha, &d, k + alpha, opt);
  out.holder_part = scan.value;
  out.pairs = scan.pairs;
  out.exact = scan.exact;
  return out;
}

struct SigmaSeminorm {
  double alpha = 0.0;
  double sigma = 0.0;
  double seminorm = 0.0;    ///< sup d_{PQ}^{alpha+sigma} |u(P)-u(Q)| / |P-Q|^alpha
  double sup_weighted = 0.0;  ///< sup |d^sigma u|
  std::size_t pairs = 0;
  bool exact = true;
};

inline SigmaSeminorm sigma_seminorm(const GridFunction& u, double alpha, double sigma,
                                    const PairScanOptions& opt = {}) {
  detail::check_alpha(alpha);
  if (!u.grid->domain().has_boundary()) throw DomainError("sigma_seminorm: domain has no boundary");
  const auto& nodes = u.grid->active_nodes();
  Eigen::VectorXd d = detail::active_distances(u);
  Eigen::MatrixXd V = detail::active_rows(u.values, nodes);
  SigmaSeminorm out{alpha, sigma, 0.0, 0.0, 0, true};
  for (Eigen::Index i = 0; i < V.rows(); ++i)
    out.sup_weighted = std::max(out.sup_weighted, std::pow(d[i], sigma) * std::abs(V(i, 0)));
  auto scan = detail::scan_pairs(*u.grid, nodes, V, alpha, &d, alpha + sigma, opt);
  out.seminorm = scan.value;
  out.pairs = scan.pairs;
  out.exact = scan.exact;
  return out;
}

/// Plain C^{k+alpha} norm: sum_{i<=k} sup|grad^i u| + [grad^k u]_alpha, k <= 2.
inline double holder_norm(const GridFunction& u, int k, double alpha, const PairScanOptions& opt = {}) {
  if (k < 0 || k > 2) throw DomainError("holder_norm: order k > 2 unsupported");
  detail::check_alpha(alpha);
  const auto& nodes = u.grid->active_nodes();
  std::vector<Eigen::MatrixXd> tensors{u.values};
  if (k > 0) {
    auto der = fd_derivatives(u);
    tensors.push_back(std::move(der.gradient));
    tensors.push_back(std::move(der.hessian));
  }
  double total = 0;
  for (int i = 0; i <= k; ++i) {
    double s = 0;
    for (std::size_t idx : nodes)
      s = std::max(s, tensors[static_cast<std::size_t>(i)].row(static_cast<Eigen::Index>(idx)).norm());
    total += s;
  }
  const Eigen::MatrixXd& top = tensors[static_cast<std::size_t>(k)];
  return total + detail::scan_pairs(*u.grid, nodes, detail::active_rows(top, nodes), alpha, nullptr, 0.0, opt).value;
}

/// Sharp norm sum_{j<=k} ||d^j u||_{C^{j+alpha}}; d stands in for the smooth
/// equivalent of the distance function.
inline double sharp_norm(const GridFunction& u, int k, double alpha, const PairScanOptions& opt = {}) {
  if (k < 0 || k > 2) throw DomainError("sharp_norm: order k > 2 unsupported");
  auto d = distance_field(u.grid);
  double total = 0;
  for (int j = 0; j <= k; ++j) {
    GridFunction w(u.grid, (d.values.array().pow(j) * u.values.array()).matrix());
    total += holder_norm(w, j, alpha, opt);
  }
  return total;
}

struct CampanatoOptions {
  std::size_t max_centres = 400;
  int radii = 10;
};

struct CampanatoResult {
  double value = 0.0;   ///< max over (centre, r) of  int_{Omega(x,r)} |u - mean|^2 / r^lambda
  double lambda = 0.0;
  bool in_holder_range = true;  ///< n < lambda < n + 2
  std::vector<std::size_t> centres;
  std::vector<double> radii;
  std::size_t argmax_centre = 0;
  double argmax_radius = 0.0;
};

/// h^n * sum over active Q with |Q - x| <= r of (u(Q) - mean)^2.
inline double campanato_local_integral(const GridFunction& u, std::size_t centre, double r) {
  const Grid& g = *u.grid;
  Point x = g.point(centre);
  double mean = 0, m2 = 0;
  std::size_t cnt = 0;
  for (std::size_t q : g.active_nodes()) {
    if (g.displacement(g.point(q), x).norm() > r) continue;
    ++cnt;
    double delta = u[q] - mean;
    mean += delta / static_cast<double>(cnt);
    m2 += delta * (u[q] - mean);
  }
  return g.cell_volume() * m2;
}

inline CampanatoResult campanato_seminorm(const GridFunction& u, double lambda,
                                          const CampanatoOptions& opt = {}) {
  const Grid& g = *u.grid;
  const int n = g.dim();
  CampanatoResult out;
  out.lambda = lambda;
  out.in_holder_range = lambda > n && lambda < n + 2;
  const double h = g.max_spacing();
  const double diam = g.domain().diameter();
  if (!(2 * h < diam) || opt.radii < 1) throw DomainError("campanato_seminorm: radius ladder is empty (grid too coarse)");
  if (opt.radii == 1) {
    out.radii.push_back(2 * h);
  } else {
    for (int i = 0; i < opt.radii; ++i)
      out.radii.push_back(2 * h * std::pow(diam / (2 * h), static_cast<double>(i) / (opt.radii - 1)));
  }
  const auto& nodes = g.active_nodes();
  const std::size_t stride = std::max<std::size_t>(1, (nodes.size() + opt.max_centres - 1) / opt.max_centres);
  for (std::size_t i = 0; i < nodes.size(); i += stride) out.centres.push_back(nodes[i]);

  std::vector<std::pair<double, std::size_t>> order(nodes.size());
  for (std::size_t c : out.centres) {
    Point x = g.point(c);
    for (std::size_t i = 0; i < nodes.size(); ++i)
      order[i] = {g.displacement(g.point(nodes[i]), x).norm(), nodes[i]};
    std::sort(order.begin(), order.end());
    double mean = 0, m2 = 0;
    std::size_t cnt = 0, pos = 0;
    for (double r : out.radii) {
      while (pos < order.size() && order[pos].first <= r) {
        double v = u[order[pos].second];
        ++cnt;
        double delta = v - mean;
        mean += delta / static_cast<double>(cnt);
        m2 += delta * (v - mean);
        ++pos;
      }
      double val = g.cell_volume() * m2 / std::pow(r, lambda);
      if (val > out.value) {
        out.value = val;
        out.argmax_centre = c;
        out.argmax_radius = r;
      }
    }
  }
  return out;
}

struct HolderFit {
  bool flat = false;          ///< u constant: exponent undefined
  double alpha_hat = 0.0;     ///< clipped slope
  double raw_slope = 0.0;
  double residual = 0.0;      ///< RMS of the log-log fit
  std::vector<double> edges;  ///< bin edges e_k
  std::vector<double> modulus;  ///< omega(e_k) = max |u(P)-u(Q)| over |P-Q| <= e_k
  std::size_t pairs = 0;
  bool exact = true;
};

struct HolderFitOptions {
  int bins = 16;
  PairScanOptions scan;
};

/// Least-squares slope of log omega(e) against log e over log-spaced edges
/// between 4h and diam/4.
inline HolderFit fit_holder_exponent(const GridFunction& u, const HolderFitOptions& opt = {}) {
  const Grid& g = *u.grid;
  const auto& nodes = g.active_nodes();
  const std::size_t N = nodes.size();
  HolderFit out;
  const double e_lo = 4 * g.max_spacing(), e_hi = g.domain().diameter() / 4;
  if (!(e_lo < e_hi) || opt.bins < 8) throw DomainError("fit_holder_exponent: fewer than 8 distance bins");
  for (int k = 0; k < opt.bins; ++k)
    out.edges.push_back(e_lo * std::pow(e_hi / e_lo, static_cast<double>(k) / (opt.bins - 1)));
  std::vector<double> binmax(static_cast<std::size_t>(opt.bins), 0.0);
  const double log_lo = std::log(e_lo), log_step = std::log(e_hi / e_lo) / (opt.bins - 1);

  double umin = 1e300, umax = -1e300;
  for (std::size_t idx : nodes) {
    umin = std::min(umin, u[idx]);
    umax = std::max(umax, u[idx]);
  }
  if (N < 2 || umax - umin <= 1e-14 * std::max(1.0, std::abs(umax))) {
    out.flat = true;
    return out;
  }

  auto record = [&](std::size_t p, std::size_t q) {
    double dist = g.displacement(g.point(p), g.point(q)).norm();
    if (dist > e_hi * (1 + 1e-12) || dist <= 0) return;
    int b = dist <= e_lo ? 0 : static_cast<int>(std::ceil((std::log(dist) - log_lo) / log_step - 1e-9));
    b = std::clamp(b, 0, opt.bins - 1);
    auto ub = static_cast<std::size_t>(b);
    binmax[ub] = std::max(binmax[ub], std::abs(u[p] - u[q]));
    ++out.pairs;
  };

  if (N <= opt.scan.exact_pair_limit) {
    if (g.dim() == 1 && !g.periodic(0)) {
      // 1-D fast path: pairs ordered by index offset, offsets beyond e_hi skipped.
      const auto maxoff = static_cast<std::size_t>(std::floor(e_hi / g.spacing(0) * (1 + 1e-12)));
      for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N && j - i <= maxoff; ++j) record(nodes[i], nodes[j]);
    } else {
      for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) record(nodes[i], nodes[j]);
    }
  } else {
    out.exact = false;
    std::mt19937_64 rng(opt.scan.seed);
    std::uniform_int_distribution<std::size_t> pick(0, N - 1);
    std::uniform_real_distribution<double> logr(std::log(g.min_spacing()), std::log(e_hi));
    std::normal_distribution<double> gauss;
    for (std::size_t s = 0; s < opt.scan.sample_pairs; ++s) {
      std::size_t p = nodes[pick(rng)];
      Eigen::VectorXd e(g.dim());
      for (int a = 0; a < g.dim(); ++a) e[a] = gauss(rng);
      if (e.norm() == 0) continue;
      std::size_t q = g.nearest_node(g.point(p) + std::exp(logr(rng)) * e / e.norm());
      if (q == p || !g.active(q)) continue;
      record(p, q);
    }
  }

  double running = 0;
  std::vector<double> xs, ys;
  for (int k = 0; k < opt.bins; ++k) {
    running = std::max(running, binmax[static_cast<std::size_t>(k)]);
    out.modulus.push_back(running);
    if (running > 0) {
      xs.push_back(std::log(out.edges[static_cast<std::size_t>(k)]));
      ys.push_back(std::log(running));
    }
  }
  if (xs.size() < 8) throw DomainError("fit_holder_exponent: fewer than 8 populated distance bins");
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  double icpt = (sy - slope * sx) / m;
  double ss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double r = ys[i] - (icpt + slope * xs[i]);
    ss += r * r;
  }
  out.raw_slope = slope;
  out.residual = std::sqrt(ss / m);
  out.alpha_hat = std::clamp(slope, 1e-6, 1.0);
  return out;
}

struct InterpolationCheck {
  double epsilon = 0.0;
  double theta = 0.0;
  double c_eps = 0.0;
  double lhs = 0.0;          ///< [u]*_1
  double weighted_2 = 0.0;   ///< [u]*_2
  double sup_u = 0.0;
  double rhs = 0.0;          ///< eps [u]*_2 + C_eps sup|u|
  double margin = 0.0;       ///< rhs - lhs
  bool holds = false;
};

/// [u]*_1 <= eps [u]*_2 + C_eps sup|u| with theta = min(eps/4, 1/2), C_eps = 2/theta.
inline InterpolationCheck interpolation_check(const GridFunction& u, double epsilon) {
  if (!(epsilon > 0)) throw DomainError("interpolation_check: epsilon must be > 0");
  if (!u.gradient || !u.hessian)
    throw DomainError("interpolation_check: exact gradient and Hessian channels required");
  const Grid& g = *u.grid;
  auto d = distance_field(u.grid);
  InterpolationCheck out;
  out.epsilon = epsilon;
  out.theta = std::min(epsilon / 4, 0.5);
  out.c_eps = 2 / out.theta;
  for (std::size_t idx : g.active_nodes()) {
    auto r = static_cast<Eigen::Index>(idx);
    double di = std::max(0.0, d[idx]);
    out.lhs = std::max(out.lhs, di * u.gradient->row(r).norm());
    out.weighted_2 = std::max(out.weighted_2, di * di * u.hessian->row(r).norm());
    out.sup_u = std::max(out.sup_u, std::abs(u[idx]));
  }
  out.rhs = epsilon * out.weighted_2 + out.c_eps * out.sup_u;
  out.margin = out.rhs - out.lhs;
  out.holds = out.margin >= 0;
  return out;
}

/// Collected norms of one field; unset members were not requested.
struct HolderReport {
  std::optional<double> alpha;
  std::optional<double> seminorm;
  std::optional<double> sup_norm;
  std::optional<double> weighted_k;        ///< [u]*_k
  std::optional<double> weighted_k_alpha;  ///< [u]*_{k+alpha}
  std::optional<int> weighted_order;
  std::optional<double> sigma_seminorm;
  std::optional<double> sigma;
  std::optional<double> sigma_sup;
  std::optional<double> campanato;
  std::optional<double> campanato_lambda;
  std::optional<double> fitted_alpha;
  std::optional<double> fit_residual;
  std::optional<bool> fit_flat;
  std::optional<std::size_t> pairs_evaluated;
  std::optional<bool> pair_scan_exact;

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    auto put = [&](const char* key, const auto& opt) {
      if (opt) j[key] = *opt;
    };
    put("alpha", alpha);
    put("seminorm", seminorm);
    put("sup_norm", sup_norm);
    put("weighted_k", weighted_k);
    put("weighted_k_alpha", weighted_k_alpha);
    put("weighted_order", weighted_order);
    put("sigma_seminorm", sigma_seminorm);
    put("sigma", sigma);
    put("sigma_sup", sigma_sup);
    put("campanato", campanato);
    put("campanato_lambda", campanato_lambda);
    put("fitted_alpha", fitted_alpha);
    put("fit_residual", fit_residual);
    put("fit_flat", fit_flat);
    put("pairs_evaluated", pairs_evaluated);
    put("pair_scan_exact", pair_scan_exact);
    return j;
  }
};

}  // namespace schauder
