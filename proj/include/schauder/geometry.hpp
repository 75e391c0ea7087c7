#pragma once

// Domains, structured grids and the fields sampled on them.
//
// Every grid is a uniform tensor lattice. Rectangles, tori and strips are
// node-centred on their box; balls and annuli are cell-centred on their
// bounding box, so no node lands exactly on a curved boundary. Curved
// boundaries are represented only through node classification plus the
// closed-form distance function.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "schauder/core/errors.hpp"
#include "schauder/core/kv_config.hpp"

namespace schauder {

using Point = Eigen::VectorXd;

enum class DomainKind { rectangle, torus, ball, annulus, strip };

inline std::string to_string(DomainKind k) {
  switch (k) {
    case DomainKind::rectangle: return "rectangle";
    case DomainKind::torus: return "torus";
    case DomainKind::ball: return "ball";
    case DomainKind::annulus: return "annulus";
    case DomainKind::strip: return "strip";
  }
  return "?";
}

inline DomainKind domain_kind_from_string(const std::string& s) {
  if (s == "rectangle") return DomainKind::rectangle;
  if (s == "torus") return DomainKind::torus;
  if (s == "ball") return DomainKind::ball;
  if (s == "annulus") return DomainKind::annulus;
  if (s == "strip") return DomainKind::strip;
  throw DomainError("unknown domain kind '" + s + "'");
}

/// Geometric description of a domain.
///
/// rectangle: box [origin, origin + sides]; torus: periodic box of the same
/// form; ball: B_{r0}(center); annulus: r_in < |x - center| < r_out;
/// strip: tangential coordinates Y in [-theta, theta) (periodic, period
/// 2 theta) and normal coordinate T in [0, theta], the last axis. The strip's
/// physical boundary is T = 0, so its distance function is T.
struct DomainSpec {
  DomainKind kind = DomainKind::rectangle;
  int n = 2;
  std::vector<double> sides;
  std::vector<double> origin;
  std::vector<double> center;
  double r0 = 1.0;
  double r_in = 0.5;
  double r_out = 1.0;
  double theta = 1.0;

  static DomainSpec rectangle(std::vector<double> sides, std::vector<double> origin = {}) {
    DomainSpec d;
    d.kind = DomainKind::rectangle;
    d.n = static_cast<int>(sides.size());
    d.sides = std::move(sides);
    d.origin = origin.empty() ? std::vector<double>(d.sides.size(), 0.0) : std::move(origin);
    d.validate();
    return d;
  }
  static DomainSpec torus(int n, double side = 2.0 * M_PI) {
    DomainSpec d;
    d.kind = DomainKind::torus;
    d.n = n;
    d.sides.assign(static_cast<std::size_t>(n), side);
    d.origin.assign(static_cast<std::size_t>(n), 0.0);
    d.validate();
    return d;
  }
  static DomainSpec ball(int n, double r0, std::vector<double> center = {}) {
    DomainSpec d;
    d.kind = DomainKind::ball;
    d.n = n;
    d.r0 = r0;
    d.center = center.empty() ? std::vector<double>(static_cast<std::size_t>(n), 0.0)
                              : std::move(center);
    d.validate();
    return d;
  }
  static DomainSpec annulus(int n, double r_in, double r_out, std::vector<double> center = {}) {
    DomainSpec d;
    d.kind = DomainKind::annulus;
    d.n = n;
    d.r_in = r_in;
    d.r_out = r_out;
    d.center = center.empty() ? std::vector<double>(static_cast<std::size_t>(n), 0.0)
                              : std::move(center);
    d.validate();
    return d;
  }
  static DomainSpec strip(double theta, int n = 2) {
    DomainSpec d;
    d.kind = DomainKind::strip;
    d.n = n;
    d.theta = theta;
    d.validate();
    return d;
  }

  void validate() const {
    auto fail = [&](const std::string& why) {
      throw DomainError(to_string(kind) + " domain: " + why);
    };
    if (n < 1) fail("dimension n must be >= 1");
    switch (kind) {
      case DomainKind::rectangle:
      case DomainKind::torus:
        if (static_cast<int>(sides.size()) != n) fail("need one side length per axis");
        if (static_cast<int>(origin.size()) != n) fail("need one origin coordinate per axis");
        for (double s : sides)
          if (!(s > 0)) fail("side lengths must be strictly positive");
        break;
      case DomainKind::ball:
        if (!(r0 > 0)) fail("radius r0 must be strictly positive");
        if (static_cast<int>(center.size()) != n) fail("center must have n coordinates");
        break;
      case DomainKind::annulus:
        if (!(r_in > 0) || !(r_out > 0)) fail("radii must be strictly positive");
        if (!(r_in < r_out)) fail("require r_in < r_out");
        if (static_cast<int>(center.size()) != n) fail("center must have n coordinates");
        if (n < 2) fail("annulus needs n >= 2");
        break;
      case DomainKind::strip:
        if (!(theta > 0)) fail("strip height theta must be strictly positive");
        if (n < 2) fail("strip needs n >= 2 (tangential + normal)");
        break;
    }
  }

  bool has_boundary() const { return kind != DomainKind::torus; }

  Point center_point() const {
    Point c(n);
    for (int i = 0; i < n; ++i) c[i] = center.empty() ? 0.0 : center[static_cast<std::size_t>(i)];
    return c;
  }

  /// Indicator of the open domain.
  bool contains(const Point& x) const {
    switch (kind) {
      case DomainKind::rectangle:
        for (int i = 0; i < n; ++i) {
          double lo = origin[static_cast<std::size_t>(i)];
          double hi = lo + sides[static_cast<std::size_t>(i)];
          if (!(x[i] > lo && x[i] < hi)) return false;
        }
        return true;
      case DomainKind::torus: return true;
      case DomainKind::ball: return (x - center_point()).norm() < r0;
      case DomainKind::annulus: {
        double r = (x - center_point()).norm();
        return r > r_in && r < r_out;
      }
      case DomainKind::strip: return x[n - 1] > 0 && x[n - 1] < theta;
    }
    return false;
  }

  /// Closed-form distance to the boundary (to T = 0 for the strip).
  double distance(const Point& x) const {
    switch (kind) {
      case DomainKind::rectangle: {
        double d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
          double lo = origin[static_cast<std::size_t>(i)];
          double hi = lo + sides[static_cast<std::size_t>(i)];
          d = std::min({d, x[i] - lo, hi - x[i]});
        }
        return d;
      }
      case DomainKind::torus: throw DomainError("torus has no boundary");
      case DomainKind::ball: return r0 - (x - center_point()).norm();
      case DomainKind::annulus: {
        double r = (x - center_point()).norm();
        return std::min(r - r_in, r_out - r);
      }
      case DomainKind::strip: return x[n - 1];
    }
    return 0.0;
  }

  double diameter() const {
    switch (kind) {
      case DomainKind::rectangle:
      case DomainKind::torus: {
        double s = 0;
        for (double v : sides) s += v * v;
        return std::sqrt(s);
      }
      case DomainKind::ball: return 2 * r0;
      case DomainKind::annulus: return 2 * r_out;
      case DomainKind::strip: return std::sqrt(4 * theta * theta * (n - 1) + theta * theta);
    }
    return 0.0;
  }

  /// Reads fields kind, n, r0, r_in, r_out, theta, sides, origin, center.
  static DomainSpec from_config(const KeyValueConfig& cfg) {
    DomainSpec d;
    if (!cfg.has("kind")) throw ConfigError(0, "kind", "missing domain kind");
    try {
      d.kind = domain_kind_from_string(cfg.get_string("kind"));
    } catch (const DomainError& e) {
      throw ConfigError(cfg.line_of("kind"), "kind", e.what());
    }
    if (cfg.has("sides")) {
      d.sides = cfg.get_list("sides");
      d.n = static_cast<int>(cfg.get_int("n", static_cast<long>(d.sides.size())));
    } else {
      d.n = static_cast<int>(cfg.get_int("n", 2));
    }
    d.r0 = cfg.get_double("r0", d.r0);
    d.r_in = cfg.get_double("r_in", d.r_in);
    d.r_out = cfg.get_double("r_out", d.r_out);
    d.theta = cfg.get_double("theta", d.theta);
    auto un = static_cast<std::size_t>(d.n);
    if (d.kind == DomainKind::torus && d.sides.empty()) d.sides.assign(un, 2.0 * M_PI);
    if (d.kind == DomainKind::torus || d.kind == DomainKind::rectangle) {
      if (d.sides.size() == 1 && un > 1) d.sides.assign(un, d.sides[0]);
      d.origin = cfg.get_list("origin", std::vector<double>(un, 0.0));
    }
    if (d.kind == DomainKind::ball || d.kind == DomainKind::annulus)
      d.center = cfg.get_list("center", std::vector<double>(un, 0.0));
    try {
      d.validate();
    } catch (const DomainError& e) {
      throw ConfigError(cfg.line_of("kind"), "kind", e.what());
    }
    return d;
  }

  std::string to_config() const {
    std::ostringstream out;
    out.precision(17);
    auto list = [&](const std::vector<double>& v) {
      for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v[i];
    };
    out << "kind = " << to_string(kind) << "\n";
    out << "n = " << n << "\n";
    switch (kind) {
      case DomainKind::rectangle:
      case DomainKind::torus:
        out << "sides = ";
        list(sides);
        out << "\norigin = ";
        list(origin);
        out << "\n";
        break;
      case DomainKind::ball: out << "r0 = " << r0 << "\n"; break;
      case DomainKind::annulus: out << "r_in = " << r_in << "\nr_out = " << r_out << "\n"; break;
      case DomainKind::strip: out << "theta = " << theta << "\n"; break;
    }
    return out.str();
  }
};

enum class NodeClass : std::uint8_t { interior, boundary, exterior };

/// Uniform tensor lattice over a domain's bounding box with a per-node
/// classification. Interior nodes have every axis neighbour (+-h e_i)
/// inside the closed node set (interior or boundary); boundary nodes lie
/// within one spacing of the boundary.
class Grid {
 public:
  static std::shared_ptr<const Grid> build(const DomainSpec& domain, std::vector<int> resolution) {
    domain.validate();
    if (resolution.size() == 1 && domain.n > 1)
      resolution.assign(static_cast<std::size_t>(domain.n), resolution[0]);
    if (static_cast<int>(resolution.size()) != domain.n)
      throw DomainError("resolution must give one count per axis");
    for (int r : resolution)
      if (r < 4) throw DomainError("resolution must be >= 4 nodes per axis");
    return std::shared_ptr<const Grid>(new Grid(domain, std::move(resolution)));
  }
  static std::shared_ptr<const Grid> build(const DomainSpec& domain, int resolution) {
    return build(domain, std::vector<int>{resolution});
  }

  const DomainSpec& domain() const { return domain_; }
  int dim() const { return domain_.n; }
  std::size_t size() const { return static_cast<std::size_t>(coords_.cols()); }
  int count(int axis) const { return counts_[static_cast<std::size_t>(axis)]; }
  double spacing(int axis) const { return spacing_[static_cast<std::size_t>(axis)]; }
  double max_spacing() const { return *std::max_element(spacing_.begin(), spacing_.end()); }
  double min_spacing() const { return *std::min_element(spacing_.begin(), spacing_.end()); }
  double cell_volume() const {
    return std::accumulate(spacing_.begin(), spacing_.end(), 1.0, std::multiplies<>());
  }
  bool periodic(int axis) const { return periodic_[static_cast<std::size_t>(axis)]; }
  double lower(int axis) const { return lower_[static_cast<std::size_t>(axis)]; }

  /// Node coordinates, one column per node.
  const Eigen::MatrixXd& coords() const { return coords_; }
  Point point(std::size_t idx) const { return coords_.col(static_cast<Eigen::Index>(idx)); }

  NodeClass node_class(std::size_t idx) const { return classes_[idx]; }
  bool active(std::size_t idx) const { return classes_[idx] != NodeClass::exterior; }
  bool interior(std::size_t idx) const { return classes_[idx] == NodeClass::interior; }

  /// Non-exterior nodes in index order.
  const std::vector<std::size_t>& active_nodes() const { return active_; }
  std::size_t count_class(NodeClass c) const {
    return static_cast<std::size_t>(std::count(classes_.begin(), classes_.end(), c));
  }

  std::vector<int> multi_index(std::size_t idx) const {
    std::vector<int> m(static_cast<std::size_t>(dim()));
    for (int a = 0; a < dim(); ++a) {
      m[static_cast<std::size_t>(a)] = static_cast<int>(idx % static_cast<std::size_t>(count(a)));
      idx /= static_cast<std::size_t>(count(a));
    }
    return m;
  }
  std::size_t linear_index(const std::vector<int>& m) const {
    std::size_t idx = 0;
    for (int a = dim() - 1; a >= 0; --a)
      idx = idx * static_cast<std::size_t>(count(a)) + static_cast<std::size_t>(m[static_cast<std::size_t>(a)]);
    return idx;
  }
  std::size_t stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

  /// Lattice neighbour `step` positions along `axis` (wrapping on periodic
  /// axes); empty when it falls outside the box.
  std::optional<std::size_t> neighbor(std::size_t idx, int axis, int step) const {
    auto a = static_cast<std::size_t>(axis);
    int pos = static_cast<int>((idx / strides_[a]) % static_cast<std::size_t>(counts_[a]));
    int np = pos + step;
    if (periodic_[a]) {
      np %= counts_[a];
      if (np < 0) np += counts_[a];
    } else if (np < 0 || np >= counts_[a]) {
      return std::nullopt;
    }
    return idx + static_cast<std::size_t>(np - pos) * strides_[a];
  }

  /// Neighbour that is also an active (non-exterior) node.
  std::optional<std::size_t> active_neighbor(std::size_t idx, int axis, int step) const {
    auto nb = neighbor(idx, axis, step);
    if (nb && active(*nb)) return nb;
    return std::nullopt;
  }

  /// Nearest lattice node to x (clamped to the box).
  std::size_t nearest_node(const Point& x) const {
    std::vector<int> m(static_cast<std::size_t>(dim()));
    for (int a = 0; a < dim(); ++a) {
      double t = (x[a] - lower(a)) / spacing(a);
      int i = static_cast<int>(std::lround(t));
      if (periodic(a)) {
        i %= count(a);
        if (i < 0) i += count(a);
      } else {
        i = std::clamp(i, 0, count(a) - 1);
      }
      m[static_cast<std::size_t>(a)] = i;
    }
    return linear_index(m);
  }

  /// Minimal-image displacement from q to p (periodic axes wrap).
  Point displacement(const Point& p, const Point& q) const {
    Point dx = p - q;
    for (int a = 0; a < dim(); ++a) {
      if (!periodic(a)) continue;
      double L = spacing(a) * count(a);
      dx[a] -= L * std::round(dx[a] / L);
    }
    return dx;
  }

 private:
  Grid(DomainSpec domain, std::vector<int> resolution)
      : domain_(std::move(domain)), counts_(std::move(resolution)) {
    const int n = domain_.n;
    const auto un = static_cast<std::size_t>(n);
    spacing_.resize(un);
    lower_.resize(un);
    periodic_.assign(un, false);
    bool cell_centred = false;
    switch (domain_.kind) {
      case DomainKind::rectangle:
        for (std::size_t a = 0; a < un; ++a) {
          lower_[a] = domain_.origin[a];
          spacing_[a] = domain_.sides[a] / (counts_[a] - 1);
        }
        break;
      case DomainKind::torus:
        for (std::size_t a = 0; a < un; ++a) {
          lower_[a] = domain_.origin[a];
          spacing_[a] = domain_.sides[a] / counts_[a];
          periodic_[a] = true;
        }
        break;
      case DomainKind::ball:
      case DomainKind::annulus: {
        double R = domain_.kind == DomainKind::ball ? domain_.r0 : domain_.r_out;
        for (std::size_t a = 0; a < un; ++a) {
          spacing_[a] = 2 * R / counts_[a];
          lower_[a] = domain_.center[a] - R + 0.5 * spacing_[a];
        }
        cell_centred = true;
        break;
      }
      case DomainKind::strip:
        for (std::size_t a = 0; a + 1 < un; ++a) {
          spacing_[a] = 2 * domain_.theta / counts_[a];
          lower_[a] = -domain_.theta;
          periodic_[a] = true;
        }
        spacing_[un - 1] = domain_.theta / (counts_[un - 1] - 1);
        lower_[un - 1] = 0.0;
        break;
    }
    (void)cell_centred;

    std::size_t total = 1;
    strides_.resize(un);
    for (std::size_t a = 0; a < un; ++a) {
      strides_[a] = total;
      total *= static_cast<std::size_t>(counts_[a]);
    }
    coords_.resize(n, static_cast<Eigen::Index>(total));
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t rem = idx;
      for (std::size_t a = 0; a < un; ++a) {
        int pos = static_cast<int>(rem % static_cast<std::size_t>(counts_[a]));
        rem /= static_cast<std::size_t>(counts_[a]);
        coords_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(idx)) =
            lower_[a] + pos * spacing_[a];
      }
    }
    classify();
  }

  void classify() {
    const std::size_t total = size();
    classes_.assign(total, NodeClass::exterior);
    switch (domain_.kind) {
      case DomainKind::torus:
        classes_.assign(total, NodeClass::interior);
        break;
      case DomainKind::rectangle:
      case DomainKind::strip:
        for (std::size_t idx = 0; idx < total; ++idx) {
          bool edge = false;
          for (int a = 0; a < dim(); ++a) {
            if (periodic(a)) continue;
            int pos = static_cast<int>((idx / strides_[static_cast<std::size_t>(a)]) %
                                       static_cast<std::size_t>(count(a)));
            if (pos == 0 || pos == count(a) - 1) edge = true;
          }
          classes_[idx] = edge ? NodeClass::boundary : NodeClass::interior;
        }
        break;
      case DomainKind::ball:
      case DomainKind::annulus: {
        std::vector<char> inside(total);
        for (std::size_t idx = 0; idx < total; ++idx) inside[idx] = domain_.contains(point(idx));
        for (std::size_t idx = 0; idx < total; ++idx) {
          if (!inside[idx]) continue;
          bool all = true;
          for (int a = 0; a < dim() && all; ++a)
            for (int s : {-1, 1}) {
              auto nb = neighbor(idx, a, s);
              if (!nb || !inside[*nb]) {
                all = false;
                break;
              }
            }
          classes_[idx] = all ? NodeClass::interior : NodeClass::boundary;
        }
        break;
      }
    }
    active_.clear();
    for (std::size_t idx = 0; idx < total; ++idx)
      if (classes_[idx] != NodeClass::exterior) active_.push_back(idx);
  }

  DomainSpec domain_;
  std::vector<int> counts_;
  std::vector<double> spacing_;
  std::vector<double> lower_;
  std::vector<bool> periodic_;
  std::vector<std::size_t> strides_;
  Eigen::MatrixXd coords_;
  std::vector<NodeClass> classes_;
  std::vector<std::size_t> active_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Scalar field on a grid, one value per node (exterior nodes hold 0).
/// Analytically supplied fields may carry exact gradient (N x n) and
/// Hessian (N x n*n, row-major per node) channels.
struct GridFunction {
  GridPtr grid;
  Eigen::VectorXd values;
  std::optional<Eigen::MatrixXd> gradient;
  std::optional<Eigen::MatrixXd> hessian;

  GridFunction() = default;
  GridFunction(GridPtr g, Eigen::VectorXd v) : grid(std::move(g)), values(std::move(v)) {
    check();
  }

  static GridFunction zeros(GridPtr g) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g->size()));
    return GridFunction(std::move(g), std::move(v));
  }

  static GridFunction sample(GridPtr g, const std::function<double(const Point&)>& fn) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g->size()));
    for (std::size_t idx : g->active_nodes()) v[static_cast<Eigen::Index>(idx)] = fn(g->point(idx));
    return GridFunction(std::move(g), std::move(v));
  }

  static GridFunction sample_with_derivatives(
      GridPtr g, const std::function<double(const Point&)>& fn,
      const std::function<Eigen::VectorXd(const Point&)>& grad,
      const std::function<Eigen::MatrixXd(const Point&)>& hess) {
    GridFunction u = sample(g, fn);
    const int n = g->dim();
    const auto N = static_cast<Eigen::Index>(g->size());
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(N, n);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, n * n);
    for (std::size_t idx : g->active_nodes()) {
      Point p = g->point(idx);
      auto row = static_cast<Eigen::Index>(idx);
      if (grad) G.row(row) = grad(p).transpose();
      if (hess) {
        Eigen::MatrixXd h = hess(p);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) H(row, i * n + j) = h(i, j);
      }
    }
    if (grad) u.gradient = std::move(G);
    if (hess) u.hessian = std::move(H);
    u.check();
    return u;
  }

  double operator[](std::size_t idx) const { return values[static_cast<Eigen::Index>(idx)]; }
  std::size_t size() const { return static_cast<std::size_t>(values.size()); }

  double sup_abs() const {
    double m = 0;
    for (std::size_t idx : grid->active_nodes()) m = std::max(m, std::abs((*this)[idx]));
    return m;
  }

  void check() const {
    if (!grid) throw DomainError("grid function without grid");
    const auto N = static_cast<Eigen::Index>(grid->size());
    if (values.size() != N) throw DomainError("value count does not match node count");
    if (gradient && (gradient->rows() != N || gradient->cols() != grid->dim()))
      throw DomainError("gradient channel shape mismatch");
    if (hessian && (hessian->rows() != N || hessian->cols() != grid->dim() * grid->dim()))
      throw DomainError("hessian channel shape mismatch");
  }
};

/// d(x) = dist(x, boundary) in closed form on every active node.
inline GridFunction distance_field(const GridPtr& grid) {
  if (!grid->domain().has_boundary())
    throw DomainError("distance_field: torus domain has no boundary");
  const auto& dom = grid->domain();
  return GridFunction::sample(grid, [&](const Point& x) { return dom.distance(x); });
}

/// Principal curvatures (with respect to the inward normal) of the boundary
/// component nearest to x; n-1 equal values on radial domains.
inline double nearest_boundary_curvature(const DomainSpec& dom, const Point& x) {
  switch (dom.kind) {
    case DomainKind::ball: return 1.0 / dom.r0;
    case DomainKind::annulus: {
      double r = (x - dom.center_point()).norm();
      return (r - dom.r_in <= dom.r_out - r) ? -1.0 / dom.r_in : 1.0 / dom.r_out;
    }
    case DomainKind::strip: return 0.0;
    default: throw DomainError("curvature only defined for ball, annulus and strip");
  }
}

/// Mean curvature H = -Laplacian(d)/(n-1) on the boundary component nearest x.
inline double mean_curvature(const DomainSpec& dom, const Point& x) {
  return nearest_boundary_curvature(dom, x);
}

/// Distance below which every point has a unique nearest boundary point.
inline double cut_locus_distance(const DomainSpec& dom) {
  switch (dom.kind) {
    case DomainKind::ball: return dom.r0;
    case DomainKind::annulus: return 0.5 * (dom.r_out - dom.r_in);
    case DomainKind::strip: return dom.theta;
    default: throw DomainError("cut locus only defined for ball, annulus and strip");
  }
}

/// Laplacian(d) = -sum_j k_j / (1 - k_j d) from the nearest component's
/// principal curvatures, evaluated pointwise.
inline double laplacian_of_distance_at(const DomainSpec& dom, const Point& x) {
  double kappa = nearest_boundary_curvature(dom, x);
  double d = dom.distance(x);
  return -(dom.n - 1) * kappa / (1.0 - kappa * d);
}

struct DistanceLaplacian {
  GridFunction field;
  std::vector<bool> valid;  ///< false beyond the cut locus and on exterior nodes
  std::size_t invalid_count = 0;
};

inline DistanceLaplacian laplacian_of_distance(const GridPtr& grid) {
  const auto& dom = grid->domain();
  if (dom.kind != DomainKind::ball && dom.kind != DomainKind::annulus &&
      dom.kind != DomainKind::strip)
    throw DomainError("laplacian_of_distance: domain must be ball, annulus or strip");
  const double cut = cut_locus_distance(dom);
  DistanceLaplacian out{GridFunction::zeros(grid), std::vector<bool>(grid->size(), false), 0};
  for (std::size_t idx : grid->active_nodes()) {
    Point x = grid->point(idx);
    double d = dom.distance(x);
    if (!(d < cut)) {
      ++out.invalid_count;
      continue;
    }
    out.valid[idx] = true;
    out.field.values[static_cast<Eigen::Index>(idx)] = laplacian_of_distance_at(dom, x);
  }
  return out;
}

struct Derivatives {
  Eigen::MatrixXd gradient;  ///< N x n
  Eigen::MatrixXd hessian;   ///< N x n*n, row-major per node
};

namespace detail {

// Second-order first derivative along one axis at idx from active
// neighbours; central when possible, otherwise one-sided.
inline double fd_first(const Grid& g, const Eigen::VectorXd& v, std::size_t idx, int axis) {
  const double h = g.spacing(axis);
  auto at = [&](std::size_t i) { return v[static_cast<Eigen::Index>(i)]; };
  auto p1 = g.active_neighbor(idx, axis, 1), m1 = g.active_neighbor(idx, axis, -1);
  if (p1 && m1) return (at(*p1) - at(*m1)) / (2 * h);
  if (p1) {
    auto p2 = g.active_neighbor(idx, axis, 2);
    if (p2) return (-3 * at(idx) + 4 * at(*p1) - at(*p2)) / (2 * h);
    return (at(*p1) - at(idx)) / h;
  }
  if (m1) {
    auto m2 = g.active_neighbor(idx, axis, -2);
    if (m2) return (3 * at(idx) - 4 * at(*m1) + at(*m2)) / (2 * h);
    return (at(idx) - at(*m1)) / h;
  }
  return 0.0;
}

inline double fd_second(const Grid& g, const Eigen::VectorXd& v, std::size_t idx, int axis) {
  const double h = g.spacing(axis);
  auto at = [&](std::size_t i) { return v[static_cast<Eigen::Index>(i)]; };
  auto p1 = g.active_neighbor(idx, axis, 1), m1 = g.active_neighbor(idx, axis, -1);
  if (p1 && m1) return (at(*p1) - 2 * at(idx) + at(*m1)) / (h * h);
  for (int s : {1, -1}) {
    auto q1 = g.active_neighbor(idx, axis, s);
    auto q2 = g.active_neighbor(idx, axis, 2 * s);
    if (!q1 || !q2) continue;
    auto q3 = g.active_neighbor(idx, axis, 3 * s);
    if (q3) return (2 * at(idx) - 5 * at(*q1) + 4 * at(*q2) - at(*q3)) / (h * h);
    return (at(idx) - 2 * at(*q1) + at(*q2)) / (h * h);
  }
  return 0.0;
}

}  // namespace detail

/// Finite-difference gradient and Hessian. Central differences on interior
/// nodes, second-order one-sided stencils in the boundary layer; mixed
/// derivatives differentiate the computed gradient. Exact channels on `u`
/// are passed through unchanged.
inline Derivatives fd_derivatives(const GridFunction& u) {
  const Grid& g = *u.grid;
  const int n = g.dim();
  for (int a = 0; a < n; ++a)
    if (g.count(a) < 3) throw DomainError("fd_derivatives: fewer than 3 nodes along an axis");
  const auto N = static_cast<Eigen::Index>(g.size());
  Derivatives out{Eigen::MatrixXd::Zero(N, n), Eigen::MatrixXd::Zero(N, n * n)};
  if (u.gradient) {
    out.gradient = *u.gradient;
  } else {
    for (std::size_t idx : g.active_nodes())
      for (int a = 0; a < n; ++a)
        out.gradient(static_cast<Eigen::Index>(idx), a) = detail::fd_first(g, u.values, idx, a);
  }
  if (u.hessian) {
    out.hessian = *u.hessian;
    return out;
  }
  for (std::size_t idx : g.active_nodes())
    for (int a = 0; a < n; ++a)
      out.hessian(static_cast<Eigen::Index>(idx), a * n + a) = detail::fd_second(g, u.values, idx, a);
  if (n > 1) {
    std::vector<Eigen::VectorXd> columns;
    for (int a = 0; a < n; ++a) columns.emplace_back(out.gradient.col(a));
    for (std::size_t idx : g.active_nodes()) {
      auto row = static_cast<Eigen::Index>(idx);
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
          double dab = detail::fd_first(g, columns[static_cast<std::size_t>(a)], idx, b);
          double dba = detail::fd_first(g, columns[static_cast<std::size_t>(b)], idx, a);
          double m = 0.5 * (dab + dba);
          out.hessian(row, a * n + b) = m;
          out.hessian(row, b * n + a) = m;
        }
    }
  }
  return out;
}

/// One-dimensional radial grid for a ball or annulus, geometrically refined
/// toward the boundary: the cell touching the boundary has width d_min and
/// widths grow by 1/ratio moving inward until they reach h_max.
struct RadialGrid {
  DomainSpec domain;
  std::vector<double> r;  ///< increasing radii, boundary nodes included

  static RadialGrid graded(const DomainSpec& dom, double d_min, double ratio, double h_max) {
    if (dom.kind != DomainKind::ball && dom.kind != DomainKind::annulus)
      throw DomainError("radial grid needs a ball or annulus");
    if (!(d_min > 0) || !(ratio > 0 && ratio < 1) || !(h_max >= d_min))
      throw DomainError("radial grid: need d_min > 0, 0 < ratio < 1, h_max >= d_min");
    double half = dom.kind == DomainKind::ball ? dom.r0 : 0.5 * (dom.r_out - dom.r_in);
    std::vector<double> offs{0.0};
    double w = d_min;
    while (offs.back() + w < half) {
      offs.push_back(offs.back() + w);
      w = std::min(w / ratio, h_max);
    }
    // Merge a short last gap into its predecessor before closing at `half`.
    if (offs.size() > 2 && half - offs.back() < 0.5 * (offs.back() - offs[offs.size() - 2]))
      offs.pop_back();
    offs.push_back(half);
    RadialGrid rg{dom, {}};
    if (dom.kind == DomainKind::ball) {
      for (auto it = offs.rbegin(); it != offs.rend(); ++it) rg.r.push_back(dom.r0 - *it);
      rg.r.front() = 0.0;
    } else {
      for (double o : offs) rg.r.push_back(dom.r_in + o);
      for (auto it = offs.rbegin() + 1; it != offs.rend(); ++it) rg.r.push_back(dom.r_out - *it);
    }
    return rg;
  }

  std::size_t size() const { return r.size(); }
  double distance(std::size_t i) const {
    if (domain.kind == DomainKind::ball) return domain.r0 - r[i];
    return std::min(r[i] - domain.r_in, domain.r_out - r[i]);
  }
};

}  // namespace schauder
