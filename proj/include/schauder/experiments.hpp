#pragma once

// Config-driven experiment runner behind the schauder_lab tool.
//
// A config names an experiment kind (`experiment = ...`), a domain block
// (`domain.kind`, `domain.n`, ..., `domain.resolution` as a ladder) and
// kind-specific fields. A run yields a JSON report, an optional CSV sweep
// and an exit status: 0 when every invariant holds, 1 when one fails,
// 2 when the config is rejected (no report is written then).

#include <json.hpp>

#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "schauder/core/errors.hpp"
#include "schauder/core/expression.hpp"
#include "schauder/core/kv_config.hpp"
#include "schauder/elliptic_solver.hpp"
#include "schauder/fuchsian_blowup.hpp"
#include "schauder/geometry.hpp"
#include "schauder/holder_norms.hpp"
#include "schauder/littlewood_paley.hpp"
#include "schauder/potential.hpp"
#include "schauder/semilinear.hpp"

namespace schauder {

inline constexpr int kReportSchemaVersion = 1;

struct ExperimentKind {
  const char* name;
  const char* summary;
};

inline const std::vector<ExperimentKind>& experiment_kinds() {
  static const std::vector<ExperimentKind> kinds{
      {"norms", "Hölder seminorm, fitted exponent and Campanato ratio of `field` over the resolution ladder"},
      {"lp", "Littlewood-Paley block decay, Bernstein constants and the spectral Poisson round trip (torus)"},
      {"potential", "Newtonian potential u(P) and w_ij(P) of `density` on a ball"},
      {"solve", "direct Dirichlet solve over the ladder; optional seeded maximum-principle problems"},
      {"continuity", "method of continuity against the direct solve for each initial step in `steps`"},
      {"subsuper", "monotone iteration from the ordered pair (`sub`, `super`) checked against Newton"},
      {"blowup", "radial Loewner-Nirenberg solution on a ball or annulus: w traces and envelopes"},
      {"fuchsian-model", "model problem L0' f0 = k on a strip"},
      {"probes", "interior estimate probe C_emp over the radii in `radii`"}};
  return kinds;
}

struct RunOptions {
  bool fixed_clock = false;               ///< leave wall-clock fields out of the report
  std::optional<std::uint64_t> seed;      ///< overrides the config's `seed`
};

struct ExperimentOutcome {
  int status = 0;
  std::string message;                    ///< config diagnostic for status 2
  nlohmann::json report;
  std::string sweep_csv;
  std::vector<std::string> failed;        ///< names of failed invariants
  std::string report_name = "report.json";
  std::string sweep_name = "sweep.csv";
};

namespace detail {

/// Typed field access that records each resolved value (defaults included)
/// and can list fields no reader asked for.
class ConfigReader {
 public:
  explicit ConfigReader(const KeyValueConfig& cfg) : cfg_(cfg) {}

  const KeyValueConfig& raw() const { return cfg_; }
  bool has(const std::string& key) const { return cfg_.has(key); }
  int line(const std::string& key) const { return cfg_.line_of(key); }

  std::string text(const std::string& key) { return note(key, cfg_.get_string(key)); }
  std::string text(const std::string& key, const std::string& fb) { return note(key, cfg_.get_string(key, fb)); }
  double number(const std::string& key) { return note(key, cfg_.get_double(key)); }
  double number(const std::string& key, double fb) { return note(key, cfg_.get_double(key, fb)); }
  int integer(const std::string& key) { return note(key, static_cast<int>(cfg_.get_int(key))); }
  int integer(const std::string& key, int fb) { return note(key, static_cast<int>(cfg_.get_int(key, fb))); }
  bool flag(const std::string& key, bool fb) { return note(key, cfg_.get_bool(key, fb)); }
  std::vector<double> list(const std::string& key) { return note(key, cfg_.get_list(key)); }
  std::vector<double> list(const std::string& key, std::vector<double> fb) {
    return note(key, cfg_.get_list(key, std::move(fb)));
  }
  std::optional<double> maybe_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  double positive(const std::string& key, double fb) {
    double v = number(key, fb);
    if (!(v > 0)) throw ConfigError(line(key), key, "must be positive");
    return v;
  }

  Expression expr(const std::string& key, const std::vector<std::string>& vars,
                  const std::optional<std::string>& fb = std::nullopt) {
    std::string t = fb ? text(key, *fb) : text(key);
    try {
      return Expression::parse(t, vars);
    } catch (const std::exception& e) {
      std::string msg = e.what();
      if (msg.rfind("config: ", 0) == 0) msg.erase(0, 8);
      throw ConfigError(line(key), key, msg);
    }
  }

  /// Integer resolutions, each >= 4, strictly increasing.
  std::vector<int> ladder(const std::string& key) {
    std::vector<double> raw = cfg_.get_list(key);
    std::vector<int> out;
    for (double v : raw) {
      if (v != std::floor(v) || v < 4) throw ConfigError(line(key), key, "resolutions must be integers >= 4");
      if (!out.empty() && !(v > out.back())) throw ConfigError(line(key), key, "ladder must be strictly increasing");
      out.push_back(static_cast<int>(v));
    }
    note(key, out);
    return out;
  }

  void put(const std::string& key, nlohmann::json value) { resolved_[key] = std::move(value); }
  void consume(const std::string& key) { used_.insert(key); }

  void reject_unknown(const std::string& kind) const {
    for (const auto& k : cfg_.keys())
      if (!used_.count(k)) throw ConfigError(cfg_.line_of(k), k, "unknown field for experiment '" + kind + "'");
  }

  const nlohmann::json& resolved() const { return resolved_; }

 private:
  template <class T>
  T note(const std::string& key, T v) {
    used_.insert(key);
    resolved_[key] = v;
    return v;
  }

  const KeyValueConfig& cfg_;
  std::set<std::string> used_;
  nlohmann::json resolved_ = nlohmann::json::object();
};

class InvariantLog {
 public:
  /// Records `value relation bound`.
  void check(const std::string& name, bool passed, double value, double bound, const std::string& relation) {
    entries_.push_back({{"name", name}, {"passed", passed}, {"value", value}, {"bound", bound}, {"relation", relation}});
    if (!passed) failed_.push_back(name);
  }
  void check(const std::string& name, bool passed, const std::string& detail) {
    entries_.push_back({{"name", name}, {"passed", passed}, {"detail", detail}});
    if (!passed) failed_.push_back(name);
  }
  bool le(const std::string& name, double value, double bound) {
    bool ok = value <= bound;
    check(name, ok, value, bound, "<=");
    return ok;
  }
  bool ge(const std::string& name, double value, double bound) {
    bool ok = value >= bound;
    check(name, ok, value, bound, ">=");
    return ok;
  }

  nlohmann::json to_json() const { return entries_; }
  const std::vector<std::string>& failed() const { return failed_; }

 private:
  nlohmann::json entries_ = nlohmann::json::array();
  std::vector<std::string> failed_;
};

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) {
    out_.precision(17);
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }
  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << values[i];
    out_ << "\n";
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

struct RunOutput {
  nlohmann::json results = nlohmann::json::object();
  std::string sweep;
  InvariantLog invariants;
};

using Job = std::function<void(RunOutput&)>;

inline nlohmann::json domain_json(const DomainSpec& d) {
  nlohmann::json j{{"kind", to_string(d.kind)}, {"n", d.n}};
  switch (d.kind) {
    case DomainKind::rectangle:
    case DomainKind::torus:
      j["sides"] = d.sides;
      j["origin"] = d.origin;
      break;
    case DomainKind::ball:
      j["r0"] = d.r0;
      j["center"] = d.center;
      break;
    case DomainKind::annulus:
      j["r_in"] = d.r_in;
      j["r_out"] = d.r_out;
      j["center"] = d.center;
      break;
    case DomainKind::strip: j["theta"] = d.theta; break;
  }
  return j;
}

inline DomainSpec read_domain(ConfigReader& rd) {
  static const std::set<std::string> known{"kind", "n", "r0", "r_in", "r_out", "theta", "sides", "origin", "center"};
  KeyValueConfig sub = rd.raw().subset("domain.");
  if (sub.keys().empty()) throw ConfigError(0, "domain", "missing domain block (domain.kind = ...)");
  for (const auto& k : sub.keys()) {
    if (k == "resolution") continue;  // read by the experiment
    if (!known.count(k)) throw ConfigError(sub.line_of(k), "domain." + k, "unknown domain field");
    rd.consume("domain." + k);
  }
  DomainSpec d = DomainSpec::from_config(sub);
  rd.put("domain", domain_json(d));
  return d;
}

inline void require_kind(ConfigReader& rd, const DomainSpec& d, std::initializer_list<DomainKind> allowed,
                         const std::string& what) {
  for (DomainKind k : allowed)
    if (d.kind == k) return;
  throw ConfigError(rd.line("domain.kind"), "domain.kind", what);
}

/// Variables of spatial expressions: x1..xn and r = |x|.
inline std::vector<std::string> coordinate_names(int n) {
  std::vector<std::string> v;
  for (int i = 1; i <= n; ++i) v.push_back("x" + std::to_string(i));
  v.push_back("r");
  return v;
}

inline std::function<double(const Point&)> spatial(const Expression& e) {
  return [e](const Point& x) {
    std::vector<double> a(x.data(), x.data() + x.size());
    a.push_back(x.norm());
    return e(a);
  };
}

inline double max_active(const GridFunction& u) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t idx : u.grid->active_nodes()) m = std::max(m, u[idx]);
  return m;
}
inline double min_active(const GridFunction& u) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t idx : u.grid->active_nodes()) m = std::min(m, u[idx]);
  return m;
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

inline double ratio_spread(const std::vector<double>& v) {
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi / *lo;
}

// ---------------------------------------------------------------- norms

inline Job prepare_norms(ConfigReader& rd, const DomainSpec& dom, std::uint64_t seed) {
  require_kind(rd, dom, {DomainKind::rectangle, DomainKind::ball, DomainKind::annulus, DomainKind::torus},
               "norms needs a rectangle, ball, annulus or torus");
  auto ladder = rd.ladder("domain.resolution");
  auto field = spatial(rd.expr("field", coordinate_names(dom.n)));
  double alpha = rd.positive("alpha", 0.5);
  if (alpha > 1) throw ConfigError(rd.line("alpha"), "alpha", "must lie in (0, 1]");
  double lambda = rd.number("campanato_lambda", dom.n + 2 * alpha);
  bool campanato = rd.flag("campanato", true);
  HolderFitOptions fopt;
  fopt.bins = rd.integer("bins", 16);
  fopt.scan.seed = seed;
  auto expected = rd.maybe_number("expected_alpha");
  double alpha_tol = rd.number("alpha_tol", 0.05);
  double stability = rd.number("campanato_stability", 0.2);

  return [=](RunOutput& out) {
    Csv csv({"resolution", "h", "fitted_alpha", "fit_residual", "seminorm", "sup_norm", "campanato", "campanato_ratio"});
    nlohmann::json rows = nlohmann::json::array();
    std::vector<double> ratios;
    HolderReport rep;
    bool flat = false;
    for (int N : ladder) {
      auto grid = Grid::build(dom, N);
      auto u = GridFunction::sample(grid, field);
      auto fit = fit_holder_exponent(u, fopt);
      auto sem = holder_seminorm(u, alpha, fopt.scan);
      double camp = campanato ? campanato_seminorm(u, lambda).value : 0.0;
      double ratio = campanato && sem.value > 0 ? std::sqrt(camp) / sem.value : 0.0;
      if (campanato && sem.value > 0) ratios.push_back(ratio);
      flat = fit.flat;
      csv.row({double(N), grid->max_spacing(), fit.alpha_hat, fit.residual, sem.value, u.sup_abs(), camp, ratio});
      nlohmann::json row{{"resolution", N},         {"h", grid->max_spacing()},   {"fitted_alpha", fit.alpha_hat},
                         {"fit_residual", fit.residual}, {"fit_flat", fit.flat}, {"seminorm", sem.value},
                         {"sup_norm", u.sup_abs()}, {"pairs_evaluated", sem.pairs}};
      if (campanato) {
        row["campanato"] = camp;
        row["campanato_ratio"] = ratio;
      }
      rows.push_back(row);
      rep = HolderReport{};
      rep.alpha = alpha;
      rep.seminorm = sem.value;
      rep.sup_norm = u.sup_abs();
      if (campanato) {
        rep.campanato = camp;
        rep.campanato_lambda = lambda;
      }
      rep.fitted_alpha = fit.alpha_hat;
      rep.fit_residual = fit.residual;
      rep.fit_flat = fit.flat;
      rep.pairs_evaluated = sem.pairs;
      rep.pair_scan_exact = sem.exact && fit.exact;
    }
    out.results = rep.to_json();
    out.results["ladder"] = rows;
    out.sweep = csv.str();
    auto& inv = out.invariants;
    inv.check("fit_defined", !flat, flat ? "field is constant; exponent undefined" : "slope fitted");
    if (expected && !flat) inv.le("fitted_alpha_within_tol", std::abs(*rep.fitted_alpha - *expected), alpha_tol);
    if (ratios.size() >= 2) inv.le("campanato_ratio_stable", ratio_spread(ratios) - 1, stability);
  };
}

// ---------------------------------------------------------------- lp

inline GridFunction weierstrass_field(const GridPtr& g, double alpha, int terms) {
  return GridFunction::sample(g, [=](const Point& x) {
    double s = 0;
    for (int j = 1; j <= terms; ++j) s += std::pow(2.0, -alpha * j) * std::cos(std::ldexp(1.0, j) * x[0]);
    return s;
  });
}

inline int nyquist_band(const Grid& g) {
  Eigen::MatrixXd xi = wave_vectors(g);
  double xi_max = 0;
  for (Eigen::Index i = 0; i < xi.rows(); ++i) xi_max = std::max(xi_max, xi.row(i).norm());
  int J = 0;
  while (std::ldexp(1.0, J) < xi_max) ++J;
  return J;
}

inline Job prepare_lp(ConfigReader& rd, const DomainSpec& dom, std::uint64_t) {
  require_kind(rd, dom, {DomainKind::torus}, "lp needs a torus domain");
  auto ladder = rd.ladder("domain.resolution");
  for (int N : ladder)
    if ((N & (N - 1)) != 0) throw ConfigError(rd.line("domain.resolution"), "domain.resolution", "lp needs powers of two");
  std::string kind = rd.text("field");
  std::function<GridFunction(const GridPtr&)> make;
  if (kind == "weierstrass") {
    double wa = rd.positive("weierstrass_alpha", 0.5);
    int terms = rd.integer("weierstrass_terms", 10);
    make = [=](const GridPtr& g) { return weierstrass_field(g, wa, terms); };
  } else {
    auto f = spatial(rd.expr("field", coordinate_names(dom.n)));
    make = [=](const GridPtr& g) { return GridFunction::sample(g, f); };
  }
  std::optional<int> J;
  if (rd.has("J")) J = rd.integer("J");
  std::optional<int> band_lo, band_hi;
  if (rd.has("band_lo")) band_lo = rd.integer("band_lo");
  if (rd.has("band_hi")) band_hi = rd.integer("band_hi");
  auto expected = rd.maybe_number("expected_alpha");
  double alpha_tol = rd.number("alpha_tol", 0.1);
  double bernstein_bound = rd.number("bernstein_bound", 4.0);
  bool poisson = rd.flag("poisson", true);
  double poisson_tol = rd.number("poisson_tol", 1e-10);

  return [=](RunOutput& out) {
    Csv csv({"resolution", "J", "alpha_hat", "fit_residual", "bernstein_max", "poisson_error"});
    nlohmann::json rows = nlohmann::json::array();
    double worst_bernstein = 0, worst_poisson = 0;
    LPDecomposition dec;
    LPAlphaEstimate est;
    for (int N : ladder) {
      auto grid = Grid::build(dom, N);
      auto u = make(grid);
      int JJ = J.value_or(nyquist_band(*grid));
      dec = lp_decompose(u, JJ);
      est = lp_alpha_estimate(dec, band_lo, band_hi);
      worst_bernstein = std::max(worst_bernstein, est.bernstein_max);
      double perr = 0;
      if (poisson) {
        GridFunction rho = u;
        rho.values.array() -= u.values.mean();
        double scale = rho.sup_abs();
        if (scale > 0) {
          auto back = spectral_laplacian(lp_poisson_solve(rho));
          perr = (back.values + rho.values).cwiseAbs().maxCoeff() / scale;
        }
        worst_poisson = std::max(worst_poisson, perr);
      }
      csv.row({double(N), double(dec.J), est.alpha_hat, est.residual, est.bernstein_max, perr});
      nlohmann::json row{{"resolution", N}, {"J", dec.J}, {"alpha_hat", est.alpha_hat},
                         {"band_limited", est.band_limited}, {"bernstein_max", est.bernstein_max}};
      if (poisson) row["poisson_error"] = perr;
      rows.push_back(row);
    }
    out.results = {{"J", dec.J},
                   {"alpha_hat", est.alpha_hat},
                   {"slope", -est.alpha_hat},
                   {"fit_residual", est.residual},
                   {"band_limited", est.band_limited},
                   {"bands", est.bands},
                   {"block_sup", dec.block_sup},
                   {"bernstein_c", est.bernstein_c},
                   {"bernstein_block", est.bernstein_block},
                   {"bernstein_max", est.bernstein_max},
                   {"warnings", dec.warnings},
                   {"ladder", rows}};
    if (poisson) out.results["poisson_error"] = worst_poisson;
    out.sweep = csv.str();
    auto& inv = out.invariants;
    if (expected) {
      if (est.band_limited)
        inv.check("alpha_within_tol", false, "fewer than 5 nonvacuous bands; no decay fit");
      else
        inv.le("alpha_within_tol", std::abs(est.alpha_hat - *expected), alpha_tol);
    }
    inv.le("bernstein_bound", worst_bernstein, bernstein_bound);
    if (poisson) inv.le("poisson_roundtrip", worst_poisson, poisson_tol);
  };
}

// ---------------------------------------------------------------- potential

inline Job prepare_potential(ConfigReader& rd, const DomainSpec& dom, std::uint64_t) {
  require_kind(rd, dom, {DomainKind::ball}, "potential needs a ball domain");
  if (dom.n < 2 || dom.n > 3) throw ConfigError(rd.line("domain.n"), "domain.n", "potential supports n = 2, 3");
  auto ladder = rd.ladder("domain.resolution");
  auto density = spatial(rd.expr("density", coordinate_names(dom.n)));
  std::optional<Expression> radial;
  if (rd.has("density_radial")) radial = rd.expr("density_radial", {"r"});
  int radial_cells = rd.integer("radial_cells", 64);
  auto pt = rd.list("point", std::vector<double>(static_cast<std::size_t>(dom.n), 0.0));
  if (static_cast<int>(pt.size()) != dom.n) throw ConfigError(rd.line("point"), "point", "needs n coordinates");
  PotentialOptions popt;
  popt.delta_cells = rd.positive("delta_cells", 3.0);
  WijOptions wopt;
  wopt.sphere_resolution = rd.integer("sphere_resolution", 96);
  auto expected = rd.maybe_number("expected_u");
  double u_tol = rd.number("u_tol", 1e-3);
  double trace_tol = rd.number("trace_tol", 5e-2);

  return [=](RunOutput& out) {
    Point P = Eigen::Map<const Eigen::VectorXd>(pt.data(), static_cast<Eigen::Index>(pt.size()));
    Csv csv({"resolution", "h", "u_lattice", "trace_wij"});
    nlohmann::json rows = nlohmann::json::array();
    double u_lat = 0, trace = 0;
    Eigen::MatrixXd W;
    for (int N : ladder) {
      auto grid = Grid::build(dom, N);
      auto f = GridFunction::sample(grid, density);
      u_lat = newtonian_potential(f, P, popt).value;
      W = potential_hessian_wij(f, P, wopt);
      trace = W.trace();
      csv.row({double(N), grid->max_spacing(), u_lat, trace});
      rows.push_back({{"resolution", N}, {"h", grid->max_spacing()}, {"u_lattice", u_lat}, {"trace_wij", trace}});
    }
    std::vector<std::vector<double>> wij;
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      wij.emplace_back();
      for (Eigen::Index j = 0; j < W.cols(); ++j) wij.back().push_back(W(i, j));
    }
    const double fP = density(P);
    out.results = {{"u_lattice", u_lat}, {"wij", wij}, {"trace_wij", trace}, {"density_at_point", fP}, {"ladder", rows}};
    double u_best = u_lat;
    if (radial) {
      Expression e = *radial;
      double rho = (P - dom.center_point()).norm();
      u_best = newtonian_potential_radial(dom.n, [e](double r) { return e({r}); }, dom.r0, rho, radial_cells);
      out.results["u_radial"] = u_best;
    }
    out.results["u"] = u_best;
    out.sweep = csv.str();
    if (expected) out.invariants.le("u_matches_expected", std::abs(u_best - *expected), u_tol);
    out.invariants.le("trace_equals_density", std::abs(trace - fP), trace_tol);
  };
}

// ---------------------------------------------------------------- solve / continuity

/// Coefficient expressions a_ij, b_i, c of L = a_ij D_ij + b_i D_i + c.
struct OperatorSpec {
  int n = 0;
  std::vector<std::optional<Expression>> a;  // row-major n x n
  std::vector<std::optional<Expression>> b;
  std::optional<Expression> c;

  static OperatorSpec read(ConfigReader& rd, int n) {
    OperatorSpec s;
    s.n = n;
    auto vars = coordinate_names(n);
    s.a.resize(static_cast<std::size_t>(n * n));
    s.b.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        std::string key = "a" + std::to_string(i + 1) + std::to_string(j + 1);
        if (rd.has(key)) s.a[static_cast<std::size_t>(i * n + j)] = rd.expr(key, vars);
      }
      std::string bk = "b" + std::to_string(i + 1);
      if (rd.has(bk)) s.b[static_cast<std::size_t>(i)] = rd.expr(bk, vars);
    }
    if (rd.has("c")) s.c = rd.expr("c", vars);
    return s;
  }

  EllipticOperator build(const GridPtr& g) const {
    auto at = [](const std::optional<Expression>& e, const Point& x, double fb) { return e ? spatial(*e)(x) : fb; };
    auto A = [this, at](const Point& x) {
      Eigen::MatrixXd M(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const auto& e = a[static_cast<std::size_t>(i * n + j)];
          const auto& t = a[static_cast<std::size_t>(j * n + i)];
          M(i, j) = e ? at(e, x, 0.0) : (t ? at(t, x, 0.0) : (i == j ? 1.0 : 0.0));
        }
      return M;
    };
    auto B = [this, at](const Point& x) {
      Eigen::VectorXd v(n);
      for (int i = 0; i < n; ++i) v[i] = at(b[static_cast<std::size_t>(i)], x, 0.0);
      return Eigen::VectorXd(v);
    };
    auto C = [this, at](const Point& x) { return at(c, x, 0.0); };
    return EllipticOperator::from_functions(g, A, B, C);
  }
};

/// Random operator with diagonal a, bounded drift and c <= 0, so the
/// upwind stencil is monotone.
inline EllipticOperator random_monotone_operator(const GridPtr& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int n = g->dim();
  const auto N = static_cast<Eigen::Index>(g->size());
  EllipticOperator L{g, Eigen::MatrixXd::Zero(N, n * n), Eigen::MatrixXd::Zero(N, n), Eigen::VectorXd::Zero(N)};
  for (Eigen::Index r = 0; r < N; ++r) {
    for (int i = 0; i < n; ++i) {
      L.a(r, i * n + i) = 0.5 + 2 * U(rng);
      L.b(r, i) = 10 * (U(rng) - 0.5);
    }
    L.c[r] = -3 * U(rng);
  }
  return L;
}

struct MaxPrincipleSweep {
  int problems = 0;
  int violations = 0;
  double worst = -std::numeric_limits<double>::infinity();  ///< largest nodal value seen
};

/// Seeded problems with c <= 0, f >= 0, g <= 0; a violation is a node with u > tol.
inline MaxPrincipleSweep random_max_principle(const GridPtr& g, int problems, std::uint64_t seed, double tol) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  MaxPrincipleSweep out;
  out.problems = problems;
  const auto N = static_cast<Eigen::Index>(g->size());
  for (int k = 0; k < problems; ++k) {
    auto L = random_monotone_operator(g, rng);
    Eigen::VectorXd f(N), b(N);
    for (Eigen::Index r = 0; r < N; ++r) {
      f[r] = U(rng);
      b[r] = -U(rng);
    }
    auto u = solve_dirichlet(L, GridFunction(g, f), GridFunction(g, b)).u;
    double top = max_active(u);
    out.worst = std::max(out.worst, top);
    if (top > tol) ++out.violations;
  }
  return out;
}

inline Job prepare_solve(ConfigReader& rd, const DomainSpec& dom, std::uint64_t seed) {
  require_kind(rd, dom, {DomainKind::rectangle, DomainKind::ball, DomainKind::annulus},
               "solve needs a rectangle, ball or annulus");
  auto ladder = rd.ladder("domain.resolution");
  auto vars = coordinate_names(dom.n);
  OperatorSpec op = OperatorSpec::read(rd, dom.n);
  auto f = spatial(rd.expr("f", vars, "0"));
  std::optional<std::function<double(const Point&)>> exact;
  if (rd.has("exact")) exact = spatial(rd.expr("exact", vars));
  auto g = exact && !rd.has("g") ? *exact : spatial(rd.expr("g", vars, "0"));
  double residual_tol = rd.number("residual_tol", 1e-8);
  auto expected_rate = rd.maybe_number("expected_rate");
  double rate_tol = rd.number("rate_tol", 0.3);
  int random_problems = rd.integer("random_problems", 0);
  double mp_tol = rd.number("mp_tol", 0.0);

  return [=](RunOutput& out) {
    Csv csv({"resolution", "h", "residual", "error", "condition_estimate"});
    nlohmann::json rows = nlohmann::json::array();
    std::vector<double> hs, errs;
    double worst_rel_residual = 0;
    bool sign_case = false;
    double sign_top = 0;
    GridPtr finest;
    SolveStats last;
    for (int N : ladder) {
      auto grid = Grid::build(dom, N);
      finest = grid;
      auto L = op.build(grid);
      auto fG = GridFunction::sample(grid, f), gG = GridFunction::sample(grid, g);
      auto sol = solve_dirichlet(L, fG, gG);
      last = sol.stats;
      double err = 0;
      if (exact)
        for (std::size_t idx : grid->active_nodes()) err = std::max(err, std::abs(sol.u[idx] - (*exact)(grid->point(idx))));
      if (exact && err > 0) {
        hs.push_back(grid->max_spacing());
        errs.push_back(err);
      }
      worst_rel_residual = std::max(worst_rel_residual, sol.stats.residual / std::max(1.0, fG.sup_abs()));
      // Sign data for the discrete maximum principle: c <= 0, f >= 0 inside, g <= 0 on the boundary.
      bool fpos = true, gneg = true;
      for (std::size_t idx : grid->active_nodes()) {
        if (grid->interior(idx))
          fpos = fpos && fG[idx] >= 0;
        else
          gneg = gneg && gG[idx] <= 0;
      }
      if (L.max_c() <= 0 && fpos && gneg && sol.stats.m_matrix) {
        sign_case = true;
        sign_top = std::max(sign_top, max_active(sol.u));
      }
      csv.row({double(N), grid->max_spacing(), sol.stats.residual, exact ? err : 0.0, sol.stats.condition_estimate});
      nlohmann::json row{{"resolution", N}, {"h", grid->max_spacing()}, {"stats", sol.stats.to_json()}};
      if (exact) row["error"] = err;
      rows.push_back(row);
    }
    out.results = {{"ladder", rows}, {"stats", last.to_json()}};
    if (exact && !errs.empty()) out.results["error"] = errs.back();
    auto& inv = out.invariants;
    inv.le("residual_small", worst_rel_residual, residual_tol);
    if (sign_case) inv.le("max_principle_sign", sign_top, mp_tol);
    if (hs.size() >= 2) {
      double rate = loglog_slope(hs, errs);
      out.results["observed_rate"] = rate;
      if (expected_rate) inv.le("convergence_rate", std::abs(rate - *expected_rate), rate_tol);
    } else if (expected_rate) {
      inv.check("convergence_rate", false, "needs an exact solution and at least two nonzero errors");
    }
    if (random_problems > 0) {
      auto mp = random_max_principle(finest, random_problems, seed, mp_tol);
      out.results["random_max_principle"] = {
          {"problems", mp.problems}, {"violations", mp.violations}, {"max_u", mp.worst}, {"resolution", ladder.back()}};
      inv.le("max_principle_random", mp.violations, 0);
    }
    out.sweep = csv.str();
  };
}

inline Job prepare_continuity(ConfigReader& rd, const DomainSpec& dom, std::uint64_t) {
  require_kind(rd, dom, {DomainKind::rectangle, DomainKind::ball, DomainKind::annulus},
               "continuity needs a rectangle, ball or annulus");
  auto ladder = rd.ladder("domain.resolution");
  auto vars = coordinate_names(dom.n);
  OperatorSpec op = OperatorSpec::read(rd, dom.n);
  auto f = spatial(rd.expr("f", vars, "0"));
  auto g = spatial(rd.expr("g", vars, "0"));
  auto steps = rd.list("steps", {0.5, 0.25, 0.1});
  for (double s : steps)
    if (!(s > 0) || s > 1) throw ConfigError(rd.line("steps"), "steps", "initial steps must lie in (0, 1]");
  ContinuityOptions base;
  base.step_min = rd.positive("step_min", 1e-3);
  base.tol = rd.positive("tol", 1e-12);
  base.max_iterations = rd.integer("max_iterations", 200);
  double match_tol = rd.number("match_tol", 1e-8);
  double path_tol = rd.number("path_tol", 10 * base.tol);

  return [=](RunOutput& out) {
    Csv csv({"resolution", "step", "homotopy_steps", "halvings", "max_contraction", "diff_direct"});
    nlohmann::json rows = nlohmann::json::array();
    double worst_diff = 0, worst_path = 0, worst_contraction = 0;
    for (int N : ladder) {
      auto grid = Grid::build(dom, N);
      auto L = op.build(grid);
      if (L.max_c() > 0) throw DomainError("continuity needs c <= 0 at every node");
      auto fG = GridFunction::sample(grid, f), gG = GridFunction::sample(grid, g);
      auto direct = solve_dirichlet(L, fG, gG);
      std::vector<Eigen::VectorXd> finals;
      for (double s : steps) {
        ContinuityOptions opt = base;
        opt.step = s;
        auto hom = continuity_method(L, fG, gG, opt);
        double diff = (hom.u.values - direct.u.values).cwiseAbs().maxCoeff();
        double cmax = 0;
        for (double c : hom.stats.contraction_factors) cmax = std::max(cmax, c);
        worst_diff = std::max(worst_diff, diff);
        worst_contraction = std::max(worst_contraction, cmax);
        finals.push_back(hom.u.values);
        csv.row({double(N), s, double(hom.stats.homotopy_steps), double(hom.stats.halvings), cmax, diff});
        rows.push_back({{"resolution", N}, {"step", s}, {"diff_direct", diff}, {"stats", hom.stats.to_json()}});
      }
      for (std::size_t i = 1; i < finals.size(); ++i)
        worst_path = std::max(worst_path, (finals[i] - finals[0]).cwiseAbs().maxCoeff());
    }
    out.results = {{"runs", rows}, {"max_diff_direct", worst_diff}, {"path_spread", worst_path},
                   {"max_contraction", worst_contraction}};
    out.sweep = csv.str();
    auto& inv = out.invariants;
    inv.le("matches_direct", worst_diff, match_tol);
    inv.le("path_independent", worst_path, path_tol);
    inv.check("contraction_below_one", worst_contraction < 1, worst_contraction, 1.0, "<");
  };
}

// ---------------------------------------------------------------- subsuper

struct NewtonSolve {
  GridFunction u;
  int iterations = 0;
  double residual = 0.0;
};

/// Damped Newton for Laplace_h u + f(u) = 0 inside, u = g on the boundary.
inline NewtonSolve newton_semilinear(const Nonlinearity& f, GridFunction u, const GridFunction& g, int max_it) {
  const GridPtr& grid = u.grid;
  const SparseMatrix A = assemble_operator(EllipticOperator::laplacian(grid)).A;
  for (std::size_t idx = 0; idx < grid->size(); ++idx)
    if (!grid->interior(idx)) u.values[static_cast<Eigen::Index>(idx)] = grid->node_class(idx) == NodeClass::boundary ? g[idx] : 0.0;
  const Eigen::VectorXd fixed = u.values;
  auto F = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd r = A * v;
    for (std::size_t idx = 0; idx < grid->size(); ++idx) {
      auto i = static_cast<Eigen::Index>(idx);
      if (grid->interior(idx))
        r[i] += f(v[i]);
      else
        r[i] = v[i] - fixed[i];
    }
    return r;
  };
  NewtonSolve out;
  Eigen::VectorXd r = F(u.values);
  for (out.iterations = 0; out.iterations < max_it; ++out.iterations) {
    SparseMatrix J = A;
    for (std::size_t idx : grid->active_nodes())
      if (grid->interior(idx)) {
        auto i = static_cast<Eigen::Index>(idx);
        J.coeffRef(i, i) += f.derivative(u.values[i]);
      }
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success) throw SolveError("newton divergence", "singular Jacobian");
    Eigen::VectorXd du = lu.solve(-r);
    double lam = 1, r0 = r.cwiseAbs().maxCoeff();
    Eigen::VectorXd trial = u.values + du, rt = F(trial);
    while (rt.cwiseAbs().maxCoeff() >= r0 && lam > 1e-6) {
      lam /= 2;
      trial = u.values + lam * du;
      rt = F(trial);
    }
    double step = lam * du.cwiseAbs().maxCoeff();
    u.values = trial;
    r = rt;
    if (step < 1e-14 * std::max(1.0, u.values.cwiseAbs().maxCoeff())) break;
  }
  out.residual = r.cwiseAbs().maxCoeff();
  out.u = std::move(u);
  return out;
}

inline Job prepare_subsuper(ConfigReader& rd, const DomainSpec& dom, std::uint64_t) {
  require_kind(rd, dom, {DomainKind::rectangle, DomainKind::ball, DomainKind::annulus},
               "subsuper needs a rectangle, ball or annulus");
  auto ladder = rd.ladder("domain.resolution");
  auto vars = coordinate_names(dom.n);
  Expression fexpr = rd.expr("f", {"u"});
  auto sub = spatial(rd.expr("sub", vars));
  auto super = spatial(rd.expr("super", vars));
  auto g = spatial(rd.expr("g", vars, "0"));
  auto lo = rd.maybe_number("lo");
  auto hi = rd.maybe_number("hi");
  auto shift = rd.maybe_number("shift");
  MonotoneOptions mopt;
  mopt.tol = rd.positive("tol", 1e-10);
  mopt.max_iterations = rd.integer("max_iterations", 500);
  mopt.monotone_tol = rd.number("monotone_tol", 1e-10);
  bool newton = rd.flag("newton", true);
  std::optional<std::function<double(const Point&)>> start;
  if (rd.has("newton_start")) start = spatial(rd.expr("newton_start", vars));
  int newton_iterations = rd.integer("newton_iterations", 100);
  double newton_tol = rd.number("newton_tol", 1e-9);
  double oracle_tol = rd.number("oracle_tol", 1e-6);

  return [=](RunOutput& out) {
    auto& inv = out.invariants;
    Csv csv({"resolution", "iterations", "gap", "min_margin", "residual_upper", "newton_diff"});
    nlohmann::json rows = nlohmann::json::array();
    double worst_margin = std::numeric_limits<double>::infinity(), worst_res = 0, worst_diff = 0,
           worst_sandwich = 0, worst_newton_res = 0;
    for (int N : ladder) {
      auto grid = Grid::build(dom, N);
      auto v0 = GridFunction::sample(grid, sub), w0 = GridFunction::sample(grid, super);
      auto gG = GridFunction::sample(grid, g);
      auto nl = Nonlinearity::make(fexpr, lo.value_or(min_active(v0)), hi.value_or(max_active(w0)), shift);
      OrderedPairReport pair;
      try {
        pair = verify_ordered_pair(v0, w0, nl, gG, mopt.monotone_tol);
      } catch (const DomainError& e) {
        inv.check("ordered_pair", false, e.what());
        out.results = {{"ladder", rows}, {"failed_resolution", N}};
        return;
      }
      auto res = monotone_iterate(nl, v0, w0, gG, mopt);
      worst_margin = std::min(worst_margin, res.min_margin());
      worst_res = std::max({worst_res, res.residual_lower, res.residual_upper});
      nlohmann::json row{{"resolution", N}, {"ordered_pair", pair.to_json()}, {"nonlinearity", nl.to_json()},
                         {"monotone", res.to_json()}};
      double diff = 0;
      if (newton) {
        GridFunction init = start ? GridFunction::sample(grid, *start)
                                  : GridFunction(grid, 0.5 * (v0.values + w0.values));
        auto ns = newton_semilinear(nl, init, gG, newton_iterations);
        diff = (res.u_upper.values - ns.u.values).cwiseAbs().maxCoeff();
        worst_diff = std::max(worst_diff, diff);
        worst_newton_res = std::max(worst_newton_res, ns.residual);
        // Sandwich: v0 <= u_lower <= u* <= u_upper <= w0 for the Newton solution u*.
        double s = 0;
        for (std::size_t idx : grid->active_nodes())
          s = std::max({s, res.u_lower[idx] - ns.u[idx], ns.u[idx] - res.u_upper[idx], v0[idx] - ns.u[idx],
                        ns.u[idx] - w0[idx]});
        worst_sandwich = std::max(worst_sandwich, s);
        row["newton"] = {{"iterations", ns.iterations}, {"residual", ns.residual}, {"diff_upper", diff},
                         {"diff_lower", (res.u_lower.values - ns.u.values).cwiseAbs().maxCoeff()},
                         {"sup", ns.u.values.maxCoeff()}};
      }
      csv.row({double(N), double(res.iterations), res.gap, res.min_margin(), res.residual_upper, diff});
      rows.push_back(row);
    }
    out.results = {{"ladder", rows}, {"min_margin", worst_margin}, {"max_residual", worst_res}};
    out.sweep = csv.str();
    inv.check("ordered_pair", true, "v0 <= w0 with sub/super margins >= -monotone_tol");
    inv.ge("monotone_margins", worst_margin, -mopt.monotone_tol);
    inv.le("converged", worst_res, 10 * mopt.tol);
    if (newton) {
      out.results["newton_diff"] = worst_diff;
      inv.le("newton_converged", worst_newton_res, newton_tol);
      inv.le("matches_newton", worst_diff, oracle_tol);
      inv.le("sandwich", worst_sandwich, mopt.monotone_tol);
    }
  };
}

// ---------------------------------------------------------------- blowup

inline Job prepare_blowup(ConfigReader& rd, const DomainSpec& dom, std::uint64_t) {
  require_kind(rd, dom, {DomainKind::ball, DomainKind::annulus}, "blowup needs a ball or an annulus");
  if (dom.n < 3) throw ConfigError(rd.line("domain.n"), "domain.n", "blowup needs n >= 3");
  BlowupOptions opt;
  opt.n = dom.n;
  opt.tol = rd.positive("tol", opt.tol);
  opt.max_exponent = rd.integer("max_exponent", opt.max_exponent);
  if (rd.has("m_ladder")) {
    opt.ladder = rd.list("m_ladder");
    for (std::size_t i = 0; i < opt.ladder.size(); ++i)
      if (!(opt.ladder[i] > 0) || (i > 0 && !(opt.ladder[i] > opt.ladder[i - 1])))
        throw ConfigError(rd.line("m_ladder"), "m_ladder", "ladder must be positive and strictly increasing");
  }
  opt.d_min = rd.positive("d_min", opt.d_min);
  opt.ratio = rd.positive("ratio", opt.ratio);
  opt.h_max = rd.positive("h_max", opt.h_max);
  opt.stable_d = rd.positive("stable_d", opt.stable_d);
  opt.max_newton = rd.integer("max_newton", opt.max_newton);
  opt.max_refinements = rd.integer("max_refinements", opt.max_refinements);
  double trace_tol = rd.number("trace_tol", 0.05);
  std::optional<double> env_r0 = dom.kind == DomainKind::ball ? std::optional<double>(dom.r0) : std::nullopt;
  if (rd.has("envelope_r0")) env_r0 = rd.positive("envelope_r0", 1.0);
  std::string env_component = rd.text("envelope_component", "outer");
  double env_tol = rd.number("envelope_tol", 1e-3);
  double w_tol = rd.number("w_tol", 1e-3);
  auto band = rd.list("w_band", {1e-2, 0.5});
  if (band.size() != 2 || !(band[0] < band[1])) throw ConfigError(rd.line("w_band"), "w_band", "needs d_lo, d_hi with d_lo < d_hi");

  return [=](RunOutput& out) {
    auto res = loewner_nirenberg_solve(dom, opt);
    out.results = res.to_json();
    out.results.erase("w_csv");
    out.sweep = res.w_csv();
    auto& inv = out.invariants;
    inv.check("stabilized", res.stabilized, res.stabilized ? "u and w settled along the m-ladder" : "ladder exhausted");
    double mono = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < res.ladder.size(); ++i) mono = std::min(mono, res.ladder[i].monotone_margin);
    if (res.ladder.size() > 1) inv.ge("monotone_in_m", mono, -1e-10);
    nlohmann::json traces = nlohmann::json::object();
    for (const auto& t : res.traces) {
      traces[t.component] = t.w_trace;
      double scale = std::max(std::abs(t.reference), 1e-12);
      inv.le("w_boundary_trace_" + t.component, std::abs(t.w_trace - t.reference) / scale, trace_tol);
    }
    out.results["w_boundary_trace"] = res.trace("outer").w_trace;
    out.results["w_boundary_traces"] = traces;
    if (dom.kind == DomainKind::ball) {
      // Exact solution: v = 2d - d^2/r0, so w = -1/r0 everywhere.
      double err = 0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < res.d.size(); ++i)
        if (res.d[i] >= band[0] && res.d[i] <= band[1]) {
          err = std::max(err, std::abs(res.w[i] + 1 / dom.r0));
          ++count;
        }
      out.results["w_band_error"] = err;
      out.results["w_band_nodes"] = count;
      inv.le("w_equals_minus_curvature", err, w_tol);
    }
    if (env_r0) {
      auto env = envelope_check(res, *env_r0, env_component);
      out.results["envelope"] = env.to_json();
      inv.check("envelope_holds", env.holds(env_tol), "both tangent-sphere bounds, relative tolerance " +
                                                          std::to_string(env_tol));
      if (env.interior_sphere_ok) {
        inv.le("envelope_upper_attained", env.upper_gap, env_tol);
        inv.le("envelope_upper_pinches", env.finest_upper_gap, env_tol);
      }
      if (env.exterior_sphere_ok) inv.le("envelope_lower_pinches", env.finest_lower_gap, env_tol);
    }
  };
}

// ---------------------------------------------------------------- fuchsian-model

inline Job prepare_fuchsian_model(ConfigReader& rd, const DomainSpec& dom, std::uint64_t) {
  require_kind(rd, dom, {DomainKind::strip}, "fuchsian-model needs a strip domain");
  if (dom.n != 2) throw ConfigError(rd.line("domain.n"), "domain.n", "the model problem uses a 2-D strip (Y, T)");
  std::string k_text = rd.text("k");
  int n = rd.integer("n", 3);
  if (n < 3) throw ConfigError(rd.line("n"), "n", "needs n >= 3");
  rd.expr("k", {"Y", "T"});  // diagnostics with line and field
  auto P = FuchsianModelProblem::from_expression(k_text, dom.theta, n);
  P.ny = rd.integer("ny", P.ny);
  P.nt = rd.integer("nt", P.nt);
  P.sigma_points = rd.integer("sigma_points", P.sigma_points);
  P.residual_tol = rd.number("residual_tol", P.residual_tol);
  double boundary_tol = rd.number("boundary_tol", 1e-4);
  std::optional<Expression> expected;
  if (rd.has("expected_f0")) expected = rd.expr("expected_f0", {"Y", "T"});
  double f0_tol = rd.number("f0_tol", 1e-6);

  return [=](RunOutput& out) {
    auto res = fuchsian_model_solve(P);
    out.results = res.to_json();
    out.results["k"] = P.k_text;
    const Grid& g = *res.grid;
    Csv csv({"Y", "k", "f0", "f"});
    for (int i = 0; i < g.count(0); ++i) {
      std::size_t idx = g.linear_index({i, 0});
      csv.row({g.point(idx)[0], res.k[idx], res.f0[idx], res.f[idx]});
    }
    out.sweep = csv.str();
    auto& inv = out.invariants;
    inv.le("residual_within_tolerance", res.residual, P.residual_tol);
    inv.le("boundary_identity", res.boundary_identity, boundary_tol);
    if (expected) {
      double err = 0;
      for (std::size_t idx = 0; idx < g.size(); ++idx) {
        Point p = g.point(idx);
        err = std::max(err, std::abs(res.f0[idx] - (*expected)({p[0], p[1]})));
      }
      out.results["f0_error"] = err;
      inv.le("f0_matches_expected", err, f0_tol);
    }
  };
}

// ---------------------------------------------------------------- probes

inline Job prepare_probes(ConfigReader& rd, const DomainSpec& dom, std::uint64_t) {
  require_kind(rd, dom, {DomainKind::ball}, "probes needs a ball domain (the probe balls B_2R are centred at its centre)");
  if (dom.n < 2 || dom.n > 3) throw ConfigError(rd.line("domain.n"), "domain.n", "probes support n = 2, 3");
  auto density = spatial(rd.expr("density", coordinate_names(dom.n)));
  auto radii = rd.list("radii", {0.25, 0.5, 1.0});
  for (double R : radii)
    if (!(R > 0)) throw ConfigError(rd.line("radii"), "radii", "radii must be positive");
  double alpha = rd.positive("alpha", 0.5);
  int cells = rd.integer("cells", 17);
  WijOptions wopt;
  wopt.sphere_resolution = rd.integer("sphere_resolution", wopt.sphere_resolution);
  double factor = rd.positive("c_emp_factor", 4.0);

  return [=](RunOutput& out) {
    const Point c = dom.center_point();
    Csv csv({"R", "nodes_in_ball", "c_emp", "sup_hess_u", "holder_hess_u", "sup_f", "holder_f", "first_order_ratio"});
    nlohmann::json rows = nlohmann::json::array();
    std::vector<double> cemp;
    bool all = true;
    for (double R : radii) {
      auto shifted = [&](const Point& x) { return density(x + c); };
      auto rep = interior_estimate_probe(shifted, dom.n, alpha, R, cells, wopt);
      rows.push_back(rep.to_json());
      if (rep.c_emp)
        cemp.push_back(*rep.c_emp);
      else
        all = false;
      csv.row({R, double(rep.nodes_in_ball), rep.c_emp.value_or(0.0), rep.sup_hess_u, rep.holder_hess_u, rep.sup_f,
               rep.holder_f, rep.first_order_ratio.value_or(0.0)});
    }
    out.results = {{"probes", rows}};
    out.sweep = csv.str();
    auto& inv = out.invariants;
    inv.check("c_emp_defined", all, all ? "density nonzero on every probe ball" : "zero density; C_emp undefined");
    if (all && cemp.size() >= 2) {
      out.results["c_emp_spread"] = ratio_spread(cemp);
      inv.check("c_emp_scale_robust", ratio_spread(cemp) < factor, ratio_spread(cemp), factor, "<");
    }
  };
}

inline std::string utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

/// Validates `cfg`, runs the experiment and assembles the report. Nothing
/// is written to disk here; see write_outputs.
inline ExperimentOutcome run_experiment(const KeyValueConfig& cfg, const RunOptions& opt = {}) {
  ExperimentOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  detail::ConfigReader rd(cfg);
  std::string kind;
  std::uint64_t seed = 0;
  detail::Job job;
  try {
    kind = rd.text("experiment");
    const auto& kinds = experiment_kinds();
    if (std::none_of(kinds.begin(), kinds.end(), [&](const ExperimentKind& k) { return kind == k.name; }))
      throw ConfigError(rd.line("experiment"), "experiment", "unknown experiment kind '" + kind + "'");
    if (opt.seed) {
      seed = *opt.seed;
      rd.consume("seed");
      rd.put("seed", seed);
    } else {
      long s = rd.integer("seed", 0);
      if (s < 0) throw ConfigError(rd.line("seed"), "seed", "must be >= 0");
      seed = static_cast<std::uint64_t>(s);
    }
    out.report_name = rd.text("report_name", out.report_name);
    out.sweep_name = rd.text("sweep_name", out.sweep_name);
    bool sweep = rd.flag("sweep", true);
    if (!sweep) out.sweep_name.clear();
    DomainSpec dom = detail::read_domain(rd);
    if (kind == "norms") job = detail::prepare_norms(rd, dom, seed);
    else if (kind == "lp") job = detail::prepare_lp(rd, dom, seed);
    else if (kind == "potential") job = detail::prepare_potential(rd, dom, seed);
    else if (kind == "solve") job = detail::prepare_solve(rd, dom, seed);
    else if (kind == "continuity") job = detail::prepare_continuity(rd, dom, seed);
    else if (kind == "subsuper") job = detail::prepare_subsuper(rd, dom, seed);
    else if (kind == "blowup") job = detail::prepare_blowup(rd, dom, seed);
    else if (kind == "fuchsian-model") job = detail::prepare_fuchsian_model(rd, dom, seed);
    else job = detail::prepare_probes(rd, dom, seed);
    rd.reject_unknown(kind);
  } catch (const ConfigError& e) {
    out.status = 2;
    out.message = e.what();
    return out;
  } catch (const DomainError& e) {
    out.status = 2;
    out.message = std::string("config: ") + e.what();
    return out;
  }

  detail::RunOutput ro;
  try {
    job(ro);
  } catch (const SolveError& e) {
    ro.invariants.check("solver_" + e.kind(), false, e.what());
  } catch (const DomainError& e) {
    out.status = 2;
    out.message = std::string("config: ") + e.what();
    return out;
  }

  out.failed = ro.invariants.failed();
  out.status = out.failed.empty() ? 0 : 1;
  out.sweep_csv = out.sweep_name.empty() ? std::string() : ro.sweep;
  nlohmann::json& r = out.report;
  r["schema_version"] = kReportSchemaVersion;
  r["experiment"] = kind;
  r["seed"] = seed;
  r["config"] = rd.resolved();
  r["config_text"] = cfg.to_text();
  r["results"] = std::move(ro.results);
  r["invariants"] = ro.invariants.to_json();
  r["failed_invariants"] = out.failed;
  r["status"] = out.status;
  if (!opt.fixed_clock) {
    r["generated_at"] = detail::utc_now();
    r["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return out;
}

/// Serialized report text (two-space indent, trailing newline).
inline std::string report_text(const ExperimentOutcome& o) { return o.report.dump(2) + "\n"; }

/// Writes report.json (and sweep.csv when present) into `dir`. Outcomes with
/// status 2 carry no report and write nothing.
inline void write_outputs(const ExperimentOutcome& o, const std::filesystem::path& dir) {
  if (o.status == 2) return;
  std::filesystem::create_directories(dir);
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
  };
  write(dir / o.report_name, report_text(o));
  if (!o.sweep_csv.empty()) write(dir / o.sweep_name, o.sweep_csv);
}

}  // namespace schauder
