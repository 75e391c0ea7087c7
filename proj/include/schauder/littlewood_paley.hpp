#pragma once

// Dyadic (Littlewood–Paley) decomposition on periodic grids, block-decay
// Hölder estimates and the spectral Poisson solver.
//
// Frequencies are xi = 2 pi k / L with signed integer k; transforms use
// Eigen's FFT module one axis at a time.

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "schauder/geometry.hpp"

namespace schauder {

/// C^2 quintic cutoff: 1 on [0,1], 0 on [2,inf), monotone in between.
inline double lp_cutoff(double t) {
  t = std::abs(t);
  if (t <= 1) return 1.0;
  if (t >= 2) return 0.0;
  double s = t - 1;
  return 1 - s * s * s * (10 - 15 * s + 6 * s * s);
}

/// psi_0(xi) = phi(|xi|), psi_j(xi) = phi(2^-j |xi|) - phi(2^{1-j} |xi|).
inline double lp_multiplier(int j, double xi) {
  if (j == 0) return lp_cutoff(xi);
  return lp_cutoff(std::ldexp(xi, -j)) - lp_cutoff(std::ldexp(xi, 1 - j));
}

using ComplexVector = std::vector<std::complex<double>>;

namespace detail {

inline void fft_axis_pass(const Grid& g, ComplexVector& data, bool inverse) {
  Eigen::FFT<double> fft;
  for (int a = 0; a < g.dim(); ++a) {
    const auto len = static_cast<std::size_t>(g.count(a));
    const std::size_t stride = g.stride(a);
    ComplexVector line(len), out(len);
    for (std::size_t base = 0; base < data.size(); ++base) {
      if ((base / stride) % len != 0) continue;  // first node of each line
      for (std::size_t i = 0; i < len; ++i) line[i] = data[base + i * stride];
      if (inverse)
        fft.inv(out, line);
      else
        fft.fwd(out, line);
      for (std::size_t i = 0; i < len; ++i) data[base + i * stride] = out[i];
    }
  }
}

inline void require_torus(const Grid& g, const char* who) {
  if (g.domain().kind != DomainKind::torus) throw DomainError(std::string(who) + ": torus grid required");
}

}  // namespace detail

inline ComplexVector fft_forward(const GridFunction& u) {
  ComplexVector data(u.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = u[i];
  detail::fft_axis_pass(*u.grid, data, false);
  return data;
}

inline GridFunction fft_inverse_real(const GridPtr& g, ComplexVector data) {
  detail::fft_axis_pass(*g, data, true);
  Eigen::VectorXd v(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) v[static_cast<Eigen::Index>(i)] = data[i].real();
  return GridFunction(g, std::move(v));
}

/// Angular wave vector of every node index, row-wise (N x n).
inline Eigen::MatrixXd wave_vectors(const Grid& g) {
  const int n = g.dim();
  Eigen::MatrixXd xi(static_cast<Eigen::Index>(g.size()), n);
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    auto m = g.multi_index(idx);
    for (int a = 0; a < n; ++a) {
      int N = g.count(a);
      int k = m[static_cast<std::size_t>(a)];
      if (k > N / 2) k -= N;
      double L = g.spacing(a) * N;
      xi(static_cast<Eigen::Index>(idx), a) = 2 * M_PI * k / L;
    }
  }
  return xi;
}

/// Fourier multiplier m(xi) applied to u (real part returned).
template <class Multiplier>
GridFunction apply_multiplier(const GridFunction& u, Multiplier&& m) {
  auto hat = fft_forward(u);
  Eigen::MatrixXd xi = wave_vectors(*u.grid);
  for (std::size_t i = 0; i < hat.size(); ++i) hat[i] *= m(xi.row(static_cast<Eigen::Index>(i)));
  return fft_inverse_real(u.grid, std::move(hat));
}

/// Spectral derivative d/dx_a.
inline GridFunction spectral_derivative(const GridFunction& u, int axis) {
  detail::require_torus(*u.grid, "spectral_derivative");
  return apply_multiplier(u, [axis](const auto& xi) {
    // The unpaired Nyquist mode lands in the discarded imaginary part.
    return std::complex<double>(0.0, xi[axis]);
  });
}

inline GridFunction spectral_second_derivative(const GridFunction& u, int a, int b) {
  detail::require_torus(*u.grid, "spectral_second_derivative");
  return apply_multiplier(u, [a, b](const auto& xi) { return std::complex<double>(-xi[a] * xi[b], 0.0); });
}

inline GridFunction spectral_laplacian(const GridFunction& u) {
  detail::require_torus(*u.grid, "spectral_laplacian");
  return apply_multiplier(u, [](const auto& xi) { return std::complex<double>(-xi.squaredNorm(), 0.0); });
}

/// Pointwise Euclidean norm of the spectral gradient, sup over nodes.
inline double spectral_gradient_sup(const GridFunction& u) {
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(u.size()));
  for (int a = 0; a < u.grid->dim(); ++a) sq.array() += spectral_derivative(u, a).values.array().square();
  return std::sqrt(sq.maxCoeff());
}

struct LPDecomposition {
  GridPtr grid;
  int J = 0;                       ///< highest band kept
  std::vector<GridFunction> blocks;  ///< u_0 .. u_J
  std::vector<double> block_sup;
  double source_sup = 0.0;
  std::vector<std::string> warnings;

  /// v_j = u_0 + ... + u_j.
  GridFunction partial_sum(int j) const {
    if (j < 0 || j > J) throw DomainError("partial_sum: band out of range");
    GridFunction v = blocks[0];
    for (int i = 1; i <= j; ++i) v.values += blocks[static_cast<std::size_t>(i)].values;
    return v;
  }
  GridFunction reconstruct() const { return partial_sum(J); }

  /// One row per node: coordinates then one column per block.
  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    for (int a = 0; a < grid->dim(); ++a) out << "x" << a + 1 << ",";
    for (int j = 0; j <= J; ++j) out << "u_" << j << (j < J ? "," : "\n");
    for (std::size_t idx = 0; idx < grid->size(); ++idx) {
      Point p = grid->point(idx);
      for (int a = 0; a < grid->dim(); ++a) out << p[a] << ",";
      for (int j = 0; j <= J; ++j) out << blocks[static_cast<std::size_t>(j)][idx] << (j < J ? "," : "\n");
    }
    return out.str();
  }
};

inline LPDecomposition lp_decompose(const GridFunction& u, int J) {
  const Grid& g = *u.grid;
  detail::require_torus(g, "lp_decompose");
  for (int a = 0; a < g.dim(); ++a) {
    int N = g.count(a);
    if ((N & (N - 1)) != 0) throw DomainError("lp_decompose: node count per axis must be a power of two");
    if (std::abs(g.spacing(a) * N - g.spacing(0) * g.count(0)) > 1e-12 * g.spacing(0) * g.count(0))
      throw DomainError("lp_decompose: axis lengths must be equal");
  }
  if (J < 0) throw DomainError("lp_decompose: J must be >= 0");
  LPDecomposition dec;
  dec.grid = u.grid;
  Eigen::MatrixXd xi = wave_vectors(g);
  double xi_max = 0;
  for (Eigen::Index i = 0; i < xi.rows(); ++i) xi_max = std::max(xi_max, xi.row(i).norm());
  int nyquist_band = 0;
  while (std::ldexp(1.0, nyquist_band) < xi_max) ++nyquist_band;
  if (J > nyquist_band) {
    dec.warnings.push_back("J=" + std::to_string(J) + " exceeds the Nyquist band; truncated to " +
                           std::to_string(nyquist_band));
    J = nyquist_band;
  }
  dec.J = J;
  auto hat = fft_forward(u);
  std::vector<double> absxi(hat.size());
  for (std::size_t i = 0; i < hat.size(); ++i) absxi[i] = xi.row(static_cast<Eigen::Index>(i)).norm();
  for (int j = 0; j <= J; ++j) {
    ComplexVector b(hat.size());
    for (std::size_t i = 0; i < hat.size(); ++i) b[i] = hat[i] * lp_multiplier(j, absxi[i]);
    dec.blocks.push_back(fft_inverse_real(u.grid, std::move(b)));
    dec.block_sup.push_back(dec.blocks.back().values.cwiseAbs().maxCoeff());
  }
  dec.source_sup = u.values.cwiseAbs().maxCoeff();
  return dec;
}

struct LPAlphaEstimate {
  bool band_limited = false;
  double alpha_hat = 0.0;     ///< minus the slope of log2 sup|u_j| against j
  double residual = 0.0;      ///< RMS of the fit in log2 units
  std::vector<int> bands;     ///< bands entering the fit
  std::vector<double> bernstein_c;      ///< sup|grad u_j| / (2^j sup|u|), all bands
  std::vector<double> bernstein_block;  ///< sup|grad u_j| / (2^j sup|u_j|), 0 for empty bands
  double bernstein_max = 0.0;
};

/// Block-decay exponent over bands [band_lo, band_hi] (default: every
/// nonvacuous band j >= 1).
inline LPAlphaEstimate lp_alpha_estimate(const LPDecomposition& dec, std::optional<int> band_lo = std::nullopt,
                                         std::optional<int> band_hi = std::nullopt) {
  LPAlphaEstimate out;
  const double floor = 1e-12 * std::max(dec.source_sup, 1e-300);
  for (int j = 0; j <= dec.J; ++j) {
    const auto& b = dec.blocks[static_cast<std::size_t>(j)];
    double grad = spectral_gradient_sup(b);
    double scale = std::ldexp(1.0, j);
    double c = dec.source_sup > 0 ? grad / (scale * dec.source_sup) : 0.0;
    double bs = dec.block_sup[static_cast<std::size_t>(j)];
    out.bernstein_c.push_back(c);
    out.bernstein_block.push_back(bs > floor ? grad / (scale * bs) : 0.0);
    out.bernstein_max = std::max(out.bernstein_max, c);
  }
  int lo = band_lo.value_or(1), hi = band_hi.value_or(dec.J);
  for (int j = std::max(lo, 0); j <= std::min(hi, dec.J); ++j)
    if (dec.block_sup[static_cast<std::size_t>(j)] > floor) out.bands.push_back(j);
  if (out.bands.size() < 5) {
    out.band_limited = true;
    return out;
  }
  const double m = static_cast<double>(out.bands.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int j : out.bands) {
    double y = std::log2(dec.block_sup[static_cast<std::size_t>(j)]);
    sx += j;
    sy += y;
    sxx += static_cast<double>(j) * j;
    sxy += j * y;
  }
  double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  double icpt = (sy - slope * sx) / m;
  double ss = 0;
  for (int j : out.bands) {
    double r = std::log2(dec.block_sup[static_cast<std::size_t>(j)]) - (icpt + slope * j);
    ss += r * r;
  }
  out.alpha_hat = -slope;
  out.residual = std::sqrt(ss / m);
  return out;
}

/// Solves -Laplace(u) = rho on the torus with the zero-mean normalisation.
inline GridFunction lp_poisson_solve(const GridFunction& rho) {
  detail::require_torus(*rho.grid, "lp_poisson_solve");
  double mean = rho.values.mean();
  double tol = 1e-12 * std::max(1.0, rho.values.cwiseAbs().maxCoeff());
  if (std::abs(mean) > tol) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "lp_poisson_solve: density has nonzero mean " << mean;
    throw DomainError(msg.str());
  }
  return apply_multiplier(rho, [](const auto& xi) {
    double k2 = xi.squaredNorm();
    return std::complex<double>(k2 > 0 ? 1.0 / k2 : 0.0, 0.0);
  });
}

}  // namespace schauder
