#pragma once

// Reproducing kernel Hilbert algebra on T^N with subexponential weights
//   lambda_tau(j) = prod_i exp(-tau |j_i|^p),  0 < p < 1, tau > 0.
//
// Functions are represented by Fourier coefficients in the character basis
// gamma_j(x) = exp(i j.x) over a truncated WavenumberLattice. The pointwise
// product is coefficient convolution, truncated to the lattice.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "ktn/error.hpp"
#include "ktn/lattice.hpp"
#include "ktn/torus.hpp"

namespace ktn {

using cplx = std::complex<double>;

struct RkhaParams {
  double p = 0.75;
  double tau = 0.001;

  void validate() const {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("RKHA exponent p must lie in (0, 1)");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("RKHA scale tau must be positive");
  }
};

/// Complex coefficient vector over a lattice.
struct FourierVector {
  LatticePtr lattice;
  Eigen::VectorXcd coeffs;

  FourierVector() = default;
  FourierVector(LatticePtr lat, Eigen::VectorXcd c) : lattice(std::move(lat)), coeffs(std::move(c)) {
    if (!lattice) throw ValidationError("FourierVector without lattice");
    if (static_cast<std::size_t>(coeffs.size()) != lattice->size())
      throw ValidationError("coefficient vector length does not match lattice size");
  }

  static FourierVector zeros(LatticePtr lat) {
    const auto m = static_cast<Eigen::Index>(lat->size());
    return FourierVector(std::move(lat), Eigen::VectorXcd::Zero(m));
  }

  /// Unit coefficient at j (the character gamma_j); j must be in band.
  static FourierVector character(LatticePtr lat, const MultiIndex& j) {
    auto f = zeros(lat);
    const auto pos = lat->position_of(j);
    if (!pos) throw ValidationError("character wavenumber outside lattice");
    f.coeffs[static_cast<Eigen::Index>(*pos)] = 1.0;
    return f;
  }

  /// Multiplicative unit (constant function 1).
  static FourierVector unit(LatticePtr lat) { return character(std::move(lat), MultiIndex{}); }

  std::size_t size() const { return lattice ? lattice->size() : 0; }
};

inline void require_same_lattice(const FourierVector& f, const FourierVector& g) {
  if (!f.lattice || !g.lattice || !(*f.lattice == *g.lattice)) throw LatticeMismatch();
}

/// lambda_tau(j).
inline double weight(const RkhaParams& params, const MultiIndex& j) {
  double e = 0.0;
  for (int i = 0; i < 2; ++i)
    if (j[i] != 0) e += std::pow(std::abs(static_cast<double>(j[i])), params.p);
  return std::exp(-params.tau * e);
}

/// Weights in lattice order; half = true gives lambda_{tau/2} = sqrt(lambda_tau).
inline Eigen::VectorXd weight_vector(const RkhaParams& params, const WavenumberLattice& lat, bool half) {
  RkhaParams q = params;
  if (half) q.tau *= 0.5;
  Eigen::VectorXd w(static_cast<Eigen::Index>(lat.size()));
  for (std::size_t k = 0; k < lat.size(); ++k) w[static_cast<Eigen::Index>(k)] = weight(q, lat[k]);
  return w;
}

/// Truncated Mercer sum k(x, y) = sum_j lambda_tau(j) cos(j.(y - x)).
inline double kernel_eval(const RkhaParams& params, const WavenumberLattice& lat, const TorusPoint& x,
                          const TorusPoint& y) {
  const double d0 = y[0] - x[0];
  const double d1 = lat.dim() == 2 ? y[1] - x[1] : 0.0;
  double s = 0.0;
  for (const auto& j : lat.order()) s += weight(params, j) * std::cos(j[0] * d0 + j[1] * d1);
  return s;
}

struct MarkovReport {
  double min_value = 0.0;
  double mean_value = 0.0;
  double diagonal = 0.0;  // k(x, x)
  int resolution = 0;
};

/// Scan k(0, y) on a uniform g^N grid. The mean is the periodic trapezoid
/// rule and is exact for the band-limited truncated kernel when g > 2J.
inline MarkovReport markov_check(const RkhaParams& params, const WavenumberLattice& lat, int g) {
  const int J = lat.max_wavenumber();
  if (g <= 2 * J) throw ResolutionTooLow(g, J);

  // Product weights make the square-lattice kernel separable: k = k1(y1) k1(y2).
  std::vector<double> k1(static_cast<std::size_t>(g), 0.0);
  for (int a = 0; a < g; ++a) {
    const double y = kTwoPi * a / g;
    double s = 0.0;
    for (int j = -J; j <= J; ++j) s += weight(params, MultiIndex{{j, 0}}) * std::cos(j * y);
    k1[static_cast<std::size_t>(a)] = s;
  }

  MarkovReport r;
  r.resolution = g;
  r.diagonal = kernel_eval(params, lat, {0.0, 0.0}, {0.0, 0.0});
  double mn = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  if (lat.dim() == 1) {
    for (double v : k1) {
      mn = std::min(mn, v);
      sum += v;
    }
    r.mean_value = sum / g;
  } else {
    for (double u : k1)
      for (double v : k1) {
        mn = std::min(mn, u * v);
        sum += u * v;
      }
    r.mean_value = sum / (static_cast<double>(g) * g);
  }
  r.min_value = mn;
  return r;
}

/// max_j (lambda * lambda)(j) / lambda(j) with the convolution truncated to the lattice.
inline double subconvolutivity_constant(const RkhaParams& params, const WavenumberLattice& lat) {
  const Eigen::VectorXd w = weight_vector(params, lat, false);
  const std::size_t m = lat.size();
  std::vector<double> conv(m, 0.0);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      const auto pos = lat.position_of(shift(lat[a], lat[b]));
      if (pos) conv[*pos] += w[static_cast<Eigen::Index>(a)] * w[static_cast<Eigen::Index>(b)];
    }
  double c = 0.0;
  for (std::size_t k = 0; k < m; ++k) c = std::max(c, conv[k] / w[static_cast<Eigen::Index>(k)]);
  return c;
}

/// Pointwise product as coefficient convolution; out-of-band terms are dropped.
inline FourierVector pointwise_product(const FourierVector& f, const FourierVector& g) {
  require_same_lattice(f, g);
  const auto& lat = *f.lattice;
  const std::size_t m = lat.size();

  std::vector<std::size_t> g_support;
  g_support.reserve(m);
  for (std::size_t b = 0; b < m; ++b)
    if (g.coeffs[static_cast<Eigen::Index>(b)] != cplx(0.0)) g_support.push_back(b);

  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(m));
  for (std::size_t a = 0; a < m; ++a) {
    const cplx fa = f.coeffs[static_cast<Eigen::Index>(a)];
    if (fa == cplx(0.0)) continue;
    for (std::size_t b : g_support) {
      const auto pos = lat.position_of(shift(lat[a], lat[b]));
      if (pos) out[static_cast<Eigen::Index>(*pos)] += fa * g.coeffs[static_cast<Eigen::Index>(b)];
    }
  }
  return FourierVector(f.lattice, std::move(out));
}

/// n-fold truncated self-convolution.
inline FourierVector power_n(const FourierVector& f, int n) {
  if (n < 1) throw ValidationError("power_n requires n >= 1");
  FourierVector acc = f;
  for (int k = 1; k < n; ++k) acc = pointwise_product(acc, f);
  return acc;
}

/// <f, g>_H_tau = sum_j conj(f_j) g_j / lambda_tau(j).
inline cplx rkha_inner(const FourierVector& f, const FourierVector& g, const RkhaParams& params) {
  require_same_lattice(f, g);
  const Eigen::VectorXd w = weight_vector(params, *f.lattice, false);
  cplx s = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) s += std::conj(f.coeffs[k]) * g.coeffs[k] / w[k];
  return s;
}

/// Dirichlet energy of a coefficient vector in the L2 character basis:
/// (sum_{k>=1} |c_k|^2 / lambda_k) / (sum_k |c_k|^2), lambda the full-tau weights.
inline double dirichlet_energy(const Eigen::Ref<const Eigen::VectorXcd>& c,
                               const Eigen::Ref<const Eigen::VectorXd>& lambda) {
  if (c.size() != lambda.size()) throw ValidationError("dirichlet_energy: length mismatch");
  const double denom = c.squaredNorm();
  if (!(denom > 0.0)) throw ZeroVector();
  double num = 0.0;
  for (Eigen::Index k = 1; k < c.size(); ++k) num += std::norm(c[k]) / lambda[k];
  return num / denom;
}

}  // namespace ktn
