#pragma once

// Von Mises densities on T^N and their Fourier coefficients.
//
// I_0(k) overflows double past k ~ 713. Everything here only needs
// I_j(k)/I_0(k) or I_0(k) e^{-k}; both come out of one backward (Miller)
// recurrence normalized by I_0 + 2 sum_{j>=1} I_j = e^k.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "ktn/error.hpp"
#include "ktn/lattice.hpp"
#include "ktn/rkha.hpp"
#include "ktn/torus.hpp"

namespace ktn {

namespace detail {

/// Starting order for the backward recurrence. The tail I_N/I_0 ~ exp(-N^2/2k)
/// has to be below double precision for the normalization sum to close.
inline int miller_start_order(int j_max, double kappa) {
  const double base = j_max + std::ceil(10.0 + 2.0 * std::sqrt(j_max * kappa));
  const double tail = j_max + 20.0 + std::ceil(9.0 * std::sqrt(kappa));
  return static_cast<int>(std::max(base, tail));
}

/// Unnormalized minimal solution y_0..y_{j_max} of the recurrence
/// y_{k-1} = (2k/kappa) y_k + y_{k+1}, plus the normalization sum y_0 + 2 sum y_k.
struct MillerResult {
  std::vector<double> y;
  double norm = 0.0;
};

inline MillerResult miller(int j_max, double kappa) {
  const int N = miller_start_order(j_max, kappa);
  MillerResult r;
  r.y.assign(static_cast<std::size_t>(j_max) + 1, 0.0);
  double next = 0.0;     // y_{k+1}
  double cur = 1e-280;   // y_k, k = N
  double sum = 0.0;      // 2 sum_{i>=k+1} y_i  (after the step below)
  for (int k = N; k >= 1; --k) {
    if (k <= j_max) r.y[static_cast<std::size_t>(k)] = cur;
    sum += 2.0 * cur;
    const double prev = (2.0 * k / kappa) * cur + next;
    next = cur;
    cur = prev;
    if (std::abs(cur) > 1e250) {
      constexpr double s = 1e-250;
      cur *= s;
      next *= s;
      sum *= s;
      for (int i = std::max(k, 1); i <= j_max; ++i) r.y[static_cast<std::size_t>(i)] *= s;
    }
  }
  r.y[0] = cur;
  r.norm = sum + cur;
  return r;
}

}  // namespace detail

/// I_0(kappa) e^{-kappa}.
inline double scaled_bessel_i0(double kappa) {
  if (kappa < 0.0) throw ValidationError("von Mises sharpness must be nonnegative");
  if (kappa == 0.0) return 1.0;
  const auto r = detail::miller(0, kappa);
  return r.y[0] / r.norm;
}

/// I_j(kappa) / I_0(kappa) for j = 0..j_max.
inline std::vector<double> bessel_ratios(int j_max, double kappa) {
  if (kappa < 0.0 || !std::isfinite(kappa)) throw ValidationError("von Mises sharpness must be finite and nonnegative");
  if (j_max < 0) throw ValidationError("negative Bessel order");
  std::vector<double> out(static_cast<std::size_t>(j_max) + 1, 0.0);
  out[0] = 1.0;
  if (kappa == 0.0) return out;
  const auto r = detail::miller(j_max, kappa);
  for (int j = 1; j <= j_max; ++j) out[static_cast<std::size_t>(j)] = r.y[static_cast<std::size_t>(j)] / r.y[0];
  return out;
}

inline double bessel_ratio(int j, double kappa) {
  return bessel_ratios(j, kappa)[static_cast<std::size_t>(j)];
}

struct VonMisesParams {
  TorusPoint mu{0.0, 0.0};
  std::array<double, 2> kappa{0.0, 0.0};
};

/// sigma_{mu,kappa}(x) = prod_i exp(kappa_i (cos(x_i - mu_i) - 1)) / (I_0(kappa_i) e^{-kappa_i}).
inline double von_mises_eval(const VonMisesParams& p, const TorusPoint& x, int dim = 2) {
  double v = 1.0;
  for (int i = 0; i < dim; ++i) {
    const double k = p.kappa[static_cast<std::size_t>(i)];
    if (k == 0.0) continue;
    v *= std::exp(k * (std::cos(x[static_cast<std::size_t>(i)] - p.mu[static_cast<std::size_t>(i)]) - 1.0)) /
         scaled_bessel_i0(k);
  }
  return v;
}

/// Fourier coefficients <gamma_j, sigma_{mu,kappa}> = prod_i (I_|j_i|(k_i)/I_0(k_i)) e^{-i j_i mu_i}.
inline FourierVector von_mises_fourier(const VonMisesParams& p, LatticePtr lat) {
  const int J = lat->max_wavenumber();
  const int dim = lat->dim();
  std::array<std::vector<double>, 2> ratio;
  for (int i = 0; i < dim; ++i) ratio[static_cast<std::size_t>(i)] = bessel_ratios(J, p.kappa[static_cast<std::size_t>(i)]);

  Eigen::VectorXcd c(static_cast<Eigen::Index>(lat->size()));
  for (std::size_t k = 0; k < lat->size(); ++k) {
    const auto& j = (*lat)[k];
    cplx v = 1.0;
    for (int i = 0; i < dim; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      v *= ratio[ii][static_cast<std::size_t>(std::abs(j[ii]))] * std::polar(1.0, -j[ii] * p.mu[ii]);
    }
    c[static_cast<Eigen::Index>(k)] = v;
  }
  return FourierVector(std::move(lat), std::move(c));
}

/// Fourier vector of the n-th root feature state at x: isotropic sharpness kappa/n.
/// Not normalized; every consumer takes ratios.
inline FourierVector root_feature(const TorusPoint& x, double kappa_eval, int n, LatticePtr lat) {
  if (n < 1) throw ValidationError("root_feature requires n >= 1");
  if (!(kappa_eval > 0.0)) throw ValidationError("root_feature requires kappa_eval > 0");
  VonMisesParams p;
  p.mu = x;
  p.kappa = {kappa_eval / n, lat->dim() == 2 ? kappa_eval / n : 0.0};
  return von_mises_fourier(p, std::move(lat));
}

}  // namespace ktn
