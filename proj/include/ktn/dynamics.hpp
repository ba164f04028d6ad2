#pragma once

// Benchmark flows on the torus: ergodic rotation and the Stepanoff flow.
//
//   rotation:  V = d/dtheta_1 + alpha d/dtheta_2      (N = 2)
//              V = alpha d/dtheta                      (N = 1, circle rotation)
//   stepanoff: V_2 = alpha (1 - cos(theta_1 - theta_2)),
//              V_1 = V_2 + (1 - alpha)(1 - cos theta_2)
//
// Generator matrix elements <phi_r, V.grad phi_s> in the character basis are
// exact: the vector field components are trigonometric polynomials.

#include <Eigen/Sparse>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "ktn/error.hpp"
#include "ktn/lattice.hpp"
#include "ktn/torus.hpp"

namespace ktn {

using SparseMatrixC = Eigen::SparseMatrix<std::complex<double>>;

enum class FlowKind { rotation, stepanoff };

inline std::string to_string(FlowKind k) { return k == FlowKind::rotation ? "rotation" : "stepanoff"; }

struct FlowSpec {
  FlowKind kind = FlowKind::rotation;
  double alpha = 0.0;
  int dim = 2;  // 1 only for the circle rotation
};

/// Velocity at x. For the circle rotation only the first component is meaningful.
inline std::array<double, 2> vector_field(const FlowSpec& spec, const TorusPoint& x) {
  if (spec.kind == FlowKind::rotation) {
    if (spec.dim == 1) return {spec.alpha, 0.0};
    return {1.0, spec.alpha};
  }
  const double v2 = spec.alpha * (1.0 - std::cos(x[0] - x[1]));
  const double v1 = v2 + (1.0 - spec.alpha) * (1.0 - std::cos(x[1]));
  return {v1, v2};
}

struct IntegratorOptions {
  double rtol = 1e-9;
  double atol = 1e-11;
  double min_step = 1e-14;
  long max_steps = 2'000'000;
};

namespace detail {

/// Adaptive Dormand-Prince 5(4), first-same-as-last.
inline TorusPoint dopri5(const FlowSpec& spec, TorusPoint x, double t, const IntegratorOptions& opt) {
  if (t == 0.0) return x;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;

  using V = std::array<double, 2>;
  auto f = [&](const V& y) { return vector_field(spec, y); };
  auto axpy = [](const V& y, std::initializer_list<std::pair<double, const V*>> terms, double h) {
    V r = y;
    for (const auto& [c, k] : terms) {
      r[0] += h * c * (*k)[0];
      r[1] += h * c * (*k)[1];
    }
    return r;
  };

  const double dir = t > 0.0 ? 1.0 : -1.0;
  const double T = std::abs(t);
  double done = 0.0;
  double h = std::min(T, 0.01);
  V k1 = f(x);
  for (long step = 0; step < opt.max_steps; ++step) {
    if (done >= T) return wrap(x);
    h = std::min(h, T - done);
    const double hs = dir * h;
    const V k2 = f(axpy(x, {{a21, &k1}}, hs));
    const V k3 = f(axpy(x, {{a31, &k1}, {a32, &k2}}, hs));
    const V k4 = f(axpy(x, {{a41, &k1}, {a42, &k2}, {a43, &k3}}, hs));
    const V k5 = f(axpy(x, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, hs));
    const V k6 = f(axpy(x, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, hs));
    const V y5 = axpy(x, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}}, hs);
    const V k7 = f(y5);

    double err = 0.0;
    for (int i = 0; i < 2; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double ei = hs * (e1 * k1[ii] + e3 * k3[ii] + e4 * k4[ii] + e5 * k5[ii] + e6 * k6[ii] + e7 * k7[ii]);
      const double sc = opt.atol + opt.rtol * std::max(std::abs(x[ii]), std::abs(y5[ii]));
      err = std::max(err, std::abs(ei) / sc);
    }

    if (err <= 1.0) {
      done += h;
      x = wrap(y5);
      k1 = k7;  // FSAL; the field is periodic so wrapping does not change it
      const double fac = err == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(err, -0.2));
      h *= fac;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      if (h < opt.min_step) throw IntegratorFailure("Dormand-Prince step size underflow");
    }
  }
  throw IntegratorFailure("Dormand-Prince exceeded the maximal number of steps");
}

}  // namespace detail

/// Phi^t(x), wrapped to [0, 2pi)^N.
inline TorusPoint true_flow(const FlowSpec& spec, const TorusPoint& x, double t,
                            const IntegratorOptions& opt = {}) {
  if (!std::isfinite(t)) throw ValidationError("non-finite flow time");
  if (spec.kind == FlowKind::rotation) {
    if (spec.dim == 1) return {wrap_angle(x[0] + spec.alpha * t), 0.0};
    return {wrap_angle(x[0] + t), wrap_angle(x[1] + spec.alpha * t)};
  }
  return detail::dopri5(spec, x, t, opt);
}

/// Sparse m x m matrix of <phi_r, V.grad phi_s>. Couplings that leave the
/// lattice are dropped (Galerkin truncation).
inline SparseMatrixC generator_matrix(const FlowSpec& spec, const WavenumberLattice& lat) {
  using C = std::complex<double>;
  const C I(0.0, 1.0);
  const auto m = static_cast<Eigen::Index>(lat.size());
  std::vector<Eigen::Triplet<C>> trip;

  if (spec.kind == FlowKind::rotation) {
    if (lat.dim() != spec.dim) throw InvalidDimension(lat.dim());
    trip.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index s = 0; s < m; ++s) {
      const auto& j = lat[static_cast<std::size_t>(s)];
      const double w = spec.dim == 1 ? spec.alpha * j[0] : j[0] + spec.alpha * j[1];
      if (w != 0.0) trip.emplace_back(s, s, I * w);
    }
  } else {
    if (lat.dim() != 2) throw InvalidDimension(lat.dim());
    const double a = spec.alpha;
    trip.reserve(static_cast<std::size_t>(5 * m));
    // V.grad gamma_j = i (j1 V1 + j2 V2) gamma_j with
    // j1 V1 + j2 V2 = j1 + a j2 - (j1 + j2) a cos(t1 - t2) - j1 (1 - a) cos t2.
    auto add = [&](Eigen::Index s, const MultiIndex& target, C value) {
      if (value == C(0.0)) return;
      if (const auto r = lat.position_of(target)) trip.emplace_back(static_cast<Eigen::Index>(*r), s, value);
    };
    for (Eigen::Index s = 0; s < m; ++s) {
      const auto& j = lat[static_cast<std::size_t>(s)];
      const double j1 = j[0], j2 = j[1];
      add(s, j, I * (j1 + a * j2));
      const C diag_cpl = -I * (j1 + j2) * a / 2.0;
      add(s, shift(j, MultiIndex{{1, -1}}), diag_cpl);
      add(s, shift(j, MultiIndex{{-1, 1}}), diag_cpl);
      const C theta2_cpl = -I * j1 * (1.0 - a) / 2.0;
      add(s, shift(j, MultiIndex{{0, 1}}), theta2_cpl);
      add(s, shift(j, MultiIndex{{0, -1}}), theta2_cpl);
    }
  }

  SparseMatrixC V(m, m);
  V.setFromTriplets(trip.begin(), trip.end());
  V.makeCompressed();
  return V;
}

}  // namespace ktn
