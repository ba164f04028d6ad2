#pragma once

// Classical, quantum-mechanical and Fock-space predictors.
//
// All three evaluate through the spectral basis: eigenfunction values Z on a
// sampling grid, the unitary phases exp(i w t), and the coefficient map C^H.
// The qm predictor is the Fock predictor with n = 1.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ktn/dynamics.hpp"
#include "ktn/error.hpp"
#include "ktn/features.hpp"
#include "ktn/parallel.hpp"
#include "ktn/rkha.hpp"
#include "ktn/spectrum.hpp"
#include "ktn/torus.hpp"

namespace ktn {

using TorusFunction = std::function<double(const TorusPoint&)>;

/// Uniform grid with node a*l + b at (2 pi a / l, 2 pi b / l); N = 1 uses l nodes.
struct EvalGrid {
  int l = 0;
  int dim = 2;
  std::vector<TorusPoint> nodes;

  EvalGrid() = default;
  EvalGrid(int side, int dimension) : l(side), dim(dimension) {
    if (side <= 0) throw ValidationError("grid side must be positive");
    if (dimension != 1 && dimension != 2) throw InvalidDimension(dimension);
    const double h = kTwoPi / side;
    if (dimension == 1) {
      for (int a = 0; a < side; ++a) nodes.push_back({h * a, 0.0});
    } else {
      nodes.reserve(static_cast<std::size_t>(side) * static_cast<std::size_t>(side));
      for (int a = 0; a < side; ++a)
        for (int b = 0; b < side; ++b) nodes.push_back({h * a, h * b});
    }
  }
  std::size_t size() const { return nodes.size(); }
};

inline Eigen::VectorXd sample_observable(const TorusFunction& f, const EvalGrid& grid) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) v[static_cast<Eigen::Index>(i)] = f(grid.nodes[i]);
  return v;
}

inline Eigen::VectorXcd unitary_phases(const Eigen::VectorXd& omega, double t) {
  Eigen::VectorXcd u(omega.size());
  for (Eigen::Index k = 0; k < omega.size(); ++k) u[k] = std::polar(1.0, omega[k] * t);
  return u;
}

// ---------------------------------------------------------------------------
// Classical model

enum class ClassicalProjection { alg2, rkha };

inline ClassicalProjection parse_projection(const std::string& s) {
  if (s == "alg2") return ClassicalProjection::alg2;
  if (s == "rkha") return ClassicalProjection::rkha;
  throw ValidationError("classical_projection must be 'alg2' or 'rkha', got '" + s + "'");
}

/// Expansion coefficients a = C^H f_hat, or C^H L^{-1} f_hat for the rkha projection.
inline Eigen::VectorXcd classical_coefficients(const SpectralBasis& basis, const FourierVector& f_hat,
                                               ClassicalProjection proj) {
  if (!f_hat.lattice || !(*f_hat.lattice == *basis.lattice)) throw LatticeMismatch();
  if (proj == ClassicalProjection::rkha)
    return basis.C.adjoint() * (f_hat.coeffs.array() / basis.lambda_half.array()).matrix();
  return basis.C.adjoint() * f_hat.coeffs;
}

struct ClassicalValue {
  double value = 0.0;
  double imag_residual = 0.0;
};

/// y = sum_r a_r exp(i w_r t) zeta_r(x); the real part is returned.
inline ClassicalValue classical_predict(const SpectralBasis& basis, const FourierVector& f_hat, double t,
                                        const TorusPoint& x, ClassicalProjection proj = ClassicalProjection::alg2) {
  const Eigen::VectorXcd a = classical_coefficients(basis, f_hat, proj).cwiseProduct(unitary_phases(basis.omega, t));
  const cplx y = a.dot(eigenfunction_values(basis, x).conjugate());  // dot conjugates its first argument
  return {y.real(), std::abs(y.imag())};
}

/// Classical field over the rows of Z (Z(i, r) = zeta_r(x_i)).
inline ClassicalValue classical_field(const SpectralBasis& basis, const Eigen::MatrixXcd& Z, const FourierVector& f_hat,
                                      double t, ClassicalProjection proj, Eigen::VectorXd& out) {
  const Eigen::VectorXcd a = classical_coefficients(basis, f_hat, proj).cwiseProduct(unitary_phases(basis.omega, t));
  const Eigen::VectorXcd y = Z * a;
  out = y.real();
  return {0.0, y.imag().cwiseAbs().maxCoeff()};
}

// ---------------------------------------------------------------------------
// Quantum models

inline constexpr double kDegenerateFloor = 1e-300;

struct PredictionContext {
  std::shared_ptr<const SpectralBasis> basis;
  EvalGrid grid;
  Eigen::VectorXd obs_values;  // diagonal of the multiplication operator
  Eigen::MatrixXcd Z;          // grid.size() x (2d+1)
  double kappa_eval = 1.0;
  int n = 1;
  double degenerate_floor = kDegenerateFloor;
};

inline PredictionContext make_context(std::shared_ptr<const SpectralBasis> basis, EvalGrid grid, Eigen::VectorXd obs,
                                      double kappa_eval, int n) {
  if (!basis) throw ValidationError("prediction context without spectral basis");
  if (static_cast<std::size_t>(obs.size()) != grid.size()) throw ValidationError("observable length does not match grid");
  if (!obs.allFinite()) throw ValidationError("observable samples must be finite");
  if (!(kappa_eval > 0.0)) throw ValidationError("kappa_eval must be positive");
  if (n < 1) throw ValidationError("Fock grading n must be >= 1");
  if (grid.dim != basis->lattice->dim()) throw InvalidDimension(grid.dim);
  PredictionContext ctx;
  ctx.Z = eigenfunction_matrix(*basis, grid.nodes);
  ctx.basis = std::move(basis);
  ctx.grid = std::move(grid);
  ctx.obs_values = std::move(obs);
  ctx.kappa_eval = kappa_eval;
  ctx.n = n;
  return ctx;
}

/// Root feature states F_{kappa,n}(x) for many x. The Bessel ratios are shared,
/// only the phases exp(-i j.x) vary; columns are scaled to unit 2-norm.
class RootFeatureMap {
 public:
  RootFeatureMap(LatticePtr lat, double kappa_eval, int n) : lat_(std::move(lat)) {
    if (n < 1) throw ValidationError("root feature requires n >= 1");
    if (!(kappa_eval > 0.0)) throw ValidationError("root feature requires kappa_eval > 0");
    const auto r = bessel_ratios(lat_->max_wavenumber(), kappa_eval / n);
    amp_.resize(static_cast<Eigen::Index>(lat_->size()));
    for (std::size_t s = 0; s < lat_->size(); ++s) {
      const auto& j = (*lat_)[s];
      double a = r[static_cast<std::size_t>(std::abs(j[0]))];
      if (lat_->dim() == 2) a *= r[static_cast<std::size_t>(std::abs(j[1]))];
      amp_[static_cast<Eigen::Index>(s)] = a;
    }
    amp_ /= amp_.norm();
  }

  void fill(const TorusPoint& x, Eigen::Ref<Eigen::VectorXcd> col) const {
    const int J = lat_->max_wavenumber();
    std::vector<cplx> e0(static_cast<std::size_t>(2 * J + 1)), e1(static_cast<std::size_t>(2 * J + 1));
    for (int k = -J; k <= J; ++k) {
      e0[static_cast<std::size_t>(k + J)] = std::polar(1.0, -k * x[0]);
      e1[static_cast<std::size_t>(k + J)] = lat_->dim() == 2 ? std::polar(1.0, -k * x[1]) : 1.0;
    }
    for (std::size_t s = 0; s < lat_->size(); ++s) {
      const auto& j = (*lat_)[s];
      col[static_cast<Eigen::Index>(s)] =
          amp_[static_cast<Eigen::Index>(s)] * e0[static_cast<std::size_t>(j[0] + J)] * e1[static_cast<std::size_t>(j[1] + J)];
    }
  }

 private:
  LatticePtr lat_;
  Eigen::VectorXd amp_;
};

namespace detail {

/// Ratio xi^n . M xi^n / xi^n . xi^n for one state column. Returns nullopt if
/// the powered state norm falls below the floor.
inline std::optional<double> fock_ratio(const Eigen::Ref<const Eigen::VectorXcd>& xi, const Eigen::VectorXd& obs, int n,
                                        double floor) {
  const double scale = xi.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) return std::nullopt;
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    const double w = std::pow(std::norm(xi[i] / scale), n);  // |xi_i / scale|^{2n}
    num += obs[i] * w;
    den += w;
  }
  // Unscaled norm^2 = scale^{2n} * den; compared in log space to avoid underflow.
  if (2.0 * n * std::log(scale) + std::log(den) < std::log(floor)) return std::nullopt;
  return num / den;
}

}  // namespace detail

/// Fock predictions at many points. Degenerate states come back as NaN.
inline Eigen::VectorXd fock_field(const PredictionContext& ctx, double t, std::span<const TorusPoint> points) {
  const auto& basis = *ctx.basis;
  const RootFeatureMap features(basis.lattice, ctx.kappa_eval, ctx.n);
  const Eigen::VectorXcd back = unitary_phases(basis.omega, t).conjugate();
  const Eigen::MatrixXcd CH = basis.C.adjoint();

  Eigen::VectorXd out(static_cast<Eigen::Index>(points.size()));
  constexpr std::size_t chunk = 256;
  const std::size_t n_chunks = (points.size() + chunk - 1) / chunk;
  parallel_for(n_chunks, [&](std::size_t c) {
    const std::size_t start = c * chunk;
    const std::size_t len = std::min(chunk, points.size() - start);
    Eigen::MatrixXcd F(basis.m(), static_cast<Eigen::Index>(len));
    for (std::size_t p = 0; p < len; ++p) features.fill(points[start + p], F.col(static_cast<Eigen::Index>(p)));
    const Eigen::MatrixXcd coeff = back.asDiagonal() * (CH * F);
    const Eigen::MatrixXcd xi = ctx.Z * coeff;
    for (std::size_t p = 0; p < len; ++p) {
      const auto y = detail::fock_ratio(xi.col(static_cast<Eigen::Index>(p)), ctx.obs_values, ctx.n, ctx.degenerate_floor);
      out[static_cast<Eigen::Index>(start + p)] = y ? *y : std::numeric_limits<double>::quiet_NaN();
    }
  });
  return out;
}

inline double fock_predict(const PredictionContext& ctx, double t, const TorusPoint& x) {
  const TorusPoint pts[1] = {x};
  const double y = fock_field(ctx, t, pts)[0];
  if (std::isnan(y)) throw DegenerateState();
  return y;
}

inline Eigen::VectorXd qm_field(const PredictionContext& ctx, double t, std::span<const TorusPoint> points) {
  PredictionContext one = ctx;
  one.n = 1;
  return fock_field(one, t, points);
}

inline double qm_predict(const PredictionContext& ctx, double t, const TorusPoint& x) {
  const TorusPoint pts[1] = {x};
  const double y = qm_field(ctx, t, pts)[0];
  if (std::isnan(y)) throw DegenerateState();
  return y;
}

// ---------------------------------------------------------------------------
// Reference and error metrics

inline double true_predict(const FlowSpec& spec, const TorusFunction& f, double t, const TorusPoint& x) {
  return f(true_flow(spec, x, t));
}

inline Eigen::VectorXd true_field(const FlowSpec& spec, const TorusFunction& f, double t, std::span<const TorusPoint> points) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(points.size()));
  parallel_for(points.size(), [&](std::size_t i) { out[static_cast<Eigen::Index>(i)] = true_predict(spec, f, t, points[i]); });
  return out;
}

struct ErrorStats {
  Eigen::VectorXd field;  // pred - truth
  double l2 = 0.0;        // RMS over non-missing points
  double linf = 0.0;
  double min_pred = 0.0;
  std::size_t missing = 0;
};

/// NaN entries in pred are missing values and are excluded from the statistics.
inline ErrorStats error_field(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size()) throw ValidationError("error_field: shape mismatch");
  ErrorStats s;
  s.field = pred - truth;
  double sum2 = 0.0;
  std::size_t count = 0;
  s.min_pred = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    if (std::isnan(pred[i])) {
      ++s.missing;
      continue;
    }
    const double e = s.field[i];
    sum2 += e * e;
    s.linf = std::max(s.linf, std::abs(e));
    s.min_pred = std::min(s.min_pred, pred[i]);
    ++count;
  }
  s.l2 = count ? std::sqrt(sum2 / static_cast<double>(count)) : 0.0;
  if (count == 0) s.min_pred = std::numeric_limits<double>::quiet_NaN();
  return s;
}

}  // namespace ktn
