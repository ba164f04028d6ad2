#pragma once

// Eigendecomposition of the regularized generator.
//
// Two schemes:
//   compact   : diagonalize V_tau = L V L, L = diag(lambda_{tau/2}); the
//               frequencies are the eigenvalues of -i V_tau directly.
//   resolvent : solve the pencil V_tau c = beta B c with B = z^2 I - V^2,
//               keep the n_eig largest |beta| and map back through the
//               inverse of q_z(i w) = i w / (z^2 + w^2) restricted to |w| >= z.
//
// The generator graph (nonzero pattern of V) usually splits into connected
// components: the constant mode is always isolated and the rotation is
// diagonal. Both pencils are block diagonal over these components, so each
// block is solved densely on its own. This is an exact reduction.
//
// Eigenvectors are normalized to unit 2-norm, phase-fixed (largest-magnitude
// coefficient real positive), paired into conjugate partners and sorted by
// Dirichlet energy; the constant mode is prepended as column 0.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "ktn/dynamics.hpp"
#include "ktn/error.hpp"
#include "ktn/lattice.hpp"
#include "ktn/rkha.hpp"
#include "ktn/torus.hpp"

namespace ktn {

enum class SchemeTag { compact, resolvent };

struct SchemeKind {
  SchemeTag tag = SchemeTag::resolvent;
  double z = 0.1;

  static SchemeKind compact() { return {SchemeTag::compact, 0.0}; }
  static SchemeKind resolvent(double z) {
    if (!(z > 0.0)) throw ValidationError("resolvent parameter z must be positive");
    return {SchemeTag::resolvent, z};
  }
  std::string name() const { return tag == SchemeTag::compact ? "compact" : "resolvent"; }
};

struct SpectralBasis {
  LatticePtr lattice;
  RkhaParams params;
  SchemeKind scheme;
  Eigen::VectorXd omega;        // 2d+1 eigenfrequencies, omega[0] = 0
  Eigen::MatrixXcd C;           // m x (2d+1) coefficient columns
  Eigen::VectorXd energy;       // Dirichlet energies, energy[0] = 0
  Eigen::VectorXd lambda_half;  // lambda_{tau/2} in lattice order
  int clamped = 0;              // modes whose q_z^{-1} discriminant was clamped
  std::vector<std::string> warnings;

  Eigen::Index m() const { return C.rows(); }
  int d() const { return static_cast<int>((C.cols() - 1) / 2); }
};

// ---------------------------------------------------------------------------
// Matrix assembly

inline double skew_defect(const Eigen::MatrixXcd& V) { return (V + V.adjoint()).cwiseAbs().maxCoeff(); }

/// V_tau = L V L with L = diag(lambda_half).
inline Eigen::MatrixXcd regularized_generator(const Eigen::MatrixXcd& V, const Eigen::VectorXd& lambda_half) {
  if (V.rows() != V.cols() || V.rows() != lambda_half.size())
    throw ValidationError("regularized_generator: dimension mismatch");
  return lambda_half.asDiagonal() * V * lambda_half.asDiagonal();
}

inline SparseMatrixC regularized_generator(const SparseMatrixC& V, const Eigen::VectorXd& lambda_half) {
  if (V.rows() != V.cols() || V.rows() != lambda_half.size())
    throw ValidationError("regularized_generator: dimension mismatch");
  SparseMatrixC out = V;
  for (Eigen::Index k = 0; k < out.outerSize(); ++k)
    for (SparseMatrixC::InnerIterator it(out, k); it; ++it) it.valueRef() *= lambda_half[it.row()] * lambda_half[it.col()];
  return out;
}

/// B = z^2 I - V^2, which equals z^2 I + V^H V for skew-Hermitian V.
inline Eigen::MatrixXcd mass_matrix(const Eigen::MatrixXcd& V, double z) {
  if (!(z > 0.0)) throw ValidationError("resolvent parameter z must be positive");
  if (V.size() > 0) {
    const double defect = skew_defect(V);
    if (defect > 1e-12) throw NotSkewHermitian(defect);
  }
  Eigen::MatrixXcd B = -(V * V);
  B.diagonal().array() += z * z;
  return B;
}

// ---------------------------------------------------------------------------
// Dense solvers

/// One eigenpair; the eigenvalue of the pencil (or of V_tau) is i * b.
struct GepPair {
  double b = 0.0;
  Eigen::VectorXcd c;
};

namespace detail {

inline Eigen::MatrixXcd hermitian_part_of_minus_i(const Eigen::MatrixXcd& Vt) {
  // -i V_tau is Hermitian for skew-Hermitian V_tau; symmetrize away rounding.
  const std::complex<double> mi(0.0, -1.0);
  Eigen::MatrixXcd A = mi * Vt;
  return (0.5 * (A + A.adjoint())).eval();
}

inline void fix_phase(Eigen::Ref<Eigen::VectorXcd> c) {
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    const double a = std::abs(c[k]);
    if (a > best * (1.0 + 1e-12)) {
      best = a;
      arg = k;
    }
  }
  if (best > 0.0) c *= std::conj(c[arg]) / best;
}

inline std::vector<GepPair> sort_by_abs_desc(std::vector<GepPair> pairs, std::size_t keep) {
  std::stable_sort(pairs.begin(), pairs.end(), [](const GepPair& x, const GepPair& y) {
    if (std::abs(x.b) != std::abs(y.b)) return std::abs(x.b) > std::abs(y.b);
    return x.b > y.b;
  });
  if (pairs.size() > keep) pairs.resize(keep);
  return pairs;
}

}  // namespace detail

/// Solve V_tau c = (i b) B c densely (LAPACK zhegv on the Hermitian pencil
/// (-i V_tau, B), i.e. Cholesky reduction of B). Returns the n_eig solutions
/// of largest |b| with unit 2-norm eigenvectors.
inline std::vector<GepPair> solve_gep(const Eigen::MatrixXcd& V_tau, const Eigen::MatrixXcd& B, int n_eig) {
  const Eigen::Index n = V_tau.rows();
  if (V_tau.cols() != n || B.rows() != n || B.cols() != n) throw ValidationError("solve_gep: dimension mismatch");
  if (n_eig < 0 || n_eig > n) throw ValidationError("solve_gep: n_eig out of range");
  if (n == 0 || n_eig == 0) return {};

  std::vector<GepPair> pairs;
  if (n == 1) {
    const double bb = B(0, 0).real();
    if (!(bb > 0.0)) throw FactorizationFailure("mass matrix is not positive definite");
    pairs.push_back({(std::complex<double>(0.0, -1.0) * V_tau(0, 0)).real() / bb, Eigen::VectorXcd::Ones(1)});
    return pairs;
  }

  Eigen::MatrixXcd A = detail::hermitian_part_of_minus_i(V_tau);
  Eigen::MatrixXcd Bw = (0.5 * (B + B.adjoint())).eval();
  Eigen::VectorXd w(n);
  // QR-iteration driver: the divide-and-conquer variant loses ~1e-4 on the
  // +-b symmetry of ill-conditioned pencils (cond(B) ~ 1e6 at J = 16).
  const lapack_int info = LAPACKE_zhegv(LAPACK_COL_MAJOR, 1, 'V', 'U', static_cast<lapack_int>(n), A.data(),
                                        static_cast<lapack_int>(n), Bw.data(), static_cast<lapack_int>(n), w.data());
  if (info > n) throw FactorizationFailure("mass matrix is not positive definite (zhegv info " + std::to_string(info) + ")");
  if (info != 0) throw FactorizationFailure("zhegv failed with info " + std::to_string(info));

  pairs.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::VectorXcd c = A.col(k);
    c.normalize();
    pairs.push_back({w[k], std::move(c)});
  }
  return detail::sort_by_abs_desc(std::move(pairs), static_cast<std::size_t>(n_eig));
}

/// Full eigendecomposition of skew-Hermitian V_tau: V_tau c = i w c.
inline std::vector<GepPair> solve_skew(const Eigen::MatrixXcd& V_tau) {
  const Eigen::Index n = V_tau.rows();
  if (V_tau.cols() != n) throw ValidationError("solve_skew: matrix not square");
  std::vector<GepPair> pairs;
  if (n == 0) return pairs;
  if (n == 1) {
    pairs.push_back({(std::complex<double>(0.0, -1.0) * V_tau(0, 0)).real(), Eigen::VectorXcd::Ones(1)});
    return pairs;
  }
  Eigen::MatrixXcd A = detail::hermitian_part_of_minus_i(V_tau);
  Eigen::VectorXd w(n);
  const lapack_int info =
      LAPACKE_zheev(LAPACK_COL_MAJOR, 'V', 'U', static_cast<lapack_int>(n), A.data(), static_cast<lapack_int>(n), w.data());
  if (info != 0) throw NumericalError("zheev failed with info " + std::to_string(info));
  for (Eigen::Index k = 0; k < n; ++k) pairs.push_back({w[k], A.col(k)});
  return pairs;
}

/// Inverse of q_z restricted to |w| >= z, for beta = i b:
/// w = (1 + sqrt(max(0, 1 - 4 z^2 b^2))) / (2 b). Sets *clamped when the
/// discriminant was negative.
inline double q_inverse(double z, double b, bool* clamped = nullptr) {
  if (b == 0.0) throw ValidationError("q_inverse: zero eigenvalue (the constant mode bypasses this map)");
  const double disc = 1.0 - 4.0 * z * z * b * b;
  if (clamped) *clamped = disc < 0.0;
  return (1.0 + std::sqrt(std::max(0.0, disc))) / (2.0 * b);
}

// ---------------------------------------------------------------------------
// Algorithm driver

namespace detail {

struct SparseVec {
  std::vector<std::size_t> idx;  // ascending lattice positions
  std::vector<std::complex<double>> val;
};

struct Candidate {
  double b = 0.0;
  double omega = 0.0;
  double energy = 0.0;
  SparseVec vec;
  bool paired = false;
};

/// Connected components of the nonzero pattern of a square sparse matrix.
inline std::vector<std::vector<std::size_t>> graph_components(const SparseMatrixC& V) {
  const auto n = static_cast<std::size_t>(V.rows());
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (Eigen::Index k = 0; k < V.outerSize(); ++k)
    for (SparseMatrixC::InnerIterator it(V, k); it; ++it) {
      const auto a = find(static_cast<std::size_t>(it.row()));
      const auto b = find(static_cast<std::size_t>(it.col()));
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> slot(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = find(i);
    if (slot[r] == n) {
      slot[r] = groups.size();
      groups.emplace_back();
    }
    groups[slot[r]].push_back(i);
  }
  return groups;
}

inline Eigen::MatrixXcd dense_block(const SparseMatrixC& V, const std::vector<std::size_t>& comp) {
  const auto n = static_cast<Eigen::Index>(comp.size());
  Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(n, n);
  std::vector<Eigen::Index> local(static_cast<std::size_t>(V.rows()), -1);
  for (Eigen::Index i = 0; i < n; ++i) local[comp[static_cast<std::size_t>(i)]] = i;
  for (std::size_t c = 0; c < comp.size(); ++c)
    for (SparseMatrixC::InnerIterator it(V, static_cast<Eigen::Index>(comp[c])); it; ++it)
      D(local[static_cast<std::size_t>(it.row())], static_cast<Eigen::Index>(c)) = it.value();
  return D;
}

inline double sparse_energy(const SparseVec& v, const Eigen::VectorXd& lambda_full) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < v.idx.size(); ++k) {
    const double a = std::norm(v.val[k]);
    den += a;
    if (v.idx[k] != 0) num += a / lambda_full[static_cast<Eigen::Index>(v.idx[k])];
  }
  if (!(den > 0.0)) throw ZeroVector();
  return num / den;
}

/// Conjugate partner coefficients: c'(j) = conj(c(-j)).
inline SparseVec conj_reflect(const SparseVec& v, const WavenumberLattice& lat) {
  std::vector<std::pair<std::size_t, std::complex<double>>> e;
  e.reserve(v.idx.size());
  for (std::size_t k = 0; k < v.idx.size(); ++k) e.emplace_back(lat.reflected(v.idx[k]), std::conj(v.val[k]));
  std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseVec out;
  for (auto& [i, x] : e) {
    out.idx.push_back(i);
    out.val.push_back(x);
  }
  return out;
}

inline double overlap(const SparseVec& a, const SparseVec& b) {
  std::complex<double> s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.idx.size() && j < b.idx.size()) {
    if (a.idx[i] == b.idx[j]) {
      s += std::conj(a.val[i]) * b.val[j];
      ++i;
      ++j;
    } else if (a.idx[i] < b.idx[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return std::abs(s);
}

inline void fix_phase(SparseVec& v) {
  Eigen::Map<Eigen::VectorXcd> m(v.val.data(), static_cast<Eigen::Index>(v.val.size()));
  fix_phase(Eigen::Ref<Eigen::VectorXcd>(m));
}

}  // namespace detail

inline constexpr double kPairingTolerance = 1e-8;

/// Algorithm driver: assemble, solve, convert, order. Returns 2d+1 modes.
inline SpectralBasis eigendecompose(const FlowSpec& spec, const RkhaParams& params, LatticePtr lat,
                                    const SchemeKind& scheme, int n_eig, int d) {
  params.validate();
  const auto m = static_cast<int>(lat->size());
  if (d < 0) throw ValidationError("d must be nonnegative");
  if (!(2 * d <= n_eig && n_eig <= m - 1))
    throw ValidationError("need 2d <= n_eig <= m - 1 (d=" + std::to_string(d) + ", n_eig=" + std::to_string(n_eig) +
                          ", m=" + std::to_string(m) + ")");
  if (scheme.tag == SchemeTag::resolvent && !(scheme.z > 0.0))
    throw ValidationError("resolvent parameter z must be positive");

  SpectralBasis basis;
  basis.lattice = lat;
  basis.params = params;
  basis.scheme = scheme;
  basis.lambda_half = weight_vector(params, *lat, true);
  const Eigen::VectorXd lambda_full = weight_vector(params, *lat, false);

  const SparseMatrixC V = generator_matrix(spec, *lat);
  const SparseMatrixC Vt = regularized_generator(V, basis.lambda_half);

  std::vector<detail::Candidate> cands;
  for (const auto& comp : detail::graph_components(V)) {
    const bool has_constant = comp.front() == 0;
    if (has_constant && comp.size() == 1) continue;

    const Eigen::MatrixXcd Vb = detail::dense_block(V, comp);
    const Eigen::MatrixXcd Vtb = detail::dense_block(Vt, comp);
    std::vector<GepPair> sols = scheme.tag == SchemeTag::resolvent
                                    ? solve_gep(Vtb, mass_matrix(Vb, scheme.z), static_cast<int>(comp.size()))
                                    : solve_skew(Vtb);
    if (has_constant) {
      // Drop the solution carrying the constant mode.
      std::size_t drop = 0;
      for (std::size_t k = 1; k < sols.size(); ++k)
        if (std::abs(sols[k].c[0]) > std::abs(sols[drop].c[0])) drop = k;
      sols.erase(sols.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    for (auto& s : sols) {
      detail::Candidate c;
      c.b = s.b;
      for (std::size_t k = 0; k < comp.size(); ++k) {
        const auto v = s.c[static_cast<Eigen::Index>(k)];
        if (v != std::complex<double>(0.0)) {
          c.vec.idx.push_back(comp[k]);
          c.vec.val.push_back(v);
        }
      }
      cands.push_back(std::move(c));
    }
  }

  // Candidate selection.
  if (scheme.tag == SchemeTag::resolvent) {
    std::erase_if(cands, [](const detail::Candidate& c) { return c.b == 0.0; });
    std::stable_sort(cands.begin(), cands.end(), [](const auto& x, const auto& y) {
      if (std::abs(x.b) != std::abs(y.b)) return std::abs(x.b) > std::abs(y.b);
      return x.b > y.b;
    });
    if (cands.size() > static_cast<std::size_t>(n_eig)) cands.resize(static_cast<std::size_t>(n_eig));
    for (auto& c : cands) {
      bool cl = false;
      c.omega = q_inverse(scheme.z, c.b, &cl);
      basis.clamped += cl ? 1 : 0;
    }
  } else {
    for (auto& c : cands) c.omega = c.b;
  }
  for (auto& c : cands) {
    detail::fix_phase(c.vec);
    c.energy = detail::sparse_energy(c.vec, lambda_full);
  }
  auto energy_order = [](const detail::Candidate& x, const detail::Candidate& y) {
    if (x.energy != y.energy) return x.energy < y.energy;
    if (std::abs(x.omega) != std::abs(y.omega)) return std::abs(x.omega) < std::abs(y.omega);
    return x.omega > y.omega;
  };
  if (scheme.tag == SchemeTag::compact) {
    std::stable_sort(cands.begin(), cands.end(), energy_order);
    if (cands.size() > static_cast<std::size_t>(n_eig)) cands.resize(static_cast<std::size_t>(n_eig));
  }
  if (cands.size() < static_cast<std::size_t>(2 * d))
    throw NumericalError("only " + std::to_string(cands.size()) + " nontrivial eigenpairs available for d=" +
                         std::to_string(d));

  // Conjugate pairing: partner of (w, c) is (-w, conj(c(-j))).
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return energy_order(cands[a], cands[b]); });
  int unpaired = 0;
  for (std::size_t oi : order) {
    auto& c = cands[oi];
    if (c.paired || !(c.omega > kPairingTolerance)) continue;
    const auto mirror = detail::conj_reflect(c.vec, *lat);
    std::size_t best = cands.size();
    double best_ov = -1.0;
    for (std::size_t k = 0; k < cands.size(); ++k) {
      auto& o = cands[k];
      if (o.paired || k == oi || std::abs(o.omega + c.omega) > kPairingTolerance) continue;
      const double ov = detail::overlap(mirror, o.vec);
      if (ov > best_ov) {
        best_ov = ov;
        best = k;
      }
    }
    if (best == cands.size()) continue;
    auto& partner = cands[best];
    partner.vec = mirror;
    partner.omega = -c.omega;
    partner.b = -c.b;
    partner.energy = c.energy;
    partner.paired = c.paired = true;
  }
  for (const auto& c : cands) unpaired += c.paired ? 0 : 1;
  if (unpaired > 0)
    basis.warnings.push_back(std::to_string(unpaired) + " eigenpairs without a conjugate partner within 1e-8");
  if (basis.clamped > 0)
    basis.warnings.push_back(std::to_string(basis.clamped) + " eigenvalues with |2 z b| > 1; discriminant clamped");

  std::stable_sort(cands.begin(), cands.end(), energy_order);
  const auto n_modes = static_cast<std::size_t>(2 * d);
  if (n_modes > 0 && n_modes < cands.size()) {
    const auto& last = cands[n_modes - 1];
    const auto& next = cands[n_modes];
    if (last.paired && next.paired && last.energy == next.energy && std::abs(last.omega + next.omega) <= kPairingTolerance)
      basis.warnings.push_back("truncation to d pairs splits a conjugate pair");
  }

  const Eigen::Index cols = 2 * d + 1;
  basis.omega = Eigen::VectorXd::Zero(cols);
  basis.energy = Eigen::VectorXd::Zero(cols);
  basis.C = Eigen::MatrixXcd::Zero(m, cols);
  basis.C(0, 0) = 1.0;
  for (std::size_t r = 0; r < n_modes; ++r) {
    const auto& c = cands[r];
    const auto col = static_cast<Eigen::Index>(r + 1);
    basis.omega[col] = c.omega;
    basis.energy[col] = c.energy;
    for (std::size_t k = 0; k < c.vec.idx.size(); ++k) basis.C(static_cast<Eigen::Index>(c.vec.idx[k]), col) = c.vec.val[k];
  }
  return basis;
}

// ---------------------------------------------------------------------------
// Eigenfunction evaluation

namespace detail {

/// Row of lambda_half(j) exp(i j.x) over the lattice.
template <class Row>
void character_row(const WavenumberLattice& lat, const Eigen::VectorXd& lambda_half, const TorusPoint& x, Row&& row) {
  const int J = lat.max_wavenumber();
  std::vector<std::complex<double>> e0(static_cast<std::size_t>(2 * J + 1)), e1(static_cast<std::size_t>(2 * J + 1));
  for (int k = -J; k <= J; ++k) {
    e0[static_cast<std::size_t>(k + J)] = std::polar(1.0, k * x[0]);
    e1[static_cast<std::size_t>(k + J)] = lat.dim() == 2 ? std::polar(1.0, k * x[1]) : 1.0;
  }
  for (std::size_t s = 0; s < lat.size(); ++s) {
    const auto& j = lat[s];
    row[static_cast<Eigen::Index>(s)] =
        lambda_half[static_cast<Eigen::Index>(s)] * e0[static_cast<std::size_t>(j[0] + J)] * e1[static_cast<std::size_t>(j[1] + J)];
  }
}

}  // namespace detail

/// zeta_r(x) = sum_s C[s, r] lambda_{tau/2}(j_s) exp(i j_s.x), r = 0..2d.
inline Eigen::VectorXcd eigenfunction_values(const SpectralBasis& basis, const TorusPoint& x) {
  Eigen::RowVectorXcd row(basis.m());
  detail::character_row(*basis.lattice, basis.lambda_half, x, row);
  Eigen::VectorXcd z = (row * basis.C).transpose();
  z[0] = 1.0;
  return z;
}

/// Matrix Z with Z(i, r) = zeta_r(x_i).
inline Eigen::MatrixXcd eigenfunction_matrix(const SpectralBasis& basis, std::span<const TorusPoint> points) {
  const auto P = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXcd Z(P, basis.C.cols());
  constexpr Eigen::Index chunk = 512;
  Eigen::MatrixXcd Phi;
  for (Eigen::Index start = 0; start < P; start += chunk) {
    const Eigen::Index len = std::min(chunk, P - start);
    Phi.resize(len, basis.m());
    for (Eigen::Index i = 0; i < len; ++i)
      detail::character_row(*basis.lattice, basis.lambda_half, points[static_cast<std::size_t>(start + i)], Phi.row(i));
    Z.middleRows(start, len).noalias() = Phi * basis.C;
  }
  Z.col(0).setOnes();
  return Z;
}

}  // namespace ktn
