#pragma once

// End-to-end pipelines behind the CLI subcommands.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ktn/dynamics.hpp"
#include "ktn/error.hpp"
#include "ktn/features.hpp"
#include "ktn/harness/config.hpp"
#include "ktn/harness/io.hpp"
#include "ktn/lattice.hpp"
#include "ktn/predict.hpp"
#include "ktn/rkha.hpp"
#include "ktn/spectrum.hpp"

namespace ktn::harness {

inline TorusFunction observable_function(const ExperimentConfig& cfg) {
  if (cfg.observable_kind() == ObservableKind::constant) return [](const TorusPoint&) { return 1.0; };
  const auto vm = cfg.observable_params();
  const int dim = cfg.dim;
  return [vm, dim](const TorusPoint& x) { return von_mises_eval(vm, x, dim); };
}

inline FourierVector observable_coefficients(const ExperimentConfig& cfg, LatticePtr lat) {
  if (cfg.observable_kind() == ObservableKind::constant) return FourierVector::unit(std::move(lat));
  return von_mises_fourier(cfg.observable_params(), std::move(lat));
}

inline void emit_warnings(const SpectralBasis& basis, std::ostream& log) {
  for (const auto& w : basis.warnings) log << "warning: " << w << '\n';
}

inline SpectralBasis compute_basis(const ExperimentConfig& cfg) {
  return eigendecompose(cfg.flow(), cfg.rkha(), build_lattice(cfg.dim, cfg.J), cfg.scheme_kind(), cfg.n_eig, cfg.d);
}

/// Cached basis if present for this config's spectral key, else a fresh solve
/// that is written to the cache.
inline SpectralBasis obtain_basis(const ExperimentConfig& cfg, std::ostream& log) {
  SpectralBasis basis;
  const auto dir = cache_dir(cfg);
  if (load_basis(dir, cfg, basis)) {
    log << "spectral basis loaded from " << dir.string() << '\n';
    return basis;
  }
  basis = compute_basis(cfg);
  emit_warnings(basis, log);
  save_basis(dir, basis, cfg);
  return basis;
}

// ---------------------------------------------------------------------------
// spectrum

inline SpectralBasis run_spectrum(const ExperimentConfig& cfg, std::ostream& log) {
  if (!cfg.eigenfunction_indices.empty() && cfg.dim != 2)
    throw ValidationError("eigenfunction fields are only emitted for dim = 2");
  SpectralBasis basis = compute_basis(cfg);
  emit_warnings(basis, log);
  const fs::path out(cfg.out_dir);
  save_basis(cache_dir(cfg), basis, cfg);
  write_spectrum_csv(out / "spectrum.csv", basis);
  if (!cfg.eigenfunction_indices.empty()) {
    const EvalGrid grid(cfg.eval_l, 2);
    const Eigen::MatrixXcd Z = eigenfunction_matrix(basis, grid.nodes);
    for (int r : cfg.eigenfunction_indices) {
      const std::string stem = "eigenfunction_" + std::to_string(r);
      write_field_csv(out / (stem + "_re.csv"), cfg.eval_l, 0.0, stem + "_re", Z.col(r).real());
      write_field_csv(out / (stem + "_im.csv"), cfg.eval_l, 0.0, stem + "_im", Z.col(r).imag());
    }
  }
  log << "spectrum: " << basis.omega.size() << " modes written to " << (out / "spectrum.csv").string() << '\n';
  return basis;
}

// ---------------------------------------------------------------------------
// predict

inline const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names{"true", "classical", "qm", "fock"};
  return names;
}

inline std::string field_file_name(const std::string& model, std::size_t time_index) {
  return "field_" + model + "_t" + std::to_string(time_index) + ".csv";
}

inline std::string error_file_name(const std::string& model, std::size_t time_index) {
  return "error_" + model + "_t" + std::to_string(time_index) + ".csv";
}

/// Writes true/classical/qm/fock fields and errors for every time, plus
/// summary.json; returns the summary.
inline nlohmann::json run_prediction(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.dim != 2) throw ValidationError("predict runs on the 2-torus; use converge for the circle");
  const auto basis = std::make_shared<const SpectralBasis>(obtain_basis(cfg, log));
  const FlowSpec flow = cfg.flow();
  const TorusFunction f = observable_function(cfg);
  const FourierVector f_hat = observable_coefficients(cfg, basis->lattice);
  const ClassicalProjection proj = parse_projection(cfg.classical_projection);

  EvalGrid sampling(cfg.l, 2);
  Eigen::VectorXd obs = sample_observable(f, sampling);
  const PredictionContext ctx = make_context(basis, std::move(sampling), std::move(obs), cfg.kappa_eval, cfg.n);
  const EvalGrid eval(cfg.eval_l, 2);
  const Eigen::MatrixXcd Z_eval = eigenfunction_matrix(*basis, eval.nodes);

  const fs::path out(cfg.out_dir);
  nlohmann::json entries = nlohmann::json::array();
  double imag_residual = 0.0;
  for (std::size_t k = 0; k < cfg.times.size(); ++k) {
    const double t = cfg.times[k];
    Eigen::VectorXd truth = true_field(flow, f, t, eval.nodes);
    Eigen::VectorXd cl;
    imag_residual = std::max(imag_residual, classical_field(*basis, Z_eval, f_hat, t, proj, cl).imag_residual);
    const Eigen::VectorXd qm = qm_field(ctx, t, eval.nodes);
    const Eigen::VectorXd fock = fock_field(ctx, t, eval.nodes);

    const std::vector<const Eigen::VectorXd*> fields{&truth, &cl, &qm, &fock};
    for (std::size_t mi = 0; mi < fields.size(); ++mi) {
      const auto& model = model_names()[mi];
      const auto& pred = *fields[mi];
      write_field_csv(out / field_file_name(model, k), cfg.eval_l, t, model, pred);
      const ErrorStats s = error_field(pred, truth);
      nlohmann::json e{{"model", model},        {"t", t},         {"time_index", k},
                       {"l2", s.l2},            {"linf", s.linf}, {"min", s.min_pred},
                       {"missing", s.missing},  {"field_file", field_file_name(model, k)}};
      if (model != "true") {
        write_field_csv(out / error_file_name(model, k), cfg.eval_l, t, model + "-true", s.field);
        e["error_file"] = error_file_name(model, k);
      }
      if (s.missing > 0) log << "warning: " << s.missing << " degenerate states for " << model << " at t=" << t << '\n';
      entries.push_back(std::move(e));
    }
  }
  if (imag_residual > 1e-8) log << "warning: classical imaginary residual " << imag_residual << '\n';

  nlohmann::json summary{{"config", to_json(cfg)},
                         {"spectral_key", spectral_key(cfg)},
                         {"classical_imag_residual", imag_residual},
                         {"entries", entries}};
  write_json(out / "summary.json", summary);
  log << "predict: " << entries.size() << " fields written to " << out.string() << '\n';
  return summary;
}

// ---------------------------------------------------------------------------
// converge

struct CircleSetup {
  double alpha = 5.477225575051661;
  double kappa = 5.0;  // feature sharpness
  int J = 8;
  int l = 512;  // sampling grid for the multiplication operator
  int n_eig = 16;
  int d = 2;
  double p = 0.75;
  SchemeKind scheme = SchemeKind::compact();
  double eps0 = 0.5;
  double c1 = 4.0;
  double c2 = 0.02;
  int eval_points = 32;
  int quad_points = 4096;
  int levels = 3;
};

struct ConvergenceRow {
  double eps = 0.0;
  int n = 0;
  double tau = 0.0;
  double t = 0.0;
  double error = 0.0;
};

/// E_{p}(U^t f) for the circle rotation, p the von Mises density of sharpness
/// 2 kappa centered at x: mean over phi of f(x + alpha t + phi) sigma_{0,2kappa}(phi).
inline double circle_reference(const TorusFunction& f, double alpha, double t, double kappa, double x, int q) {
  VonMisesParams vm;
  vm.kappa = {2.0 * kappa, 0.0};
  double s = 0.0;
  for (int k = 0; k < q; ++k) {
    const double phi = kTwoPi * k / q;
    s += f({wrap_angle(x + alpha * t + phi), 0.0}) * von_mises_eval(vm, {phi, 0.0}, 1);
  }
  return s / q;
}

/// Max error over the circle grid of the Fock prediction at levels
/// eps = eps0 / 2^k with n = ceil(c1/eps), tau = c2 eps^2.
inline std::vector<ConvergenceRow> convergence_table(const CircleSetup& s, const TorusFunction& f,
                                                     const std::vector<double>& times) {
  std::vector<ConvergenceRow> rows;
  const FlowSpec flow{FlowKind::rotation, s.alpha, 1};
  const auto lat = build_lattice(1, s.J);
  const EvalGrid sampling(s.l, 1);
  const Eigen::VectorXd obs = sample_observable(f, sampling);
  const EvalGrid eval(s.eval_points, 1);
  for (double t : times) {
    Eigen::VectorXd ref(static_cast<Eigen::Index>(eval.size()));
    for (std::size_t i = 0; i < eval.size(); ++i)
      ref[static_cast<Eigen::Index>(i)] = circle_reference(f, s.alpha, t, s.kappa, eval.nodes[i][0], s.quad_points);
    for (int k = 0; k < s.levels; ++k) {
      ConvergenceRow row;
      row.eps = s.eps0 / std::pow(2.0, k);
      row.n = static_cast<int>(std::ceil(s.c1 / row.eps));
      row.tau = s.c2 * row.eps * row.eps;
      row.t = t;
      auto basis = std::make_shared<const SpectralBasis>(
          eigendecompose(flow, {s.p, row.tau}, lat, s.scheme, s.n_eig, s.d));
      const auto ctx = make_context(basis, sampling, obs, s.kappa, row.n);
      const Eigen::VectorXd y = fock_field(ctx, t, eval.nodes);
      if (y.hasNaN()) throw DegenerateState();
      row.error = (y - ref).cwiseAbs().maxCoeff();
      rows.push_back(row);
    }
  }
  return rows;
}

inline CircleSetup circle_setup(const ExperimentConfig& cfg) {
  CircleSetup s;
  s.alpha = cfg.alpha;
  s.kappa = cfg.kappa_eval;
  s.J = cfg.J;
  s.l = cfg.l;
  s.n_eig = cfg.n_eig;
  s.d = cfg.d;
  s.p = cfg.p;
  s.scheme = cfg.scheme_kind();
  s.eps0 = cfg.eps0;
  s.c1 = cfg.c1;
  s.c2 = cfg.c2;
  return s;
}

inline std::vector<ConvergenceRow> run_convergence(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.system != "rotation" || cfg.dim != 1) throw ValidationError("converge requires system = rotation and dim = 1");
  const auto rows = convergence_table(circle_setup(cfg), observable_function(cfg), cfg.times);
  const fs::path path = fs::path(cfg.out_dir) / "convergence.csv";
  auto out = open_out(path);
  out << "eps,n,tau,t,error\n";
  for (const auto& r : rows)
    out << format_double(r.eps) << ',' << r.n << ',' << format_double(r.tau) << ',' << format_double(r.t) << ','
        << format_double(r.error) << '\n';
  log << "converge: " << rows.size() << " rows written to " << path.string() << '\n';
  return rows;
}

// ---------------------------------------------------------------------------
// check

/// Generator matrix by g x g quadrature of the sampled vector field:
/// <phi_r, V.grad phi_s> = i (j_s . A(j_r - j_s)), A(k) = mean_x V(x) e^{-i k.x}.
inline Eigen::MatrixXcd quadrature_generator(const FlowSpec& spec, const WavenumberLattice& lat, int g) {
  const int J = lat.max_wavenumber();
  const int dim = lat.dim();
  if (g <= 2 * J + 1) throw ResolutionTooLow(g, J);
  const int K = 2 * J;
  const int side = 2 * K + 1;
  std::vector<std::array<cplx, 2>> A(static_cast<std::size_t>(side) * (dim == 2 ? side : 1), {cplx(0.0), cplx(0.0)});
  const int g2 = dim == 2 ? g : 1;
  std::vector<cplx> e0(static_cast<std::size_t>(side)), e1(static_cast<std::size_t>(side));
  for (int a = 0; a < g; ++a)
    for (int b = 0; b < g2; ++b) {
      const TorusPoint x{kTwoPi * a / g, dim == 2 ? kTwoPi * b / g : 0.0};
      const auto v = vector_field(spec, x);
      for (int k = -K; k <= K; ++k) {
        e0[static_cast<std::size_t>(k + K)] = std::polar(1.0, -k * x[0]);
        e1[static_cast<std::size_t>(k + K)] = std::polar(1.0, -k * x[1]);
      }
      for (int k0 = -K; k0 <= K; ++k0)
        for (int k1 = (dim == 2 ? -K : 0); k1 <= (dim == 2 ? K : 0); ++k1) {
          const cplx e = e0[static_cast<std::size_t>(k0 + K)] * e1[static_cast<std::size_t>(k1 + K)];
          auto& slot = A[static_cast<std::size_t>(k0 + K) * (dim == 2 ? side : 1) + (dim == 2 ? k1 + K : 0)];
          slot[0] += v[0] * e;
          slot[1] += v[1] * e;
        }
    }
  const double norm = 1.0 / (static_cast<double>(g) * g2);
  const auto m = static_cast<Eigen::Index>(lat.size());
  Eigen::MatrixXcd M(m, m);
  const cplx I(0.0, 1.0);
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index s = 0; s < m; ++s) {
      const auto& jr = lat[static_cast<std::size_t>(r)];
      const auto& js = lat[static_cast<std::size_t>(s)];
      const int k0 = jr[0] - js[0], k1 = jr[1] - js[1];
      const auto& a = A[static_cast<std::size_t>(k0 + K) * (dim == 2 ? side : 1) + (dim == 2 ? k1 + K : 0)];
      M(r, s) = I * (static_cast<double>(js[0]) * a[0] + static_cast<double>(js[1]) * a[1]) * norm;
    }
  return M;
}

struct CheckReport {
  MarkovReport markov;
  double subconvolutivity = 0.0;
  double generator_max_diff = 0.0;
  double skew_defect = 0.0;
  double mass_min_eigenvalue = 0.0;
  double z = 0.0;
  bool generator_ok = false;
  bool markov_ok = false;
};

inline CheckReport run_check(const ExperimentConfig& cfg, std::ostream& out) {
  const auto lat = build_lattice(cfg.dim, cfg.J);
  const auto params = cfg.rkha();
  const FlowSpec flow = cfg.flow();
  CheckReport r;
  r.z = cfg.z;
  r.markov = markov_check(params, *lat, std::max(128, 4 * cfg.J + 4));
  r.subconvolutivity = subconvolutivity_constant(params, *lat);
  const Eigen::MatrixXcd V = Eigen::MatrixXcd(generator_matrix(flow, *lat));
  const Eigen::MatrixXcd Q = quadrature_generator(flow, *lat, std::max(64, 2 * cfg.J + 4));
  r.generator_max_diff = (V - Q).cwiseAbs().maxCoeff();
  r.skew_defect = skew_defect(V);
  const Eigen::MatrixXcd B = mass_matrix(V, cfg.z);
  r.mass_min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(B, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  r.generator_ok = r.generator_max_diff <= 1e-10 && r.skew_defect <= 1e-12 && r.mass_min_eigenvalue >= cfg.z * cfg.z - 1e-10;
  r.markov_ok = std::abs(r.markov.mean_value - 1.0) <= 1e-10 && r.markov.min_value >= -1e-3 * r.markov.diagonal;

  auto flag = [](bool ok) { return ok ? "ok" : "WARN"; };
  out << "system: " << cfg.system << " dim=" << cfg.dim << " J=" << cfg.J << " m=" << lat->size() << '\n';
  out << "kernel mean: " << format_double(r.markov.mean_value) << '\n';
  out << "kernel min: " << format_double(r.markov.min_value) << " (k(x,x) = " << format_double(r.markov.diagonal)
      << ", ratio " << format_double(r.markov.min_value / r.markov.diagonal) << ") " << flag(r.markov_ok) << '\n';
  out << "subconvolutivity constant: " << format_double(r.subconvolutivity) << '\n';
  out << "generator vs quadrature max diff: " << format_double(r.generator_max_diff) << '\n';
  out << "skew defect: " << format_double(r.skew_defect) << '\n';
  out << "mass matrix min eigenvalue: " << format_double(r.mass_min_eigenvalue) << " (z^2 = " << format_double(cfg.z * cfg.z)
      << ") " << flag(r.generator_ok) << '\n';
  return r;
}

}  // namespace ktn::harness
