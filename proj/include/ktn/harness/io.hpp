#pragma once

// Dataset emission: field CSVs, spectrum tables, JSON summaries, and the
// binary spectral-basis cache.

#include <Eigen/Dense>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ktn/error.hpp"
#include "ktn/harness/config.hpp"
#include "ktn/lattice.hpp"
#include "ktn/spectrum.hpp"

namespace ktn::harness {

namespace fs = std::filesystem;

/// Shortest round-trip decimal form; NaN (missing value) prints as "nan".
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ValidationError("malformed number '" + s + "'");
  return v;
}

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

struct FieldFile {
  int l = 0;
  double t = 0.0;
  std::string model;
  Eigen::VectorXd values;  // node order a*l + b
};

/// Header `# l=<l> t=<t> model=<name>`, then l rows (theta_2 index b) of l
/// columns (theta_1 index a).
inline void write_field_csv(const fs::path& path, int l, double t, const std::string& model, const Eigen::VectorXd& values) {
  if (values.size() != static_cast<Eigen::Index>(l) * l) throw ValidationError("field size does not match l*l");
  auto out = open_out(path);
  out << "# l=" << l << " t=" << format_double(t) << " model=" << model << '\n';
  for (int b = 0; b < l; ++b) {
    for (int a = 0; a < l; ++a) {
      if (a) out << ',';
      out << format_double(values[static_cast<Eigen::Index>(a) * l + b]);
    }
    out << '\n';
  }
}

inline FieldFile read_field_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  FieldFile f;
  std::string line;
  std::getline(in, line);
  {
    std::istringstream hs(line);
    std::string hash, lpart, tpart, mpart;
    hs >> hash >> lpart >> tpart >> mpart;
    if (hash != "#" || lpart.rfind("l=", 0) != 0 || tpart.rfind("t=", 0) != 0 || mpart.rfind("model=", 0) != 0)
      throw ValidationError(path.string() + ":1: malformed field header");
    f.l = std::stoi(lpart.substr(2));
    f.t = parse_double(tpart.substr(2));
    f.model = mpart.substr(6);
  }
  const int l = f.l;
  f.values.resize(static_cast<Eigen::Index>(l) * l);
  for (int b = 0; b < l; ++b) {
    if (!std::getline(in, line)) throw ValidationError(path.string() + ": expected " + std::to_string(l) + " rows");
    std::istringstream rs(line);
    std::string cell;
    int a = 0;
    while (std::getline(rs, cell, ',')) {
      if (a >= l) throw ValidationError(path.string() + ":" + std::to_string(b + 2) + ": too many columns");
      f.values[static_cast<Eigen::Index>(a) * l + b] = parse_double(cell);
      ++a;
    }
    if (a != l) throw ValidationError(path.string() + ":" + std::to_string(b + 2) + ": too few columns");
  }
  return f;
}

inline void write_spectrum_csv(const fs::path& path, const SpectralBasis& basis) {
  auto out = open_out(path);
  out << "index,omega,dirichlet_energy\n";
  for (Eigen::Index r = 0; r < basis.omega.size(); ++r)
    out << r << ',' << format_double(basis.omega[r]) << ',' << format_double(basis.energy[r]) << '\n';
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Basis cache: basis.bin holds little-endian float64 blocks in this order:
//   omega[2d+1], energy[2d+1], lambda_half[m], C as (re, im) pairs column-major.

static_assert(std::endian::native == std::endian::little, "basis cache assumes a little-endian host");

inline nlohmann::json basis_sidecar(const SpectralBasis& basis, const ExperimentConfig& cfg) {
  return {{"m", basis.m()},
          {"d", basis.d()},
          {"ordering", "l1-lex"},
          {"scheme", basis.scheme.name()},
          {"key", spectral_key(cfg)},
          {"params", nlohmann::json::parse(spectral_signature(cfg))},
          {"layout", {"omega[2d+1]", "dirichlet_energy[2d+1]", "lambda_half[m]", "C[m x (2d+1)] complex column-major"}},
          {"clamped", basis.clamped}};
}

inline fs::path cache_dir(const ExperimentConfig& cfg) { return fs::path(cfg.out_dir) / "cache" / spectral_key(cfg); }

inline void save_basis(const fs::path& dir, const SpectralBasis& basis, const ExperimentConfig& cfg) {
  auto out = open_out(dir / "basis.bin");
  auto put = [&](const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  };
  put(basis.omega.data(), static_cast<std::size_t>(basis.omega.size()));
  put(basis.energy.data(), static_cast<std::size_t>(basis.energy.size()));
  put(basis.lambda_half.data(), static_cast<std::size_t>(basis.lambda_half.size()));
  put(reinterpret_cast<const double*>(basis.C.data()), 2 * static_cast<std::size_t>(basis.C.size()));
  write_json(dir / "basis.json", basis_sidecar(basis, cfg));
}

/// Loads a cached basis if the sidecar key matches cfg; returns false otherwise.
inline bool load_basis(const fs::path& dir, const ExperimentConfig& cfg, SpectralBasis& basis) {
  std::ifstream js(dir / "basis.json");
  std::ifstream bin(dir / "basis.bin", std::ios::binary);
  if (!js || !bin) return false;
  nlohmann::json side;
  try {
    js >> side;
  } catch (const nlohmann::json::exception&) {
    return false;
  }
  if (side.value("key", "") != spectral_key(cfg) || side.value("ordering", "") != "l1-lex") return false;
  const auto m = side.at("m").get<Eigen::Index>();
  const auto d = side.at("d").get<Eigen::Index>();
  const Eigen::Index cols = 2 * d + 1;
  if (m != static_cast<Eigen::Index>(cfg.lattice_size()) || d != cfg.d) return false;

  SpectralBasis b;
  b.lattice = build_lattice(cfg.dim, cfg.J);
  b.params = cfg.rkha();
  b.scheme = cfg.scheme_kind();
  b.clamped = side.value("clamped", 0);
  b.omega.resize(cols);
  b.energy.resize(cols);
  b.lambda_half.resize(m);
  b.C.resize(m, cols);
  auto get = [&](double* p, std::size_t n) {
    bin.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    return static_cast<std::size_t>(bin.gcount()) == n * sizeof(double);
  };
  if (!get(b.omega.data(), static_cast<std::size_t>(cols)) || !get(b.energy.data(), static_cast<std::size_t>(cols)) ||
      !get(b.lambda_half.data(), static_cast<std::size_t>(m)) ||
      !get(reinterpret_cast<double*>(b.C.data()), 2 * static_cast<std::size_t>(b.C.size())))
    return false;
  basis = std::move(b);
  return true;
}

}  // namespace ktn::harness
