#pragma once

// Experiment configuration: flat snake_case JSON, unknown keys rejected.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ktn/dynamics.hpp"
#include "ktn/error.hpp"
#include "ktn/features.hpp"
#include "ktn/lattice.hpp"
#include "ktn/predict.hpp"
#include "ktn/rkha.hpp"
#include "ktn/spectrum.hpp"

namespace ktn::harness {

enum class ObservableKind { von_mises, constant };

struct ExperimentConfig {
  // system
  std::string system = "rotation";  // rotation | stepanoff
  double alpha = 5.477225575051661;
  int dim = 2;
  // spectral
  double p = 0.75;
  double tau = 0.001;
  double z = 0.1;
  std::string scheme = "resolvent";  // resolvent | compact
  int J = 16;
  int n_eig = 512;
  int d = 16;
  // observable
  std::string observable = "von_mises";  // von_mises | constant
  std::array<double, 2> kappa_obs{1.0, 6.0};
  std::array<double, 2> mu_obs{0.0, 0.0};
  // prediction
  double kappa_eval = 200.0;
  int n = 4;
  int l = 128;
  int eval_l = 64;
  std::vector<double> times{0.0, 1.0, 2.0, 4.0};
  std::string classical_projection = "alg2";
  std::vector<int> eigenfunction_indices;
  // convergence
  double eps0 = 0.5;
  double c1 = 4.0;
  double c2 = 0.02;
  // io
  std::string out_dir = "out";
  long seed = 0;

  FlowSpec flow() const {
    FlowSpec f;
    f.kind = system == "stepanoff" ? FlowKind::stepanoff : FlowKind::rotation;
    f.alpha = alpha;
    f.dim = dim;
    return f;
  }
  RkhaParams rkha() const { return {p, tau}; }
  SchemeKind scheme_kind() const { return scheme == "compact" ? SchemeKind::compact() : SchemeKind::resolvent(z); }
  ObservableKind observable_kind() const {
    return observable == "constant" ? ObservableKind::constant : ObservableKind::von_mises;
  }
  VonMisesParams observable_params() const {
    VonMisesParams v;
    v.mu = mu_obs;
    v.kappa = kappa_obs;
    if (dim == 1) v.kappa[1] = 0.0;
    return v;
  }
  std::size_t lattice_size() const {
    const std::size_t side = 2 * static_cast<std::size_t>(J) + 1;
    return dim == 1 ? side : side * side;
  }

  void validate() const;
};

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "system", "alpha", "dim", "p", "tau", "z", "scheme", "J", "n_eig", "d", "observable", "kappa_obs", "mu_obs",
      "kappa_eval", "n", "l", "eval_l", "times", "classical_projection", "eigenfunction_indices", "eps0", "c1", "c2",
      "out_dir", "seed"};
  return keys;
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("config: " + msg); };
  if (system != "rotation" && system != "stepanoff") fail("system must be 'rotation' or 'stepanoff'");
  if (dim != 1 && dim != 2) throw InvalidDimension(dim);
  if (dim == 1 && system != "rotation") fail("dim = 1 is only available for the rotation");
  if (!std::isfinite(alpha)) fail("alpha must be finite");
  rkha().validate();
  if (scheme != "resolvent" && scheme != "compact") fail("scheme must be 'resolvent' or 'compact'");
  if (scheme == "resolvent" && !(z > 0.0)) fail("z must be positive");
  if (J < 0) fail("J must be nonnegative");
  if (d < 0) fail("d must be nonnegative");
  const auto m = lattice_size();
  if (!(2 * d <= n_eig && n_eig >= 1 && static_cast<std::size_t>(n_eig) <= m - 1))
    fail("need 2d <= n_eig <= m-1 (m = " + std::to_string(m) + ")");
  if (observable != "von_mises" && observable != "constant") fail("observable must be 'von_mises' or 'constant'");
  for (double k : kappa_obs)
    if (!(k >= 0.0) || !std::isfinite(k)) fail("kappa_obs entries must be finite and nonnegative");
  if (!(kappa_eval > 0.0) || !std::isfinite(kappa_eval)) fail("kappa_eval must be positive");
  if (n < 1) fail("n must be >= 1");
  if (l <= 0 || l % 4 != 0) fail("l must be a positive multiple of 4");
  if (eval_l <= 0) fail("eval_l must be positive");
  if (times.empty()) fail("times must not be empty");
  for (double t : times)
    if (!std::isfinite(t)) fail("times must be finite");
  parse_projection(classical_projection);
  for (int r : eigenfunction_indices)
    if (r < 0 || r > 2 * d) fail("eigenfunction index " + std::to_string(r) + " outside [0, 2d]");
  if (!(eps0 > 0.0) || !(c1 > 0.0) || !(c2 > 0.0)) fail("eps0, c1, c2 must be positive");
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config: top level must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!detail::known_keys().count(key)) throw ValidationError("config: unknown key '" + key + "'");
  ExperimentConfig c;
  using detail::read;
  read(j, "system", c.system);
  read(j, "alpha", c.alpha);
  read(j, "dim", c.dim);
  read(j, "p", c.p);
  read(j, "tau", c.tau);
  read(j, "z", c.z);
  read(j, "scheme", c.scheme);
  read(j, "J", c.J);
  read(j, "n_eig", c.n_eig);
  read(j, "d", c.d);
  read(j, "observable", c.observable);
  read(j, "kappa_obs", c.kappa_obs);
  read(j, "mu_obs", c.mu_obs);
  read(j, "kappa_eval", c.kappa_eval);
  read(j, "n", c.n);
  read(j, "l", c.l);
  read(j, "eval_l", c.eval_l);
  read(j, "times", c.times);
  read(j, "classical_projection", c.classical_projection);
  read(j, "eigenfunction_indices", c.eigenfunction_indices);
  read(j, "eps0", c.eps0);
  read(j, "c1", c.c1);
  read(j, "c2", c.c2);
  read(j, "out_dir", c.out_dir);
  read(j, "seed", c.seed);
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"system", c.system},
          {"alpha", c.alpha},
          {"dim", c.dim},
          {"p", c.p},
          {"tau", c.tau},
          {"z", c.z},
          {"scheme", c.scheme},
          {"J", c.J},
          {"n_eig", c.n_eig},
          {"d", c.d},
          {"observable", c.observable},
          {"kappa_obs", c.kappa_obs},
          {"mu_obs", c.mu_obs},
          {"kappa_eval", c.kappa_eval},
          {"n", c.n},
          {"l", c.l},
          {"eval_l", c.eval_l},
          {"times", c.times},
          {"classical_projection", c.classical_projection},
          {"eigenfunction_indices", c.eigenfunction_indices},
          {"eps0", c.eps0},
          {"c1", c.c1},
          {"c2", c.c2},
          {"out_dir", c.out_dir},
          {"seed", c.seed}};
}

/// Fields that determine the spectral basis, in a fixed textual form.
inline std::string spectral_signature(const ExperimentConfig& c) {
  nlohmann::json j{{"system", c.system}, {"alpha", c.alpha}, {"dim", c.dim}, {"p", c.p},
                   {"tau", c.tau},       {"z", c.z},         {"scheme", c.scheme}, {"J", c.J},
                   {"n_eig", c.n_eig},   {"d", c.d}};
  if (c.scheme == "compact") j.erase("z");
  return j.dump();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string spectral_key(const ExperimentConfig& c) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a(spectral_signature(c));
  return os.str();
}

}  // namespace ktn::harness
