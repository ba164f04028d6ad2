// ktn: batch driver for spectra, predictions, convergence tables and checks.
//
// Exit codes: 0 success, 1 validation failure, 2 numerical failure.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ktn/error.hpp"
#include "ktn/harness/config.hpp"
#include "ktn/harness/pipelines.hpp"

namespace {

int run(int argc, char** argv) {
  using namespace ktn::harness;
  CLI::App app{"Koopman evolution on the torus: spectra, classical/qm/Fock predictions"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  std::vector<double> times;

  auto* spectrum = app.add_subcommand("spectrum", "eigendecompose the regularized generator, write spectrum.csv");
  spectrum->add_option("--config", config, "experiment config (JSON)")->required();
  spectrum->add_option("--out", out_dir, "output directory (overrides out_dir)");

  auto* predict = app.add_subcommand("predict", "write true/classical/qm/fock fields, errors and summary.json");
  predict->add_option("--config", config, "experiment config (JSON)")->required();
  predict->add_option("--t", times, "comma-separated evolution times (overrides times)")->delimiter(',');
  predict->add_option("--out", out_dir, "output directory (overrides out_dir)");

  auto* converge = app.add_subcommand("converge", "circle-rotation convergence table");
  converge->add_option("--config", config, "experiment config (JSON)")->required();
  converge->add_option("--out", out_dir, "output directory (overrides out_dir)");

  auto* check = app.add_subcommand("check", "kernel, subconvolutivity and generator checks");
  check->add_option("--config", config, "experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  ExperimentConfig cfg = load_config(config);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (!times.empty()) {
    cfg.times = times;
    cfg.validate();
  }

  if (*spectrum) {
    run_spectrum(cfg, std::cerr);
  } else if (*predict) {
    run_prediction(cfg, std::cerr);
  } else if (*converge) {
    for (const auto& r : run_convergence(cfg, std::cerr))
      std::cout << "eps=" << format_double(r.eps) << " n=" << r.n << " tau=" << format_double(r.tau)
                << " t=" << format_double(r.t) << " error=" << format_double(r.error) << '\n';
  } else if (*check) {
    const auto report = run_check(cfg, std::cout);
    if (!report.generator_ok) throw ktn::NumericalError("generator check failed");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ktn::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ktn::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
