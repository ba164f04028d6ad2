#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ktn/harness/config.hpp"
#include "ktn/harness/io.hpp"
#include "ktn/harness/pipelines.hpp"

using namespace ktn;
using namespace ktn::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ktn_test_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ExperimentConfig smoke_config(const fs::path& out) {
  ExperimentConfig c = load_config(fs::path(KTN_SOURCE_DIR) / "configs" / "unit_smoke.json");
  c.out_dir = out.string();
  return c;
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  const ExperimentConfig c = parse_config(nlohmann::json::object());
  EXPECT_EQ(c.system, "rotation");
  EXPECT_EQ(c.J, 16);
  EXPECT_EQ(c.n_eig, 512);
  EXPECT_EQ(c.d, 16);
  EXPECT_EQ(c.l, 128);
  EXPECT_NEAR(c.alpha, std::sqrt(30.0), 1e-15);
}

TEST(Config, UnknownKeyRejected) {
  EXPECT_THROW(parse_config(nlohmann::json{{"J", 8}, {"kapa_eval", 3.0}}), ValidationError);
}

TEST(Config, WrongTypeRejected) { EXPECT_THROW(parse_config(nlohmann::json{{"J", "eight"}}), ValidationError); }

TEST(Config, InvariantsEnforced) {
  EXPECT_THROW(parse_config(nlohmann::json{{"J", 4}, {"n_eig", 81}, {"d", 4}}), ValidationError);  // n_eig > m-1
  EXPECT_THROW(parse_config(nlohmann::json{{"J", 4}, {"n_eig", 10}, {"d", 6}}), ValidationError);  // 2d > n_eig
  EXPECT_THROW(parse_config(nlohmann::json{{"l", 30}}), ValidationError);
  EXPECT_THROW(parse_config(nlohmann::json{{"system", "lorenz"}}), ValidationError);
  EXPECT_THROW(parse_config(nlohmann::json{{"dim", 3}}), InvalidDimension);
  EXPECT_THROW(parse_config(nlohmann::json{{"system", "stepanoff"}, {"dim", 1}, {"J", 8}, {"n_eig", 16}, {"d", 2}}),
               ValidationError);
  EXPECT_THROW(parse_config(nlohmann::json{{"p", 1.5}}), ValidationError);
  EXPECT_THROW(parse_config(nlohmann::json{{"eigenfunction_indices", {40}}}), ValidationError);
  EXPECT_NO_THROW(parse_config(nlohmann::json{{"J", 4}, {"n_eig", 80}, {"d", 40}}));
}

TEST(Config, ShippedConfigsLoad) {
  for (const auto& e : fs::directory_iterator(fs::path(KTN_SOURCE_DIR) / "configs"))
    if (e.path().extension() == ".json") {
      EXPECT_NO_THROW(load_config(e.path())) << e.path();
    }
}

TEST(Config, JsonRoundTrip) {
  const ExperimentConfig c = load_config(fs::path(KTN_SOURCE_DIR) / "configs" / "stepanoff_desk.json");
  const ExperimentConfig d = parse_config(to_json(c));
  EXPECT_EQ(to_json(c), to_json(d));
}

TEST(SpectralKey, DependsOnlyOnSpectralFields) {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.kappa_eval = 3.0;
  b.times = {9.0};
  b.out_dir = "elsewhere";
  EXPECT_EQ(spectral_key(a), spectral_key(b));
  b.J = 15;
  EXPECT_NE(spectral_key(a), spectral_key(b));
  ExperimentConfig c = a;
  c.scheme = "compact";
  ExperimentConfig e = c;
  e.z = 0.3;  // ignored by the compact scheme
  EXPECT_EQ(spectral_key(c), spectral_key(e));
  EXPECT_EQ(spectral_key(a).size(), 16u);
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Numbers, ShortestRoundTrip) {
  for (double v : {0.1, -1e-300, 1.0 / 3.0, 5.477225575051661, 0.0, 1e308}) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_TRUE(std::isnan(parse_double("nan")));
  EXPECT_THROW(parse_double("1.0x"), ValidationError);
}

TEST(FieldCsv, RoundTripWithMissingValues) {
  const auto dir = scratch("csv");
  const int l = 5;
  Eigen::VectorXd v(l * l);
  for (int i = 0; i < l * l; ++i) v[i] = std::sin(0.37 * i) / 3.0;
  v[7] = std::nan("");
  write_field_csv(dir / "f.csv", l, 2.5, "fock", v);
  const auto f = read_field_csv(dir / "f.csv");
  EXPECT_EQ(f.l, l);
  EXPECT_EQ(f.t, 2.5);
  EXPECT_EQ(f.model, "fock");
  for (int i = 0; i < l * l; ++i) {
    if (i == 7) {
      EXPECT_TRUE(std::isnan(f.values[i]));
    } else {
      EXPECT_EQ(f.values[i], v[i]);
    }
  }
}

TEST(FieldCsv, RowsAreSecondCoordinate) {
  const auto dir = scratch("layout");
  Eigen::VectorXd v(4);
  v << 0.0, 1.0, 2.0, 3.0;  // node a*l + b
  write_field_csv(dir / "f.csv", 2, 0.0, "true", v);
  std::ifstream in(dir / "f.csv");
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  EXPECT_EQ(header, "# l=2 t=0 model=true");
  EXPECT_EQ(row0, "0,2");
  EXPECT_EQ(row1, "1,3");
}

TEST(FieldCsv, MalformedInputRejected) {
  const auto dir = scratch("bad");
  {
    std::ofstream o(dir / "a.csv");
    o << "l=2 t=0\n1,2\n3,4\n";
  }
  EXPECT_THROW(read_field_csv(dir / "a.csv"), ValidationError);
  {
    std::ofstream o(dir / "b.csv");
    o << "# l=2 t=0 model=x\n1,2,3\n3,4\n";
  }
  EXPECT_THROW(read_field_csv(dir / "b.csv"), ValidationError);
  EXPECT_THROW(write_field_csv(dir / "c.csv", 3, 0.0, "x", Eigen::VectorXd::Zero(4)), ValidationError);
}

TEST(BasisCache, RoundTripIsBitExact) {
  const auto dir = scratch("cache");
  const ExperimentConfig cfg = smoke_config(dir);
  const SpectralBasis basis = compute_basis(cfg);
  save_basis(cache_dir(cfg), basis, cfg);
  SpectralBasis loaded;
  ASSERT_TRUE(load_basis(cache_dir(cfg), cfg, loaded));
  EXPECT_EQ(loaded.omega, basis.omega);
  EXPECT_EQ(loaded.energy, basis.energy);
  EXPECT_EQ(loaded.lambda_half, basis.lambda_half);
  EXPECT_EQ(loaded.C, basis.C);
  EXPECT_EQ(*loaded.lattice, *basis.lattice);

  ExperimentConfig other = cfg;
  other.tau = 0.002;
  EXPECT_FALSE(load_basis(cache_dir(cfg), other, loaded));

  const auto side = nlohmann::json::parse(slurp(cache_dir(cfg) / "basis.json"));
  EXPECT_EQ(side["ordering"], "l1-lex");
  EXPECT_EQ(side["m"], 169);
  EXPECT_EQ(side["d"], 8);
  EXPECT_EQ(fs::file_size(cache_dir(cfg) / "basis.bin"), 8u * (17 + 17 + 169 + 2 * 169 * 17));
}

TEST(Spectrum, CsvMatchesBasis) {
  const auto dir = scratch("spectrum");
  ExperimentConfig cfg = smoke_config(dir);
  cfg.eigenfunction_indices = {1, 2};
  std::ostringstream log;
  const auto basis = run_spectrum(cfg, log);
  std::ifstream in(dir / "spectrum.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "index,omega,dirichlet_energy");
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream rs(line);
    std::string idx, w, e;
    std::getline(rs, idx, ',');
    std::getline(rs, w, ',');
    std::getline(rs, e, ',');
    EXPECT_EQ(std::stoi(idx), rows);
    EXPECT_EQ(parse_double(w), basis.omega[rows]);
    EXPECT_EQ(parse_double(e), basis.energy[rows]);
    ++rows;
  }
  EXPECT_EQ(rows, 17);
  const auto re = read_field_csv(dir / "eigenfunction_1_re.csv");
  const auto im = read_field_csv(dir / "eigenfunction_1_im.csv");
  EXPECT_EQ(re.l, cfg.eval_l);
  const EvalGrid g(cfg.eval_l, 2);
  const auto z = eigenfunction_values(basis, g.nodes[37]);
  EXPECT_NEAR(re.values[37], z[1].real(), 1e-14);
  EXPECT_NEAR(im.values[37], z[1].imag(), 1e-14);
  EXPECT_TRUE(fs::exists(dir / "eigenfunction_2_im.csv"));
}

TEST(Prediction, SummaryConsistentWithFieldFiles) {
  const auto dir = scratch("predict");
  ExperimentConfig cfg = smoke_config(dir);
  cfg.observable = "von_mises";
  cfg.kappa_obs = {1.0, 2.0};
  std::ostringstream log;
  const auto summary = run_prediction(cfg, log);
  const auto on_disk = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary, on_disk);
  ASSERT_EQ(summary["entries"].size(), 4 * cfg.times.size());
  for (const auto& e : summary["entries"]) {
    const auto field = read_field_csv(dir / e["field_file"].get<std::string>());
    const auto truth = read_field_csv(dir / field_file_name("true", e["time_index"].get<std::size_t>()));
    EXPECT_EQ(field.model, e["model"].get<std::string>());
    EXPECT_EQ(field.t, e["t"].get<double>());
    const auto s = error_field(field.values, truth.values);
    EXPECT_NEAR(s.l2, e["l2"].get<double>(), 1e-15);
    EXPECT_NEAR(s.linf, e["linf"].get<double>(), 1e-15);
    EXPECT_EQ(s.min_pred, e["min"].get<double>());
    if (e["model"] == "true") {
      EXPECT_FALSE(e.contains("error_file"));
      EXPECT_EQ(s.linf, 0.0);
    } else {
      const auto err = read_field_csv(dir / e["error_file"].get<std::string>());
      EXPECT_LT((err.values - (field.values - truth.values)).cwiseAbs().maxCoeff(), 1e-15);
    }
  }
  EXPECT_EQ(summary["spectral_key"], spectral_key(cfg));
  EXPECT_TRUE(fs::exists(cache_dir(cfg) / "basis.bin"));
}

TEST(Prediction, DeterministicOutputsAndCacheReuse) {
  const auto dir1 = scratch("det1");
  const auto dir2 = scratch("det2");
  std::ostringstream log1, log2, log3;
  run_prediction(smoke_config(dir1), log1);
  run_prediction(smoke_config(dir2), log2);
  EXPECT_EQ(slurp(dir1 / "field_fock_t1.csv"), slurp(dir2 / "field_fock_t1.csv"));
  EXPECT_EQ(slurp(dir1 / "field_classical_t1.csv"), slurp(dir2 / "field_classical_t1.csv"));
  const std::string before = slurp(dir1 / "field_qm_t1.csv");
  run_prediction(smoke_config(dir1), log3);
  EXPECT_NE(log3.str().find("loaded from"), std::string::npos);
  EXPECT_EQ(slurp(dir1 / "field_qm_t1.csv"), before);
}

TEST(Prediction, UnitObservableIsExact) {
  const auto dir = scratch("unit");
  std::ostringstream log;
  const auto summary = run_prediction(smoke_config(dir), log);
  for (const auto& e : summary["entries"]) EXPECT_LT(e["linf"].get<double>(), 1e-9) << e["model"];
}

TEST(Prediction, CircleConfigRejected) {
  ExperimentConfig cfg = load_config(fs::path(KTN_SOURCE_DIR) / "configs" / "convergence_circle.json");
  std::ostringstream log;
  EXPECT_THROW(run_prediction(cfg, log), ValidationError);
}

TEST(Convergence, ReferenceMatchesFourierConvolution) {
  // f = sigma_{mu,kf}; reference = sum_j r_j(kf) r_j(2k) e^{i j (x + alpha t - mu)}.
  VonMisesParams vf;
  vf.mu = {0.8, 0.0};
  vf.kappa = {1.5, 0.0};
  const TorusFunction f = [vf](const TorusPoint& x) { return von_mises_eval(vf, x, 1); };
  const double alpha = std::sqrt(30.0), t = 0.7, kappa = 5.0, x = 2.0;
  const auto rf = bessel_ratios(60, 1.5);
  const auto rk = bessel_ratios(60, 2 * kappa);
  double ref = 1.0;
  for (int j = 1; j <= 60; ++j)
    ref += 2.0 * rf[static_cast<std::size_t>(j)] * rk[static_cast<std::size_t>(j)] * std::cos(j * (x + alpha * t - 0.8));
  EXPECT_NEAR(circle_reference(f, alpha, t, kappa, x, 4096), ref, 1e-12);
}

TEST(Convergence, TableShapeAndCsv) {
  const auto dir = scratch("converge");
  ExperimentConfig cfg = load_config(fs::path(KTN_SOURCE_DIR) / "configs" / "convergence_circle.json");
  cfg.out_dir = dir.string();
  std::ostringstream log;
  const auto rows = run_convergence(cfg, log);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].n, 8);
  EXPECT_EQ(rows[1].n, 16);
  EXPECT_EQ(rows[2].n, 32);
  EXPECT_NEAR(rows[2].tau, 0.02 * 0.125 * 0.125, 1e-18);
  std::ifstream in(dir / "convergence.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "eps,n,tau,t,error");
}

TEST(Check, ReportsGeneratorAgreement) {
  ExperimentConfig cfg = load_config(fs::path(KTN_SOURCE_DIR) / "configs" / "unit_smoke.json");
  std::ostringstream out;
  const auto r = run_check(cfg, out);
  EXPECT_TRUE(r.generator_ok);
  EXPECT_LT(r.generator_max_diff, 1e-10);
  EXPECT_NEAR(r.markov.mean_value, 1.0, 1e-10);
  EXPECT_NE(out.str().find("subconvolutivity constant"), std::string::npos);
}

TEST(QuadratureGenerator, AgreesWithExactMatrix) {
  const FlowSpec spec{FlowKind::stepanoff, 0.7, 2};
  const WavenumberLattice lat(2, 3);
  EXPECT_LT((Eigen::MatrixXcd(generator_matrix(spec, lat)) - quadrature_generator(spec, lat, 16)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(quadrature_generator(spec, lat, 7), ResolutionTooLow);
}
