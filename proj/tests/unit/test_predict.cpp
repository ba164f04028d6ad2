#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ktn/predict.hpp"

using namespace ktn;

namespace {

const RkhaParams kParams{0.75, 0.001};

std::shared_ptr<const SpectralBasis> rotation_full_basis(int J) {
  const auto lat = build_lattice(2, J);
  const int m = static_cast<int>(lat->size());
  return std::make_shared<const SpectralBasis>(
      eigendecompose({FlowKind::rotation, std::sqrt(30.0), 2}, kParams, lat, SchemeKind::resolvent(0.1), m - 1, (m - 1) / 2));
}

std::shared_ptr<const SpectralBasis> stepanoff_basis(int J, int n_eig, int d, const SchemeKind& scheme) {
  return std::make_shared<const SpectralBasis>(
      eigendecompose({FlowKind::stepanoff, std::sqrt(20.0), 2}, kParams, build_lattice(2, J), scheme, n_eig, d));
}

TorusFunction von_mises_observable(double k1, double k2) {
  VonMisesParams p;
  p.mu = {0.5, 2.0};
  p.kappa = {k1, k2};
  return [p](const TorusPoint& x) { return von_mises_eval(p, x); };
}

// Direct ratio sum_i obs_i |xi_i|^{2n} / sum_i |xi_i|^{2n} with
// xi_i = sum_s lambda_half(j_s) F_s(x) exp(i j_s . x_i), valid when C is unitary.
double full_basis_oracle(const SpectralBasis& basis, const EvalGrid& grid, const Eigen::VectorXd& obs, double kappa, int n,
                         const TorusPoint& x) {
  const auto& lat = *basis.lattice;
  const auto r = bessel_ratios(lat.max_wavenumber(), kappa / n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    cplx xi = 0.0;
    for (std::size_t s = 0; s < lat.size(); ++s) {
      const auto& j = lat[s];
      const double amp = r[static_cast<std::size_t>(std::abs(j[0]))] * r[static_cast<std::size_t>(std::abs(j[1]))];
      xi += basis.lambda_half[static_cast<Eigen::Index>(s)] * amp *
            std::polar(1.0, j[0] * (grid.nodes[i][0] - x[0]) + j[1] * (grid.nodes[i][1] - x[1]));
    }
    const double w = std::pow(std::norm(xi), n);
    num += obs[static_cast<Eigen::Index>(i)] * w;
    den += w;
  }
  return num / den;
}

}  // namespace

TEST(EvalGrid, NodeLayout) {
  const EvalGrid g(8, 2);
  ASSERT_EQ(g.size(), 64u);
  EXPECT_EQ(g.nodes[3 * 8 + 5][0], kTwoPi * 3 / 8);
  EXPECT_EQ(g.nodes[3 * 8 + 5][1], kTwoPi * 5 / 8);
  EXPECT_EQ(EvalGrid(8, 1).size(), 8u);
  EXPECT_THROW(EvalGrid(0, 2), ValidationError);
}

TEST(UnitaryPhases, GroupProperty) {
  const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(7, -3.0, 3.0);
  const auto a = unitary_phases(w, 0.7);
  const auto b = unitary_phases(w, 1.9);
  EXPECT_LT((a.cwiseProduct(b) - unitary_phases(w, 2.6)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((unitary_phases(w, 0.0).array() - cplx(1.0)).abs().maxCoeff(), 0.0 + 1e-300);
}

TEST(Predictors, UnitObservableGivesOne) {
  const auto basis = stepanoff_basis(6, 40, 10, SchemeKind::resolvent(0.1));
  const EvalGrid grid(16, 2);
  const auto ctx = make_context(basis, grid, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(grid.size())), 50.0, 3);
  const auto one = FourierVector::unit(basis->lattice);
  const EvalGrid eval(9, 2);
  for (double t : {0.0, 1.0, 3.5}) {
    EXPECT_LT((qm_field(ctx, t, eval.nodes).array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_LT((fock_field(ctx, t, eval.nodes).array() - 1.0).abs().maxCoeff(), 1e-12);
    Eigen::VectorXd cl;
    classical_field(*basis, eigenfunction_matrix(*basis, eval.nodes), one, t, ClassicalProjection::alg2, cl);
    EXPECT_LT((cl.array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_NEAR(classical_predict(*basis, one, t, {1.0, 2.0}).value, 1.0, 1e-12);
  }
}

TEST(Predictors, QuantumModelsPreservePositivity) {
  const auto basis = stepanoff_basis(8, 64, 16, SchemeKind::resolvent(0.1));
  const EvalGrid grid(32, 2);
  const auto f = von_mises_observable(4.0, 6.0);
  const auto ctx = make_context(basis, grid, sample_observable(f, grid), 100.0, 4);
  const EvalGrid eval(16, 2);
  for (double t : {0.0, 2.0}) {
    EXPECT_GE(qm_field(ctx, t, eval.nodes).minCoeff(), 0.0);
    EXPECT_GE(fock_field(ctx, t, eval.nodes).minCoeff(), 0.0);
  }
}

TEST(Predictors, GradingOneFockEqualsQm) {
  const auto basis = stepanoff_basis(6, 40, 10, SchemeKind::compact());
  const EvalGrid grid(16, 2);
  const auto ctx = make_context(basis, grid, sample_observable(von_mises_observable(1.0, 2.0), grid), 30.0, 1);
  const EvalGrid eval(7, 2);
  EXPECT_EQ(fock_field(ctx, 1.3, eval.nodes), qm_field(ctx, 1.3, eval.nodes));
  EXPECT_EQ(fock_predict(ctx, 1.3, {0.2, 0.4}), qm_predict(ctx, 1.3, {0.2, 0.4}));
}

TEST(Predictors, LinearInTheObservable) {
  const auto basis = stepanoff_basis(6, 40, 10, SchemeKind::resolvent(0.1));
  const EvalGrid grid(16, 2);
  const Eigen::VectorXd obs = sample_observable(von_mises_observable(1.0, 2.0), grid);
  const auto c1 = make_context(basis, grid, obs, 40.0, 2);
  const auto c2 = make_context(basis, grid, 3.5 * obs, 40.0, 2);
  const EvalGrid eval(5, 2);
  EXPECT_LT((3.5 * fock_field(c1, 0.8, eval.nodes) - fock_field(c2, 0.8, eval.nodes)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Predictors, ChunkBoundariesDoNotMatter) {
  const auto basis = stepanoff_basis(5, 30, 8, SchemeKind::compact());
  const EvalGrid grid(12, 2);
  const auto ctx = make_context(basis, grid, sample_observable(von_mises_observable(1.0, 1.0), grid), 20.0, 2);
  const EvalGrid eval(23, 2);  // 529 points: three chunks
  const auto field = fock_field(ctx, 0.5, eval.nodes);
  for (std::size_t i : {0u, 255u, 256u, 511u, 512u, 528u}) EXPECT_NEAR(field[static_cast<Eigen::Index>(i)], fock_predict(ctx, 0.5, eval.nodes[i]), 1e-14);
}

TEST(Predictors, FullRotationBasisMatchesDirectRatio) {
  const auto basis = rotation_full_basis(4);
  const EvalGrid grid(16, 2);
  const Eigen::VectorXd obs = sample_observable(von_mises_observable(2.0, 3.0), grid);
  for (int n : {1, 3}) {
    const auto ctx = make_context(basis, grid, obs, 12.0, n);
    for (const TorusPoint x : {TorusPoint{0.0, 0.0}, TorusPoint{1.1, 5.0}, TorusPoint{3.0, 2.2}})
      EXPECT_NEAR(fock_predict(ctx, 0.0, x), full_basis_oracle(*basis, grid, obs, 12.0, n, x), 1e-11);
  }
}

TEST(Predictors, RotationEvolutionIsTranslation) {
  // Under the rotation, U^t acts on root states by translation; with the full basis
  // predictions at (x, t) equal predictions at (x + (t, alpha t), 0).
  const auto basis = rotation_full_basis(4);
  const EvalGrid grid(16, 2);
  const auto ctx = make_context(basis, grid, sample_observable(von_mises_observable(2.0, 3.0), grid), 12.0, 2);
  const double alpha = std::sqrt(30.0), t = 0.37;
  const TorusPoint x{0.9, 4.1};
  const TorusPoint moved = wrap({x[0] + t, x[1] + alpha * t});
  // Frequencies are tau-regularized, so the match is to that order.
  EXPECT_NEAR(fock_predict(ctx, t, x), fock_predict(ctx, 0.0, moved), 5e-2);
}

TEST(Predictors, DegenerateStateIsReported) {
  const auto basis = stepanoff_basis(5, 30, 8, SchemeKind::compact());
  const EvalGrid grid(12, 2);
  auto ctx = make_context(basis, grid, Eigen::VectorXd::Ones(144), 20.0, 2);
  ctx.degenerate_floor = 1e300;
  const EvalGrid eval(3, 2);
  EXPECT_TRUE(fock_field(ctx, 0.0, eval.nodes).array().isNaN().all());
  EXPECT_THROW(fock_predict(ctx, 0.0, {0.0, 0.0}), DegenerateState);
  EXPECT_THROW(qm_predict(ctx, 0.0, {0.0, 0.0}), DegenerateState);
}

TEST(FockRatio, ScaleFreeAndFloorInLogSpace) {
  Eigen::VectorXcd xi(3);
  xi << cplx(1e-200, 0.0), cplx(0.0, 2e-200), cplx(0.0, 0.0);
  Eigen::VectorXd obs(3);
  obs << 1.0, 3.0, 7.0;
  // |xi|^{2n} underflows in direct arithmetic for n = 2, but the ratio is exact.
  const auto y = detail::fock_ratio(xi, obs, 2, 0.0);
  ASSERT_TRUE(y.has_value());
  EXPECT_NEAR(*y, (1.0 + 3.0 * 16.0) / 17.0, 1e-14);
  EXPECT_FALSE(detail::fock_ratio(xi, obs, 2, 1e-300).has_value());
  EXPECT_FALSE(detail::fock_ratio(Eigen::VectorXcd::Zero(3), obs, 1, 0.0).has_value());
}

TEST(MakeContext, RejectsInvalidInputs) {
  const auto basis = stepanoff_basis(4, 20, 4, SchemeKind::compact());
  const EvalGrid grid(8, 2);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(64);
  EXPECT_THROW(make_context(basis, grid, Eigen::VectorXd::Ones(10), 1.0, 1), ValidationError);
  EXPECT_THROW(make_context(basis, grid, ones, 0.0, 1), ValidationError);
  EXPECT_THROW(make_context(basis, grid, ones, 1.0, 0), ValidationError);
  EXPECT_THROW(make_context(basis, EvalGrid(8, 1), Eigen::VectorXd::Ones(8), 1.0, 1), InvalidDimension);
  Eigen::VectorXd bad = ones;
  bad[3] = std::nan("");
  EXPECT_THROW(make_context(basis, grid, bad, 1.0, 1), ValidationError);
}

TEST(RootFeatureMap, UnitNormAndPeakedAtPoint) {
  const auto lat = build_lattice(2, 10);
  const RootFeatureMap fm(lat, 40.0, 4);
  Eigen::VectorXcd col(static_cast<Eigen::Index>(lat->size()));
  const TorusPoint x{2.0, 5.5};
  fm.fill(x, col);
  EXPECT_NEAR(col.norm(), 1.0, 1e-13);
  // Proportional to root_feature.
  const auto ref = root_feature(x, 40.0, 4, lat);
  EXPECT_LT((col - ref.coeffs / ref.coeffs.norm()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Classical, AlgorithmTwoWithFullBasisIsSmoothedSynthesis) {
  // With C unitary, a = C^H f and sum_r a_r zeta_r(x) = sum_s lambda_half(j_s) f_s e^{i j_s x}.
  const auto basis = rotation_full_basis(4);
  VonMisesParams p;
  p.mu = {1.0, 2.0};
  p.kappa = {2.0, 1.0};
  const auto f_hat = von_mises_fourier(p, basis->lattice);
  const TorusPoint x{0.3, 4.4};
  cplx ref = 0.0;
  const auto& lat = *basis->lattice;
  for (std::size_t s = 0; s < lat.size(); ++s)
    ref += basis->lambda_half[static_cast<Eigen::Index>(s)] * f_hat.coeffs[static_cast<Eigen::Index>(s)] *
           std::polar(1.0, lat[s][0] * x[0] + lat[s][1] * x[1]);
  const auto v = classical_predict(*basis, f_hat, 0.0, x);
  EXPECT_NEAR(v.value, ref.real(), 1e-12);
  EXPECT_LT(v.imag_residual, 1e-12);
}

TEST(Classical, RkhaProjectionReproducesEigenfunctionCombination) {
  const auto basis = stepanoff_basis(6, 40, 10, SchemeKind::compact());
  // Real function: zeta_1 + zeta_2 (a conjugate pair); its coefficients are lambda_half * (C_1 + C_2).
  ASSERT_NEAR(basis->omega[1], -basis->omega[2], 1e-8);
  const Eigen::VectorXcd coeffs = basis->lambda_half.cwiseProduct(basis->C.col(1) + basis->C.col(2));
  const FourierVector f_hat(basis->lattice, coeffs);
  const double w = basis->omega[1], t = 0.9;
  for (const TorusPoint x : {TorusPoint{0.0, 1.0}, TorusPoint{4.0, 2.5}}) {
    const auto z = eigenfunction_values(*basis, x);
    const double expected = (std::polar(1.0, w * t) * z[1] + std::polar(1.0, -w * t) * z[2]).real();
    const auto v = classical_predict(*basis, f_hat, t, x, ClassicalProjection::rkha);
    EXPECT_NEAR(v.value, expected, 1e-11);
    EXPECT_LT(v.imag_residual, 1e-11);
  }
  EXPECT_THROW(parse_projection("other"), ValidationError);
}

TEST(TruePredict, RotationComposesWithFlow) {
  const FlowSpec spec{FlowKind::rotation, std::sqrt(30.0), 2};
  const auto f = von_mises_observable(1.0, 6.0);
  const TorusPoint x{1.0, 1.0};
  EXPECT_NEAR(true_predict(spec, f, 2.0, x), f({3.0, 1.0 + 2.0 * std::sqrt(30.0)}), 1e-12);
  const EvalGrid g(4, 2);
  const auto field = true_field(spec, f, 2.0, g.nodes);
  EXPECT_EQ(field[5], true_predict(spec, f, 2.0, g.nodes[5]));
}

TEST(ErrorField, StatisticsSkipMissingValues) {
  Eigen::VectorXd pred(4), truth(4);
  pred << 1.0, std::nan(""), 3.0, -1.0;
  truth << 0.0, 5.0, 5.0, -1.0;
  const auto s = error_field(pred, truth);
  EXPECT_EQ(s.missing, 1u);
  EXPECT_NEAR(s.l2, std::sqrt((1.0 + 4.0 + 0.0) / 3.0), 1e-15);
  EXPECT_EQ(s.linf, 2.0);
  EXPECT_EQ(s.min_pred, -1.0);
  EXPECT_TRUE(std::isnan(s.field[1]));
  EXPECT_THROW(error_field(pred, Eigen::VectorXd::Zero(3)), ValidationError);
}
