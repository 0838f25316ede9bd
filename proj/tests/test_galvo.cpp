#include <gtest/gtest.h>

#include "support.hpp"

using namespace nlos;

namespace {

// Independent oracle: theta = eps + beta V solved as a 3-parameter affine
// regression per axis with an explicit 3x3 normal-equation inverse.
std::pair<Vec2, Eigen::Matrix2d> affine_oracle(const std::vector<GalvoSample>& s) {
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Matrix<double, 3, 2> atb = Eigen::Matrix<double, 3, 2>::Zero();
  for (const auto& g : s) {
    const Eigen::Vector3d row(1.0, g.voltages.x(), g.voltages.y());
    ata += row * row.transpose();
    atb += row * g.measured.vec().transpose();
  }
  const Eigen::Matrix<double, 3, 2> coef = ata.inverse() * atb;
  return {coef.row(0).transpose(), coef.bottomRows(2).transpose()};
}

}  // namespace

TEST(Galvo, ForwardInverseRoundTrip) {
  const GalvoModel g = fixtures::skewed_galvo();
  for (double vx : {-3.0, 0.0, 1.7}) {
    for (double vy : {-2.5, 0.4}) {
      const Vec2 v(vx, vy);
      EXPECT_LT((angles_to_voltages(g, voltages_to_angles(g, v)) - v).norm(), 1e-12);
    }
  }
}

TEST(Galvo, OutOfRangeCarriesClampedVoltages) {
  const GalvoModel g = fixtures::skewed_galvo();
  const ScanAngles far{deg_to_rad(45.0), 0.0};
  try {
    angles_to_voltages(g, far);
    FAIL();
  } catch (const VoltageRangeError& e) {
    EXPECT_EQ(e.code(), ErrorCode::out_of_range);
    EXPECT_LE(e.clamped().cwiseAbs().maxCoeff(), g.voltage_limit);
    EXPECT_GT(e.requested().cwiseAbs().maxCoeff(), g.voltage_limit);
  }
}

TEST(Galvo, SingularBetaRejected) {
  GalvoModel g;
  g.beta << 1.0, 2.0, 2.0, 4.0;
  EXPECT_THROW(angles_to_voltages(g, {0.1, 0.1}), Error);
}

TEST(Galvo, NoiselessFitIsExact) {
  const GalvoModel truth = fixtures::skewed_galvo();
  const auto samples = sample_galvo(truth, 10, 4.0, 0.0, 1);
  for (auto method : {GalvoFitMethod::two_stage, GalvoFitMethod::joint}) {
    const GalvoFit fit = fit_galvo(samples, method);
    EXPECT_LT((fit.model.beta - truth.beta).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((fit.model.eps - truth.eps).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(fit.residual_rms.maxCoeff(), 1e-12);
  }
}

TEST(Galvo, TwoStageMatchesAffineOracleOnSymmetricGrid) {
  const auto samples = sample_galvo(fixtures::skewed_galvo(), 10, 4.0, deg_to_rad(0.01), 5);
  const auto [eps, beta] = affine_oracle(samples);
  const GalvoFit fit = fit_galvo(samples);
  EXPECT_LT((fit.model.beta - beta).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((fit.model.eps - eps).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Galvo, JointFitHandlesOffsetVoltages) {
  const GalvoModel truth = fixtures::skewed_galvo();
  std::vector<GalvoSample> samples;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      const Vec2 v(0.5 + 0.6 * i, 1.0 + 0.5 * j);
      samples.push_back({v, voltages_to_angles(truth, v)});
    }
  }
  const GalvoFit joint = fit_galvo(samples, GalvoFitMethod::joint);
  EXPECT_LT((joint.model.beta - truth.beta).cwiseAbs().maxCoeff(), 1e-12);
  // The two-stage estimate is biased when the voltages are not centered.
  const GalvoFit staged = fit_galvo(samples, GalvoFitMethod::two_stage);
  EXPECT_GT((staged.model.beta - truth.beta).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Galvo, DegenerateSamplesRejected) {
  const GalvoModel truth = fixtures::skewed_galvo();
  std::vector<GalvoSample> line;
  for (int i = 0; i < 5; ++i) {
    const Vec2 v(0.3 * i - 0.6, 0.6 * i - 1.2);
    line.push_back({v, voltages_to_angles(truth, v)});
  }
  try {
    fit_galvo(line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate);
  }
  EXPECT_THROW(fit_galvo(std::span(line).first(2)), Error);
}
