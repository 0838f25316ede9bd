#include <gtest/gtest.h>

#include <numeric>

#include "support.hpp"

using namespace nlos;

namespace {

VoxelVolume single_voxel(const Point3& where) {
  VoxelVolume v({5, 5, 5}, {{-0.5, -0.5, 0.5}, {0.5, 0.5, 1.0}});
  std::size_t best = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if ((v.center(i) - where).norm() < (v.center(best) - where).norm()) best = i;
  }
  v[best] = 0.7;
  return v;
}

}  // namespace

TEST(Simulator, CleanTransientBinsRoundTripDistance) {
  RigConfig cfg;
  const VoxelVolume v = single_voxel({0.1, -0.2, 0.8});
  const Vec2 s(0.25, 0.1);
  const TransientHistogram h = render_clean_transient(v, s, cfg, Attenuation::off);
  std::size_t idx = 0;
  while (v[idx] == 0.0) ++idx;
  const Point3 p = v.center(idx);
  const double d = std::sqrt(std::pow(p.x() - 0.25, 2) + std::pow(p.y() - 0.1, 2) + p.z() * p.z());
  const auto k = static_cast<std::size_t>(std::floor(2 * d / (299792458.0 * 4e-12) + 0.5));
  EXPECT_DOUBLE_EQ(h.counts[k], 0.7);
  EXPECT_DOUBLE_EQ(h.total(), 0.7);
}

TEST(Simulator, AttenuationMatchesCosineLaw) {
  RigConfig cfg;
  const VoxelVolume v = single_voxel({0.0, 0.0, 0.8});
  const TransientHistogram h = render_clean_transient(v, {0.3, 0.0}, cfg, Attenuation::on);
  std::size_t idx = 0;
  while (v[idx] == 0.0) ++idx;
  const Point3 p = v.center(idx);
  const Point3 s(0.3, 0.0, 0.0);
  const double r = (p - s).norm();
  const double cos_s = p.z() / r;
  const double cos_p = (s - p).dot(-p.normalized()) / r;
  EXPECT_NEAR(h.total(), 0.7 * cos_p * cos_p * cos_s * cos_s / std::pow(r, 4), 1e-12);
}

TEST(Simulator, OverflowIsAnError) {
  RigConfig cfg;
  cfg.num_bins = 100;
  const VoxelVolume v = single_voxel({0.0, 0.0, 0.8});
  try {
    render_clean_transient(v, {0.0, 0.0}, cfg, Attenuation::off);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::histogram_overflow);
  }
}

TEST(Simulator, BiasOnlyNoiseMean) {
  TransientHistogram clean(4096, 4.0);
  NoiseModel noise;
  noise.bias = 2.0;
  double grand = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    noise.seed = seed;
    const TransientHistogram h = apply_spad_noise(clean, noise);
    const double mean = h.total() / 4096.0;
    EXPECT_NEAR(mean, 2.0, 4 * std::sqrt(2.0 / 4096));
    for (double c : h.counts) EXPECT_EQ(c, std::floor(c));
    grand += mean;
  }
  EXPECT_NEAR(grand / 20, 2.0, 3 * std::sqrt(2.0 / 4096 / 20));
}

TEST(Simulator, DeltaKernelPoissonMean) {
  TransientHistogram clean(64, 4.0);
  for (std::size_t k = 0; k < 64; ++k) clean.counts[k] = 5.0 + k;
  NoiseModel noise;
  std::vector<double> acc(64, 0.0);
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    noise.seed = static_cast<std::uint64_t>(s);
    const auto h = apply_spad_noise(clean, noise);
    for (std::size_t k = 0; k < 64; ++k) acc[k] += h.counts[k];
  }
  for (std::size_t k = 0; k < 64; ++k) {
    EXPECT_NEAR(acc[k] / seeds, clean.counts[k], 4.5 * std::sqrt(clean.counts[k] / seeds));
  }
}

TEST(Simulator, SameSeedSameDraw) {
  TransientHistogram clean(256, 4.0);
  clean.counts[40] = 1000.0;
  NoiseModel noise;
  noise.jitter = JitterParams{};
  noise.bias = 0.3;
  noise.seed = 9;
  EXPECT_EQ(apply_spad_noise(clean, noise, 3).counts, apply_spad_noise(clean, noise, 3).counts);
  EXPECT_NE(apply_spad_noise(clean, noise, 3).counts, apply_spad_noise(clean, noise, 4).counts);
}

TEST(Simulator, CaptureTruthMatchesGeometry) {
  const RigConfig cfg = fixtures::test_rig();
  const Vec2 v(1.2, -0.7);
  const CaptureTruth t = locate_spot(cfg, v);
  const Eigen::Vector2d th = cfg.true_galvo.eps + cfg.true_galvo.beta * v;
  const Eigen::Vector3d dir = Eigen::Vector3d(std::tan(th.x()), std::tan(th.y()), 1).normalized();
  EXPECT_LT(cfg.true_plane.distance(t.world), 1e-12);
  EXPECT_LT(t.world.normalized().cross(dir).norm(), 1e-12);
  const double range = t.world.norm();
  const double cosine = -cfg.true_plane.unit_normal().dot(-dir);
  EXPECT_NEAR(t.gamma, 1e4 * std::abs(cosine) / (range * range), 1e-9);
  EXPECT_EQ(t.los_bin, static_cast<std::size_t>(std::llround(2 * range / (kMetersPerPs * 4.0))));
}

TEST(Simulator, CaptureComposesLosAndNlos) {
  RigConfig cfg = fixtures::test_rig();
  cfg.nlos_gain = 0.01;
  const VoxelVolume v = single_voxel({0.0, 0.0, 0.8});
  NoiseModel noise;
  noise.poisson = false;
  const Capture cap = rig_capture(cfg, v, {0.5, 0.5}, noise);
  const TransientHistogram clean = render_clean_transient(v, cap.truth.wall_xy, cfg, Attenuation::off);
  std::size_t k = 0;
  while (clean.counts[k] == 0.0) ++k;
  EXPECT_DOUBLE_EQ(cap.histogram.counts[cap.truth.los_bin], cap.truth.gamma);
  EXPECT_NEAR(cap.histogram.counts[cap.truth.los_bin + k], cap.truth.gamma * 0.01 * 0.7, 1e-12);
  EXPECT_NEAR(cap.histogram.total(), cap.truth.gamma * (1 + 0.007), 1e-9);
  EXPECT_THROW(rig_capture(cfg, v, {5.5, 0.0}, noise), Error);
}

TEST(Simulator, DatasetIndependentOfThreadCount) {
  const RigConfig cfg = fixtures::test_rig();
  const auto compiled = compile_pattern(gen_grid(4, 0.4), cfg.true_plane, cfg.true_galvo);
  const VoxelVolume v = single_voxel({0.0, 0.0, 0.8});
  NoiseModel noise;
  noise.jitter = JitterParams{};
  noise.bias = 0.1;
  noise.seed = 17;
  set_max_threads(1);
  const auto a = simulate_dataset(cfg, v, compiled, noise);
  set_max_threads(4);
  const auto b = simulate_dataset(cfg, v, compiled, noise);
  set_max_threads(0);
  for (std::size_t i = 0; i < a.dataset.size(); ++i) {
    EXPECT_EQ(a.dataset.histograms[i].counts, b.dataset.histograms[i].counts);
  }
}

TEST(Simulator, GalvoSamplesOnSymmetricGrid) {
  const auto s = sample_galvo(fixtures::skewed_galvo(), 10, 4.0, 0.0, 0);
  ASSERT_EQ(s.size(), 100u);
  Vec2 mean = Vec2::Zero();
  for (const auto& g : s) mean += g.voltages;
  EXPECT_LT(mean.norm(), 1e-12);
}
