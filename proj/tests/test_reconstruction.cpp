#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace nlos;

namespace {

const BoxExtents kBox{{-0.3, -0.3, 0.4}, {0.3, 0.3, 0.8}};

std::vector<Vec2> scan_grid(int n) {
  const ScanPattern p = gen_grid(n, 0.6);
  return p.points;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

TEST(Reconstruction, AdjointIdentity) {
  for (auto att : {Attenuation::off, Attenuation::on}) {
    const ConfocalOperator op({8, 8, 8}, kBox, scan_grid(4), 1024, 8.0, att);
    const auto x = random_vector(op.num_voxels(), 1);
    const auto y = random_vector(op.data_size(), 2);
    const double lhs = dot(op.forward(x), y);
    const double rhs = dot(x, op.adjoint(y));
    EXPECT_LT(std::abs(lhs - rhs), 1e-12 * std::abs(lhs));
  }
}

TEST(Reconstruction, ForwardMatchesDenseMatrix) {
  const auto scan = scan_grid(3);
  const ConfocalOperator op({4, 4, 4}, kBox, scan, 1024, 8.0);
  VoxelVolume grid({4, 4, 4}, kBox);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(op.data_size()), 64);
  for (std::size_t p = 0; p < scan.size(); ++p) {
    for (std::size_t v = 0; v < 64; ++v) {
      const Point3 c = grid.center(v);
      const double d = (c - Point3(scan[p].x(), scan[p].y(), 0)).norm();
      const auto k = static_cast<std::size_t>(std::floor(2 * d / (299792458.0 * 8e-12) + 0.5));
      a(static_cast<Eigen::Index>(p * 1024 + k), static_cast<Eigen::Index>(v)) += 1.0;
    }
  }
  const auto x = random_vector(64, 3);
  const Eigen::VectorXd ref = a * Eigen::Map<const Eigen::VectorXd>(x.data(), 64);
  const auto y = op.forward(x);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref(static_cast<Eigen::Index>(i)), 1e-12);
}

TEST(Reconstruction, CoverageError) {
  try {
    ConfocalOperator op({4, 4, 4}, kBox, scan_grid(3), 100, 8.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::coverage);
  }
}

TEST(Reconstruction, TvOfStep) {
  std::vector<double> f(27, 0.0);
  f[13] = 2.0;  // center voxel of 3x3x3
  EXPECT_DOUBLE_EQ(total_variation(f, {3, 3, 3}), 6 * 2.0);
}

TEST(Reconstruction, GradientMatchesFiniteDifferences) {
  const ConfocalOperator op({4, 4, 4}, kBox, scan_grid(3), 1024, 8.0, Attenuation::on);
  auto f = random_vector(64, 5);
  for (double& v : f) v += 0.1;
  auto tau = op.forward(random_vector(64, 6));
  for (double& t : tau) t += 0.05;
  ReconConfig cfg;
  cfg.lambda = 0.0;
  const LossGrad lg = loss_grad(op, f, tau, cfg);
  for (std::size_t v = 0; v < 64; v += 7) {
    const double h = 1e-5;
    auto fp = f, fm = f;
    fp[v] += h;
    fm[v] -= h;
    const double fd = (evaluate_loss(op, fp, tau, cfg) - evaluate_loss(op, fm, tau, cfg)) / (2 * h);
    EXPECT_NEAR(lg.grad[v], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Reconstruction, TvGradientAwayFromKinks) {
  const std::array<int, 3> d{3, 3, 3};
  auto f = random_vector(27, 8);  // distinct values: TV is smooth here
  std::vector<double> g(27, 0.0);
  add_tv_subgradient(f, d, 0.7, g);
  for (std::size_t v = 0; v < 27; ++v) {
    const double h = 1e-7;
    auto fp = f, fm = f;
    fp[v] += h;
    fm[v] -= h;
    EXPECT_NEAR(g[v], 0.7 * (total_variation(fp, d) - total_variation(fm, d)) / (2 * h), 1e-6);
  }
}

TEST(Reconstruction, OptDecreasesLossAndStaysNonNegative) {
  const ConfocalOperator op({6, 6, 6}, kBox, scan_grid(5), 1024, 8.0);
  VoxelVolume truth({6, 6, 6}, kBox);
  truth[truth.index(2, 3, 3)] = 1.0;
  truth[truth.index(3, 3, 3)] = 1.0;
  const auto tau = op.forward(truth.data());
  ReconConfig cfg;
  cfg.dims = {6, 6, 6};
  cfg.bbox = kBox;
  cfg.max_iters = 200;
  const ReconResult r = reconstruct_opt(op, tau, cfg);
  for (std::size_t i = 1; i < r.loss_trace.size(); ++i) EXPECT_LE(r.loss_trace[i], r.loss_trace[i - 1]);
  for (double v : r.volume.data()) EXPECT_GE(v, 0.0);
  EXPECT_GT(support_iou(r.volume, truth, 0.5), 0.5);
}

TEST(Reconstruction, BackprojectionNormalized) {
  const ConfocalOperator op({6, 6, 6}, kBox, scan_grid(4), 1024, 8.0);
  VoxelVolume truth({6, 6, 6}, kBox);
  truth[truth.index(1, 4, 2)] = 1.0;
  const VoxelVolume bp = reconstruct_bp(op, op.forward(truth.data()));
  EXPECT_DOUBLE_EQ(bp.max_value(), 1.0);
  EXPECT_DOUBLE_EQ(bp[truth.index(1, 4, 2)], 1.0);
}

TEST(Reconstruction, NegativeInputsRejected) {
  const ConfocalOperator op({4, 4, 4}, kBox, scan_grid(3), 1024, 8.0);
  std::vector<double> tau(op.data_size(), 0.0);
  tau[3] = -1.0;
  ReconConfig cfg;
  EXPECT_THROW(reconstruct_opt(op, tau, cfg), Error);
}

TEST(Reconstruction, Metrics) {
  VoxelVolume a({2, 2, 1}, {{0, 0, 0}, {1, 1, 1}});
  VoxelVolume b = a;
  a[0] = 1.0;
  a[1] = 0.8;
  b[0] = 1.0;
  b[2] = 1.0;
  EXPECT_DOUBLE_EQ(support_iou(a, b, 0.5), 1.0 / 3.0);
  const std::vector<double> x{1, 2, 3}, y{2, 4, 6};
  EXPECT_NEAR(pearson(x, y), 1.0, 1e-15);
  const Point3 c = weighted_centroid(a, 0.5);
  EXPECT_NEAR(c.x(), (1.0 * 0.25 + 0.8 * 0.75) / 1.8, 1e-15);
}
