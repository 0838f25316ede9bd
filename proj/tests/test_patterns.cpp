#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace nlos;

TEST(Patterns, GridLayout) {
  const ScanPattern p = gen_grid(4, 0.6);
  ASSERT_EQ(p.size(), 16u);
  EXPECT_NEAR(p.points.front().x(), -0.3, 1e-15);
  EXPECT_NEAR(p.points.front().y(), 0.3, 1e-15);
  EXPECT_NEAR(p.points.back().x(), 0.3, 1e-15);
  EXPECT_NEAR(p.points.back().y(), -0.3, 1e-15);
  // Row-major: second point steps in x by L/(N-1).
  EXPECT_NEAR(p.points[1].x() - p.points[0].x(), 0.2, 1e-15);
  EXPECT_NEAR(p.points[4].y(), 0.1, 1e-15);
  EXPECT_THROW(gen_grid(1, 0.6), Error);
  EXPECT_THROW(gen_grid(4, 0.0), Error);
}

TEST(Patterns, CirclesLayout) {
  const ScanPattern p = gen_circles(4, 8, 0.4);
  ASSERT_EQ(p.size(), 32u);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 8; ++j) {
      const Vec2& q = p.points[static_cast<std::size_t>(i * 8 + j)];
      EXPECT_NEAR(q.norm(), 0.1 * (i + 1), 1e-14);
      // Starts at the top, then clockwise: phi = pi/2 - j * 2pi/8.
      const double phi = std::numbers::pi / 2 - j * std::numbers::pi / 4;
      EXPECT_NEAR(q.x(), 0.1 * (i + 1) * std::cos(phi), 1e-14);
      EXPECT_NEAR(q.y(), 0.1 * (i + 1) * std::sin(phi), 1e-14);
    }
  }
  EXPECT_GT(p.points[0].y(), 0.0);
  EXPECT_GT(p.points[1].x(), 0.0);  // clockwise from the top
}

TEST(Patterns, DuplicatesRejected) {
  ScanPattern p;
  p.points = {{0.0, 0.0}, {0.1, 0.0}, {0.0, 5e-10}};
  EXPECT_THROW(validate_pattern(p), Error);
  p.points.clear();
  EXPECT_THROW(validate_pattern(p), Error);
}

TEST(Patterns, CompileClosedLoop) {
  const RelayPlane plane = fixtures::tilted_wall();
  const GalvoModel galvo = fixtures::skewed_galvo();
  const ScanPattern p = gen_grid(7, 0.8);
  const CompiledPattern c = compile_pattern(p, plane, galvo);
  ASSERT_TRUE(c.ok());
  for (std::size_t i = 0; i < p.size(); ++i) {
    // Fire the ray at the compiled voltages and intersect with the plane.
    const ScanAngles a = voltages_to_angles(galvo, c.points[i].voltages);
    const Eigen::Vector3d dir(std::tan(a.theta_x), std::tan(a.theta_y), 1.0);
    const double t = -1.0 / plane.coeffs().dot(dir);
    const Point3 hit = t * dir;
    const Point3 local = transform_point(plane, hit, Direction::world_to_wall);
    EXPECT_LT((local.head<2>() - p.points[i]).norm(), 1e-9);
  }
}

TEST(Patterns, CompileReportsOutOfRange) {
  const RelayPlane plane = fixtures::tilted_wall();
  const GalvoModel galvo = fixtures::skewed_galvo();
  ScanPattern p;
  p.points = {{0.0, 0.0}, {3.0, 0.0}, {0.3, 0.3}};
  const CompiledPattern c = compile_pattern(p, plane, galvo);
  ASSERT_EQ(c.failures.size(), 1u);
  EXPECT_EQ(c.failures[0].index, 1u);
  EXPECT_EQ(c.failures[0].code, ErrorCode::out_of_range);
  EXPECT_LE(c.points[1].voltages.cwiseAbs().maxCoeff(), galvo.voltage_limit);
}

TEST(Patterns, SerpentineIsPermutation) {
  const ScanPattern p = gen_grid(5, 0.5);
  const auto order = serpentine_order(p);
  EXPECT_EQ(std::set<std::size_t>(order.begin(), order.end()).size(), 25u);
  EXPECT_EQ(order[5], 9u);
  EXPECT_EQ(order[9], 5u);
  EXPECT_EQ(order[10], 10u);
}
