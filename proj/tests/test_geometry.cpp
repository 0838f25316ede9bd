#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace nlos;

TEST(Geometry, AnglesToPointHasRequestedLength) {
  for (double tx : {-0.6, -0.1, 0.0, 0.35}) {
    for (double ty : {-0.4, 0.0, 0.2}) {
      const Point3 p = angles_to_point({tx, ty}, 1.7);
      EXPECT_NEAR(p.norm(), 1.7, 1e-12);
      EXPECT_NEAR(p.x(), p.z() * std::tan(tx), 1e-12);
      EXPECT_NEAR(p.y(), p.z() * std::tan(ty), 1e-12);
      const ScanAngles back = point_to_angles(p);
      EXPECT_NEAR(back.theta_x, tx, 1e-12);
      EXPECT_NEAR(back.theta_y, ty, 1e-12);
    }
  }
}

TEST(Geometry, AnglesToPointRejectsBadInput) {
  EXPECT_THROW(angles_to_point({0.1, 0.1}, 0.0), Error);
  EXPECT_THROW(angles_to_point({0.1, 0.1}, -1.0), Error);
  EXPECT_THROW(angles_to_point({std::numbers::pi / 2, 0.0}, 1.0), Error);
  EXPECT_THROW(point_to_angles({0.0, 0.0, -1.0}), Error);
}

TEST(Geometry, WallFrameIsOrthonormalRightHanded) {
  const RelayPlane plane = fixtures::tilted_wall();
  const Eigen::Matrix3d b = plane.basis();
  EXPECT_TRUE((b.transpose() * b).isIdentity(1e-12));
  EXPECT_NEAR(b.determinant(), 1.0, 1e-12);
  // Normal points back towards the scanner.
  EXPECT_LT(plane.basis_z().dot(plane.origin()), 0.0);
  EXPECT_NEAR(plane.equation(plane.origin()), 0.0, 1e-12);
  EXPECT_NEAR(plane.offset(), 1.2, 1e-12);
  // basis_x has no world-Y component in the generic case.
  EXPECT_NEAR(plane.basis_x().y(), 0.0, 1e-15);
}

TEST(Geometry, WallFrameFallbackForAxisAlignedPlanes) {
  const RelayPlane z = build_wall_frame({0.0, 0.0, -1.0}, {0.0, 0.0, 1.0});
  EXPECT_TRUE(z.basis().transpose().isApprox(z.basis().inverse(), 1e-12));
  EXPECT_NEAR(std::abs(z.basis_x().x()), 1.0, 1e-12);
  const RelayPlane x = build_wall_frame({-0.5, 0.0, 0.0}, {2.0, 0.0, 0.0});
  EXPECT_NEAR(x.basis().determinant(), 1.0, 1e-12);
  EXPECT_NEAR(x.basis_x().dot(x.basis_z()), 0.0, 1e-12);
}

TEST(Geometry, WallFrameRejectsInvalidPlanes) {
  EXPECT_THROW(build_wall_frame({0.0, 0.0, 0.0}, {0.0, 0.0, 1.0}), Error);
  EXPECT_THROW(build_wall_frame({0.0, 0.0, -2000.0}, {0.0, 0.0, 5e-4}), Error);
  try {
    build_wall_frame({0.0, 0.0, -1.0}, {0.0, 0.0, 1.1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_plane);
  }
}

TEST(Geometry, TransformRoundTrip) {
  const RelayPlane plane = fixtures::tilted_wall();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const Point3 p(u(rng), u(rng), u(rng));
    const Point3 q = transform_point(plane, p, Direction::world_to_wall);
    const Point3 back = transform_point(plane, q, Direction::wall_to_world);
    EXPECT_LT((back - p).norm(), 1e-12);
    // Wall z is the signed distance to the plane, positive on the scanner side.
    EXPECT_NEAR(q.z(), plane.equation(p) / plane.coeffs().norm(), 1e-12);
  }
}

TEST(Geometry, WallPointsLieOnPlane) {
  const RelayPlane plane = fixtures::tilted_wall();
  for (double x : {-0.4, 0.0, 0.3}) {
    for (double y : {-0.2, 0.4}) {
      const Point3 p = wall_to_world(plane, {x, y});
      EXPECT_LT(plane.distance(p), 1e-12);
      EXPECT_LT((project_onto_plane(plane, p) - p).norm(), 1e-12);
    }
  }
  const Point3 off = plane.origin() + 0.3 * plane.basis_z();
  EXPECT_NEAR(plane.distance(off), 0.3, 1e-12);
  EXPECT_LT((project_onto_plane(plane, off) - plane.origin()).norm(), 1e-12);
}
