#include "cloudmatch/normals.hpp"
#include "cloudmatch/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace cloudmatch {
namespace {

TEST(EstimateNormals, PlanarGrid) {
  std::vector<Point3> pts;
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) pts.emplace_back(0.1 * i, 0.1 * j, 0.0);
  }
  const PointCloud out = estimate_normals(PointCloud(pts), 16);
  ASSERT_TRUE(out.has_normals());
  for (const auto& n : out.normals()) {
    EXPECT_NEAR(std::abs(n.z()), 1.0, 1e-6);
    EXPECT_NEAR(n.norm(), 1.0, 1e-9);
  }
}

TEST(EstimateNormals, SphereNormalsAreRadial) {
  Xoshiro256 rng(1);
  std::vector<Point3> pts;
  for (int i = 0; i < 5000; ++i) {
    const double z = rng.uniform(-1, 1), phi = rng.uniform(0, 2 * std::numbers::pi);
    const double r = std::sqrt(1 - z * z);
    pts.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  const PointCloud out = estimate_normals(PointCloud(pts), 16);
  const double cos5 = std::cos(5.0 * std::numbers::pi / 180.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Oriented away from the centroid, so parallel rather than anti-parallel.
    EXPECT_GT(out.normal(i).dot(out.point(i).normalized()), cos5) << i;
  }
}

TEST(EstimateNormals, ReplacesExistingNormals) {
  std::vector<Point3> pts;
  std::vector<Vector3> wrong;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      pts.emplace_back(i, j, 0.0);
      wrong.emplace_back(1.0, 0.0, 0.0);
    }
  }
  const PointCloud out = estimate_normals(PointCloud(pts, wrong), 8);
  for (const auto& n : out.normals()) EXPECT_NEAR(std::abs(n.z()), 1.0, 1e-9);
}

TEST(EstimateNormals, CollinearNeighborhoodIsFlagged) {
  std::vector<Point3> pts;
  for (int i = 0; i < 30; ++i) pts.emplace_back(0.5 * i, 0.0, 0.0);
  NormalDiagnostics diag;
  const PointCloud out = estimate_normals(PointCloud(pts), 5, &diag);
  EXPECT_EQ(diag.degenerate_neighborhoods, pts.size());
  for (const auto& n : out.normals()) {
    EXPECT_NEAR(n.norm(), 1.0, 1e-9);
    EXPECT_NEAR(n.x(), 0.0, 1e-9);  // orthogonal to the line
  }
}

TEST(EstimateNormals, Preconditions) {
  const PointCloud small({Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0)});
  EXPECT_THROW(estimate_normals(small, 2), std::invalid_argument);
  EXPECT_THROW(estimate_normals(small, 4), std::invalid_argument);
  EXPECT_NO_THROW(estimate_normals(small, 3));
  EXPECT_THROW(estimate_normals(PointCloud(), 3), GeometryError);
}

}  // namespace
}  // namespace cloudmatch
