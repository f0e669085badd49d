#pragma once

#include "cloudmatch/geometry.hpp"
#include "cloudmatch/kdtree.hpp"

#include <Eigen/Eigenvalues>

#include <stdexcept>
#include <vector>

namespace cloudmatch {

inline constexpr std::size_t kDefaultNormalNeighborhood = 16;

struct NormalDiagnostics {
  std::size_t degenerate_neighborhoods = 0;  // collinear or coincident points
};

/// PCA normals: for each point, the eigenvector of the smallest eigenvalue of
/// the covariance of its `neighborhood_size` nearest neighbours (self
/// included), flipped to point away from the cloud centroid. Existing normals
/// are replaced.
inline PointCloud estimate_normals(const PointCloud& cloud,
                                   std::size_t neighborhood_size,
                                   const KdTree& index,
                                   NormalDiagnostics* diagnostics = nullptr) {
  if (neighborhood_size < 3) {
    throw std::invalid_argument("estimate_normals: neighborhood_size must be >= 3");
  }
  if (cloud.size() < neighborhood_size) {
    throw std::invalid_argument(
        "estimate_normals: cloud smaller than neighborhood_size");
  }
  const Point3 center = centroid(cloud);
  std::vector<Vector3> normals;
  normals.reserve(cloud.size());
  std::size_t degenerate = 0;

  for (const auto& p : cloud.points()) {
    const auto nbrs = index.k_nearest(p, neighborhood_size);
    Vector3 mean = Vector3::Zero();
    for (const auto& nb : nbrs) mean += index.points()[nb.index];
    mean /= static_cast<double>(nbrs.size());
    Matrix3 cov = Matrix3::Zero();
    for (const auto& nb : nbrs) {
      const Vector3 d = index.points()[nb.index] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Matrix3> eig(cov);
    const Vector3 evals = eig.eigenvalues();  // ascending
    Vector3 n;
    if (evals(1) <= 1e-12 * std::max(evals(2), 1e-300)) {
      // Line or single point: any direction orthogonal to the principal axis.
      ++degenerate;
      const Vector3 axis = evals(2) > 0.0 ? Vector3(eig.eigenvectors().col(2))
                                          : Vector3::UnitX();
      n = axis.unitOrthogonal();
    } else {
      n = eig.eigenvectors().col(0);
    }
    if (n.dot(p - center) < 0.0) n = -n;
    normals.push_back(n);
  }
  if (diagnostics != nullptr) diagnostics->degenerate_neighborhoods = degenerate;
  return PointCloud(cloud.points(), std::move(normals));
}

inline PointCloud estimate_normals(const PointCloud& cloud,
                                   std::size_t neighborhood_size = kDefaultNormalNeighborhood,
                                   NormalDiagnostics* diagnostics = nullptr) {
  if (cloud.empty()) throw GeometryError("empty cloud");
  const KdTree index(cloud);
  return estimate_normals(cloud, neighborhood_size, index, diagnostics);
}

}  // namespace cloudmatch
