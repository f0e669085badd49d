#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cloudmatch {

using Point3 = Eigen::Vector3d;
using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool is_finite(const Vector3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

/// Squared Euclidean distance with a fixed summation order (x, y, z).
/// Everything that compares distances bitwise relies on this order.
inline double squared_distance(const Point3& a, const Point3& b) noexcept {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Unit-norm 3-vector. Normalizes on construction.
class UnitVector3 {
 public:
  explicit UnitVector3(const Vector3& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw GeometryError("unit vector: zero or non-finite length");
    }
    v_ = v / n;
  }

  const Vector3& vector() const noexcept { return v_; }
  double x() const noexcept { return v_.x(); }
  double y() const noexcept { return v_.y(); }
  double z() const noexcept { return v_.z(); }

 private:
  Vector3 v_;
};

/// Ordered 3D points with optional index-aligned unit normals.
class PointCloud {
 public:
  PointCloud() = default;

  explicit PointCloud(std::vector<Point3> points,
                      std::vector<Vector3> normals = {})
      : points_(std::move(points)), normals_(std::move(normals)) {
    for (const auto& p : points_) {
      if (!is_finite(p)) throw GeometryError("point cloud: non-finite coordinate");
    }
    if (!normals_.empty()) {
      if (normals_.size() != points_.size()) {
        throw GeometryError("point cloud: normals not index-aligned with points");
      }
      for (auto& n : normals_) n = UnitVector3(n).vector();
    }
  }

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  bool has_normals() const noexcept { return !normals_.empty(); }

  const std::vector<Point3>& points() const noexcept { return points_; }
  const std::vector<Vector3>& normals() const noexcept { return normals_; }
  const Point3& point(std::size_t i) const { return points_[i]; }
  const Vector3& normal(std::size_t i) const { return normals_[i]; }

  PointCloud without_normals() const { return PointCloud(points_); }

 private:
  std::vector<Point3> points_;
  std::vector<Vector3> normals_;
};

/// Rotation + translation.
struct RigidMotion {
  Matrix3 rotation = Matrix3::Identity();
  Vector3 translation = Vector3::Zero();

  static RigidMotion identity() { return {}; }

  Point3 operator()(const Point3& p) const { return rotation * p + translation; }
};

/// x -> scale * (R x) + T.
struct SimilarityTransform {
  double scale = 1.0;
  RigidMotion motion;

  static SimilarityTransform identity() { return {}; }

  static SimilarityTransform from_rigid(const RigidMotion& m) { return {1.0, m}; }

  const Matrix3& rotation() const noexcept { return motion.rotation; }
  const Vector3& translation() const noexcept { return motion.translation; }

  Point3 operator()(const Point3& p) const {
    return scale * (motion.rotation * p) + motion.translation;
  }
};

/// Checks orthonormality and det = +1 within tol.
inline bool is_rotation(const Matrix3& r, double tol = 1e-9) {
  return (r.transpose() * r - Matrix3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

inline void validate(const SimilarityTransform& t) {
  if (!(t.scale > 0.0) || !std::isfinite(t.scale)) {
    throw GeometryError("similarity transform: scale must be positive and finite");
  }
  if (!t.motion.rotation.allFinite() || !is_finite(t.motion.translation)) {
    throw GeometryError("similarity transform: non-finite entries");
  }
}

/// Nearest rotation matrix in the Frobenius sense (polar projection via SVD).
inline Matrix3 nearest_rotation(const Matrix3& m) {
  Eigen::JacobiSVD<Matrix3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 u = svd.matrixU();
  const Matrix3& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

inline Matrix3 axis_angle_rotation(const Vector3& axis, double angle_rad) {
  return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

/// Geodesic angle between two rotations, radians.
inline double rotation_angle_between(const Matrix3& a, const Matrix3& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

inline Point3 centroid(const PointCloud& cloud) {
  if (cloud.empty()) throw GeometryError("empty cloud");
  Vector3 sum = Vector3::Zero();
  for (const auto& p : cloud.points()) sum += p;
  return sum / static_cast<double>(cloud.size());
}

/// Diagonal length of the axis-aligned bounding box.
inline double bounding_diameter(const PointCloud& cloud) {
  if (cloud.empty()) throw GeometryError("empty cloud");
  Vector3 lo = cloud.point(0), hi = cloud.point(0);
  for (const auto& p : cloud.points()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

/// Points map to scale * R p + T; normals rotate only.
inline PointCloud apply_transform(const SimilarityTransform& t,
                                  const PointCloud& cloud) {
  std::vector<Point3> pts;
  pts.reserve(cloud.size());
  for (const auto& p : cloud.points()) pts.push_back(t(p));
  std::vector<Vector3> nrm;
  if (cloud.has_normals()) {
    nrm.reserve(cloud.size());
    for (const auto& n : cloud.normals()) nrm.push_back(t.motion.rotation * n);
  }
  return PointCloud(std::move(pts), std::move(nrm));
}

inline PointCloud apply_transform(const RigidMotion& m, const PointCloud& cloud) {
  return apply_transform(SimilarityTransform::from_rigid(m), cloud);
}

/// outer ∘ inner.
inline SimilarityTransform compose(const SimilarityTransform& outer,
                                   const SimilarityTransform& inner) {
  SimilarityTransform r;
  r.scale = outer.scale * inner.scale;
  r.motion.rotation = outer.motion.rotation * inner.motion.rotation;
  r.motion.translation =
      outer.scale * (outer.motion.rotation * inner.motion.translation) +
      outer.motion.translation;
  return r;
}

inline SimilarityTransform inverse(const SimilarityTransform& t) {
  SimilarityTransform r;
  r.scale = 1.0 / t.scale;
  r.motion.rotation = t.motion.rotation.transpose();
  r.motion.translation = -(r.motion.rotation * t.motion.translation) / t.scale;
  return r;
}

}  // namespace cloudmatch
