#pragma once

#include "cloudmatch/geometry.hpp"
#include "cloudmatch/kdtree.hpp"
#include "cloudmatch/metric.hpp"
#include "cloudmatch/normals.hpp"
#include "cloudmatch/random.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace cloudmatch {

class RegistrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IcpParams {
  std::size_t sample_size = 500;
  std::size_t iterations = 15;
  double outlier_k = kDefaultOutlierK;
  std::uint64_t rng_seed = 0;
  std::size_t min_correspondences = 6;
  std::size_t normal_neighborhood = kDefaultNormalNeighborhood;
  // Stop once the relative change of the per-iteration error drops to this
  // value. 0 disables early exit, so exactly `iterations` rounds run.
  double early_exit_tolerance = 0.0;

  void validate() const {
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (min_correspondences < 1) {
      throw std::invalid_argument("min_correspondences must be >= 1");
    }
    if (sample_size < min_correspondences) {
      throw std::invalid_argument("sample_size must be >= min_correspondences");
    }
    if (!(outlier_k > 0.0)) throw std::invalid_argument("outlier_k must be positive");
    if (early_exit_tolerance < 0.0) {
      throw std::invalid_argument("early_exit_tolerance must be >= 0");
    }
  }
};

/// One matched pair: a (working) source point, its closest destination point,
/// and the destination normal there.
struct Correspondence {
  Point3 source;
  Point3 target;
  Vector3 target_normal;
  double distance = 0.0;
};

using CorrespondenceSet = std::vector<Correspondence>;

struct PointToPlaneSolution {
  RigidMotion motion;
  double condition = 1.0;        // of the undamped 6x6 system
  bool ill_conditioned = false;  // condition above kIllConditioned
  bool fell_back = false;        // solved motion raised the error; identity returned
};

struct IcpResult {
  SimilarityTransform transform;  // original source -> aligned
  PointCloud aligned;             // working cloud after the last iteration
  double final_error = 0.0;
  std::vector<double> per_iteration_error;
  std::vector<std::size_t> correspondences_used;
  std::size_t ill_conditioned_iterations = 0;
  std::size_t fallback_iterations = 0;
};

inline constexpr double kIllConditioned = 1e12;
inline constexpr double kSolverDamping = 1e-9;

/// Relative scale from the ratio of centroid-centred second moments,
/// sqrt(sum |q - c_d|^2 / sum |p - c_s|^2), with each sum taken per point
/// (divided by its cloud size) so that clouds of different sizes compare.
inline double horn_scale(const PointCloud& source, const PointCloud& destination) {
  if (source.empty() || destination.empty()) throw GeometryError("empty cloud");
  const Point3 cs = centroid(source);
  const Point3 cd = centroid(destination);
  double num = 0.0, den = 0.0;
  for (const auto& q : destination.points()) num += (q - cd).squaredNorm();
  for (const auto& p : source.points()) den += (p - cs).squaredNorm();
  if (!(den > 0.0)) throw RegistrationError("degenerate source cloud");
  num /= static_cast<double>(destination.size());
  den /= static_cast<double>(source.size());
  return std::sqrt(num / den);
}

/// Sum over pairs of ((R p + T - q) . n)^2.
inline double point_to_plane_error(const RigidMotion& motion,
                                   std::span<const Correspondence> pairs) {
  double e = 0.0;
  for (const auto& c : pairs) {
    const double r = (motion(c.source) - c.target).dot(c.target_normal);
    e += r * r;
  }
  return e;
}

/// Minimizes the point-to-plane error under a small-angle rotation model.
///
/// The rotation is linearized about the centroid of the source points as
/// I + [w]x, giving a 6x6 normal system in (w, t). A relative Tikhonov term
/// keeps rank-deficient geometry (e.g. coplanar normals) solvable; unconstrained
/// directions come out as zero. The linear rotation is projected onto SO(3).
/// The returned motion never has higher error than the identity.
inline PointToPlaneSolution solve_point_to_plane(std::span<const Correspondence> pairs,
                                                 std::size_t min_correspondences = 6) {
  if (pairs.size() < min_correspondences || pairs.empty()) {
    throw RegistrationError("insufficient correspondences");
  }
  Vector3 c = Vector3::Zero();
  for (const auto& pr : pairs) c += pr.source;
  c /= static_cast<double>(pairs.size());

  using Matrix6 = Eigen::Matrix<double, 6, 6>;
  using Vector6 = Eigen::Matrix<double, 6, 1>;
  Matrix6 h = Matrix6::Zero();
  Vector6 g = Vector6::Zero();
  for (const auto& pr : pairs) {
    const Vector3& n = pr.target_normal;
    Vector6 a;
    a.head<3>() = (pr.source - c).cross(n);
    a.tail<3>() = n;
    const double b = -(pr.source - pr.target).dot(n);
    h.noalias() += a * a.transpose();
    g.noalias() += a * b;
  }
  if (!h.allFinite() || !g.allFinite()) {
    throw RegistrationError("degenerate correspondence geometry");
  }

  PointToPlaneSolution sol;
  const Eigen::SelfAdjointEigenSolver<Matrix6> eig(h, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues()(5);
  const double lmin = eig.eigenvalues()(0);
  if (!(lmax > 0.0)) throw RegistrationError("degenerate correspondence geometry");
  sol.condition = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  sol.ill_conditioned = sol.condition > kIllConditioned;

  const Matrix6 damped = h + (kSolverDamping * lmax) * Matrix6::Identity();
  const Vector6 x = damped.ldlt().solve(g);
  if (!x.allFinite()) throw RegistrationError("degenerate correspondence geometry");

  const Vector3 w = x.head<3>();
  Matrix3 linear;
  linear << 1.0, -w.z(), w.y(),
            w.z(), 1.0, -w.x(),
            -w.y(), w.x(), 1.0;
  sol.motion.rotation = nearest_rotation(linear);
  sol.motion.translation = c + x.tail<3>() - sol.motion.rotation * c;

  const double before = point_to_plane_error(RigidMotion::identity(), pairs);
  const double after = point_to_plane_error(sol.motion, pairs);
  if (!(after <= before + 1e-12)) {
    sol.motion = RigidMotion::identity();
    sol.fell_back = true;
  }
  return sol;
}

/// Similarity-transform ICP.
///
/// The source is scaled once by horn_scale and its centroid moved onto the
/// destination centroid. Each iteration then draws a fresh random sample of
/// source points, matches them to their nearest destination points, drops pairs
/// longer than outlier_k times the median pair length, and applies the
/// point-to-plane rigid motion to the whole working cloud.
///
/// Destination normals are taken from the cloud when present and estimated
/// otherwise; source normals are not used.
inline IcpResult align(const PointCloud& source, const PointCloud& destination,
                       const KdTree& destination_index, const IcpParams& params) {
  params.validate();
  if (source.empty() || destination.empty()) throw GeometryError("empty cloud");
  if (!destination.has_normals()) {
    throw RegistrationError("destination cloud has no normals");
  }

  const double scale = horn_scale(source, destination);
  const Point3 cs = centroid(source);
  const Point3 cd = centroid(destination);

  IcpResult result;
  result.transform.scale = scale;
  result.transform.motion.translation = cd - scale * cs;

  std::vector<Point3> working;
  working.reserve(source.size());
  for (const auto& p : source.points()) working.push_back(result.transform(p));

  Xoshiro256 rng(params.rng_seed);
  CorrespondenceSet pairs;
  std::vector<double> lengths;
  double previous = std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < params.iterations; ++iter) {
    const auto sample = sample_without_replacement(working.size(), params.sample_size, rng);
    pairs.clear();
    lengths.clear();
    for (const std::size_t i : sample) {
      const Neighbor nb = destination_index.nearest(working[i]);
      pairs.push_back({working[i], destination.point(nb.index),
                       destination.normal(nb.index), nb.distance});
      lengths.push_back(nb.distance);
    }

    const double m = median_inplace(lengths);
    if (m > 0.0) {
      const double limit = params.outlier_k * m;
      std::erase_if(pairs, [limit](const Correspondence& c) { return c.distance > limit; });
    }
    if (pairs.size() < params.min_correspondences) {
      throw RegistrationError("insufficient correspondences");
    }

    const PointToPlaneSolution sol = solve_point_to_plane(pairs, params.min_correspondences);
    if (sol.ill_conditioned) ++result.ill_conditioned_iterations;
    if (sol.fell_back) ++result.fallback_iterations;

    for (auto& p : working) p = sol.motion(p);
    result.transform = compose(SimilarityTransform::from_rigid(sol.motion), result.transform);

    const double err = point_to_plane_error(sol.motion, pairs);
    result.per_iteration_error.push_back(err);
    result.correspondences_used.push_back(pairs.size());

    if (params.early_exit_tolerance > 0.0 && std::isfinite(previous) &&
        std::abs(previous - err) <= params.early_exit_tolerance * previous) {
      break;
    }
    previous = err;
  }
  result.final_error = result.per_iteration_error.back();

  std::vector<Vector3> normals;
  if (source.has_normals()) {
    normals.reserve(source.size());
    for (const auto& n : source.normals()) normals.push_back(result.transform.rotation() * n);
  }
  result.aligned = PointCloud(std::move(working), std::move(normals));
  return result;
}

/// Convenience overload: builds the destination index and estimates
/// destination normals when the cloud carries none.
inline IcpResult align(const PointCloud& source, const PointCloud& destination,
                       const IcpParams& params = {}) {
  if (destination.empty()) throw GeometryError("empty cloud");
  const KdTree index(destination);
  if (destination.has_normals()) return align(source, destination, index, params);
  const PointCloud oriented = estimate_normals(destination, params.normal_neighborhood, index);
  return align(source, oriented, index, params);
}

}  // namespace cloudmatch
