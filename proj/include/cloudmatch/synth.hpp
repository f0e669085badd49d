#pragma once

#include "cloudmatch/eval.hpp"
#include "cloudmatch/geometry.hpp"
#include "cloudmatch/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace cloudmatch::synth {

/// A smooth radial displacement on the unit sphere of directions:
/// amplitude * exp(-|u - direction|^2 / (2 width^2)).
struct Bump {
  Vector3 direction;
  double amplitude;
  double width;
};

/// Star-shaped head surface r(u) = ellipsoid(u) + sum of bumps(u), with the
/// face looking along +z and +y up.
struct ShapeParams {
  Vector3 semi_axes{0.8, 1.0, 0.92};
  std::vector<Bump> bumps;
  // Sampled directions lie within this angle of +z (180 covers the whole head).
  double coverage_deg = 180.0;
};

/// Face features shared by all identities before per-identity perturbation.
inline std::vector<Bump> base_features() {
  return {
      {Vector3(0.0, -0.05, 1.0).normalized(), 0.30, 0.12},    // nose
      {Vector3(0.0, -0.32, 1.0).normalized(), 0.08, 0.10},    // upper lip
      {Vector3(-0.32, 0.32, 0.9).normalized(), 0.08, 0.14},   // brow
      {Vector3(0.32, 0.32, 0.9).normalized(), 0.08, 0.14},    // brow
      {Vector3(-0.30, 0.15, 0.95).normalized(), -0.08, 0.10}, // eye socket
      {Vector3(0.30, 0.15, 0.95).normalized(), -0.08, 0.10},  // eye socket
      {Vector3(-0.50, -0.20, 0.85).normalized(), 0.08, 0.20}, // cheek
      {Vector3(0.50, -0.20, 0.85).normalized(), 0.08, 0.20},  // cheek
      {Vector3(0.0, -0.65, 0.75).normalized(), 0.12, 0.15},   // chin
      {Vector3(-1.0, 0.05, 0.0), 0.10, 0.15},                 // ear
      {Vector3(1.0, 0.05, 0.0), 0.10, 0.15},                  // ear
  };
}

struct SyntheticIdentity {
  std::uint64_t seed = 0;
  ShapeParams shape;

  /// Identity whose shape is drawn deterministically from `seed`.
  static SyntheticIdentity from_seed(std::uint64_t seed) {
    Xoshiro256 rng(derive_seed(seed, 0x5eed, 0));
    SyntheticIdentity id;
    id.seed = seed;
    for (int a = 0; a < 3; ++a) id.shape.semi_axes[a] *= rng.uniform(0.85, 1.15);
    for (Bump b : base_features()) {
      b.amplitude *= rng.uniform(0.5, 1.5);
      b.width *= rng.uniform(0.85, 1.15);
      const Vector3 jitter(rng.uniform(-0.06, 0.06), rng.uniform(-0.06, 0.06),
                           rng.uniform(-0.06, 0.06));
      b.direction = (b.direction + jitter).normalized();
      id.shape.bumps.push_back(b);
    }
    return id;
  }
};

/// Radius along unit direction u and its gradient with respect to u (as a
/// function on R^3).
inline double surface_radius(const ShapeParams& s, const Vector3& u, Vector3* gradient) {
  const Vector3 inv_sq = s.semi_axes.cwiseProduct(s.semi_axes).cwiseInverse();
  const double q = u.cwiseProduct(u).dot(inv_sq);
  const double r_ellipsoid = 1.0 / std::sqrt(q);
  double r = r_ellipsoid;
  Vector3 grad = -(r_ellipsoid * r_ellipsoid * r_ellipsoid) * u.cwiseProduct(inv_sq);
  for (const auto& b : s.bumps) {
    const Vector3 d = u - b.direction;
    const double e = b.amplitude * std::exp(-d.squaredNorm() / (2.0 * b.width * b.width));
    r += e;
    grad += -e / (b.width * b.width) * d;
  }
  if (gradient != nullptr) *gradient = grad;
  return r;
}

/// Surface point along u with its analytic outward unit normal.
inline std::pair<Point3, Vector3> surface_point(const ShapeParams& s, const Vector3& u) {
  Vector3 grad;
  const double r = surface_radius(s, u, &grad);
  // Level set |x| - r(x/|x|) = 0; the tangential part of grad scales by 1/|x|.
  const Vector3 tangential = grad - u * u.dot(grad);
  const Vector3 n = (u - tangential / r).normalized();
  return {r * u, n};
}

/// `point_count` surface samples at directions uniform on the sphere, drawn
/// from `sampling_seed`, with analytic normals.
inline PointCloud sample_surface(const SyntheticIdentity& id, std::size_t point_count,
                                 std::uint64_t sampling_seed) {
  Xoshiro256 rng(sampling_seed);
  const double z_min = std::cos(id.shape.coverage_deg * std::numbers::pi / 180.0);
  std::vector<Point3> pts;
  std::vector<Vector3> nrm;
  pts.reserve(point_count);
  nrm.reserve(point_count);
  for (std::size_t i = 0; i < point_count; ++i) {
    const double z = rng.uniform(z_min, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vector3 u(rho * std::cos(phi), rho * std::sin(phi), z);
    const auto [p, n] = surface_point(id.shape, u);
    pts.push_back(p);
    nrm.push_back(n);
  }
  return PointCloud(std::move(pts), std::move(nrm));
}

inline PointCloud generate_identity_cloud(const SyntheticIdentity& id,
                                          std::size_t point_count) {
  if (point_count < 100) throw std::invalid_argument("point_count must be >= 100");
  return sample_surface(id, point_count, id.seed);
}

struct CaptureParams {
  std::size_t point_count = 20000;
  double noise_sigma = 0.0;    // fraction of the clean cloud's bounding diameter
  double crop_fraction = 0.0;  // in [0, 1)
  SimilarityTransform true_transform;
  std::uint64_t capture_seed = 0;

  void validate() const {
    if (point_count == 0) throw std::invalid_argument("point_count must be positive");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");
    if (!(crop_fraction >= 0.0 && crop_fraction < 1.0)) {
      throw std::invalid_argument("crop_fraction must be in [0, 1)");
    }
    cloudmatch::validate(true_transform);
  }
};

struct Capture {
  PointCloud cloud;
  SimilarityTransform true_transform;  // model frame -> captured frame
};

/// Simulates one reconstruction: resample the surface, remove the points on
/// one side of a random plane (crop_fraction of them), add isotropic Gaussian
/// noise in the model frame, then map by true_transform.
inline Capture capture(const SyntheticIdentity& id, const CaptureParams& params) {
  params.validate();
  const PointCloud clean = sample_surface(id, params.point_count, params.capture_seed);
  Xoshiro256 rng(derive_seed(params.capture_seed, 0xc409, 1));

  std::vector<std::size_t> keep(clean.size());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
  if (params.crop_fraction > 0.0) {
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vector3 dir(rho * std::cos(phi), rho * std::sin(phi), z);
    const auto removed = static_cast<std::size_t>(
        std::llround(params.crop_fraction * static_cast<double>(clean.size())));
    if (removed >= clean.size()) throw GeometryError("empty capture");
    std::vector<std::pair<double, std::size_t>> proj;
    proj.reserve(clean.size());
    for (std::size_t i = 0; i < clean.size(); ++i) proj.emplace_back(dir.dot(clean.point(i)), i);
    std::sort(proj.begin(), proj.end());
    keep.clear();
    for (std::size_t i = 0; i < clean.size() - removed; ++i) keep.push_back(proj[i].second);
    std::sort(keep.begin(), keep.end());
  }
  if (keep.empty()) throw GeometryError("empty capture");

  const double sigma = params.noise_sigma * bounding_diameter(clean);
  std::vector<Point3> pts;
  std::vector<Vector3> nrm;
  pts.reserve(keep.size());
  nrm.reserve(keep.size());
  for (const std::size_t i : keep) {
    Point3 p = clean.point(i);
    if (sigma > 0.0) {
      const double nx = rng.normal(), ny = rng.normal(), nz = rng.normal();
      p += sigma * Vector3(nx, ny, nz);
    }
    pts.push_back(p);
    nrm.push_back(clean.normal(i));
  }
  return {apply_transform(params.true_transform, PointCloud(std::move(pts), std::move(nrm))),
          params.true_transform};
}

/// Random pose applied to each capture of a benchmark.
struct PoseRange {
  double min_scale = 0.7;
  double max_scale = 1.4;
  double max_rotation_deg = 30.0;
  double max_translation = 0.5;
};

inline SimilarityTransform random_similarity(const PoseRange& range, Xoshiro256& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  const Vector3 axis(rho * std::cos(phi), rho * std::sin(phi), z);
  const double angle = rng.uniform(0.0, range.max_rotation_deg) * std::numbers::pi / 180.0;
  SimilarityTransform t;
  t.scale = rng.uniform(range.min_scale, range.max_scale);
  t.motion.rotation = axis_angle_rotation(axis, angle);
  for (int a = 0; a < 3; ++a) {
    t.motion.translation[a] = rng.uniform(-range.max_translation, range.max_translation);
  }
  return t;
}

/// Captures within a benchmark are posed independently, so the relative
/// rotation between a probe and its gallery model is up to the sum of both
/// max_rotation_deg values. Scores are distances in gallery units, so gallery
/// models share one scale and only probes carry an unknown scale.
struct BenchmarkTemplate {
  std::size_t point_count = 20000;
  double noise_sigma = 0.001;
  double crop_fraction = 0.05;
  PoseRange gallery_pose{1.0, 1.0, 15.0, 0.5};
  PoseRange probe_pose{0.7, 1.4, 15.0, 0.5};
};

struct Benchmark {
  std::vector<SyntheticIdentity> identities;
  std::vector<std::string> identity_labels;
  std::vector<GalleryEntry> gallery;
  std::vector<Probe> probes;
  GroundTruth truth;
};

inline std::string identity_label(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "id%03zu", i);
  return buf;
}

inline std::string probe_label(std::size_t identity, std::size_t capture_index) {
  return identity_label(identity) + "_c" + std::to_string(capture_index);
}

/// Per identity: capture 0 is enrolled in the gallery, captures
/// 1..captures_per_identity-1 become probes. Everything is a deterministic
/// function of master_seed and the template.
inline Benchmark build_benchmark(std::size_t identities, std::size_t captures_per_identity,
                                 const BenchmarkTemplate& tmpl, std::uint64_t master_seed) {
  if (identities < 2) throw std::invalid_argument("identities must be >= 2");
  if (captures_per_identity < 2) {
    throw std::invalid_argument("captures_per_identity must be >= 2");
  }
  Benchmark b;
  for (std::size_t i = 0; i < identities; ++i) {
    const auto id = SyntheticIdentity::from_seed(derive_seed(master_seed, i, 0xffff));
    const std::string label = identity_label(i);
    for (std::size_t c = 0; c < captures_per_identity; ++c) {
      Xoshiro256 pose_rng(derive_seed(master_seed, i, 0x10000 + c));
      CaptureParams cp;
      cp.point_count = tmpl.point_count;
      cp.noise_sigma = tmpl.noise_sigma;
      cp.crop_fraction = tmpl.crop_fraction;
      cp.true_transform = random_similarity(c == 0 ? tmpl.gallery_pose : tmpl.probe_pose, pose_rng);
      cp.capture_seed = derive_seed(master_seed, i, c + 1);
      Capture cap = capture(id, cp);
      if (c == 0) {
        b.gallery.emplace_back(label, std::move(cap.cloud));
      } else {
        const std::string plabel = probe_label(i, c);
        b.probes.push_back({plabel, std::move(cap.cloud)});
        b.truth.emplace(plabel, label);
      }
    }
    b.identities.push_back(id);
    b.identity_labels.push_back(label);
  }
  return b;
}

}  // namespace cloudmatch::synth
