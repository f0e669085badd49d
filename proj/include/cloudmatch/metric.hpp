#pragma once

#include "cloudmatch/geometry.hpp"
#include "cloudmatch/kdtree.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <vector>

namespace cloudmatch {

inline constexpr double kDefaultOutlierK = 4.0;

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrimmedDistanceResult {
  double distance = 0.0;      // mean over retained points
  double median = 0.0;        // median point-to-cloud distance
  std::size_t outlier_count = 0;
  std::size_t retained_count = 0;
  std::optional<std::vector<double>> per_point_distances;
};

/// Euclidean distance from p to its closest indexed point.
inline double point_to_cloud_distance(const Point3& p, const KdTree& index) {
  return index.nearest(p).distance;
}

/// Median with the even-length convention: mean of the two middle values.
/// Reorders `values`.
inline double median_inplace(std::vector<double>& values) {
  if (values.empty()) throw MetricError("median of empty list");
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return (lower + upper) / 2.0;
}

/// Trimmed mean of distances: entries with value > k * median are dropped,
/// except when the median is zero, in which case nothing is dropped.
/// Sums retained values in index order.
inline TrimmedDistanceResult trim_distances(std::vector<double> distances, double k,
                                            bool keep_per_point = false) {
  if (distances.empty()) throw MetricError("empty cloud");
  if (!(k > 0.0)) throw std::invalid_argument("k must be positive");
  std::vector<double> scratch = distances;
  TrimmedDistanceResult r;
  r.median = median_inplace(scratch);
  const double threshold = k * r.median;
  const bool trim = r.median > 0.0;
  double sum = 0.0;
  for (const double d : distances) {
    if (trim && d > threshold) {
      ++r.outlier_count;
    } else {
      sum += d;
      ++r.retained_count;
    }
  }
  if (r.retained_count == 0) throw MetricError("all points trimmed");
  r.distance = sum / static_cast<double>(r.retained_count);
  if (keep_per_point) r.per_point_distances = std::move(distances);
  return r;
}

/// Directed trimmed distance from `source` to the indexed target cloud.
inline TrimmedDistanceResult trimmed_cloud_distance(const PointCloud& source,
                                                    const KdTree& target_index,
                                                    double k = kDefaultOutlierK,
                                                    bool keep_per_point = false) {
  if (source.empty()) throw MetricError("empty cloud");
  std::vector<double> distances(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    distances[i] = point_to_cloud_distance(source.point(i), target_index);
  }
  return trim_distances(std::move(distances), k, keep_per_point);
}

inline TrimmedDistanceResult trimmed_cloud_distance(const PointCloud& source,
                                                    const PointCloud& target,
                                                    double k = kDefaultOutlierK,
                                                    bool keep_per_point = false) {
  if (target.empty()) throw MetricError("empty cloud");
  return trimmed_cloud_distance(source, KdTree(target), k, keep_per_point);
}

/// Mean of both directed trimmed distances.
inline double symmetric_trimmed_distance(const PointCloud& a, const KdTree& a_index,
                                         const PointCloud& b, const KdTree& b_index,
                                         double k = kDefaultOutlierK) {
  const double ab = trimmed_cloud_distance(a, b_index, k).distance;
  const double ba = trimmed_cloud_distance(b, a_index, k).distance;
  return (ab + ba) / 2.0;
}

inline double symmetric_trimmed_distance(const PointCloud& a, const PointCloud& b,
                                         double k = kDefaultOutlierK) {
  if (a.empty() || b.empty()) throw MetricError("empty cloud");
  return symmetric_trimmed_distance(a, KdTree(a), b, KdTree(b), k);
}

}  // namespace cloudmatch
