#pragma once

#include "cloudmatch/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace cloudmatch {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

/// Exact nearest-neighbour index over a fixed snapshot of points.
///
/// Balanced k-d tree: each internal node splits its range at the median of the
/// axis with the widest spread. Leaves hold up to kLeafSize points. Queries are
/// exact and break distance ties by the lowest point index, so every answer
/// equals that of a linear scan. Immutable after construction; concurrent
/// queries are safe.
class KdTree {
 public:
  static constexpr std::size_t kLeafSize = 8;

  explicit KdTree(const PointCloud& cloud) : KdTree(cloud.points()) {}

  explicit KdTree(std::vector<Point3> points) : points_(std::move(points)) {
    if (points_.empty()) throw GeometryError("empty cloud");
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.reserve(2 * points_.size() / kLeafSize + 1);
    build(0, points_.size());
  }

  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<Point3>& points() const noexcept { return points_; }

  Neighbor nearest(const Point3& query) const {
    std::size_t visited = 0;
    return nearest(query, visited);
  }

  /// As above; `visited` receives the number of tree nodes touched.
  Neighbor nearest(const Point3& query, std::size_t& visited) const {
    Candidate best{std::numeric_limits<double>::infinity(),
                   std::numeric_limits<std::size_t>::max()};
    visited = 0;
    search_nearest(0, query, best, visited);
    return {best.index, std::sqrt(best.d2)};
  }

  /// The k closest points sorted by (distance, index).
  std::vector<Neighbor> k_nearest(const Point3& query, std::size_t k) const {
    if (k < 1 || k > points_.size()) throw std::out_of_range("k out of range");
    std::priority_queue<Candidate> heap;  // max-heap on (d2, index)
    search_k(0, query, k, heap);
    std::vector<Neighbor> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = {heap.top().index, std::sqrt(heap.top().d2)};
      heap.pop();
    }
    return out;
  }

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::uint32_t left = 0, right = 0;
    std::size_t begin = 0, end = 0;
  };

  struct Candidate {
    double d2;
    std::size_t index;
    bool operator<(const Candidate& o) const {
      return d2 < o.d2 || (d2 == o.d2 && index < o.index);
    }
  };

  std::uint32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({});
    Node node;
    node.begin = begin;
    node.end = end;
    if (end - begin <= kLeafSize) {
      nodes_[id] = node;
      return id;
    }

    Vector3 lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    const Vector3 spread = hi - lo;
    if (spread.y() > spread[axis]) axis = 1;
    if (spread.z() > spread[axis]) axis = 2;

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       const double ca = points_[a][axis], cb = points_[b][axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    node.axis = axis;
    node.split = points_[order_[mid]][axis];
    node.left = build(begin, mid);
    node.right = build(mid, end);
    nodes_[id] = node;
    return id;
  }

  void search_nearest(std::uint32_t id, const Point3& q, Candidate& best,
                      std::size_t& visited) const {
    const Node& node = nodes_[id];
    ++visited;
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const Candidate c{squared_distance(points_[order_[i]], q), order_[i]};
        if (c < best) best = c;
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::uint32_t near = diff < 0.0 ? node.left : node.right;
    const std::uint32_t far = diff < 0.0 ? node.right : node.left;
    search_nearest(near, q, best, visited);
    // Equal bound may still hide a lower index at the same distance.
    if (diff * diff <= best.d2) search_nearest(far, q, best, visited);
  }

  void search_k(std::uint32_t id, const Point3& q, std::size_t k,
                std::priority_queue<Candidate>& heap) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const Candidate c{squared_distance(points_[order_[i]], q), order_[i]};
        if (heap.size() < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::uint32_t near = diff < 0.0 ? node.left : node.right;
    const std::uint32_t far = diff < 0.0 ? node.right : node.left;
    search_k(near, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.top().d2) search_k(far, q, k, heap);
  }

  std::vector<Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

using NearestNeighborIndex = KdTree;

}  // namespace cloudmatch
