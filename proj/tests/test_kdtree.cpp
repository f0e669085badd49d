#include "cloudmatch/kdtree.hpp"
#include "cloudmatch/random.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cloudmatch {
namespace {

// Linear-scan oracle: lexicographic (squared distance, index).
struct ScanHit {
  std::size_t index;
  double d2;
};

ScanHit scan_nearest(const std::vector<Point3>& pts, const Point3& q) {
  ScanHit best{0, squared_distance(pts[0], q)};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d2 = squared_distance(pts[i], q);
    if (d2 < best.d2) best = {i, d2};
  }
  return best;
}

std::vector<ScanHit> scan_k(const std::vector<Point3>& pts, const Point3& q, std::size_t k) {
  std::vector<ScanHit> all;
  for (std::size_t i = 0; i < pts.size(); ++i) all.push_back({i, squared_distance(pts[i], q)});
  std::stable_sort(all.begin(), all.end(),
                   [](const ScanHit& a, const ScanHit& b) { return a.d2 < b.d2; });
  all.resize(k);
  return all;
}

std::vector<Point3> random_points(Xoshiro256& rng, std::size_t n, double extent = 1.0) {
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < n; ++i) {
    pts.emplace_back(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                     rng.uniform(-extent, extent));
  }
  return pts;
}

TEST(KdTree, EmptyCloudThrows) {
  EXPECT_THROW(KdTree{PointCloud()}, GeometryError);
}

TEST(KdTree, SinglePoint) {
  const KdTree tree(PointCloud({Point3(1, 2, 3)}));
  Xoshiro256 rng(1);
  for (const auto& q : random_points(rng, 20, 10.0)) {
    const Neighbor nb = tree.nearest(q);
    EXPECT_EQ(nb.index, 0u);
    EXPECT_DOUBLE_EQ(nb.distance, std::sqrt(squared_distance(q, Point3(1, 2, 3))));
  }
}

TEST(KdTree, TwoPointExamples) {
  const KdTree tree(PointCloud({Point3(0, 0, 0), Point3(2, 0, 0)}));
  Neighbor nb = tree.nearest(Point3(0.9, 0, 0));
  EXPECT_EQ(nb.index, 0u);
  EXPECT_DOUBLE_EQ(nb.distance, 0.9);
  nb = tree.nearest(Point3(1, 0, 0));
  EXPECT_EQ(nb.index, 0u);
  EXPECT_DOUBLE_EQ(nb.distance, 1.0);
  nb = tree.nearest(Point3(2, 0, 0));
  EXPECT_EQ(nb.index, 1u);
  EXPECT_EQ(nb.distance, 0.0);
}

TEST(KdTree, DuplicatesReturnLowestIndex) {
  std::vector<Point3> pts(40, Point3(0.5, 0.5, 0.5));
  pts[0] = Point3(9, 9, 9);
  const KdTree tree(pts);
  EXPECT_EQ(tree.nearest(Point3(0.5, 0.5, 0.5)).index, 1u);
  const auto k = tree.k_nearest(Point3(0.5, 0.5, 0.6), 5);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(k[i].index, i + 1);
}

TEST(KdTree, MatchesLinearScan) {
  Xoshiro256 rng(2);
  const auto pts = random_points(rng, 1000);
  const KdTree tree(pts);
  for (const auto& q : random_points(rng, 500, 1.3)) {
    const auto nb = tree.nearest(q);
    const auto oracle = scan_nearest(pts, q);
    ASSERT_EQ(nb.index, oracle.index);
    ASSERT_EQ(nb.distance, std::sqrt(oracle.d2));
  }
}

// Quantized coordinates produce many exact distance ties.
TEST(KdTree, MatchesLinearScanWithTies) {
  Xoshiro256 rng(3);
  std::vector<Point3> pts;
  for (int i = 0; i < 300; ++i) {
    pts.emplace_back(static_cast<double>(rng.below(5)), static_cast<double>(rng.below(5)),
                     static_cast<double>(rng.below(5)));
  }
  const KdTree tree(pts);
  for (int i = 0; i < 300; ++i) {
    const Point3 q(static_cast<double>(rng.below(9)) / 2, static_cast<double>(rng.below(9)) / 2,
                   static_cast<double>(rng.below(9)) / 2);
    ASSERT_EQ(tree.nearest(q).index, scan_nearest(pts, q).index);
    const auto k = tree.k_nearest(q, 7);
    const auto oracle = scan_k(pts, q, 7);
    for (std::size_t j = 0; j < 7; ++j) {
      ASSERT_EQ(k[j].index, oracle[j].index);
      ASSERT_EQ(k[j].distance, std::sqrt(oracle[j].d2));
    }
  }
}

TEST(KdTree, KNearestExamples) {
  Xoshiro256 rng(4);
  const auto pts = random_points(rng, 200);
  const KdTree tree(pts);
  const Point3 q(0.1, -0.2, 0.3);
  const auto five = tree.k_nearest(q, 5);
  const auto oracle = scan_k(pts, q, 5);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(five[j].index, oracle[j].index);

  const auto one = tree.k_nearest(q, 1);
  EXPECT_EQ(one[0].index, tree.nearest(q).index);

  const auto all = tree.k_nearest(q, pts.size());
  ASSERT_EQ(all.size(), pts.size());
  EXPECT_TRUE(std::is_sorted(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance;
  }));

  EXPECT_THROW(tree.k_nearest(q, 0), std::out_of_range);
  EXPECT_THROW(tree.k_nearest(q, pts.size() + 1), std::out_of_range);
}

TEST(KdTree, RandomSizesMatchScan) {
  Xoshiro256 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(500);
    const auto pts = random_points(rng, n);
    const KdTree tree(pts);
    const Point3 q(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    ASSERT_EQ(tree.nearest(q).index, scan_nearest(pts, q).index);
    const std::size_t k = 1 + rng.below(std::min<std::uint64_t>(n, 10));
    const auto got = tree.k_nearest(q, k);
    const auto oracle = scan_k(pts, q, k);
    for (std::size_t j = 0; j < k; ++j) ASSERT_EQ(got[j].index, oracle[j].index);
  }
}

TEST(KdTree, PermutationChangesOnlyIndices) {
  Xoshiro256 rng(6);
  const auto pts = random_points(rng, 400);
  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<Point3> shuffled(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) shuffled[i] = pts[perm[i]];

  const KdTree a(pts), b(shuffled);
  for (const auto& q : random_points(rng, 200)) {
    const auto na = a.nearest(q), nb = b.nearest(q);
    EXPECT_EQ(na.distance, nb.distance);
    EXPECT_EQ(na.index, perm[nb.index]);
  }
}

TEST(KdTree, VisitsSublinearNodes) {
  Xoshiro256 rng(7);
  const std::size_t n = 10000;
  const KdTree tree(random_points(rng, n));
  std::size_t total = 0;
  const int queries = 1000;
  for (const auto& q : random_points(rng, queries)) {
    std::size_t visited = 0;
    tree.nearest(q, visited);
    total += visited;
  }
  EXPECT_LT(static_cast<double>(total) / queries, static_cast<double>(n) / 2);
}

}  // namespace
}  // namespace cloudmatch
