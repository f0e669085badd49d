#include "cloudmatch/eval.hpp"
#include "cloudmatch/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

namespace cloudmatch {
namespace {

ScoreMatrix make_matrix(std::size_t rows, std::size_t cols, std::vector<double> scores) {
  ScoreMatrix m;
  for (std::size_t i = 0; i < rows; ++i) m.probes.push_back("p" + std::to_string(i));
  for (std::size_t j = 0; j < cols; ++j) m.gallery.push_back("g" + std::to_string(j));
  m.scores = std::move(scores);
  return m;
}

TEST(Verification, SeparatedScores) {
  // Row 0 is identity g0, row 1 is g1.
  const auto m = make_matrix(2, 2, {0.1, 0.3, 0.4, 0.2});
  const GroundTruth truth{{"p0", "g0"}, {"p1", "g1"}};
  const auto r = verification_report(m, truth, {0.0, 0.25, 0.5});
  EXPECT_EQ(r.far, (std::vector<double>{0.0, 0.0, 1.0}));
  EXPECT_EQ(r.frr, (std::vector<double>{1.0, 0.0, 0.0}));
  EXPECT_EQ(r.eer, 0.0);
  EXPECT_EQ(r.eer_threshold, 0.25);
}

TEST(Verification, BoundaryIsAccepted) {
  const auto m = make_matrix(1, 2, {0.2, 0.2});
  const GroundTruth truth{{"p0", "g0"}};
  const auto r = verification_report(m, truth, {0.2});
  EXPECT_EQ(r.far[0], 1.0);
  EXPECT_EQ(r.frr[0], 0.0);
}

TEST(Verification, InterpolatedEer) {
  // Genuine {0.1, 0.3}, impostor {0.2, 0.4}.
  const auto m = make_matrix(2, 2, {0.1, 0.2, 0.4, 0.3});
  const GroundTruth truth{{"p0", "g0"}, {"p1", "g1"}};
  const auto r = verification_report(m, truth, {0.0, 0.15, 0.25, 0.35});
  // FAR 0, 0, .5, .5; FRR 1, .5, .5, 0. First crossing at index 2 (equal).
  EXPECT_EQ(r.eer, 0.5);
  EXPECT_EQ(r.eer_threshold, 0.25);

  const auto r2 = verification_report(m, truth, {0.0, 0.15, 0.35});
  // d = -1, -.5, +.5 -> crossing halfway between 0.15 and 0.35.
  EXPECT_DOUBLE_EQ(r2.eer_threshold, 0.25);
  EXPECT_DOUBLE_EQ(r2.eer, 0.25);
}

TEST(Verification, Errors) {
  const auto m = make_matrix(1, 1, {0.1});
  EXPECT_THROW(verification_report(m, {{"p0", "g0"}}, {0.0, 1.0}), EvaluationError);
  const auto m2 = make_matrix(1, 2, {0.1, 0.2});
  EXPECT_THROW(verification_report(m2, {{"p0", "g0"}}, {1.0, 0.0}), EvaluationError);
  EXPECT_THROW(verification_report(m2, {{"p0", "g9"}}, {0.0}), EvaluationError);
  EXPECT_THROW(verification_report(m2, {}, {0.0}), EvaluationError);
  EXPECT_THROW(threshold_sweep(1.0, 0.0, 5), std::invalid_argument);
  EXPECT_THROW(threshold_sweep(0.0, 1.0, 0), std::invalid_argument);
}

TEST(Verification, MatchesRecountOnRandomMatrices) {
  Xoshiro256 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng.below(50), cols = 2 + rng.below(49);
    std::vector<double> s(rows * cols);
    // Coarse values so that ties occur.
    for (auto& v : s) v = static_cast<double>(rng.below(20)) / 10.0;
    const auto m = make_matrix(rows, cols, s);
    GroundTruth truth;
    std::vector<std::size_t> col(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      col[i] = rng.below(cols);
      truth["p" + std::to_string(i)] = "g" + std::to_string(col[i]);
    }
    const auto sweep = threshold_sweep(0.0, 2.0, 41);
    const auto r = verification_report(m, truth, sweep);
    for (std::size_t t = 0; t < sweep.size(); ++t) {
      std::size_t fa = 0, fr = 0, ni = 0, ng = 0;
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
          const bool accept = m(i, j) <= sweep[t];
          if (j == col[i]) {
            ++ng;
            fr += !accept;
          } else {
            ++ni;
            fa += accept;
          }
        }
      }
      ASSERT_EQ(r.far[t], static_cast<double>(fa) / static_cast<double>(ni));
      ASSERT_EQ(r.frr[t], static_cast<double>(fr) / static_cast<double>(ng));
      if (t > 0) {
        ASSERT_GE(r.far[t], r.far[t - 1]);
        ASSERT_LE(r.frr[t], r.frr[t - 1]);
      }
    }
    EXPECT_GE(r.eer, 0.0);
    EXPECT_LE(r.eer, 1.0);
  }
}

TEST(Cmc, ThreeIdentityFixture) {
  const auto m = make_matrix(3, 3,
                             {0.1, 0.5, 0.6,    // p0 -> g0 rank 1
                              0.2, 0.3, 0.9,    // p1 -> g1 rank 2
                              0.7, 0.8, 0.4});  // p2 -> g2 rank 1
  const GroundTruth truth{{"p0", "g0"}, {"p1", "g1"}, {"p2", "g2"}};
  const auto c = cmc_curve(m, truth);
  ASSERT_EQ(c.rank_rates.size(), 3u);
  EXPECT_DOUBLE_EQ(c.rank_rates[0], 2.0 / 3.0);
  EXPECT_EQ(c.rank_rates[1], 1.0);
  EXPECT_EQ(c.rank_rates[2], 1.0);
}

TEST(Cmc, TiesBrokenByGalleryOrder) {
  const auto m = make_matrix(2, 2, {0.5, 0.5, 0.5, 0.5});
  const GroundTruth truth{{"p0", "g0"}, {"p1", "g1"}};
  EXPECT_EQ(true_match_ranks(m, truth), (std::vector<std::size_t>{1, 2}));
}

TEST(Cmc, MatchesSortOracle) {
  Xoshiro256 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 100;
    std::vector<double> s(n * n);
    for (auto& v : s) v = static_cast<double>(rng.below(10));
    const auto m = make_matrix(n, n, s);
    GroundTruth truth;
    std::vector<std::size_t> col(n);
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = rng.below(n);
      truth["p" + std::to_string(i)] = "g" + std::to_string(col[i]);
    }
    const auto ranks = true_match_ranks(m, truth);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return m(i, a) < m(i, b); });
      const auto pos = std::find(order.begin(), order.end(), col[i]) - order.begin();
      ASSERT_EQ(ranks[i], static_cast<std::size_t>(pos) + 1);
    }
    const auto c = cmc_curve(m, truth);
    for (std::size_t r = 1; r < n; ++r) ASSERT_GE(c.rank_rates[r], c.rank_rates[r - 1]);
    EXPECT_EQ(c.rank_rates.back(), 1.0);
  }
}

synth::Benchmark small_benchmark() {
  synth::BenchmarkTemplate t;
  t.point_count = 3000;
  return synth::build_benchmark(3, 2, t, 5);
}

TEST(ScoreAll, ThreadCountDoesNotChangeScores) {
  const auto b = small_benchmark();
  const auto one = score_all(b.probes, b.gallery, MatchOptions{}, 42, 1);
  const auto three = score_all(b.probes, b.gallery, MatchOptions{}, 42, 3);
  EXPECT_EQ(one.scores, three.scores);
  EXPECT_TRUE(one.failed.empty());
  EXPECT_EQ(one.rows(), 3u);
  EXPECT_EQ(one.cols(), 3u);
}

TEST(ScoreAll, SelfMatchScoresZero) {
  const auto b = small_benchmark();
  std::vector<Probe> probes;
  for (const auto& g : b.gallery) probes.push_back({g.identity(), g.model()});
  const auto m = score_all(probes, b.gallery, MatchOptions{}, 1, 1);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    EXPECT_NEAR(m(i, i), 0.0, 1e-6);
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j != i) {
        EXPECT_GT(m(i, j), m(i, i));
      }
    }
  }
}

TEST(ScoreAll, DuplicateIdentityRejected) {
  const auto b = small_benchmark();
  std::vector<GalleryEntry> gallery{b.gallery[0], b.gallery[0]};
  EXPECT_THROW(score_all(b.probes, gallery, MatchOptions{}, 1), EvaluationError);
}

TEST(ScoreAll, FailedCellGetsSentinel) {
  const auto b = small_benchmark();
  std::vector<Probe> probes{{"tiny", PointCloud({Point3(0, 0, 0), Point3(1, 0, 0)})}};
  const auto m = score_all(probes, b.gallery, MatchOptions{}, 1);
  EXPECT_EQ(m.failed.size(), m.cols());
  for (const double s : m.scores) EXPECT_EQ(s, kFailedMatchScore);
}

TEST(GalleryEntry, EstimatesMissingNormals) {
  const auto b = small_benchmark();
  const GalleryEntry e("x", b.gallery[0].model().without_normals());
  EXPECT_TRUE(e.model().has_normals());
  EXPECT_THROW(GalleryEntry("", b.gallery[0].model()), EvaluationError);
}

}  // namespace
}  // namespace cloudmatch
