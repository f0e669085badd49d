#pragma once

#include "cloudmatch/geometry.hpp"
#include "cloudmatch/kdtree.hpp"
#include "cloudmatch/metric.hpp"
#include "cloudmatch/normals.hpp"
#include "cloudmatch/random.hpp"
#include "cloudmatch/registration.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cloudmatch {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Score assigned to a probe/gallery pair whose matching failed.
inline constexpr double kFailedMatchScore = std::numeric_limits<double>::max();

/// An enrolled model with its prebuilt nearest-neighbour index. Normals are
/// estimated at enrolment when the model carries none.
class GalleryEntry {
 public:
  GalleryEntry(std::string identity, PointCloud model,
               std::size_t normal_neighborhood = kDefaultNormalNeighborhood)
      : identity_(std::move(identity)) {
    if (identity_.empty()) throw EvaluationError("gallery identity must be non-empty");
    if (model.empty()) throw GeometryError("empty cloud");
    index_ = std::make_shared<const KdTree>(model);
    model_ = model.has_normals() ? std::move(model)
                                 : estimate_normals(model, normal_neighborhood, *index_);
  }

  const std::string& identity() const noexcept { return identity_; }
  const PointCloud& model() const noexcept { return model_; }
  const KdTree& index() const noexcept { return *index_; }

 private:
  std::string identity_;
  PointCloud model_;
  std::shared_ptr<const KdTree> index_;
};

struct Probe {
  std::string label;
  PointCloud cloud;
};

/// probe label -> true identity
using GroundTruth = std::map<std::string, std::string>;

enum class ScoreDirection { kProbeToGallery, kGalleryToProbe, kSymmetric };

struct MatchOptions {
  IcpParams icp;
  double k = kDefaultOutlierK;
  ScoreDirection direction = ScoreDirection::kProbeToGallery;
};

/// Aligns the probe onto the gallery model and returns the trimmed distance
/// (lower means more similar). Throws on alignment or metric failure.
inline double match_probe(const PointCloud& probe, const GalleryEntry& entry,
                          const MatchOptions& options) {
  if (probe.empty()) throw GeometryError("empty cloud");
  const IcpResult aligned = align(probe, entry.model(), entry.index(), options.icp);
  switch (options.direction) {
    case ScoreDirection::kProbeToGallery:
      return trimmed_cloud_distance(aligned.aligned, entry.index(), options.k).distance;
    case ScoreDirection::kGalleryToProbe:
      return trimmed_cloud_distance(entry.model(), KdTree(aligned.aligned), options.k)
          .distance;
    case ScoreDirection::kSymmetric:
      return symmetric_trimmed_distance(aligned.aligned, KdTree(aligned.aligned),
                                        entry.model(), entry.index(), options.k);
  }
  throw std::logic_error("unknown score direction");
}

/// Dense probe x gallery score matrix, row-major.
struct ScoreMatrix {
  std::vector<std::string> probes;   // probe labels
  std::vector<std::string> gallery;  // gallery identities
  std::vector<double> scores;
  std::vector<std::pair<std::size_t, std::size_t>> failed;  // cells scored kFailedMatchScore

  std::size_t rows() const noexcept { return probes.size(); }
  std::size_t cols() const noexcept { return gallery.size(); }
  double operator()(std::size_t i, std::size_t j) const { return scores[i * cols() + j]; }
  double& operator()(std::size_t i, std::size_t j) { return scores[i * cols() + j]; }

  void validate() const {
    if (scores.size() != rows() * cols()) {
      throw EvaluationError("score matrix dimensions do not match labels");
    }
    for (const double s : scores) {
      if (!std::isfinite(s) || s < 0.0) {
        throw EvaluationError("score matrix entries must be finite and non-negative");
      }
    }
  }
};

/// Scores every probe against every gallery entry. The ICP seed of cell
/// (i, j) is derive_seed(base_seed, i, j), so the matrix does not depend on
/// `threads`. A failed cell gets kFailedMatchScore and is listed in `failed`.
inline ScoreMatrix score_all(const std::vector<Probe>& probes,
                             const std::vector<GalleryEntry>& gallery,
                             const MatchOptions& options, std::uint64_t base_seed,
                             unsigned threads = 1) {
  if (probes.empty() || gallery.empty()) {
    throw EvaluationError("score_all: probes and gallery must be non-empty");
  }
  std::set<std::string> seen;
  for (const auto& g : gallery) {
    if (!seen.insert(g.identity()).second) {
      throw EvaluationError("duplicate gallery identity: " + g.identity());
    }
  }

  ScoreMatrix m;
  for (const auto& p : probes) m.probes.push_back(p.label);
  for (const auto& g : gallery) m.gallery.push_back(g.identity());
  const std::size_t cells = probes.size() * gallery.size();
  m.scores.assign(cells, 0.0);
  std::vector<char> failed(cells, 0);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < cells; c = next++) {
      const std::size_t i = c / gallery.size(), j = c % gallery.size();
      MatchOptions cell = options;
      cell.icp.rng_seed = derive_seed(base_seed, i, j);
      try {
        m.scores[c] = match_probe(probes[i].cloud, gallery[j], cell);
      } catch (const std::exception&) {
        m.scores[c] = kFailedMatchScore;
        failed[c] = 1;
      }
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (std::size_t c = 0; c < cells; ++c) {
    if (failed[c]) m.failed.emplace_back(c / gallery.size(), c % gallery.size());
  }
  return m;
}

struct VerificationReport {
  std::vector<double> thresholds;
  std::vector<double> far;
  std::vector<double> frr;
  double eer = 0.0;
  double eer_threshold = 0.0;
};

/// `count` evenly spaced thresholds from lo to hi inclusive.
inline std::vector<double> threshold_sweep(double lo, double hi, std::size_t count) {
  if (count == 0) throw std::invalid_argument("sweep count must be positive");
  if (!(hi >= lo)) throw std::invalid_argument("sweep max must be >= min");
  std::vector<double> t(count);
  if (count == 1) {
    t[0] = lo;
    return t;
  }
  for (std::size_t i = 0; i < count; ++i) {
    t[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  t.back() = hi;
  return t;
}

namespace detail {

/// Gallery column of each probe's true identity.
inline std::vector<std::size_t> truth_columns(const ScoreMatrix& scores,
                                              const GroundTruth& truth) {
  std::map<std::string, std::size_t> column;
  for (std::size_t j = 0; j < scores.cols(); ++j) column.emplace(scores.gallery[j], j);
  std::vector<std::size_t> out;
  out.reserve(scores.rows());
  for (const auto& label : scores.probes) {
    const auto t = truth.find(label);
    if (t == truth.end()) throw EvaluationError("no ground truth for probe: " + label);
    const auto c = column.find(t->second);
    if (c == column.end()) {
      throw EvaluationError("probe identity not enrolled (closed set required): " +
                            t->second);
    }
    out.push_back(c->second);
  }
  return out;
}

}  // namespace detail

/// FAR/FRR over an ascending threshold sweep. A pair is accepted when
/// score <= threshold. Every probe x gallery pair counts as one attempt: FAR
/// is taken over impostor pairs and FRR over genuine pairs.
///
/// The EER is read at the first crossing of FAR - FRR through zero, linearly
/// interpolated between the two bracketing sweep points. Without a crossing it
/// is the mean of FAR and FRR at the sweep point where |FAR - FRR| is smallest.
inline VerificationReport verification_report(const ScoreMatrix& scores,
                                              const GroundTruth& truth,
                                              const std::vector<double>& thresholds) {
  scores.validate();
  if (thresholds.empty()) throw EvaluationError("threshold sweep is empty");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw EvaluationError("thresholds must be ascending");
  }
  const auto genuine_col = detail::truth_columns(scores, truth);

  std::vector<double> genuine, impostor;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      (j == genuine_col[i] ? genuine : impostor).push_back(scores(i, j));
    }
  }
  if (genuine.empty() || impostor.empty()) throw EvaluationError("degenerate ground truth");
  std::sort(genuine.begin(), genuine.end());
  std::sort(impostor.begin(), impostor.end());

  VerificationReport r;
  r.thresholds = thresholds;
  for (const double theta : thresholds) {
    const auto accepted_impostors = static_cast<double>(
        std::upper_bound(impostor.begin(), impostor.end(), theta) - impostor.begin());
    const auto accepted_genuine = static_cast<double>(
        std::upper_bound(genuine.begin(), genuine.end(), theta) - genuine.begin());
    const auto n_imp = static_cast<double>(impostor.size());
    const auto n_gen = static_cast<double>(genuine.size());
    r.far.push_back(accepted_impostors / n_imp);
    r.frr.push_back((n_gen - accepted_genuine) / n_gen);
  }

  const std::size_t n = thresholds.size();
  std::size_t cross = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (r.far[i] - r.frr[i] >= 0.0) {
      cross = i;
      break;
    }
  }
  if (cross < n && cross > 0 && r.far[cross] != r.frr[cross]) {
    const double d0 = r.far[cross - 1] - r.frr[cross - 1];
    const double d1 = r.far[cross] - r.frr[cross];
    const double t = -d0 / (d1 - d0);
    r.eer_threshold = thresholds[cross - 1] + t * (thresholds[cross] - thresholds[cross - 1]);
    r.eer = r.far[cross - 1] + t * (r.far[cross] - r.far[cross - 1]);
  } else if (cross < n && r.far[cross] == r.frr[cross]) {
    r.eer_threshold = thresholds[cross];
    r.eer = r.far[cross];
  } else {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (std::abs(r.far[i] - r.frr[i]) < std::abs(r.far[best] - r.frr[best])) best = i;
    }
    r.eer_threshold = thresholds[best];
    r.eer = (r.far[best] + r.frr[best]) / 2.0;
  }
  return r;
}

struct CmcCurve {
  std::vector<double> rank_rates;  // entry n-1 is the rate at rank n
};

/// 1-based rank of the true identity in each probe row. Gallery entries are
/// ordered by ascending score, ties by gallery position.
inline std::vector<std::size_t> true_match_ranks(const ScoreMatrix& scores,
                                                 const GroundTruth& truth) {
  scores.validate();
  const auto genuine_col = detail::truth_columns(scores, truth);
  std::vector<std::size_t> ranks;
  ranks.reserve(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const std::size_t g = genuine_col[i];
    const double s = scores(i, g);
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      const double o = scores(i, j);
      if (o < s || (o == s && j < g)) ++ahead;
    }
    ranks.push_back(ahead + 1);
  }
  return ranks;
}

inline CmcCurve cmc_curve(const ScoreMatrix& scores, const GroundTruth& truth) {
  const auto ranks = true_match_ranks(scores, truth);
  if (ranks.empty()) throw EvaluationError("no probes");
  std::vector<std::size_t> hits(scores.cols() + 1, 0);
  for (const std::size_t r : ranks) ++hits[r];
  CmcCurve c;
  std::size_t cumulative = 0;
  for (std::size_t n = 1; n <= scores.cols(); ++n) {
    cumulative += hits[n];
    c.rank_rates.push_back(static_cast<double>(cumulative) /
                           static_cast<double>(ranks.size()));
  }
  return c;
}

}  // namespace cloudmatch
