#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dcpkit/error.hpp"
#include "dcpkit/geometry.hpp"
#include "dcpkit/image.hpp"
#include "dcpkit/representation.hpp"

namespace dcpkit {

// ---------------------------------------------------------------------------
// Identification

enum class ScoreOrder { higher_is_better, lower_is_better };

struct IdentificationReport {
  std::vector<double> rank_rates;  // rank_rates[k-1] = rank-k rate
  std::vector<int> best_match;     // gallery index ranked first for each probe
  std::vector<int> true_rank;      // 1-based rank of the true subject, 0 if absent from the gallery
  std::vector<int> missing;        // probes whose subject is not in the gallery
  std::size_t n_probes = 0;

  double rank1() const { return rank_rates.empty() ? 0.0 : rank_rates.front(); }
};

/// `scores` is probes x gallery. Ranking ties go to the lower gallery index.
inline IdentificationReport identify(const Eigen::MatrixXd& scores, const std::vector<std::string>& gallery_ids,
                                     const std::vector<std::string>& probe_ids, ScoreOrder order, int k_max) {
  const auto ng = static_cast<Eigen::Index>(gallery_ids.size());
  const auto np = static_cast<Eigen::Index>(probe_ids.size());
  if (ng == 0 || np == 0) throw InputError("identification needs nonempty gallery and probe sets");
  if (scores.rows() != np || scores.cols() != ng) throw DimensionError("score matrix does not match gallery/probe sizes");
  if (k_max < 1) throw ConfigError("k_max must be >= 1");
  std::map<std::string, Eigen::Index> where;
  for (Eigen::Index g = 0; g < ng; ++g) {
    if (!where.emplace(gallery_ids[static_cast<std::size_t>(g)], g).second) {
      throw InputError("gallery subject '" + gallery_ids[static_cast<std::size_t>(g)] + "' is not unique");
    }
  }
  IdentificationReport r;
  r.n_probes = static_cast<std::size_t>(np);
  const int kk = static_cast<int>(std::min<Eigen::Index>(k_max, ng));
  std::vector<std::size_t> hits(static_cast<std::size_t>(kk), 0);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(ng));
  for (Eigen::Index p = 0; p < np; ++p) {
    if (!scores.row(p).allFinite()) throw InputError("non-finite identification score");
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
      return order == ScoreOrder::higher_is_better ? scores(p, a) > scores(p, b) : scores(p, a) < scores(p, b);
    });
    r.best_match.push_back(static_cast<int>(idx.front()));
    const auto it = where.find(probe_ids[static_cast<std::size_t>(p)]);
    if (it == where.end()) {
      r.missing.push_back(static_cast<int>(p));
      r.true_rank.push_back(0);
      continue;
    }
    const auto pos = std::find(idx.begin(), idx.end(), it->second) - idx.begin();
    r.true_rank.push_back(static_cast<int>(pos) + 1);
    for (int k = static_cast<int>(pos); k < kk; ++k) ++hits[static_cast<std::size_t>(k)];
  }
  for (auto h : hits) r.rank_rates.push_back(static_cast<double>(h) / static_cast<double>(np));
  return r;
}

// ---------------------------------------------------------------------------
// Verification

struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;
  double vr = 0.0;
};

struct VerificationReport {
  std::vector<RocPoint> roc;
  double auc = 0.0;
  std::map<double, double> vr_at_far;
  std::optional<double> accuracy_mean;
  std::optional<double> accuracy_se;
  std::vector<double> fold_accuracy;
  std::size_t n_same = 0;
  std::size_t n_different = 0;
};

namespace detail {

inline void check_verification_input(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DimensionError("verification: one label per score required");
  std::size_t same = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw InputError("non-finite verification score");
    if (labels[i] != 0 && labels[i] != 1) throw InputError("verification labels must be 0 or 1");
    same += labels[i] == 1;
  }
  if (same == 0 || same == scores.size()) throw DegenerateError("verification needs both same and different pairs");
}

/// Threshold maximizing accuracy of "accept if score >= t"; ties go to the larger threshold.
inline double best_threshold(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t neg = 0;
  for (int l : labels) neg += l == 0;
  // accepting nothing: correct = negatives
  std::size_t tp = 0, fp = 0, best_correct = neg;
  double best_t = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    const std::size_t correct = tp + (neg - fp);
    if (correct > best_correct) {
      best_correct = correct;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace detail

/// ROC over all distinct thresholds (accept if score >= t), trapezoidal AUC,
/// conservative VR@FAR, and optional k-fold accuracy.
inline VerificationReport verify(const std::vector<double>& scores, const std::vector<int>& labels,
                                 const std::vector<double>& far_targets = {0.001, 0.01},
                                 const std::vector<int>& folds = {}) {
  detail::check_verification_input(scores, labels);
  VerificationReport r;
  for (int l : labels) (l == 1 ? r.n_same : r.n_different) += 1;
  const double ns = static_cast<double>(r.n_same), nd = static_cast<double>(r.n_different);

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  r.roc.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    r.roc.push_back({t, static_cast<double>(fp) / nd, static_cast<double>(tp) / ns});
  }
  for (std::size_t i = 1; i < r.roc.size(); ++i) {
    r.auc += 0.5 * (r.roc[i].far - r.roc[i - 1].far) * (r.roc[i].vr + r.roc[i - 1].vr);
  }
  for (double target : far_targets) {
    double vr = 0.0;
    for (const auto& p : r.roc) {
      if (p.far <= target) vr = std::max(vr, p.vr);
    }
    r.vr_at_far[target] = vr;
  }

  if (!folds.empty()) {
    if (folds.size() != scores.size()) throw DimensionError("verification: one fold index per pair required");
    const std::set<int> ids(folds.begin(), folds.end());
    if (*ids.begin() != 0 || *ids.rbegin() != static_cast<int>(ids.size()) - 1) {
      throw InputError("fold indices must be contiguous from 0");
    }
    if (ids.size() < 2) throw ConfigError("k-fold accuracy needs at least two folds");
    for (int f : ids) {
      std::vector<double> train_s, test_s;
      std::vector<int> train_l, test_l;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        (folds[i] == f ? test_s : train_s).push_back(scores[i]);
        (folds[i] == f ? test_l : train_l).push_back(labels[i]);
      }
      const double t = detail::best_threshold(train_s, train_l);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < test_s.size(); ++i) correct += (test_s[i] >= t) == (test_l[i] == 1);
      r.fold_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(test_s.size()));
    }
    const double k = static_cast<double>(r.fold_accuracy.size());
    const double mean = std::accumulate(r.fold_accuracy.begin(), r.fold_accuracy.end(), 0.0) / k;
    double ss = 0.0;
    for (double a : r.fold_accuracy) ss += (a - mean) * (a - mean);
    r.accuracy_mean = mean;
    r.accuracy_se = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Mirroring

struct FlippedFace {
  GrayImage image;
  LandmarkSet landmarks;
};

/// Horizontal mirror; landmark x is reflected and left/right indices swapped.
inline FlippedFace flip_augment(const GrayImage& img, const LandmarkSet& lm) {
  const auto perm = landmarks::mirror_permutation();
  std::vector<Point> pts(lm.size());
  const double w1 = static_cast<double>(img.width() - 1);
  for (std::size_t i = 0; i < lm.size(); ++i) {
    const Point& src = lm[static_cast<std::size_t>(perm[i])];
    pts[i] = {w1 - src.x, src.y};
  }
  return {flip_horizontal(img), LandmarkSet(std::move(pts))};
}

/// DCP code a pixel receives after a horizontal mirror: direction k becomes
/// direction (4 - k) mod 8, which permutes the base-4 digits of each channel.
constexpr int mirror_dcp_code(int code, int parity) {
  int digits[4] = {code & 3, (code >> 2) & 3, (code >> 4) & 3, (code >> 6) & 3};
  int out[4] = {0, 0, 0, 0};
  for (int i = 0; i < 4; ++i) {
    const int k = 2 * i + parity;
    const int mk = (12 - k) % 8;
    out[(mk - parity) / 2] = digits[i];
  }
  return out[0] | (out[1] << 2) | (out[2] << 4) | (out[3] << 6);
}

}  // namespace dcpkit
