// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "vadstream/common.hpp"
#include "vadstream/feature_map.hpp"

namespace vad {

/// Scores with binary ground-truth labels (1 = anomalous).
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;

  std::size_t size() const { return scores.size(); }

  void validate() const {
    if (scores.empty()) throw InvalidInput("ScoredSet: empty input");
    if (scores.size() != labels.size()) throw InvalidInput("ScoredSet: scores/labels length mismatch");
    for (int l : labels) {
      if (l != 0 && l != 1) throw InvalidInput("ScoredSet: labels must be 0 or 1");
    }
  }

  int num_positives() const { return static_cast<int>(std::count(labels.begin(), labels.end(), 1)); }
};

/// Probability that a random positive outscores a random negative, ties at 1/2.
/// Computed from tie-averaged ranks (Mann-Whitney U). Single-class input: 0.5.
inline double roc_auc(const ScoredSet& s) {
  s.validate();
  const std::size_t n = s.size();
  const int pos = s.num_positives();
  const int neg = static_cast<int>(n) - pos;
  if (pos == 0 || neg == 0) return 0.5;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && s.scores[order[j]] == s.scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average rank of the tie block
    for (std::size_t k = i; k < j; ++k) {
      if (s.labels[order[k]] == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * pos * (pos + 1.0);
  return u / (static_cast<double>(pos) * neg);
}

struct F1Point {
  double f1 = 0.0;
  double threshold = 0.0;
};

namespace detail {

// Sorted descending-score index order plus tie-block iteration shared by the
// threshold-sweep metrics.
inline std::vector<std::size_t> descending_order(const ScoredSet& s) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  return order;
}

}  // namespace detail

/// Best F1 over thresholds realized by the score set; predict positive when
/// score >= threshold. F1 ties resolve to the higher threshold.
inline F1Point f1_max(const ScoredSet& s) {
  s.validate();
  const int pos = s.num_positives();
  if (pos == 0) throw InvalidInput("f1_max: no positive labels");

  const auto order = detail::descending_order(s);
  const std::size_t n = s.size();
  long long tp = 0, fp = 0;
  F1Point best{-1.0, 0.0};
  std::size_t i = 0;
  while (i < n) {
    const double t = s.scores[order[i]];
    std::size_t j = i;
    while (j < n && s.scores[order[j]] == t) {
      if (s.labels[order[j]] == 1) ++tp; else ++fp;
      ++j;
    }
    const long long fn = pos - tp;
    const double f1 = 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    if (f1 > best.f1) best = {f1, t};
    i = j;
  }
  return best;
}

/// Average precision: sum of precision * recall increments in descending score
/// order, with tied scores processed as one block.
inline double pr_auc(const ScoredSet& s) {
  s.validate();
  const int pos = s.num_positives();
  if (pos == 0) throw InvalidInput("pr_auc: no positive labels");

  const auto order = detail::descending_order(s);
  const std::size_t n = s.size();
  long long tp = 0, fp = 0;
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t i = 0;
  while (i < n) {
    const double t = s.scores[order[i]];
    std::size_t j = i;
    while (j < n && s.scores[order[j]] == t) {
      if (s.labels[order[j]] == 1) ++tp; else ++fp;
      ++j;
    }
    const double recall = tp / static_cast<double>(pos);
    const double precision = tp / static_cast<double>(tp + fp);
    ap += precision * (recall - prev_recall);
    prev_recall = recall;
    i = j;
  }
  return ap;
}

namespace detail {

// 8-connected components of a binary mask; returns per-region pixel index lists
// (flat index y*width + x).
inline std::vector<std::vector<int>> connected_regions(const MaskGrid& mask) {
  const int h = static_cast<int>(mask.rows());
  const int w = static_cast<int>(mask.cols());
  std::vector<int> label(static_cast<std::size_t>(h) * w, -1);
  std::vector<std::vector<int>> regions;
  std::vector<int> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int idx = y * w + x;
      if (mask(y, x) == 0 || label[idx] >= 0) continue;
      const int id = static_cast<int>(regions.size());
      regions.emplace_back();
      stack.assign(1, idx);
      label[idx] = id;
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        regions[id].push_back(cur);
        const int cy = cur / w, cx = cur % w;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = cy + dy, nx = cx + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            const int nidx = ny * w + nx;
            if (mask(ny, nx) != 0 && label[nidx] < 0) {
              label[nidx] = id;
              stack.push_back(nidx);
            }
          }
        }
      }
    }
  }
  return regions;
}

}  // namespace detail

/// Area under the per-region-overlap vs false-positive-rate curve on
/// [0, fpr_limit], normalized by fpr_limit.
///
/// Ground-truth regions are the 8-connected mask components, pooled across all
/// images and weighted equally regardless of size. Thresholds sweep the pooled
/// score quantiles (at least num_thresholds steps) in descending order; the
/// implicit operating point (FPR 0, PRO 0) at threshold +inf starts the curve.
inline double aupro(const std::vector<GridX<float>>& maps, const std::vector<MaskGrid>& masks,
                    double fpr_limit = 0.3, int num_thresholds = 256) {
  if (maps.size() != masks.size() || maps.empty()) {
    throw InvalidInput("aupro: maps/masks count mismatch or empty");
  }
  if (fpr_limit <= 0.0 || fpr_limit > 1.0) throw InvalidInput("aupro: fpr_limit out of (0,1]");

  // Per-region score lists and the pooled negative scores, each sorted ascending.
  std::vector<std::vector<double>> region_scores;
  std::vector<double> neg_scores;
  std::vector<double> pooled;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto& map = maps[i];
    const auto& mask = masks[i];
    if (map.rows() != mask.rows() || map.cols() != mask.cols()) {
      throw InvalidInput("aupro: map/mask shape mismatch");
    }
    const int h = static_cast<int>(mask.rows());
    const int w = static_cast<int>(mask.cols());
    for (auto& region : detail::connected_regions(mask)) {
      std::vector<double> scores;
      scores.reserve(region.size());
      for (int idx : region) scores.push_back(map(idx / w, idx % w));
      std::sort(scores.begin(), scores.end());
      region_scores.push_back(std::move(scores));
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (mask(y, x) == 0) neg_scores.push_back(map(y, x));
        pooled.push_back(map(y, x));
      }
    }
  }
  if (region_scores.empty()) throw InvalidInput("aupro: no anomalous pixels in any mask");

  std::sort(neg_scores.begin(), neg_scores.end());
  std::sort(pooled.begin(), pooled.end());

  // Quantile thresholds, descending, duplicates removed.
  std::vector<double> thresholds;
  const std::size_t np = pooled.size();
  for (int k = 0; k < num_thresholds; ++k) {
    const double q = num_thresholds == 1 ? 0.0 : static_cast<double>(k) / (num_thresholds - 1);
    const std::size_t rank = static_cast<std::size_t>(std::llround(q * (np - 1)));
    thresholds.push_back(pooled[np - 1 - rank]);
  }
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const auto count_ge = [](const std::vector<double>& sorted, double t) {
    return static_cast<double>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
  };

  // Curve points in sweep order, starting from the empty detection.
  std::vector<std::pair<double, double>> curve{{0.0, 0.0}};
  for (double t : thresholds) {
    double pro = 0.0;
    for (const auto& rs : region_scores) pro += count_ge(rs, t) / static_cast<double>(rs.size());
    pro /= static_cast<double>(region_scores.size());
    const double fpr = neg_scores.empty() ? 0.0 : count_ge(neg_scores, t) / static_cast<double>(neg_scores.size());
    curve.emplace_back(fpr, pro);
  }
  if (curve.back().first < fpr_limit) {
    curve.emplace_back(fpr_limit, curve.back().second);  // flat extension (no reachable FPR beyond)
  }

  // Trapezoidal area of consecutive segments clipped to [0, fpr_limit].
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    double f0 = curve[i].first, p0 = curve[i].second;
    double f1 = curve[i + 1].first, p1 = curve[i + 1].second;
    if (f0 >= fpr_limit) break;
    if (f1 <= f0) continue;
    if (f1 > fpr_limit) {
      p1 = p0 + (p1 - p0) * (fpr_limit - f0) / (f1 - f0);
      f1 = fpr_limit;
    }
    area += 0.5 * (p0 + p1) * (f1 - f0);
  }
  return area / fpr_limit;
}

constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

/// Lower-triangular T x T grid: entry (t, j) is the metric on task j after
/// training on task t. Undefined entries (e.g. joint training's early rows) are NaN.
struct ResultMatrix {
  std::string metric;
  int num_tasks = 0;
  std::vector<std::vector<double>> rows;  // rows[t] has t+1 entries

  ResultMatrix() = default;
  ResultMatrix(std::string name, int t) : metric(std::move(name)), num_tasks(t) {
    rows.resize(t);
    for (int i = 0; i < t; ++i) rows[i].assign(i + 1, kUndefined);
  }

  double operator()(int t, int j) const {
    if (t < 0 || t >= num_tasks || j < 0 || j > t) throw InvalidInput("ResultMatrix: index out of triangle");
    return rows[t][j];
  }
  void set(int t, int j, double v) {
    if (t < 0 || t >= num_tasks || j < 0 || j > t) throw InvalidInput("ResultMatrix: index out of triangle");
    rows[t][j] = v;
  }
  bool defined(int t, int j) const { return !std::isnan((*this)(t, j)); }

  /// Mean over the defined entries of row t (the "average over tasks seen so far").
  double row_mean(int t) const {
    double sum = 0.0;
    int n = 0;
    for (int j = 0; j <= t; ++j) {
      if (defined(t, j)) {
        sum += rows[t][j];
        ++n;
      }
    }
    return n == 0 ? kUndefined : sum / n;
  }
};

enum class ForgettingMode { kRelative, kAbsolute };

struct ForgettingResult {
  double value = kUndefined;
  std::vector<int> skipped_tasks;  // tasks with zero peak, excluded from the mean
};

/// Average forgetting: for each task j, the drop from its peak value over rows
/// [j, T-2] to its value in the final row. Relative mode normalizes by the peak
/// and clamps below at zero. Tasks with a zero peak are excluded.
inline ForgettingResult forgetting(const ResultMatrix& m, ForgettingMode mode = ForgettingMode::kRelative) {
  const int t_count = m.num_tasks;
  if (t_count < 2) throw InvalidInput("forgetting: needs at least 2 tasks");
  ForgettingResult out;
  double sum = 0.0;
  int n = 0;
  for (int j = 0; j <= t_count - 2; ++j) {
    double peak = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (int t = j; t <= t_count - 2; ++t) {
      if (m.defined(t, j)) {
        peak = std::max(peak, m(t, j));
        any = true;
      }
    }
    if (!any || !m.defined(t_count - 1, j)) return out;  // matrix incomplete: undefined
    const double last = m(t_count - 1, j);
    if (mode == ForgettingMode::kRelative) {
      if (peak <= 0.0) {
        out.skipped_tasks.push_back(j);
        continue;
      }
      sum += std::max(0.0, (peak - last) / peak);
    } else {
      sum += std::max(0.0, peak - last);
    }
    ++n;
  }
  if (n > 0) out.value = sum / n;
  return out;
}

/// Relative shortfall of a method's final metric versus joint training.
inline double jt_gap(double method_value, double jt_value) {
  if (!(jt_value > 0.0)) throw InvalidInput("jt_gap: joint-training value must be positive");
  return (jt_value - method_value) / jt_value;
}

}  // namespace vad
