// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used only by tests. Everything here is
// written the slow, obvious way and must stay decoupled from the library code
// paths it checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "vadstream/feature_map.hpp"
#include "vadstream/metrics.hpp"
#include "vadstream/pq.hpp"

namespace oracles {

// Pairwise-comparison ROC AUC: P(random positive outscores random negative),
// ties counted one half.
inline double roc_pairwise(const vad::ScoredSet& s) {
  double wins = 0.0;
  long long pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.labels[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s.labels[j] != 0) continue;
      ++pairs;
      if (s.scores[i] > s.scores[j]) wins += 1.0;
      else if (s.scores[i] == s.scores[j]) wins += 0.5;
    }
  }
  if (pairs == 0) return 0.5;
  return wins / static_cast<double>(pairs);
}

// Exhaustive threshold sweep recomputing the confusion matrix from scratch at
// every realized threshold.
inline vad::F1Point f1_sweep(const vad::ScoredSet& s) {
  std::vector<double> thresholds = s.scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  vad::F1Point best{-1.0, 0.0};
  for (double t : thresholds) {
    long long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool pred = s.scores[i] >= t;
      if (pred && s.labels[i] == 1) ++tp;
      if (pred && s.labels[i] == 0) ++fp;
      if (!pred && s.labels[i] == 1) ++fn;
    }
    const double f1 = 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    if (f1 > best.f1) best = {f1, t};
  }
  return best;
}

// Stepwise average precision with full recounts per distinct threshold.
inline double ap_stepwise(const vad::ScoredSet& s) {
  std::vector<double> thresholds = s.scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  long long pos = 0;
  for (int l : s.labels) pos += l;
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    long long tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.scores[i] >= t) (s.labels[i] == 1 ? tp : fp) += 1;
    }
    const double recall = tp / static_cast<double>(pos);
    const double precision = tp / static_cast<double>(tp + fp);
    ap += precision * (recall - prev_recall);
    prev_recall = recall;
  }
  return ap;
}

// Naive per-pixel bilinear gather with half-pixel centers.
template <typename Scalar>
vad::GridX<Scalar> naive_bilinear(const vad::GridX<Scalar>& in, int out_h, int out_w) {
  vad::GridX<Scalar> out(out_h, out_w);
  const int ih = static_cast<int>(in.rows());
  const int iw = static_cast<int>(in.cols());
  for (int y = 0; y < out_h; ++y) {
    double sy = (y + 0.5) * static_cast<double>(ih) / out_h - 0.5;
    sy = std::min(std::max(sy, 0.0), static_cast<double>(ih - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, ih - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      double sx = (x + 0.5) * static_cast<double>(iw) / out_w - 0.5;
      sx = std::min(std::max(sx, 0.0), static_cast<double>(iw - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, iw - 1);
      const double fx = sx - x0;
      const double v = (1 - fy) * ((1 - fx) * in(y0, x0) + fx * in(y0, x1)) +
                       fy * ((1 - fx) * in(y1, x0) + fx * in(y1, x1));
      out(y, x) = static_cast<Scalar>(v);
    }
  }
  return out;
}

// Full scan over every centroid of every table, scalar loops only.
inline std::vector<int> brute_pq_encode(const vad::VecX<float>& v, const vad::Codebook& cb) {
  std::vector<int> codes;
  for (int m = 0; m < cb.num_subvectors; ++m) {
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int k = 0; k < cb.ksub(); ++k) {
      double dist = 0.0;
      for (int r = 0; r < cb.subvector_dim; ++r) {
        const double diff = static_cast<double>(v(m * cb.subvector_dim + r)) -
                            static_cast<double>(cb.centroids[m](r, k));
        dist += diff * diff;
      }
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    codes.push_back(best);
  }
  return codes;
}

// Threshold-sweep AUPRO: recomputes region overlaps and the false-positive
// rate by looping over every pixel at every threshold, then integrates the
// same clipped trapezoid as the spec describes.
inline double aupro_sweep(const std::vector<vad::GridX<float>>& maps,
                          const std::vector<vad::MaskGrid>& masks, double fpr_limit,
                          int num_thresholds = 256) {
  // regions via repeated flood fill (8-connected), one list per region
  struct Region {
    int image;
    std::vector<std::pair<int, int>> pixels;
  };
  std::vector<Region> regions;
  long long neg_total = 0;
  std::vector<double> pooled;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto& mask = masks[i];
    const int h = static_cast<int>(mask.rows());
    const int w = static_cast<int>(mask.cols());
    std::vector<std::vector<bool>> seen(h, std::vector<bool>(w, false));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        pooled.push_back(maps[i](y, x));
        if (mask(y, x) == 0) {
          ++neg_total;
          continue;
        }
        if (seen[y][x]) continue;
        Region region{static_cast<int>(i), {}};
        std::vector<std::pair<int, int>> frontier{{y, x}};
        seen[y][x] = true;
        while (!frontier.empty()) {
          auto [cy, cx] = frontier.back();
          frontier.pop_back();
          region.pixels.emplace_back(cy, cx);
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const int ny = cy + dy, nx = cx + dx;
              if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
              if (mask(ny, nx) != 0 && !seen[ny][nx]) {
                seen[ny][nx] = true;
                frontier.emplace_back(ny, nx);
              }
            }
          }
        }
        regions.push_back(std::move(region));
      }
    }
  }

  std::sort(pooled.begin(), pooled.end());
  std::vector<double> thresholds;
  for (int k = 0; k < num_thresholds; ++k) {
    const double q = num_thresholds == 1 ? 0.0 : static_cast<double>(k) / (num_thresholds - 1);
    const auto rank = static_cast<std::size_t>(std::llround(q * (pooled.size() - 1)));
    thresholds.push_back(pooled[pooled.size() - 1 - rank]);
  }
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<std::pair<double, double>> curve{{0.0, 0.0}};
  for (double t : thresholds) {
    double pro = 0.0;
    for (const auto& region : regions) {
      long long hit = 0;
      for (auto [y, x] : region.pixels) {
        if (maps[region.image](y, x) >= t) ++hit;
      }
      pro += hit / static_cast<double>(region.pixels.size());
    }
    pro /= static_cast<double>(regions.size());
    long long fp = 0;
    for (std::size_t i = 0; i < masks.size(); ++i) {
      for (int y = 0; y < masks[i].rows(); ++y) {
        for (int x = 0; x < masks[i].cols(); ++x) {
          if (masks[i](y, x) == 0 && maps[i](y, x) >= t) ++fp;
        }
      }
    }
    const double fpr = neg_total == 0 ? 0.0 : fp / static_cast<double>(neg_total);
    curve.emplace_back(fpr, pro);
  }
  if (curve.back().first < fpr_limit) curve.emplace_back(fpr_limit, curve.back().second);

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

}  // namespace oracles
