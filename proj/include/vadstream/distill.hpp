// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0
//
// Student-teacher feature matching: channel-normalized squared-difference
// loss, pixel anomaly maps from per-level discrepancies, image scoring.

#pragma once

#include <cmath>
#include <vector>

#include "vadstream/common.hpp"
#include "vadstream/feature_map.hpp"

namespace vad {

constexpr double kNormFloor = 1e-12;

/// Scales each spatial position's channel vector to unit Euclidean norm.
/// Zero vectors map to zero vectors.
template <typename Scalar>
FeatureMapT<Scalar> normalize_channels(const FeatureMapT<Scalar>& f) {
  if (!f.all_finite()) throw InvalidInput("normalize_channels: non-finite values");
  FeatureMapT<Scalar> out = f;
  for (Eigen::Index j = 0; j < out.data.cols(); ++j) {
    const Scalar norm = out.data.col(j).norm();
    out.data.col(j) /= std::max(norm, static_cast<Scalar>(kNormFloor));
  }
  return out;
}

namespace detail {

template <typename Scalar>
void check_feature_lists(const std::vector<FeatureMapT<Scalar>>& teacher,
                         const std::vector<FeatureMapT<Scalar>>& student) {
  if (teacher.empty()) throw InvalidInput("distillation: empty feature list");
  if (teacher.size() != student.size()) throw InvalidInput("distillation: level count mismatch");
  for (std::size_t l = 0; l < teacher.size(); ++l) {
    check_shape_match(teacher[l], student[l], "distillation");
  }
}

}  // namespace detail

/// Per position: 0.5 * ||t_hat - s_hat||^2 of the channel-normalized vectors;
/// mean over positions per level, summed over levels.
template <typename Scalar>
Scalar distillation_loss(const std::vector<FeatureMapT<Scalar>>& teacher,
                         const std::vector<FeatureMapT<Scalar>>& student) {
  detail::check_feature_lists(teacher, student);
  Scalar total = 0;
  for (std::size_t l = 0; l < teacher.size(); ++l) {
    const FeatureMapT<Scalar> t_hat = normalize_channels(teacher[l]);
    const FeatureMapT<Scalar> s_hat = normalize_channels(student[l]);
    total += (t_hat.data - s_hat.data).squaredNorm() / (2 * static_cast<Scalar>(t_hat.positions()));
  }
  return total;
}

/// distillation_loss plus its gradient with respect to the raw (un-normalized)
/// student features. Positions whose student vector is numerically zero get a
/// zero gradient.
template <typename Scalar>
Scalar distillation_loss_grad(const std::vector<FeatureMapT<Scalar>>& teacher,
                              const std::vector<FeatureMapT<Scalar>>& student,
                              std::vector<FeatureMapT<Scalar>>& d_student) {
  detail::check_feature_lists(teacher, student);
  d_student.clear();
  Scalar total = 0;
  for (std::size_t l = 0; l < teacher.size(); ++l) {
    const FeatureMapT<Scalar>& t = teacher[l];
    const FeatureMapT<Scalar>& s = student[l];
    FeatureMapT<Scalar> grad(s.channels(), s.height, s.width, s.stage_origin);
    const Scalar inv_positions = Scalar(1) / static_cast<Scalar>(s.positions());
    for (Eigen::Index j = 0; j < s.data.cols(); ++j) {
      VecX<Scalar> t_hat = t.data.col(j);
      const Scalar tn = t_hat.norm();
      t_hat /= std::max(tn, static_cast<Scalar>(kNormFloor));

      const Scalar sn = s.data.col(j).norm();
      if (sn <= static_cast<Scalar>(kNormFloor)) {
        total += Scalar(0.5) * t_hat.squaredNorm() * inv_positions;
        continue;  // dead position, no usable direction
      }
      const VecX<Scalar> s_hat = s.data.col(j) / sn;
      total += Scalar(0.5) * (t_hat - s_hat).squaredNorm() * inv_positions;
      const Scalar dot = s_hat.dot(t_hat);
      grad.data.col(j) = (s_hat * dot - t_hat) * (inv_positions / sn);
    }
    d_student.push_back(std::move(grad));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Anomaly maps.

enum class LevelCombine { kMean, kProduct };

inline LevelCombine combine_from_name(const std::string& s) {
  if (s == "mean") return LevelCombine::kMean;
  if (s == "product") return LevelCombine::kProduct;
  throw InvalidInput("unknown level combiner: " + s);
}

inline std::string combine_name(LevelCombine c) {
  return c == LevelCombine::kMean ? "mean" : "product";
}

/// Pixel-level anomaly scores at input resolution, plus the pre-upsample
/// per-level maps they were combined from.
template <typename Scalar>
struct AnomalyMapT {
  GridX<Scalar> data;
  std::vector<GridX<Scalar>> per_level;

  int height() const { return static_cast<int>(data.rows()); }
  int width() const { return static_cast<int>(data.cols()); }
};

using AnomalyMap = AnomalyMapT<float>;

/// Row/column interpolation weights for half-pixel-center bilinear resampling;
/// resize is the separable product R * grid * C^T.
template <typename Scalar>
MatX<Scalar> bilinear_weights(int out_size, int in_size) {
  MatX<Scalar> w = MatX<Scalar>::Zero(out_size, in_size);
  for (int o = 0; o < out_size; ++o) {
    const double src = (o + 0.5) * static_cast<double>(in_size) / out_size - 0.5;
    const double clamped = std::min(std::max(src, 0.0), static_cast<double>(in_size - 1));
    const int lo = static_cast<int>(std::floor(clamped));
    const int hi = std::min(lo + 1, in_size - 1);
    const Scalar frac = static_cast<Scalar>(clamped - lo);
    w(o, lo) += Scalar(1) - frac;
    w(o, hi) += frac;
  }
  return w;
}

template <typename Scalar>
GridX<Scalar> bilinear_resize(const GridX<Scalar>& in, int out_h, int out_w) {
  if (in.rows() == out_h && in.cols() == out_w) return in;
  const MatX<Scalar> rows = bilinear_weights<Scalar>(out_h, static_cast<int>(in.rows()));
  const MatX<Scalar> cols = bilinear_weights<Scalar>(out_w, static_cast<int>(in.cols()));
  return rows * in * cols.transpose();
}

/// Per level, per position 0.5 * ||t_hat - s_hat||^2, reshaped to a grid,
/// bilinearly upsampled to out_hw and combined elementwise.
template <typename Scalar>
AnomalyMapT<Scalar> anomaly_map(const std::vector<FeatureMapT<Scalar>>& teacher,
                                const std::vector<FeatureMapT<Scalar>>& student, int out_h,
                                int out_w, LevelCombine combine = LevelCombine::kMean) {
  detail::check_feature_lists(teacher, student);
  if (out_h <= 0 || out_w <= 0) throw InvalidInput("anomaly_map: output size must be positive");

  AnomalyMapT<Scalar> result;
  std::vector<GridX<Scalar>> upsampled;
  for (std::size_t l = 0; l < teacher.size(); ++l) {
    const FeatureMapT<Scalar> t_hat = normalize_channels(teacher[l]);
    const FeatureMapT<Scalar> s_hat = normalize_channels(student[l]);
    const auto sq = (t_hat.data - s_hat.data).colwise().squaredNorm() * Scalar(0.5);
    GridX<Scalar> level(t_hat.height, t_hat.width);
    for (int y = 0; y < t_hat.height; ++y) {
      for (int x = 0; x < t_hat.width; ++x) level(y, x) = sq(static_cast<Eigen::Index>(y) * t_hat.width + x);
    }
    upsampled.push_back(bilinear_resize(level, out_h, out_w));
    result.per_level.push_back(std::move(level));
  }

  result.data = upsampled[0];
  for (std::size_t l = 1; l < upsampled.size(); ++l) {
    if (combine == LevelCombine::kMean) {
      result.data += upsampled[l];
    } else {
      result.data = result.data.cwiseProduct(upsampled[l]);
    }
  }
  if (combine == LevelCombine::kMean) result.data /= static_cast<Scalar>(upsampled.size());
  return result;
}

/// Image-level score: the maximum pixel of the anomaly map.
template <typename Scalar>
Scalar image_score(const AnomalyMapT<Scalar>& map) {
  if (map.data.size() == 0) throw InvalidInput("image_score: empty map");
  return map.data.maxCoeff();
}

}  // namespace vad
