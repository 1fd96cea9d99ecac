// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

#include "vadstream/feature_map.hpp"

namespace vad {

/// 8-bit min-max affine coding of one feature map. A constant map has scale 0
/// and all-zero codes.
template <typename Scalar>
struct QuantizedFeatureT {
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> codes;  // same layout as the source map
  Scalar min_value = 0;
  Scalar scale = 0;
  Shape3 original_shape;
  int stage_origin = -1;
};

using QuantizedFeature = QuantizedFeatureT<float>;

/// scale = (max - min) / 255, code = clamp(round((x - min) / scale), 0, 255),
/// rounding half away from zero.
template <typename Scalar>
QuantizedFeatureT<Scalar> fq_quantize(const FeatureMapT<Scalar>& f) {
  if (!f.all_finite()) throw InvalidInput("fq_quantize: non-finite values");
  QuantizedFeatureT<Scalar> q;
  q.original_shape = f.shape();
  q.stage_origin = f.stage_origin;
  q.codes.resize(f.data.rows(), f.data.cols());

  const Scalar lo = f.data.minCoeff();
  const Scalar hi = f.data.maxCoeff();
  if (hi == lo) {
    q.min_value = lo;
    q.scale = 0;
    q.codes.setZero();
    return q;
  }
  q.min_value = lo;
  q.scale = (hi - lo) / Scalar(255);
  const double inv_scale = 255.0 / (static_cast<double>(hi) - static_cast<double>(lo));
  for (Eigen::Index j = 0; j < f.data.cols(); ++j) {
    for (Eigen::Index i = 0; i < f.data.rows(); ++i) {
      const double level = std::round((static_cast<double>(f.data(i, j)) - static_cast<double>(lo)) * inv_scale);
      q.codes(i, j) = static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, level)));
    }
  }
  return q;
}

/// x_hat = code * scale + min_value.
template <typename Scalar>
FeatureMapT<Scalar> fq_dequantize(const QuantizedFeatureT<Scalar>& q) {
  const Shape3 s = q.original_shape;
  if (q.codes.rows() != s.c || q.codes.cols() != static_cast<Eigen::Index>(s.h) * s.w) {
    throw InvalidInput("fq_dequantize: shape record inconsistent with code grid");
  }
  FeatureMapT<Scalar> f(s.c, s.h, s.w, q.stage_origin);
  f.data = q.codes.template cast<Scalar>() * q.scale;
  f.data.array() += q.min_value;
  return f;
}

}  // namespace vad
