// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "vadstream/common.hpp"

namespace vad {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MaskGrid = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Dense activation grid. Stored as a channels x (height*width) matrix so the
/// channel vector at spatial position (y, x) is the contiguous column y*width + x.
template <typename Scalar>
struct FeatureMapT {
  MatX<Scalar> data;
  int height = 0;
  int width = 0;
  int stage_origin = -1;  // backbone stage that produced this map; -1 = raw input

  FeatureMapT() = default;
  FeatureMapT(int channels, int h, int w, int origin = -1)
      : data(MatX<Scalar>::Zero(channels, static_cast<Eigen::Index>(h) * w)),
        height(h),
        width(w),
        stage_origin(origin) {}

  int channels() const { return static_cast<int>(data.rows()); }
  int positions() const { return static_cast<int>(data.cols()); }
  Shape3 shape() const { return {channels(), height, width}; }

  Scalar& at(int c, int y, int x) { return data(c, static_cast<Eigen::Index>(y) * width + x); }
  Scalar at(int c, int y, int x) const { return data(c, static_cast<Eigen::Index>(y) * width + x); }

  bool all_finite() const { return data.allFinite(); }

  template <typename Other>
  FeatureMapT<Other> cast() const {
    FeatureMapT<Other> out;
    out.data = data.template cast<Other>();
    out.height = height;
    out.width = width;
    out.stage_origin = stage_origin;
    return out;
  }
};

using FeatureMap = FeatureMapT<float>;

template <typename Scalar>
void check_shape_match(const FeatureMapT<Scalar>& a, const FeatureMapT<Scalar>& b,
                       const char* where) {
  if (a.shape() != b.shape()) {
    throw InvalidInput(std::string(where) + ": shape mismatch " + a.shape().str() + " vs " +
                       b.shape().str());
  }
}

/// Single-channel view of a (height, width) real grid, e.g. an anomaly map level.
template <typename Scalar>
using GridX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace vad
