// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "vadstream/feature_map.hpp"

namespace vad {

/// Decodes an image file into a [0,1] RGB map (stage_origin -1).
FeatureMap load_image_rgb(const std::string& path);

/// Loads a mask image as a binary grid (any nonzero pixel becomes 1).
MaskGrid load_mask(const std::string& path);

void save_image_rgb(const std::string& path, const FeatureMap& img);
void save_mask_png(const std::string& path, const MaskGrid& mask);

/// Bilinear resize of a [0,1] image, channel by channel.
FeatureMap resize_image_bilinear(const FeatureMap& img, int out_h, int out_w);

/// Nearest-neighbor resize; keeps masks strictly binary.
MaskGrid resize_mask_nearest(const MaskGrid& mask, int out_h, int out_w);

/// 16-bit grayscale PNG, linearly scaled to the map's [min, max]; the scaling
/// is recorded in a `<path>.json` sidecar.
void export_anomaly_map_png16(const std::string& path, const GridX<float>& map);

/// Raw float container: i32 height, i32 width, row-major float32 data.
void export_anomaly_map_raw(const std::string& path, const GridX<float>& map);
GridX<float> load_anomaly_map_raw(const std::string& path);

}  // namespace vad
