// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#include "vadstream/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <fstream>

#include "json.hpp"
#include "vadstream/distill.hpp"

namespace vad {

FeatureMap load_image_rgb(const std::string& path) {
  const cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("load_image_rgb: cannot decode " + path);
  FeatureMap img(3, bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    for (int x = 0; x < bgr.cols; ++x) {
      const auto& px = bgr.at<cv::Vec3b>(y, x);
      img.at(0, y, x) = px[2] / 255.0f;
      img.at(1, y, x) = px[1] / 255.0f;
      img.at(2, y, x) = px[0] / 255.0f;
    }
  }
  return img;
}

MaskGrid load_mask(const std::string& path) {
  const cv::Mat gray = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw IoError("load_mask: cannot decode " + path);
  MaskGrid mask(gray.rows, gray.cols);
  for (int y = 0; y < gray.rows; ++y) {
    for (int x = 0; x < gray.cols; ++x) mask(y, x) = gray.at<std::uint8_t>(y, x) > 0 ? 1 : 0;
  }
  return mask;
}

void save_image_rgb(const std::string& path, const FeatureMap& img) {
  if (img.channels() != 3) throw InvalidInput("save_image_rgb: expected 3 channels");
  cv::Mat bgr(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      auto& px = bgr.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) {
        const float v = std::min(1.0f, std::max(0.0f, img.at(c, y, x)));
        px[2 - c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  if (!cv::imwrite(path, bgr)) throw IoError("save_image_rgb: cannot write " + path);
}

void save_mask_png(const std::string& path, const MaskGrid& mask) {
  cv::Mat gray(static_cast<int>(mask.rows()), static_cast<int>(mask.cols()), CV_8UC1);
  for (int y = 0; y < gray.rows; ++y) {
    for (int x = 0; x < gray.cols; ++x) gray.at<std::uint8_t>(y, x) = mask(y, x) ? 255 : 0;
  }
  if (!cv::imwrite(path, gray)) throw IoError("save_mask_png: cannot write " + path);
}

FeatureMap resize_image_bilinear(const FeatureMap& img, int out_h, int out_w) {
  if (img.height == out_h && img.width == out_w) return img;
  const MatX<float> rw = bilinear_weights<float>(out_h, img.height);
  const MatX<float> cw = bilinear_weights<float>(out_w, img.width);
  FeatureMap out(img.channels(), out_h, out_w, img.stage_origin);
  for (int c = 0; c < img.channels(); ++c) {
    GridX<float> grid(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) grid(y, x) = img.at(c, y, x);
    }
    const GridX<float> resized = rw * grid * cw.transpose();
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) out.at(c, y, x) = resized(y, x);
    }
  }
  // interpolation of [0,1] data stays in [0,1] up to rounding
  out.data = out.data.cwiseMax(0.0f).cwiseMin(1.0f);
  return out;
}

MaskGrid resize_mask_nearest(const MaskGrid& mask, int out_h, int out_w) {
  const int in_h = static_cast<int>(mask.rows());
  const int in_w = static_cast<int>(mask.cols());
  if (in_h == out_h && in_w == out_w) return mask;
  MaskGrid out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const int sy = std::min(in_h - 1, static_cast<int>((y + 0.5) * in_h / out_h));
    for (int x = 0; x < out_w; ++x) {
      const int sx = std::min(in_w - 1, static_cast<int>((x + 0.5) * in_w / out_w));
      out(y, x) = mask(sy, sx);
    }
  }
  return out;
}

void export_anomaly_map_png16(const std::string& path, const GridX<float>& map) {
  const float lo = map.minCoeff();
  const float hi = map.maxCoeff();
  const float range = hi > lo ? hi - lo : 1.0f;
  cv::Mat img(static_cast<int>(map.rows()), static_cast<int>(map.cols()), CV_16UC1);
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      img.at<std::uint16_t>(y, x) =
          static_cast<std::uint16_t>(std::lround((map(y, x) - lo) / range * 65535.0f));
    }
  }
  if (!cv::imwrite(path, img)) throw IoError("export_anomaly_map_png16: cannot write " + path);
  nlohmann::json j{{"min", lo}, {"max", hi}};
  std::ofstream side(path + ".json");
  if (!side) throw IoError("export_anomaly_map_png16: cannot write sidecar for " + path);
  side << j.dump(2) << "\n";
}

void export_anomaly_map_raw(const std::string& path, const GridX<float>& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("export_anomaly_map_raw: cannot write " + path);
  const std::int32_t h = static_cast<std::int32_t>(map.rows());
  const std::int32_t w = static_cast<std::int32_t>(map.cols());
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(map.data()),
            static_cast<std::streamsize>(map.size() * sizeof(float)));
}

GridX<float> load_anomaly_map_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_anomaly_map_raw: cannot open " + path);
  std::int32_t h = 0, w = 0;
  in.read(reinterpret_cast<char*>(&h), 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  if (!in || h <= 0 || w <= 0) throw IoError("load_anomaly_map_raw: bad header in " + path);
  GridX<float> map(h, w);
  in.read(reinterpret_cast<char*>(map.data()), static_cast<std::streamsize>(map.size() * sizeof(float)));
  if (!in) throw IoError("load_anomaly_map_raw: truncated " + path);
  return map;
}

}  // namespace vad
