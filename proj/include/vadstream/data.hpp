// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vadstream/common.hpp"
#include "vadstream/feature_map.hpp"

namespace vad {

/// One object category: normal-only training images plus a labeled and
/// pixel-masked test set. Images are [0,1] RGB, masks strictly 0/1.
struct Task {
  int task_id = 0;
  std::string name;
  std::vector<FeatureMap> train_images;
  std::vector<FeatureMap> test_images;
  std::vector<int> test_labels;
  std::vector<MaskGrid> test_masks;

  void validate() const {
    if (train_images.empty()) throw InvalidInput("Task " + name + ": empty training set");
    if (test_images.size() != test_labels.size() || test_images.size() != test_masks.size()) {
      throw InvalidInput("Task " + name + ": test set size mismatch");
    }
    auto check_image = [&](const FeatureMap& img) {
      if (!img.all_finite()) throw InvalidInput("Task " + name + ": non-finite image");
      if (img.data.minCoeff() < 0.0f || img.data.maxCoeff() > 1.0f) {
        throw InvalidInput("Task " + name + ": image values outside [0,1]");
      }
    };
    for (const auto& img : train_images) check_image(img);
    for (std::size_t i = 0; i < test_images.size(); ++i) {
      check_image(test_images[i]);
      const auto& img = test_images[i];
      const auto& mask = test_masks[i];
      if (mask.rows() != img.height || mask.cols() != img.width) {
        throw InvalidInput("Task " + name + ": mask shape does not match image");
      }
      long long area = 0;
      for (Eigen::Index r = 0; r < mask.rows(); ++r) {
        for (Eigen::Index c = 0; c < mask.cols(); ++c) {
          if (mask(r, c) > 1) throw InvalidInput("Task " + name + ": mask not binary");
          area += mask(r, c);
        }
      }
      if (test_labels[i] == 1 && area == 0) {
        throw InvalidInput("Task " + name + ": anomalous test image with empty mask");
      }
      if (test_labels[i] == 0 && area != 0) {
        throw InvalidInput("Task " + name + ": normal test image with nonempty mask");
      }
      if (test_labels[i] != 0 && test_labels[i] != 1) {
        throw InvalidInput("Task " + name + ": label must be 0 or 1");
      }
    }
  }
};

struct SyntheticParams {
  std::uint64_t seed = 0;
  int num_tasks = 5;
  int image_size = 64;
  int defects_min = 1;
  int defects_max = 3;
  int train_per_task = 40;
  int test_normal = 10;
  int test_anomalous = 10;
};

namespace detail {

inline float quantize8(float v) {
  v = std::min(1.0f, std::max(0.0f, v));
  return std::round(v * 255.0f) / 255.0f;
}

// Sinusoidal grating with task-specific frequency and orientation plus seeded
// noise, snapped to the 8-bit lattice so a byte round-trip is lossless.
inline FeatureMap synth_texture(int size, double cycles, double theta, std::mt19937_64& rng) {
  FeatureMap img(3, size, size);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> noise(-0.04, 0.04);
  const double phase = phase_dist(rng);
  const double fx = std::cos(theta) * cycles * 2.0 * M_PI / size;
  const double fy = std::sin(theta) * cycles * 2.0 * M_PI / size;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double carrier = fx * x + fy * y + phase;
      const double n = noise(rng);
      for (int c = 0; c < 3; ++c) {
        const double v = 0.5 + 0.2 * std::sin(carrier + 0.5 * c) + n;
        img.at(c, y, x) = quantize8(static_cast<float>(v));
      }
    }
  }
  return img;
}

// Injects 1..max_defects rectangular/elliptical intensity defects. The shift
// direction moves away from the local mean so clamping cannot erase the
// contrast; defect area stays within [0.5%, 10%] of the image.
inline MaskGrid inject_defects(FeatureMap& img, int min_defects, int max_defects,
                               std::mt19937_64& rng) {
  const int size = img.height;
  MaskGrid mask = MaskGrid::Zero(size, size);
  std::uniform_int_distribution<int> count_dist(min_defects, max_defects);
  std::uniform_real_distribution<double> rect_half(0.045 * size, 0.080 * size);
  std::uniform_real_distribution<double> ellipse_axis(0.050 * size, 0.090 * size);
  std::uniform_real_distribution<double> shift_dist(0.28, 0.38);
  std::bernoulli_distribution is_rect(0.5);

  const int target = count_dist(rng);
  long long area = 0;
  const long long area_cap = static_cast<long long>(0.05 * size * size);
  for (int d = 0; d < target; ++d) {
    if (d > 0 && area >= area_cap) break;
    const bool rect = is_rect(rng);
    const double ry = rect ? std::max(1.5, rect_half(rng)) : std::max(1.5, ellipse_axis(rng));
    const double rx = rect ? std::max(1.5, rect_half(rng)) : std::max(1.5, ellipse_axis(rng));
    const int margin = static_cast<int>(std::ceil(std::max(rx, ry)));
    std::uniform_int_distribution<int> center(margin, size - 1 - margin);
    const int cy = center(rng);
    const int cx = center(rng);

    std::vector<int> pixels;
    for (int y = cy - margin; y <= cy + margin; ++y) {
      for (int x = cx - margin; x <= cx + margin; ++x) {
        const double dy = (y - cy) / ry;
        const double dx = (x - cx) / rx;
        const bool inside = rect ? (std::abs(y - cy) <= ry && std::abs(x - cx) <= rx)
                                 : (dx * dx + dy * dy <= 1.0);
        if (inside) pixels.push_back(y * size + x);
      }
    }
    double local_mean = 0.0;
    for (int p : pixels) local_mean += img.data.col(p).mean();
    local_mean /= static_cast<double>(pixels.size());
    const double shift = (local_mean > 0.5 ? -1.0 : 1.0) * shift_dist(rng);
    for (int p : pixels) {
      for (int c = 0; c < 3; ++c) {
        img.data(c, p) = quantize8(static_cast<float>(img.data(c, p) + shift));
      }
      const int y = p / size, x = p % size;
      if (mask(y, x) == 0) {
        mask(y, x) = 1;
        ++area;
      }
    }
  }
  return mask;
}

}  // namespace detail

/// Deterministic procedural task stream: each task is a distinct grating
/// texture; anomalous test images carry exact defect masks.
inline std::vector<Task> synth_task_stream(const SyntheticParams& params) {
  if (params.num_tasks < 1) throw InvalidInput("synth_task_stream: num_tasks must be >= 1");
  if (params.image_size < 32) throw InvalidInput("synth_task_stream: image_size must be >= 32");
  if (params.defects_min < 1 || params.defects_max < params.defects_min) {
    throw InvalidInput("synth_task_stream: bad defect count range");
  }

  std::vector<Task> tasks;
  for (int k = 0; k < params.num_tasks; ++k) {
    std::mt19937_64 rng(mix_seed(params.seed, static_cast<std::uint64_t>(k)));
    // pairwise-distinct parameter schedule (golden-ratio orientation steps)
    const double theta = std::fmod(0.137 + 0.618033988749895 * k, 1.0) * M_PI;
    const double cycles = 3.0 + (k % 6);

    Task task;
    task.task_id = k;
    task.name = "synthetic-" + std::to_string(k);
    for (int i = 0; i < params.train_per_task; ++i) {
      task.train_images.push_back(detail::synth_texture(params.image_size, cycles, theta, rng));
    }
    for (int i = 0; i < params.test_normal; ++i) {
      task.test_images.push_back(detail::synth_texture(params.image_size, cycles, theta, rng));
      task.test_labels.push_back(0);
      task.test_masks.push_back(MaskGrid::Zero(params.image_size, params.image_size));
    }
    for (int i = 0; i < params.test_anomalous; ++i) {
      FeatureMap img = detail::synth_texture(params.image_size, cycles, theta, rng);
      MaskGrid mask = detail::inject_defects(img, params.defects_min, params.defects_max, rng);
      task.test_images.push_back(std::move(img));
      task.test_labels.push_back(1);
      task.test_masks.push_back(std::move(mask));
    }
    task.validate();
    tasks.push_back(std::move(task));
  }
  return tasks;
}

/// Convenience overload matching the (seed, num_tasks, image_size) call shape.
inline std::vector<Task> synth_task_stream(std::uint64_t seed, int num_tasks, int image_size) {
  SyntheticParams p;
  p.seed = seed;
  p.num_tasks = num_tasks;
  p.image_size = image_size;
  return synth_task_stream(p);
}

/// MVTec-layout loader: `<root>/<category>/{train/good, test/<kind>, ground_truth/<kind>}`.
/// Images are bilinearly resized to input_size and normalized to [0,1]; masks
/// use nearest-neighbor to stay binary. Implemented in src/mvtec.cpp.
Task load_mvtec_task(const std::string& root, const std::string& category, int input_size,
                     int task_id = 0);

/// Writes a task back out in the MVTec directory layout (PNG files).
void export_task_mvtec(const Task& task, const std::string& root, const std::string& category);

}  // namespace vad
