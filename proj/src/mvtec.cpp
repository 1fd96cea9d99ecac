// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0
//
// MVTec directory layout:
//   <root>/<category>/train/good/*.png
//   <root>/<category>/test/<kind>/*.png        (kind "good" = normal)
//   <root>/<category>/ground_truth/<kind>/<stem>_mask.png

#include "vadstream/data.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "vadstream/image_io.hpp"

namespace vad {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".tif" ||
         ext == ".tiff";
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("mvtec: missing directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("mvtec: missing directory " + dir.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

fs::path mask_path_for(const fs::path& gt_dir, const fs::path& image_path) {
  const std::string stem = image_path.stem().string();
  const fs::path with_suffix = gt_dir / (stem + "_mask.png");
  if (fs::exists(with_suffix)) return with_suffix;
  const fs::path plain = gt_dir / (stem + ".png");
  if (fs::exists(plain)) return plain;
  throw IoError("mvtec: anomalous test image " + image_path.string() + " has no mask under " +
                gt_dir.string());
}

std::string index_name(std::size_t i) {
  std::ostringstream os;
  os << std::setw(3) << std::setfill('0') << i;
  return os.str();
}

}  // namespace

Task load_mvtec_task(const std::string& root, const std::string& category, int input_size,
                     int task_id) {
  if (input_size < 8) throw InvalidInput("load_mvtec_task: input_size too small");
  const fs::path base = fs::path(root) / category;
  if (!fs::is_directory(base)) throw IoError("mvtec: missing category directory " + base.string());

  Task task;
  task.task_id = task_id;
  task.name = category;

  for (const auto& file : sorted_images(base / "train" / "good")) {
    task.train_images.push_back(resize_image_bilinear(load_image_rgb(file.string()), input_size, input_size));
  }

  for (const auto& kind_dir : sorted_subdirs(base / "test")) {
    const std::string kind = kind_dir.filename().string();
    const bool normal = kind == "good";
    for (const auto& file : sorted_images(kind_dir)) {
      task.test_images.push_back(resize_image_bilinear(load_image_rgb(file.string()), input_size, input_size));
      task.test_labels.push_back(normal ? 0 : 1);
      if (normal) {
        task.test_masks.push_back(MaskGrid::Zero(input_size, input_size));
      } else {
        const fs::path mask_file = mask_path_for(base / "ground_truth" / kind, file);
        task.test_masks.push_back(resize_mask_nearest(load_mask(mask_file.string()), input_size, input_size));
      }
    }
  }

  task.validate();
  return task;
}

void export_task_mvtec(const Task& task, const std::string& root, const std::string& category) {
  const fs::path base = fs::path(root) / category;
  fs::create_directories(base / "train" / "good");
  fs::create_directories(base / "test" / "good");
  fs::create_directories(base / "test" / "defect");
  fs::create_directories(base / "ground_truth" / "defect");

  for (std::size_t i = 0; i < task.train_images.size(); ++i) {
    save_image_rgb((base / "train" / "good" / (index_name(i) + ".png")).string(), task.train_images[i]);
  }
  std::size_t n_good = 0, n_defect = 0;
  for (std::size_t i = 0; i < task.test_images.size(); ++i) {
    if (task.test_labels[i] == 0) {
      save_image_rgb((base / "test" / "good" / (index_name(n_good++) + ".png")).string(),
                     task.test_images[i]);
    } else {
      const std::string name = index_name(n_defect++);
      save_image_rgb((base / "test" / "defect" / (name + ".png")).string(), task.test_images[i]);
      save_mask_png((base / "ground_truth" / "defect" / (name + "_mask.png")).string(),
                    task.test_masks[i]);
    }
  }
}

}  // namespace vad
