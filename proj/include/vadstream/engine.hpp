// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0
//
// Runs task streams under the six continual-learning strategies and collects
// per-task metric matrices, footprints, and resource reports.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vadstream/backbone.hpp"
#include "vadstream/data.hpp"
#include "vadstream/distill.hpp"
#include "vadstream/metrics.hpp"
#include "vadstream/replay.hpp"

namespace vad {

enum class StrategyKind { kJointTraining, kFineTuning, kReplay, kFeatureReplay, kFqReplay, kFpqReplay };

inline std::string strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::kJointTraining: return "JT";
    case StrategyKind::kFineTuning: return "FT";
    case StrategyKind::kReplay: return "Replay";
    case StrategyKind::kFeatureReplay: return "FeatureReplay";
    case StrategyKind::kFqReplay: return "FQReplay";
    case StrategyKind::kFpqReplay: return "FPQReplay";
  }
  throw InvalidInput("unknown strategy");
}

inline StrategyKind strategy_from_name(const std::string& s) {
  if (s == "JT") return StrategyKind::kJointTraining;
  if (s == "FT") return StrategyKind::kFineTuning;
  if (s == "Replay") return StrategyKind::kReplay;
  if (s == "FeatureReplay") return StrategyKind::kFeatureReplay;
  if (s == "FQReplay") return StrategyKind::kFqReplay;
  if (s == "FPQReplay") return StrategyKind::kFpqReplay;
  throw InvalidInput("unknown strategy: " + s);
}

struct OptimizerConfig {
  std::string method = "sgd";
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

struct StrategyConfig {
  StrategyKind kind = StrategyKind::kFineTuning;
  int memory_capacity = 100;
  std::optional<PqParams> pq_params;
  int epochs_per_task = 20;
  int batch_size = 8;
  OptimizerConfig optimizer;
  double replay_ratio = 1.0;  // memory batch size relative to the current batch
  std::uint64_t seed = 0;

  bool uses_memory() const {
    return kind == StrategyKind::kReplay || kind == StrategyKind::kFeatureReplay ||
           kind == StrategyKind::kFqReplay || kind == StrategyKind::kFpqReplay;
  }

  std::optional<Codec> replay_codec() const {
    switch (kind) {
      case StrategyKind::kReplay: return Codec::kRawImage;
      case StrategyKind::kFeatureReplay: return Codec::kRawFeature;
      case StrategyKind::kFqReplay: return Codec::kFqFeature;
      case StrategyKind::kFpqReplay: return Codec::kPqFeature;
      default: return std::nullopt;
    }
  }

  void validate(Variant variant) const {
    if (epochs_per_task < 1) throw InvalidInput("StrategyConfig: epochs_per_task must be >= 1");
    if (batch_size < 1) throw InvalidInput("StrategyConfig: batch_size must be >= 1");
    if (memory_capacity < 0) throw InvalidInput("StrategyConfig: negative memory capacity");
    if (replay_ratio < 0.0) throw InvalidInput("StrategyConfig: negative replay ratio");
    if (optimizer.method != "sgd") throw InvalidInput("StrategyConfig: unknown optimizer " + optimizer.method);
    const bool compressed = kind == StrategyKind::kFeatureReplay || kind == StrategyKind::kFqReplay ||
                            kind == StrategyKind::kFpqReplay;
    if (compressed && variant != Variant::kPaste) {
      throw InvalidInput("StrategyConfig: compressed replay (" + strategy_name(kind) +
                         ") requires the paste variant; stfpm supports raw-image replay only");
    }
    if (kind == StrategyKind::kFpqReplay && !pq_params.has_value()) {
      throw InvalidInput("StrategyConfig: FPQReplay requires pq parameters");
    }
    if (kind != StrategyKind::kFpqReplay && pq_params.has_value()) {
      throw InvalidInput("StrategyConfig: pq parameters only apply to FPQReplay");
    }
  }
};

enum class Role { kTeacher, kStudent };

inline Role role_from_name(const std::string& s) {
  if (s == "teacher") return Role::kTeacher;
  if (s == "student") return Role::kStudent;
  throw InvalidInput("unknown role: " + s);
}

/// Frozen teacher plus trainable student over one backbone spec. The student
/// is born as a copy of the teacher with its post-split stages reinitialized;
/// in the paste variant teacher and student hold the same frozen prefix object.
class ModelBundle {
 public:
  static ModelBundle build(const BackboneSpec& spec, Variant variant, std::uint64_t seed,
                           LevelCombine combine = LevelCombine::kMean);

  const BackboneSpec& spec() const { return spec_; }
  Variant variant() const { return variant_; }
  LevelCombine combine() const { return combine_; }
  const Backbone& teacher() const { return teacher_; }
  const Backbone& student() const { return student_; }
  Backbone& student() { return student_; }

  /// Tap features for one image through the chosen network end to end.
  std::vector<FeatureMap> taps(const FeatureMap& image, Role role) const;

  /// Tap features continuing from a stored split-layer map.
  std::vector<FeatureMap> taps_from_split(const FeatureMap& split_feat, Role role) const;

  FeatureMap forward_prefix(const FeatureMap& image) const { return teacher_.forward_prefix(image); }

  AnomalyMap score_image(const FeatureMap& image) const;

  /// Digest of everything that must never change during training: the teacher
  /// and the student's frozen prefix.
  std::uint64_t frozen_digest() const;

 private:
  ModelBundle(BackboneSpec spec, Variant variant, Backbone teacher, Backbone student,
              LevelCombine combine)
      : spec_(std::move(spec)),
        variant_(variant),
        teacher_(std::move(teacher)),
        student_(std::move(student)),
        combine_(combine) {}

  BackboneSpec spec_;
  Variant variant_;
  Backbone teacher_;
  Backbone student_;
  LevelCombine combine_;
};

/// SGD with momentum and weight decay over the student's trainable stages
/// (post-split up to the last tap).
class SgdOptimizer {
 public:
  SgdOptimizer(const OptimizerConfig& cfg, const Backbone& student);

  void step(Backbone& student, std::vector<std::vector<ConvGradT<float>>>& grads, float scale);

 private:
  OptimizerConfig cfg_;
  int first_stage_ = 1;
  int last_stage_ = 0;
  std::vector<std::vector<MatX<float>>> vel_w_;  // [stage][conv]
  std::vector<std::vector<VecX<float>>> vel_b_;
};

struct DataSourceConfig {
  enum class Kind { kSynthetic, kMvtec };
  Kind kind = Kind::kSynthetic;
  SyntheticParams synthetic;
  std::string mvtec_root;
  std::vector<std::string> mvtec_categories;
  int input_size = 256;  // mvtec resize target
};

struct ExperimentConfig {
  BackboneSpec backbone;
  Variant variant = Variant::kPaste;
  StrategyConfig strategy;
  DataSourceConfig data;
  LevelCombine combine = LevelCombine::kMean;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainStats {
  std::vector<double> epoch_loss;  // mean combined-batch loss per epoch
};

struct RunResult {
  nlohmann::json config_echo;
  std::vector<std::string> task_names;
  std::map<std::string, ResultMatrix> matrices;  // image_auroc, image_f1, pixel_auroc, pixel_f1, pixel_ap, pixel_aupro
  FootprintReport footprint;
  ResourceReport resources;
  std::vector<double> wall_clock_s;
  std::vector<TrainStats> train_stats;

  void save(const std::string& dir) const;
  static RunResult load(const std::string& dir);
  std::string metrics_csv() const;
};

/// Names of the six metric matrices every run produces.
const std::vector<std::string>& metric_names();

/// One training pass over a task: current-task batches, optionally mixed with
/// a decoded memory batch per step, one optimizer step per combined batch.
TrainStats train_on_task(ModelBundle& model, const Task& task, const StrategyConfig& strategy,
                         ReplayMemory* memory, SgdOptimizer& opt, std::mt19937_64& rng);

/// Metric row over all tasks seen so far.
std::map<std::string, std::vector<double>> evaluate_all(const ModelBundle& model,
                                                        const std::vector<Task>& tasks_seen);

/// Full experiment: joint training fills only the final row; sequential
/// strategies loop train -> memory update -> evaluate. When dump_maps_dir is
/// nonempty, the final model's anomaly maps are exported there.
RunResult run_experiment(const ExperimentConfig& config, const std::string& dump_maps_dir = "");

/// Loads or generates the task stream named by the config.
std::vector<Task> load_tasks(const DataSourceConfig& data);

}  // namespace vad
