// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#include "vadstream/engine.hpp"

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vadstream/image_io.hpp"

namespace vad {

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

nlohmann::json json_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelBundle

ModelBundle ModelBundle::build(const BackboneSpec& spec, Variant variant, std::uint64_t seed,
                               LevelCombine combine) {
  spec.validate();
  Backbone teacher(spec);
  Backbone student = teacher.clone();
  student.reinit_post_split(mix_seed(seed, 0x57d1ULL));
  if (variant == Variant::kPaste) {
    student.share_prefix_with(teacher);
  }
  return ModelBundle(spec, variant, std::move(teacher), std::move(student), combine);
}

std::vector<FeatureMap> ModelBundle::taps(const FeatureMap& image, Role role) const {
  return role == Role::kTeacher ? teacher_.forward_taps(image) : student_.forward_taps(image);
}

std::vector<FeatureMap> ModelBundle::taps_from_split(const FeatureMap& split_feat, Role role) const {
  return role == Role::kTeacher ? teacher_.forward_taps_from_split(split_feat)
                                : student_.forward_taps_from_split(split_feat);
}

AnomalyMap ModelBundle::score_image(const FeatureMap& image) const {
  // teacher and student prefixes are identical and frozen, so one prefix pass
  // feeds both tails
  const FeatureMap split = teacher_.forward_prefix(image);
  const auto t = teacher_.forward_taps_from_split(split);
  const auto s = student_.forward_taps_from_split(split);
  return anomaly_map(t, s, image.height, image.width, combine_);
}

std::uint64_t ModelBundle::frozen_digest() const {
  return teacher_.weight_digest() * 1099511628211ULL + student_.prefix_digest();
}

// ---------------------------------------------------------------------------
// Optimizer

SgdOptimizer::SgdOptimizer(const OptimizerConfig& cfg, const Backbone& student) : cfg_(cfg) {
  first_stage_ = student.spec().split_index + 1;
  last_stage_ = student.spec().tap_indices.back();
  for (int s = first_stage_; s <= last_stage_; ++s) {
    const auto& stage = student.stage(s);
    std::vector<MatX<float>> vw;
    std::vector<VecX<float>> vb;
    for (const auto& conv : stage.convs) {
      vw.push_back(MatX<float>::Zero(conv.weight.rows(), conv.weight.cols()));
      vb.push_back(VecX<float>::Zero(conv.bias.size()));
    }
    vel_w_.push_back(std::move(vw));
    vel_b_.push_back(std::move(vb));
  }
}

void SgdOptimizer::step(Backbone& student, std::vector<std::vector<ConvGradT<float>>>& grads,
                        float scale) {
  const float lr = static_cast<float>(cfg_.learning_rate);
  const float mu = static_cast<float>(cfg_.momentum);
  const float wd = static_cast<float>(cfg_.weight_decay);
  for (int s = first_stage_; s <= last_stage_; ++s) {
    auto& stage = student.stage(s);
    auto& g_stage = grads[s - 1];
    if (g_stage.empty()) continue;  // stage received no gradient this step
    auto& vw = vel_w_[s - first_stage_];
    auto& vb = vel_b_[s - first_stage_];
    for (std::size_t c = 0; c < stage.convs.size(); ++c) {
      auto& conv = stage.convs[c];
      vw[c] = mu * vw[c] + (g_stage[c].weight * scale + wd * conv.weight);
      vb[c] = mu * vb[c] + (g_stage[c].bias * scale + wd * conv.bias);
      conv.weight -= lr * vw[c];
      conv.bias -= lr * vb[c];
      g_stage[c].weight.setZero();
      g_stage[c].bias.setZero();
    }
  }
}

// ---------------------------------------------------------------------------
// Training

TrainStats train_on_task(ModelBundle& model, const Task& task, const StrategyConfig& strategy,
                         ReplayMemory* memory, SgdOptimizer& opt, std::mt19937_64& rng) {
  if (memory && strategy.uses_memory()) {
    const Codec expected = *strategy.replay_codec();
    if (memory->codec() != expected) {
      throw InvalidInput("train_on_task: memory codec " + codec_name(memory->codec()) +
                         " does not match strategy codec " + codec_name(expected));
    }
  }
  const bool mix_memory = strategy.uses_memory() && memory != nullptr && !memory->empty();

  Backbone& student = model.student();
  const Backbone& teacher = model.teacher();
  std::vector<std::vector<ConvGradT<float>>> grads(student.num_stages());

  TrainStats stats;
  const int n_train = static_cast<int>(task.train_images.size());
  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < strategy.epochs_per_task; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int steps = 0;
    for (int begin = 0; begin < n_train; begin += strategy.batch_size) {
      const int end = std::min(n_train, begin + strategy.batch_size);

      // split-layer features of the combined batch
      std::vector<FeatureMap> splits;
      splits.reserve(static_cast<std::size_t>(end - begin) * 2);
      for (int i = begin; i < end; ++i) {
        splits.push_back(model.forward_prefix(task.train_images[order[i]]));
      }
      if (mix_memory) {
        const int want = static_cast<int>(std::lround(strategy.replay_ratio * (end - begin)));
        const int n_mem = std::min(want, memory->size());
        if (n_mem >= 1) {
          ReplayMemory::Batch batch = memory->draw(n_mem, rng);
          for (auto& sample : batch.samples) {
            if (memory->codec() == Codec::kRawImage) {
              splits.push_back(model.forward_prefix(sample));
            } else {
              splits.push_back(std::move(sample));  // stored at the split layer already
            }
          }
        }
      }

      float batch_loss = 0.0f;
      for (const auto& split : splits) {
        const auto teacher_taps = teacher.forward_taps_from_split(split);
        std::vector<StageTraceT<float>> traces;
        const auto student_taps = student.forward_post_split_traced(split, traces);
        std::vector<FeatureMap> d_taps;
        batch_loss += distillation_loss_grad(teacher_taps, student_taps, d_taps);
        student.backward_post_split(d_taps, traces, grads);
      }
      opt.step(student, grads, 1.0f / static_cast<float>(splits.size()));
      epoch_loss += batch_loss / static_cast<double>(splits.size());
      ++steps;
    }
    stats.epoch_loss.push_back(steps > 0 ? epoch_loss / steps : 0.0);
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Evaluation

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"image_auroc", "image_f1",  "pixel_auroc",
                                                 "pixel_f1",    "pixel_ap", "pixel_aupro"};
  return names;
}

std::map<std::string, std::vector<double>> evaluate_all(const ModelBundle& model,
                                                        const std::vector<Task>& tasks_seen) {
  std::map<std::string, std::vector<double>> rows;
  for (const auto& name : metric_names()) rows[name] = {};

  for (const auto& task : tasks_seen) {
    std::vector<GridX<float>> maps;
    ScoredSet image_set;
    ScoredSet pixel_set;
    maps.reserve(task.test_images.size());
    for (std::size_t i = 0; i < task.test_images.size(); ++i) {
      AnomalyMap map = model.score_image(task.test_images[i]);
      image_set.scores.push_back(image_score(map));
      image_set.labels.push_back(task.test_labels[i]);
      const auto& mask = task.test_masks[i];
      for (int y = 0; y < map.height(); ++y) {
        for (int x = 0; x < map.width(); ++x) {
          pixel_set.scores.push_back(map.data(y, x));
          pixel_set.labels.push_back(mask(y, x));
        }
      }
      maps.push_back(std::move(map.data));
    }

    const bool has_pos_image = image_set.num_positives() > 0;
    const bool has_pos_pixel = pixel_set.num_positives() > 0;
    rows["image_auroc"].push_back(roc_auc(image_set));
    rows["image_f1"].push_back(has_pos_image ? f1_max(image_set).f1 : kUndefined);
    rows["pixel_auroc"].push_back(roc_auc(pixel_set));
    rows["pixel_f1"].push_back(has_pos_pixel ? f1_max(pixel_set).f1 : kUndefined);
    rows["pixel_ap"].push_back(has_pos_pixel ? pr_auc(pixel_set) : kUndefined);
    rows["pixel_aupro"].push_back(has_pos_pixel ? aupro(maps, task.test_masks) : kUndefined);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Experiment driver

std::vector<Task> load_tasks(const DataSourceConfig& data) {
  if (data.kind == DataSourceConfig::Kind::kSynthetic) {
    return synth_task_stream(data.synthetic);
  }
  if (data.mvtec_categories.empty()) throw InvalidInput("load_tasks: no mvtec categories listed");
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < data.mvtec_categories.size(); ++i) {
    tasks.push_back(load_mvtec_task(data.mvtec_root, data.mvtec_categories[i], data.input_size,
                                    static_cast<int>(i)));
  }
  return tasks;
}

void ExperimentConfig::validate() const {
  backbone.validate();
  strategy.validate(variant);
  if (data.kind == DataSourceConfig::Kind::kMvtec) {
    if (data.mvtec_root.empty()) throw InvalidInput("ExperimentConfig: mvtec root missing");
    if (data.mvtec_categories.empty()) throw InvalidInput("ExperimentConfig: mvtec categories missing");
    if (backbone.input_shape.h != data.input_size || backbone.input_shape.w != data.input_size) {
      throw InvalidInput("ExperimentConfig: backbone input size does not match data input size");
    }
  } else {
    if (backbone.input_shape.h != data.synthetic.image_size ||
        backbone.input_shape.w != data.synthetic.image_size) {
      throw InvalidInput("ExperimentConfig: backbone input size does not match synthetic image size");
    }
  }
  if (strategy.kind == StrategyKind::kFpqReplay) {
    const int split_channels = backbone.split_output_shape().c;
    if (split_channels % strategy.pq_params->num_subvectors != 0) {
      throw InvalidInput("ExperimentConfig: pq num_subvectors must divide the split layer channels (" +
                         std::to_string(split_channels) + ")");
    }
  }
}

RunResult run_experiment(const ExperimentConfig& config, const std::string& dump_maps_dir) {
  config.validate();
  const std::vector<Task> tasks = load_tasks(config.data);
  const int t_count = static_cast<int>(tasks.size());

  ModelBundle model =
      ModelBundle::build(config.backbone, config.variant, mix_seed(config.seed, 0x2ULL), config.combine);
  const std::uint64_t frozen_before = model.frozen_digest();
  SgdOptimizer opt(config.strategy.optimizer, model.student());
  std::mt19937_64 rng(mix_seed(config.seed, 0x4ULL));

  RunResult result;
  for (const auto& task : tasks) result.task_names.push_back(task.name);
  for (const auto& name : metric_names()) result.matrices.emplace(name, ResultMatrix(name, t_count));
  result.resources = count_resources(config.backbone, config.variant);

  const auto fill_row = [&](int after_task, const std::vector<Task>& seen) {
    auto rows = evaluate_all(model, seen);
    for (const auto& name : metric_names()) {
      for (int j = 0; j < static_cast<int>(rows[name].size()); ++j) {
        result.matrices.at(name).set(after_task, j, rows[name][j]);
      }
    }
  };

  if (config.strategy.kind == StrategyKind::kJointTraining) {
    Task joint;
    joint.task_id = 0;
    joint.name = "joint";
    for (const auto& task : tasks) {
      joint.train_images.insert(joint.train_images.end(), task.train_images.begin(),
                                task.train_images.end());
    }
    const auto start = std::chrono::steady_clock::now();
    result.train_stats.push_back(train_on_task(model, joint, config.strategy, nullptr, opt, rng));
    result.wall_clock_s.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    fill_row(t_count - 1, tasks);
  } else {
    std::optional<ReplayMemory> memory;
    if (config.strategy.uses_memory()) {
      memory.emplace(*config.strategy.replay_codec(), config.strategy.memory_capacity,
                     mix_seed(config.seed, 0x5ULL), config.strategy.pq_params);
    }
    std::vector<Task> seen;
    for (int t = 0; t < t_count; ++t) {
      const auto start = std::chrono::steady_clock::now();
      result.train_stats.push_back(
          train_on_task(model, tasks[t], config.strategy, memory ? &*memory : nullptr, opt, rng));
      if (memory) {
        if (*config.strategy.replay_codec() == Codec::kRawImage) {
          memory->update(tasks[t].task_id, tasks[t].train_images);
        } else {
          std::vector<FeatureMap> features;
          features.reserve(tasks[t].train_images.size());
          for (const auto& img : tasks[t].train_images) features.push_back(model.forward_prefix(img));
          memory->update(tasks[t].task_id, features);
        }
      }
      result.wall_clock_s.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      seen.push_back(tasks[t]);
      fill_row(t, seen);
    }
    if (memory) result.footprint = memory->footprint();
  }

  if (model.frozen_digest() != frozen_before) {
    throw std::logic_error("run_experiment: frozen teacher/prefix weights changed during training");
  }

  if (!dump_maps_dir.empty()) {
    std::filesystem::create_directories(dump_maps_dir);
    for (const auto& task : tasks) {
      for (std::size_t i = 0; i < task.test_images.size(); ++i) {
        const AnomalyMap map = model.score_image(task.test_images[i]);
        const std::string stem =
            (std::filesystem::path(dump_maps_dir) / (task.name + "_" + std::to_string(i))).string();
        export_anomaly_map_png16(stem + ".png", map.data);
        export_anomaly_map_raw(stem + ".raw", map.data);
      }
    }
  }

  nlohmann::json echo;
  echo["seed"] = config.seed;
  echo["variant"] = variant_name(config.variant);
  echo["combine"] = combine_name(config.combine);
  echo["backbone"] = spec_to_json(config.backbone);
  echo["strategy"] = {{"kind", strategy_name(config.strategy.kind)},
                      {"memory_capacity", config.strategy.memory_capacity},
                      {"epochs_per_task", config.strategy.epochs_per_task},
                      {"batch_size", config.strategy.batch_size},
                      {"replay_ratio", config.strategy.replay_ratio},
                      {"optimizer",
                       {{"method", config.strategy.optimizer.method},
                        {"learning_rate", config.strategy.optimizer.learning_rate},
                        {"momentum", config.strategy.optimizer.momentum},
                        {"weight_decay", config.strategy.optimizer.weight_decay}}}};
  if (config.strategy.pq_params) {
    echo["strategy"]["pq"] = {{"num_subvectors", config.strategy.pq_params->num_subvectors},
                              {"bits", config.strategy.pq_params->bits}};
  }
  if (config.data.kind == DataSourceConfig::Kind::kSynthetic) {
    const auto& sp = config.data.synthetic;
    echo["data"] = {{"kind", "synthetic"},         {"seed", sp.seed},
                    {"num_tasks", sp.num_tasks},   {"image_size", sp.image_size},
                    {"defects_min", sp.defects_min}, {"defects_max", sp.defects_max},
                    {"train_per_task", sp.train_per_task}, {"test_normal", sp.test_normal},
                    {"test_anomalous", sp.test_anomalous}};
  } else {
    echo["data"] = {{"kind", "mvtec"},
                    {"root", config.data.mvtec_root},
                    {"categories", config.data.mvtec_categories},
                    {"input_size", config.data.input_size}};
  }
  result.config_echo = std::move(echo);
  return result;
}

// ---------------------------------------------------------------------------
// Result persistence

std::string RunResult::metrics_csv() const {
  std::ostringstream os;
  os << "after_task,eval_task,metric,value\n";
  const int t_count = matrices.begin()->second.num_tasks;
  for (int t = 0; t < t_count; ++t) {
    for (int j = 0; j <= t; ++j) {
      for (const auto& name : metric_names()) {
        const auto& m = matrices.at(name);
        if (m.defined(t, j)) {
          os << t << "," << j << "," << name << "," << fmt_double(m(t, j)) << "\n";
        }
      }
    }
  }
  return os.str();
}

void RunResult::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json j;
  j["config"] = config_echo;
  j["tasks"] = task_names;
  j["matrices"] = nlohmann::json::object();
  for (const auto& [name, m] : matrices) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : m.rows) {
      nlohmann::json jr = nlohmann::json::array();
      for (double v : row) jr.push_back(json_or_null(v));
      rows.push_back(jr);
    }
    j["matrices"][name] = rows;
  }
  j["footprint"] = {{"per_sample_bytes", footprint.per_sample_bytes},
                    {"payload_bytes", footprint.payload_bytes},
                    {"codebook_bytes", footprint.codebook_bytes},
                    {"metadata_bytes", footprint.metadata_bytes},
                    {"total_bytes", footprint.total_bytes}};
  j["resources"] = {{"macs_inference", resources.macs_inference},
                    {"macs_training", resources.macs_training},
                    {"params_total", resources.params_total},
                    {"params_trainable", resources.params_trainable},
                    {"architecture_bytes", resources.architecture_bytes}};
  j["wall_clock_s"] = wall_clock_s;
  j["train_loss"] = nlohmann::json::array();
  for (const auto& ts : train_stats) j["train_loss"].push_back(ts.epoch_loss);

  std::ofstream jf(fs::path(dir) / "result.json");
  if (!jf) throw IoError("RunResult::save: cannot write result.json in " + dir);
  jf << j.dump(2) << "\n";

  std::ofstream cf(fs::path(dir) / "metrics.csv", std::ios::binary);
  if (!cf) throw IoError("RunResult::save: cannot write metrics.csv in " + dir);
  cf << metrics_csv();
}

RunResult RunResult::load(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream jf(fs::path(dir) / "result.json");
  if (!jf) throw IoError("RunResult::load: no result.json in " + dir);
  nlohmann::json j;
  try {
    jf >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("RunResult::load: malformed result.json: ") + e.what());
  }

  RunResult r;
  try {
    r.config_echo = j.at("config");
    r.task_names = j.at("tasks").get<std::vector<std::string>>();
    for (const auto& [name, rows] : j.at("matrices").items()) {
      ResultMatrix m(name, static_cast<int>(rows.size()));
      for (int t = 0; t < m.num_tasks; ++t) {
        for (int col = 0; col <= t; ++col) {
          const auto& cell = rows.at(t).at(col);
          m.set(t, col, cell.is_null() ? kUndefined : cell.get<double>());
        }
      }
      r.matrices.emplace(name, std::move(m));
    }
    const auto& jf2 = j.at("footprint");
    r.footprint.per_sample_bytes = jf2.at("per_sample_bytes").get<long long>();
    r.footprint.payload_bytes = jf2.at("payload_bytes").get<long long>();
    r.footprint.codebook_bytes = jf2.at("codebook_bytes").get<long long>();
    r.footprint.metadata_bytes = jf2.at("metadata_bytes").get<long long>();
    r.footprint.total_bytes = jf2.at("total_bytes").get<long long>();
    const auto& jr = j.at("resources");
    r.resources.macs_inference = jr.at("macs_inference").get<long long>();
    r.resources.macs_training = jr.at("macs_training").get<long long>();
    r.resources.params_total = jr.at("params_total").get<long long>();
    r.resources.params_trainable = jr.at("params_trainable").get<long long>();
    r.resources.architecture_bytes = jr.at("architecture_bytes").get<long long>();
    r.wall_clock_s = j.at("wall_clock_s").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("RunResult::load: missing field: ") + e.what());
  }
  return r;
}

}  // namespace vad
