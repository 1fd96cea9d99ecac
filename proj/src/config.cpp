// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#include "vadstream/config.hpp"

#include <fstream>

namespace vad {

BackboneSpec desk_backbone_spec(std::uint64_t seed, int input_size) {
  BackboneSpec spec;
  spec.input_shape = {3, input_size, input_size};
  spec.stages = {
      {16, {{3, 2}}, Nonlinearity::kRelu},
      {32, {{3, 2}}, Nonlinearity::kRelu},
      {64, {{3, 2}}, Nonlinearity::kRelu},
  };
  spec.tap_indices = {2, 3};
  spec.split_index = 1;
  spec.weights = WeightsSource::random(seed);
  return spec;
}

namespace {

BackboneSpec backbone_from_config(const nlohmann::json& j, std::uint64_t run_seed) {
  if (j.is_object() && j.contains("preset")) {
    const std::string preset = j.at("preset").get<std::string>();
    if (preset != "desk") throw InvalidInput("config: unknown backbone preset " + preset);
    const auto seed = j.value("seed", run_seed);
    const int input_size = j.value("input_size", 64);
    return desk_backbone_spec(seed, input_size);
  }
  return spec_from_json(j);
}

OptimizerConfig optimizer_from_json(const nlohmann::json& j) {
  OptimizerConfig opt;
  if (j.contains("method")) opt.method = j.at("method").get<std::string>();
  if (j.contains("learning_rate")) opt.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("momentum")) opt.momentum = j.at("momentum").get<double>();
  if (j.contains("weight_decay")) opt.weight_decay = j.at("weight_decay").get<double>();
  return opt;
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  try {
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.variant = variant_from_name(j.value("variant", std::string("paste")));
    cfg.combine = combine_from_name(j.value("combine", std::string("mean")));
    cfg.backbone = backbone_from_config(j.at("backbone"), cfg.seed);

    const auto& js = j.at("strategy");
    cfg.strategy.kind = strategy_from_name(js.at("kind").get<std::string>());
    cfg.strategy.memory_capacity = js.value("memory_capacity", 100);
    cfg.strategy.epochs_per_task = js.value("epochs_per_task", 20);
    cfg.strategy.batch_size = js.value("batch_size", 8);
    cfg.strategy.replay_ratio = js.value("replay_ratio", 1.0);
    cfg.strategy.seed = cfg.seed;
    if (js.contains("optimizer")) cfg.strategy.optimizer = optimizer_from_json(js.at("optimizer"));
    if (js.contains("pq")) {
      cfg.strategy.pq_params =
          PqParams{js.at("pq").value("num_subvectors", 6), js.at("pq").value("bits", 7)};
    }

    const auto& jd = j.at("data");
    const std::string kind = jd.at("kind").get<std::string>();
    if (kind == "synthetic") {
      cfg.data.kind = DataSourceConfig::Kind::kSynthetic;
      auto& sp = cfg.data.synthetic;
      sp.seed = jd.value("seed", cfg.seed);
      sp.num_tasks = jd.value("num_tasks", 5);
      sp.image_size = jd.value("image_size", 64);
      sp.defects_min = jd.value("defects_min", 1);
      sp.defects_max = jd.value("defects_max", 3);
      sp.train_per_task = jd.value("train_per_task", 40);
      sp.test_normal = jd.value("test_normal", 10);
      sp.test_anomalous = jd.value("test_anomalous", 10);
    } else if (kind == "mvtec") {
      cfg.data.kind = DataSourceConfig::Kind::kMvtec;
      cfg.data.mvtec_root = jd.value("root", std::string());
      if (cfg.data.mvtec_root.empty()) {
        const char* env = std::getenv("VADSTREAM_DATA_ROOT");
        if (env) cfg.data.mvtec_root = env;
      }
      cfg.data.mvtec_categories = jd.at("categories").get<std::vector<std::string>>();
      cfg.data.input_size = jd.value("input_size", 256);
    } else {
      throw InvalidInput("config: unknown data kind " + kind);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("config: malformed JSON: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("load_config: parse error in ") + path + ": " + e.what());
  }
  return config_from_json(j);
}

std::uint64_t content_hash(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace vad
