// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vadstream/config.hpp"
#include "vadstream/engine.hpp"
#include "vadstream/report.hpp"

namespace fs = std::filesystem;

namespace {

vad::Shape3 parse_shape(const std::string& s) {
  vad::Shape3 shape;
  char sep1 = 0, sep2 = 0;
  std::istringstream is(s);
  if (!(is >> shape.c >> sep1 >> shape.h >> sep2 >> shape.w) || sep1 != 'x' || sep2 != 'x') {
    throw vad::InvalidInput("expected shape as CxHxW, got " + s);
  }
  return shape;
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::ostringstream os;
  os << std::put_time(std::gmtime(&t), "%FT%TZ");
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw vad::IoError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int cmd_run(const std::string& config_path, const std::string& out_dir, bool dump_maps) {
  const std::string config_bytes = read_file(config_path);
  const vad::ExperimentConfig config = vad::load_config(config_path);

  fs::create_directories(out_dir);
  const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
  if (fs::exists(manifest_path)) {
    throw vad::InvalidInput("output directory already holds a run: " + manifest_path.string());
  }
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << vad::content_hash(config_bytes);
  nlohmann::json manifest{{"config_path", config_path},
                          {"config_hash", hash.str()},
                          {"output_dir", out_dir},
                          {"created_at", iso_timestamp()}};
  {
    std::ofstream mf(manifest_path);
    mf << manifest.dump(2) << "\n";
  }

  const vad::RunResult result =
      vad::run_experiment(config, dump_maps ? (fs::path(out_dir) / "maps").string() : std::string());
  result.save(out_dir);

  manifest["finished_at"] = iso_timestamp();
  manifest["status"] = "ok";
  std::ofstream mf(manifest_path);
  mf << manifest.dump(2) << "\n";
  std::cout << "run complete: " << out_dir << "\n";
  return 0;
}

int cmd_footprint(const std::string& codec_str, int capacity, const std::string& image,
                  const std::string& feature, long long feature_elems, int pq_m, int pq_b,
                  int tasks) {
  const vad::Codec codec = vad::codec_from_name(codec_str);
  vad::Shape3 image_shape{3, 256, 256};
  vad::Shape3 feature_shape{0, 0, 0};
  if (!image.empty()) image_shape = parse_shape(image);
  if (!feature.empty()) feature_shape = parse_shape(feature);
  if (feature_elems > 0) feature_shape = {static_cast<int>(feature_elems), 1, 1};
  std::optional<vad::PqParams> pq;
  if (pq_m > 0 || pq_b > 0) pq = vad::PqParams{pq_m, pq_b};

  const vad::FootprintReport r =
      vad::memory_footprint(codec, capacity, image_shape, feature_shape, pq, tasks);
  nlohmann::json j{{"codec", codec_str},
                   {"capacity", capacity},
                   {"per_sample_bytes", r.per_sample_bytes},
                   {"payload_bytes", r.payload_bytes},
                   {"codebook_bytes", r.codebook_bytes},
                   {"metadata_bytes", r.metadata_bytes},
                   {"total_bytes", r.total_bytes},
                   {"per_sample_mb", r.per_sample_bytes / 1e6},
                   {"total_mb", r.total_bytes / 1e6}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_validate(const std::string& config_path) {
  const vad::ExperimentConfig config = vad::load_config(config_path);
  nlohmann::json j{{"ok", true},
                   {"strategy", vad::strategy_name(config.strategy.kind)},
                   {"variant", vad::variant_name(config.variant)},
                   {"seed", config.seed}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"student-teacher visual anomaly detection on task streams"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  std::string run_config, run_out;
  bool dump_maps = false;
  run->add_option("--config", run_config, "experiment config JSON")->required();
  run->add_option("--out", run_out, "output directory (one run per directory)")->required();
  run->add_flag("--dump-maps", dump_maps, "export final anomaly maps (16-bit PNG + raw floats)");

  auto* footprint = app.add_subcommand("footprint", "replay memory footprint arithmetic");
  std::string fp_codec, fp_image, fp_feature;
  int fp_capacity = 100, fp_pq_m = 0, fp_pq_b = 0, fp_tasks = 1;
  long long fp_feature_elems = 0;
  footprint->add_option("--codec", fp_codec, "raw_image | raw_feature | fq_feature | pq_feature")->required();
  footprint->add_option("--capacity", fp_capacity, "stored sample count (default 100)");
  footprint->add_option("--image", fp_image, "image shape CxHxW (default 3x256x256)");
  footprint->add_option("--feature", fp_feature, "feature shape CxHxW");
  footprint->add_option("--feature-elems", fp_feature_elems, "feature element count (shape Nx1x1)");
  footprint->add_option("--pq-m", fp_pq_m, "pq subvector count");
  footprint->add_option("--pq-b", fp_pq_b, "pq bits per subvector");
  footprint->add_option("--tasks", fp_tasks, "codebook count for pq (default 1)");

  auto* report = app.add_subcommand("report", "aggregate run outputs into tables and plots");
  std::vector<std::string> report_runs;
  std::string report_out;
  report->add_option("--out", report_out, "report output directory")->required();
  report->add_option("runs", report_runs, "run directories containing result.json")->required();

  auto* validate = app.add_subcommand("validate-config", "parse and validate a config file");
  std::string validate_config;
  validate->add_option("--config", validate_config, "experiment config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_config, run_out, dump_maps);
    if (footprint->parsed()) {
      return cmd_footprint(fp_codec, fp_capacity, fp_image, fp_feature, fp_feature_elems, fp_pq_m,
                           fp_pq_b, fp_tasks);
    }
    if (report->parsed()) {
      vad::emit_report(report_runs, report_out);
      std::cout << "report written: " << report_out << "\n";
      return 0;
    }
    if (validate->parsed()) return cmd_validate(validate_config);
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
