// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#include "vadstream/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "vadstream/engine.hpp"

namespace vad {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct GroupKey {
  std::string strategy;
  std::string variant;
  bool operator<(const GroupKey& o) const {
    return strategy != o.strategy ? strategy < o.strategy : variant < o.variant;
  }
};

struct Stat {
  double mean = kUndefined;
  double lo = kUndefined;
  double hi = kUndefined;
  int n = 0;
};

Stat stat_of(const std::vector<double>& values) {
  Stat s;
  double sum = 0.0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    if (s.n == 0) {
      s.lo = s.hi = v;
    } else {
      s.lo = std::min(s.lo, v);
      s.hi = std::max(s.hi, v);
    }
    sum += v;
    ++s.n;
  }
  if (s.n > 0) s.mean = sum / s.n;
  return s;
}

// Minimal line/scatter SVG. Data fidelity lives in the CSVs; this is a glance aid.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add_series(const std::string& name, std::vector<std::pair<double, double>> points, bool line) {
    series_.push_back({name, std::move(points), line});
  }

  void write(const std::string& path) const {
    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
    bool first = true;
    for (const auto& s : series_) {
      for (const auto& [x, y] : s.points) {
        if (std::isnan(x) || std::isnan(y)) continue;
        if (first) {
          x_min = x_max = x;
          y_min = y_max = y;
          first = false;
        } else {
          x_min = std::min(x_min, x);
          x_max = std::max(x_max, x);
          y_min = std::min(y_min, y);
          y_max = std::max(y_max, y);
        }
      }
    }
    if (x_max == x_min) x_max = x_min + 1;
    if (y_max == y_min) y_max = y_min + 1;

    const double width = 640, height = 420, ml = 70, mr = 160, mt = 40, mb = 50;
    const auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * (width - ml - mr); };
    const auto py = [&](double y) { return height - mb - (y - y_min) / (y_max - y_min) * (height - mt - mb); };

    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    std::ostringstream os;
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << width / 2 << "' y='20' text-anchor='middle' font-size='15'>" << title_ << "</text>\n";
    os << "<text x='" << width / 2 << "' y='" << height - 10 << "' text-anchor='middle' font-size='12'>"
       << x_label_ << "</text>\n";
    os << "<text x='15' y='" << height / 2 << "' text-anchor='middle' font-size='12' transform='rotate(-90 15 "
       << height / 2 << ")'>" << y_label_ << "</text>\n";
    os << "<line x1='" << ml << "' y1='" << height - mb << "' x2='" << width - mr << "' y2='" << height - mb
       << "' stroke='black'/>\n";
    os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << height - mb
       << "' stroke='black'/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double xv = x_min + (x_max - x_min) * i / 4.0;
      const double yv = y_min + (y_max - y_min) * i / 4.0;
      os << "<text x='" << px(xv) << "' y='" << height - mb + 16 << "' text-anchor='middle' font-size='10'>"
         << fmt(std::round(xv * 100) / 100) << "</text>\n";
      os << "<text x='" << ml - 6 << "' y='" << py(yv) + 3 << "' text-anchor='end' font-size='10'>"
         << fmt(std::round(yv * 1000) / 1000) << "</text>\n";
    }
    int ci = 0;
    for (const auto& s : series_) {
      const char* color = colors[ci % 8];
      if (s.line) {
        os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.8' points='";
        for (const auto& [x, y] : s.points) {
          if (!std::isnan(x) && !std::isnan(y)) os << px(x) << "," << py(y) << " ";
        }
        os << "'/>\n";
      }
      for (const auto& [x, y] : s.points) {
        if (!std::isnan(x) && !std::isnan(y)) {
          os << "<circle cx='" << px(x) << "' cy='" << py(y) << "' r='3' fill='" << color << "'/>\n";
        }
      }
      os << "<text x='" << width - mr + 14 << "' y='" << mt + 14 + 16 * ci << "' font-size='11' fill='" << color
         << "'>" << s.name << "</text>\n";
      ++ci;
    }
    os << "</svg>\n";

    std::ofstream out(path);
    if (!out) throw IoError("SvgPlot: cannot write " + path);
    out << os.str();
  }

 private:
  struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
    bool line;
  };
  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
};

}  // namespace

void emit_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  if (run_dirs.empty()) throw InvalidInput("emit_report: no run directories");
  fs::create_directories(out_dir);

  std::map<GroupKey, std::vector<RunResult>> groups;
  int t_count = 0;
  for (const auto& dir : run_dirs) {
    RunResult r = RunResult::load(dir);
    GroupKey key{r.config_echo.at("strategy").at("kind").get<std::string>(),
                 r.config_echo.at("variant").get<std::string>()};
    t_count = std::max(t_count, r.matrices.begin()->second.num_tasks);
    groups[key].push_back(std::move(r));
  }

  // ---- metric-over-tasks curves ----
  std::ofstream curves(fs::path(out_dir) / "curves.csv");
  curves << "strategy,variant,metric,after_task,mean,min,max,runs\n";
  for (const auto& metric : metric_names()) {
    SvgPlot plot("running average " + metric, "tasks seen", metric);
    for (const auto& [key, runs] : groups) {
      std::vector<std::pair<double, double>> points;
      for (int t = 0; t < t_count; ++t) {
        std::vector<double> vals;
        for (const auto& r : runs) {
          auto it = r.matrices.find(metric);
          if (it != r.matrices.end() && t < it->second.num_tasks) vals.push_back(it->second.row_mean(t));
        }
        const Stat s = stat_of(vals);
        if (s.n == 0) continue;
        curves << key.strategy << "," << key.variant << "," << metric << "," << (t + 1) << ","
               << fmt(s.mean) << "," << fmt(s.lo) << "," << fmt(s.hi) << "," << s.n << "\n";
        points.emplace_back(t + 1, s.mean);
      }
      plot.add_series(key.strategy + "/" + key.variant, std::move(points), true);
    }
    plot.write((fs::path(out_dir) / ("curve_" + metric + ".svg")).string());
  }

  // ---- memory vs final pixel F1 ----
  std::ofstream scatter(fs::path(out_dir) / "memory_tradeoff.csv");
  scatter << "strategy,variant,additional_memory_mb,pixel_f1_mean,pixel_f1_min,pixel_f1_max,runs\n";
  SvgPlot tradeoff("memory vs final pixel F1", "additional memory [MB]", "final mean pixel F1");
  for (const auto& [key, runs] : groups) {
    std::vector<double> f1s, mem;
    for (const auto& r : runs) {
      f1s.push_back(r.matrices.at("pixel_f1").row_mean(t_count - 1));
      mem.push_back(static_cast<double>(r.footprint.total_bytes) / 1e6);
    }
    const Stat f1 = stat_of(f1s);
    const Stat m = stat_of(mem);
    scatter << key.strategy << "," << key.variant << "," << fmt(m.mean) << "," << fmt(f1.mean) << ","
            << fmt(f1.lo) << "," << fmt(f1.hi) << "," << f1.n << "\n";
    tradeoff.add_series(key.strategy + "/" + key.variant, {{m.mean, f1.mean}}, false);
  }
  tradeoff.write((fs::path(out_dir) / "memory_tradeoff.svg").string());

  // ---- summary table ----
  // joint-training reference per variant for the gap column
  std::map<std::string, double> jt_pixel_f1;
  for (const auto& [key, runs] : groups) {
    if (key.strategy != "JT") continue;
    std::vector<double> vals;
    for (const auto& r : runs) vals.push_back(r.matrices.at("pixel_f1").row_mean(t_count - 1));
    jt_pixel_f1[key.variant] = stat_of(vals).mean;
  }

  std::ofstream summary(fs::path(out_dir) / "summary.csv");
  summary << "strategy,variant,image_auroc,image_f1,pixel_auroc,pixel_f1,pixel_ap,pixel_aupro,"
             "architecture_memory_mb,additional_memory_mb,avg_forgetting,jt_gap,wall_clock_s\n";
  for (const auto& [key, runs] : groups) {
    summary << key.strategy << "," << key.variant;
    double pixel_f1_mean = kUndefined;
    for (const auto& metric : metric_names()) {
      std::vector<double> vals;
      for (const auto& r : runs) vals.push_back(r.matrices.at(metric).row_mean(t_count - 1));
      const Stat s = stat_of(vals);
      if (metric == "pixel_f1") pixel_f1_mean = s.mean;
      summary << "," << fmt(s.mean);
    }
    std::vector<double> arch, mem, forget, wall;
    for (const auto& r : runs) {
      arch.push_back(static_cast<double>(r.resources.architecture_bytes) / 1e6);
      mem.push_back(static_cast<double>(r.footprint.total_bytes) / 1e6);
      double total_wall = 0.0;
      for (double w : r.wall_clock_s) total_wall += w;
      wall.push_back(total_wall);
      if (key.strategy != "JT" && r.matrices.at("pixel_f1").num_tasks >= 2) {
        forget.push_back(forgetting(r.matrices.at("pixel_f1")).value);
      }
    }
    summary << "," << fmt(stat_of(arch).mean) << "," << fmt(stat_of(mem).mean) << ","
            << fmt(stat_of(forget).mean);
    auto jt = jt_pixel_f1.find(key.variant);
    if (jt != jt_pixel_f1.end() && !std::isnan(jt->second) && jt->second > 0 && !std::isnan(pixel_f1_mean)) {
      summary << "," << fmt(jt_gap(pixel_f1_mean, jt->second));
    } else {
      summary << ",";
    }
    summary << "," << fmt(stat_of(wall).mean) << "\n";
  }
}

}  // namespace vad
