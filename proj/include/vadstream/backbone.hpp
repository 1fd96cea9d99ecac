// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0
//
// Staged convolutional backbone with feature taps, a frozen shared prefix,
// and static MAC/parameter accounting. Convolutions run as im2col + GEMM.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "vadstream/common.hpp"
#include "vadstream/feature_map.hpp"

namespace vad {

enum class Nonlinearity { kRelu, kLeakyRelu, kIdentity };

inline std::string nonlinearity_name(Nonlinearity n) {
  switch (n) {
    case Nonlinearity::kRelu: return "relu";
    case Nonlinearity::kLeakyRelu: return "leaky_relu";
    case Nonlinearity::kIdentity: return "identity";
  }
  throw InvalidInput("unknown nonlinearity");
}

inline Nonlinearity nonlinearity_from_name(const std::string& s) {
  if (s == "relu") return Nonlinearity::kRelu;
  if (s == "leaky_relu") return Nonlinearity::kLeakyRelu;
  if (s == "identity") return Nonlinearity::kIdentity;
  throw InvalidInput("unknown nonlinearity: " + s);
}

struct ConvSpec {
  int kernel = 3;
  int stride = 1;
};

struct StageSpec {
  int out_channels = 0;
  std::vector<ConvSpec> convs;
  Nonlinearity nonlinearity = Nonlinearity::kRelu;
};

struct WeightsSource {
  enum class Kind { kRandom, kExternalFile };
  Kind kind = Kind::kRandom;
  std::uint64_t seed = 0;
  std::string path;

  static WeightsSource random(std::uint64_t seed) { return {Kind::kRandom, seed, ""}; }
  static WeightsSource external_file(std::string path) { return {Kind::kExternalFile, 0, std::move(path)}; }
};

struct BackboneSpec {
  Shape3 input_shape;
  std::vector<StageSpec> stages;
  std::vector<int> tap_indices;  // 1-based stage indices, ascending
  int split_index = 0;           // stages [1, split_index] form the frozen shared prefix
  WeightsSource weights;

  void validate() const {
    if (input_shape.c <= 0 || input_shape.h <= 0 || input_shape.w <= 0) {
      throw InvalidInput("BackboneSpec: input shape must be positive");
    }
    if (stages.empty()) throw InvalidInput("BackboneSpec: empty stage list");
    for (const auto& st : stages) {
      if (st.out_channels <= 0) throw InvalidInput("BackboneSpec: out_channels must be positive");
      if (st.convs.empty()) throw InvalidInput("BackboneSpec: stage without convs");
      for (const auto& cv : st.convs) {
        if (cv.kernel <= 0 || cv.kernel % 2 == 0) throw InvalidInput("BackboneSpec: kernel sizes must be odd");
        if (cv.stride != 1 && cv.stride != 2) throw InvalidInput("BackboneSpec: strides must be 1 or 2");
      }
    }
    if (tap_indices.empty()) throw InvalidInput("BackboneSpec: no tap indices");
    if (!std::is_sorted(tap_indices.begin(), tap_indices.end())) {
      throw InvalidInput("BackboneSpec: tap indices must be ascending");
    }
    for (int t : tap_indices) {
      if (t < 1 || t > static_cast<int>(stages.size())) {
        throw InvalidInput("BackboneSpec: tap index out of [1, num_stages]");
      }
    }
    if (split_index < 0 || split_index > static_cast<int>(stages.size())) {
      throw InvalidInput("BackboneSpec: split index out of range");
    }
    if (split_index >= tap_indices.front()) {
      throw InvalidInput("BackboneSpec: all taps must lie strictly after the split");
    }
    stage_output_shapes();  // throws if any stage collapses below 1x1
  }

  /// Output shape of each stage; index i is the output of stage i+1 (1-based stage numbering).
  std::vector<Shape3> stage_output_shapes() const {
    std::vector<Shape3> shapes;
    Shape3 cur = input_shape;
    for (const auto& st : stages) {
      for (const auto& cv : st.convs) {
        // odd kernel with same-padding k/2: out = floor((in - 1) / stride) + 1
        cur.h = (cur.h - 1) / cv.stride + 1;
        cur.w = (cur.w - 1) / cv.stride + 1;
        if (cur.h < 1 || cur.w < 1) throw InvalidInput("BackboneSpec: spatial extent collapsed");
      }
      cur.c = st.out_channels;
      shapes.push_back(cur);
    }
    return shapes;
  }

  Shape3 split_output_shape() const {
    if (split_index == 0) return input_shape;
    return stage_output_shapes()[split_index - 1];
  }
};

// ---------------------------------------------------------------------------
// JSON round-trip of the spec (external interface).

inline nlohmann::json spec_to_json(const BackboneSpec& spec) {
  nlohmann::json j;
  j["input"] = {spec.input_shape.c, spec.input_shape.h, spec.input_shape.w};
  j["stages"] = nlohmann::json::array();
  for (const auto& st : spec.stages) {
    nlohmann::json js;
    js["out_channels"] = st.out_channels;
    js["convs"] = nlohmann::json::array();
    for (const auto& cv : st.convs) js["convs"].push_back({cv.kernel, cv.stride});
    js["nonlinearity"] = nonlinearity_name(st.nonlinearity);
    j["stages"].push_back(js);
  }
  j["taps"] = spec.tap_indices;
  j["split"] = spec.split_index;
  if (spec.weights.kind == WeightsSource::Kind::kRandom) {
    j["weights"] = {{"kind", "random"}, {"seed", spec.weights.seed}};
  } else {
    j["weights"] = {{"kind", "file"}, {"path", spec.weights.path}};
  }
  return j;
}

inline BackboneSpec spec_from_json(const nlohmann::json& j) {
  BackboneSpec spec;
  try {
    const auto& in = j.at("input");
    spec.input_shape = {in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>()};
    for (const auto& js : j.at("stages")) {
      StageSpec st;
      st.out_channels = js.at("out_channels").get<int>();
      for (const auto& jc : js.at("convs")) {
        st.convs.push_back({jc.at(0).get<int>(), jc.at(1).get<int>()});
      }
      if (js.contains("nonlinearity")) {
        st.nonlinearity = nonlinearity_from_name(js.at("nonlinearity").get<std::string>());
      }
      spec.stages.push_back(std::move(st));
    }
    spec.tap_indices = j.at("taps").get<std::vector<int>>();
    spec.split_index = j.at("split").get<int>();
    if (j.contains("weights")) {
      const auto& jw = j.at("weights");
      const std::string kind = jw.at("kind").get<std::string>();
      if (kind == "random") {
        spec.weights = WeightsSource::random(jw.at("seed").get<std::uint64_t>());
      } else if (kind == "file") {
        spec.weights = WeightsSource::external_file(jw.at("path").get<std::string>());
      } else {
        throw InvalidInput("BackboneSpec: unknown weights kind " + kind);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("BackboneSpec: malformed JSON: ") + e.what());
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Layers.

template <typename Scalar>
MatX<Scalar> im2col(const FeatureMapT<Scalar>& x, int kernel, int stride) {
  const int pad = kernel / 2;
  const int hout = (x.height - 1) / stride + 1;
  const int wout = (x.width - 1) / stride + 1;
  const int cin = x.channels();
  MatX<Scalar> cols(static_cast<Eigen::Index>(cin) * kernel * kernel,
                    static_cast<Eigen::Index>(hout) * wout);
  cols.setZero();
  for (int oy = 0; oy < hout; ++oy) {
    for (int ox = 0; ox < wout; ++ox) {
      const Eigen::Index col = static_cast<Eigen::Index>(oy) * wout + ox;
      for (int ky = 0; ky < kernel; ++ky) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= x.height) continue;
        for (int kx = 0; kx < kernel; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= x.width) continue;
          cols.block(static_cast<Eigen::Index>(ky * kernel + kx) * cin, col, cin, 1) =
              x.data.col(static_cast<Eigen::Index>(iy) * x.width + ix);
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
FeatureMapT<Scalar> col2im(const MatX<Scalar>& cols, const Shape3& in_shape, int kernel, int stride) {
  const int pad = kernel / 2;
  const int hout = (in_shape.h - 1) / stride + 1;
  const int wout = (in_shape.w - 1) / stride + 1;
  FeatureMapT<Scalar> x(in_shape.c, in_shape.h, in_shape.w);
  for (int oy = 0; oy < hout; ++oy) {
    for (int ox = 0; ox < wout; ++ox) {
      const Eigen::Index col = static_cast<Eigen::Index>(oy) * wout + ox;
      for (int ky = 0; ky < kernel; ++ky) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= in_shape.h) continue;
        for (int kx = 0; kx < kernel; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= in_shape.w) continue;
          x.data.col(static_cast<Eigen::Index>(iy) * in_shape.w + ix) +=
              cols.block(static_cast<Eigen::Index>(ky * kernel + kx) * in_shape.c, col, in_shape.c, 1);
        }
      }
    }
  }
  return x;
}

template <typename Scalar>
struct ConvLayerT {
  MatX<Scalar> weight;  // out_channels x (in_channels * k * k); column block order (ky*k+kx)*cin + ci
  VecX<Scalar> bias;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;

  long long param_count() const { return weight.size() + bias.size(); }
};

template <typename Scalar>
struct ConvTraceT {
  MatX<Scalar> cols;    // im2col of this conv's input
  MatX<Scalar> preact;  // conv output before the nonlinearity
  Shape3 in_shape;
};

template <typename Scalar>
struct StageTraceT {
  std::vector<ConvTraceT<Scalar>> convs;
};

template <typename Scalar>
struct ConvGradT {
  MatX<Scalar> weight;
  VecX<Scalar> bias;
};

template <typename Scalar>
struct StageT {
  std::vector<ConvLayerT<Scalar>> convs;
  Nonlinearity act = Nonlinearity::kRelu;

  FeatureMapT<Scalar> forward(const FeatureMapT<Scalar>& input, StageTraceT<Scalar>* trace) const {
    FeatureMapT<Scalar> x = input;
    for (const auto& conv : convs) {
      const int hout = (x.height - 1) / conv.stride + 1;
      const int wout = (x.width - 1) / conv.stride + 1;
      MatX<Scalar> cols = im2col(x, conv.kernel, conv.stride);
      FeatureMapT<Scalar> y(conv.out_channels, hout, wout, x.stage_origin);
      y.data.noalias() = conv.weight * cols;
      y.data.colwise() += conv.bias;
      if (trace) {
        ConvTraceT<Scalar> ct;
        ct.cols = std::move(cols);
        ct.preact = y.data;
        ct.in_shape = x.shape();
        trace->convs.push_back(std::move(ct));
      }
      apply_activation(y.data);
      x = std::move(y);
    }
    return x;
  }

  /// Backpropagates dOut through the stage, accumulating parameter gradients;
  /// returns the gradient with respect to the stage input.
  FeatureMapT<Scalar> backward(const FeatureMapT<Scalar>& d_out, const StageTraceT<Scalar>& trace,
                               std::vector<ConvGradT<Scalar>>& grads) const {
    if (grads.size() != convs.size()) {
      grads.resize(convs.size());
      for (std::size_t i = 0; i < convs.size(); ++i) {
        grads[i].weight = MatX<Scalar>::Zero(convs[i].weight.rows(), convs[i].weight.cols());
        grads[i].bias = VecX<Scalar>::Zero(convs[i].bias.size());
      }
    }
    MatX<Scalar> dy = d_out.data;
    FeatureMapT<Scalar> dx;
    for (int i = static_cast<int>(convs.size()) - 1; i >= 0; --i) {
      const auto& conv = convs[i];
      const auto& ct = trace.convs[i];
      multiply_activation_grad(ct.preact, dy);
      grads[i].weight.noalias() += dy * ct.cols.transpose();
      grads[i].bias.noalias() += dy.rowwise().sum();
      const MatX<Scalar> dcols = conv.weight.transpose() * dy;
      dx = col2im(dcols, ct.in_shape, conv.kernel, conv.stride);
      dy = dx.data;
    }
    return dx;
  }

  void apply_activation(MatX<Scalar>& m) const {
    switch (act) {
      case Nonlinearity::kRelu:
        m = m.cwiseMax(Scalar(0));
        break;
      case Nonlinearity::kLeakyRelu:
        m = m.cwiseMax(m * Scalar(0.1));
        break;
      case Nonlinearity::kIdentity:
        break;
    }
  }

  void multiply_activation_grad(const MatX<Scalar>& preact, MatX<Scalar>& dy) const {
    switch (act) {
      case Nonlinearity::kRelu:
        dy = (preact.array() > Scalar(0)).template cast<Scalar>() * dy.array();
        break;
      case Nonlinearity::kLeakyRelu:
        dy = ((preact.array() > Scalar(0)).template cast<Scalar>() * Scalar(0.9) + Scalar(0.1)) *
             dy.array();
        break;
      case Nonlinearity::kIdentity:
        break;
    }
  }

  long long param_count() const {
    long long n = 0;
    for (const auto& c : convs) n += c.param_count();
    return n;
  }
};

// ---------------------------------------------------------------------------
// Backbone.

template <typename Scalar>
class BackboneT {
 public:
  explicit BackboneT(const BackboneSpec& spec) : spec_(spec) {
    spec_.validate();
    stage_shapes_ = spec_.stage_output_shapes();
    build_layers();
    if (spec_.weights.kind == WeightsSource::Kind::kRandom) {
      init_random(spec_.weights.seed);
    } else {
      load_weights(spec_.weights.path);
    }
  }

  const BackboneSpec& spec() const { return spec_; }
  const std::vector<Shape3>& stage_shapes() const { return stage_shapes_; }
  int num_stages() const { return static_cast<int>(stages_.size()); }
  StageT<Scalar>& stage(int index_1based) { return *stages_[index_1based - 1]; }
  const StageT<Scalar>& stage(int index_1based) const { return *stages_[index_1based - 1]; }

  /// Output of the frozen prefix (stages [1, split]); the identity when split is 0.
  FeatureMapT<Scalar> forward_prefix(const FeatureMapT<Scalar>& image) const {
    check_input(image);
    FeatureMapT<Scalar> x = image;
    x.stage_origin = 0;
    for (int s = 1; s <= spec_.split_index; ++s) {
      x = stages_[s - 1]->forward(x, nullptr);
      x.stage_origin = s;
    }
    return x;
  }

  std::vector<FeatureMapT<Scalar>> forward_prefix(const std::vector<FeatureMapT<Scalar>>& images) const {
    std::vector<FeatureMapT<Scalar>> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(forward_prefix(img));
    return out;
  }

  /// Tap outputs starting from a raw image (runs all stages).
  std::vector<FeatureMapT<Scalar>> forward_taps(const FeatureMapT<Scalar>& image) const {
    check_input(image);
    return run_taps(image, 1);
  }

  /// Tap outputs starting from a stored split-layer feature map.
  std::vector<FeatureMapT<Scalar>> forward_taps_from_split(const FeatureMapT<Scalar>& split_feat) const {
    if (split_feat.shape() != spec_.split_output_shape()) {
      throw InvalidInput("forward_taps_from_split: feature shape " + split_feat.shape().str() +
                         " does not match split output " + spec_.split_output_shape().str());
    }
    return run_taps(split_feat, spec_.split_index + 1);
  }

  /// Training forward of the post-split stages: returns tap outputs and fills
  /// the per-stage traces needed by backward_post_split.
  std::vector<FeatureMapT<Scalar>> forward_post_split_traced(
      const FeatureMapT<Scalar>& split_feat, std::vector<StageTraceT<Scalar>>& traces) const {
    if (split_feat.shape() != spec_.split_output_shape()) {
      throw InvalidInput("forward_post_split_traced: bad split feature shape");
    }
    traces.clear();
    traces.resize(stages_.size());
    std::vector<FeatureMapT<Scalar>> taps;
    FeatureMapT<Scalar> x = split_feat;
    for (int s = spec_.split_index + 1; s <= num_stages(); ++s) {
      x = stages_[s - 1]->forward(x, &traces[s - 1]);
      x.stage_origin = s;
      if (std::find(spec_.tap_indices.begin(), spec_.tap_indices.end(), s) != spec_.tap_indices.end()) {
        taps.push_back(x);
      }
      if (s == spec_.tap_indices.back()) break;
    }
    return taps;
  }

  /// Backpropagates per-tap gradients through the post-split stages,
  /// accumulating into grads (keyed by 1-based stage index).
  void backward_post_split(const std::vector<FeatureMapT<Scalar>>& d_taps,
                           const std::vector<StageTraceT<Scalar>>& traces,
                           std::vector<std::vector<ConvGradT<Scalar>>>& grads) const {
    if (grads.empty()) grads.resize(stages_.size());
    if (d_taps.size() != spec_.tap_indices.size()) {
      throw InvalidInput("backward_post_split: tap gradient count mismatch");
    }
    FeatureMapT<Scalar> dx;
    bool have_dx = false;
    int tap_cursor = static_cast<int>(spec_.tap_indices.size()) - 1;
    for (int s = spec_.tap_indices.back(); s > spec_.split_index; --s) {
      if (tap_cursor >= 0 && spec_.tap_indices[tap_cursor] == s) {
        if (have_dx) {
          dx.data += d_taps[tap_cursor].data;
        } else {
          dx = d_taps[tap_cursor];
          have_dx = true;
        }
        --tap_cursor;
      }
      dx = stages_[s - 1]->backward(dx, traces[s - 1], grads[s - 1]);
    }
  }

  /// Deep copy with its own weight storage.
  BackboneT clone() const {
    BackboneT copy(*this);
    for (auto& st : copy.stages_) st = std::make_shared<StageT<Scalar>>(*st);
    return copy;
  }

  /// Re-points prefix stages at another backbone's storage (the shared frozen
  /// prefix of the paste variant).
  void share_prefix_with(const BackboneT& other) {
    if (other.spec_.split_index != spec_.split_index) throw InvalidInput("share_prefix_with: split mismatch");
    for (int s = 1; s <= spec_.split_index; ++s) stages_[s - 1] = other.stages_[s - 1];
  }

  bool shares_prefix_with(const BackboneT& other) const {
    for (int s = 1; s <= spec_.split_index; ++s) {
      if (stages_[s - 1] != other.stages_[s - 1]) return false;
    }
    return spec_.split_index > 0;
  }

  /// Re-initializes the post-split stages from a fresh seed, leaving the
  /// prefix untouched.
  void reinit_post_split(std::uint64_t seed) {
    std::mt19937 rng(static_cast<std::uint32_t>(seed) ^ static_cast<std::uint32_t>(seed >> 32));
    for (int s = spec_.split_index + 1; s <= num_stages(); ++s) init_stage(*stages_[s - 1], rng);
  }

  /// FNV-1a digest over the parameter bytes of stages [first, last]; cheap
  /// frozen-weight audit.
  std::uint64_t weight_digest(int first_stage = 1, int last_stage = -1) const {
    if (last_stage < 0) last_stage = num_stages();
    std::uint64_t h = 1469598103934665603ULL;
    auto eat = [&h](const Scalar* p, std::size_t n) {
      const auto* bytes = reinterpret_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n * sizeof(Scalar); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
      }
    };
    for (int s = first_stage; s <= last_stage; ++s) {
      for (const auto& conv : stages_[s - 1]->convs) {
        eat(conv.weight.data(), static_cast<std::size_t>(conv.weight.size()));
        eat(conv.bias.data(), static_cast<std::size_t>(conv.bias.size()));
      }
    }
    return h;
  }

  std::uint64_t prefix_digest() const { return weight_digest(1, spec_.split_index); }

  void save_weights(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_weights: cannot open " + path);
    for (const auto& st : stages_) {
      for (const auto& conv : st->convs) {
        write_row_major(out, conv.weight);
        out.write(reinterpret_cast<const char*>(conv.bias.data()),
                  static_cast<std::streamsize>(conv.bias.size() * sizeof(float)));
      }
    }
  }

 private:
  void check_input(const FeatureMapT<Scalar>& image) const {
    if (image.shape() != spec_.input_shape) {
      throw InvalidInput("backbone forward: image shape " + image.shape().str() +
                         " does not match spec input " + spec_.input_shape.str());
    }
  }

  std::vector<FeatureMapT<Scalar>> run_taps(const FeatureMapT<Scalar>& start, int first_stage) const {
    std::vector<FeatureMapT<Scalar>> taps;
    FeatureMapT<Scalar> x = start;
    for (int s = first_stage; s <= num_stages(); ++s) {
      x = stages_[s - 1]->forward(x, nullptr);
      x.stage_origin = s;
      if (std::find(spec_.tap_indices.begin(), spec_.tap_indices.end(), s) != spec_.tap_indices.end()) {
        taps.push_back(x);
      }
      if (s == spec_.tap_indices.back()) break;
    }
    return taps;
  }

  void build_layers() {
    int cin = spec_.input_shape.c;
    for (const auto& st : spec_.stages) {
      auto stage = std::make_shared<StageT<Scalar>>();
      stage->act = st.nonlinearity;
      int c = cin;
      for (const auto& cv : st.convs) {
        ConvLayerT<Scalar> layer;
        layer.in_channels = c;
        layer.out_channels = st.out_channels;
        layer.kernel = cv.kernel;
        layer.stride = cv.stride;
        layer.weight.resize(st.out_channels, static_cast<Eigen::Index>(c) * cv.kernel * cv.kernel);
        layer.bias = VecX<Scalar>::Zero(st.out_channels);
        stage->convs.push_back(std::move(layer));
        c = st.out_channels;
      }
      stages_.push_back(std::move(stage));
      cin = st.out_channels;
    }
  }

  void init_stage(StageT<Scalar>& stage, std::mt19937& rng) {
    for (auto& conv : stage.convs) {
      const double stddev = std::sqrt(2.0 / static_cast<double>(conv.weight.cols()));
      std::normal_distribution<double> dist(0.0, stddev);
      for (Eigen::Index i = 0; i < conv.weight.size(); ++i) {
        conv.weight.data()[i] = static_cast<Scalar>(dist(rng));
      }
      conv.bias.setZero();
    }
  }

  void init_random(std::uint64_t seed) {
    std::mt19937 rng(static_cast<std::uint32_t>(seed) ^ static_cast<std::uint32_t>(seed >> 32));
    for (auto& st : stages_) init_stage(*st, rng);
  }

  static void write_row_major(std::ofstream& out, const MatX<Scalar>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const float v = static_cast<float>(m(r, c));
        out.write(reinterpret_cast<const char*>(&v), sizeof(float));
      }
    }
  }

  void load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_weights: cannot open " + path);
    in.seekg(0, std::ios::end);
    const auto file_bytes = static_cast<long long>(in.tellg());
    in.seekg(0);
    long long expected = 0;
    for (const auto& st : stages_) expected += st->param_count();
    if (file_bytes != expected * static_cast<long long>(sizeof(float))) {
      throw IoError("load_weights: " + path + " holds " + std::to_string(file_bytes / sizeof(float)) +
                    " parameters, spec declares " + std::to_string(expected));
    }
    auto read_f32 = [&in]() {
      float v;
      in.read(reinterpret_cast<char*>(&v), sizeof(float));
      return v;
    };
    for (auto& st : stages_) {
      for (auto& conv : st->convs) {
        for (Eigen::Index r = 0; r < conv.weight.rows(); ++r) {
          for (Eigen::Index c = 0; c < conv.weight.cols(); ++c) {
            conv.weight(r, c) = static_cast<Scalar>(read_f32());
          }
        }
        for (Eigen::Index i = 0; i < conv.bias.size(); ++i) conv.bias(i) = static_cast<Scalar>(read_f32());
      }
    }
  }

  BackboneSpec spec_;
  std::vector<std::shared_ptr<StageT<Scalar>>> stages_;
  std::vector<Shape3> stage_shapes_;
};

using Backbone = BackboneT<float>;

// ---------------------------------------------------------------------------
// Static resource accounting.

enum class Variant { kStfpm, kPaste };

inline std::string variant_name(Variant v) { return v == Variant::kStfpm ? "stfpm" : "paste"; }

inline Variant variant_from_name(const std::string& s) {
  if (s == "stfpm") return Variant::kStfpm;
  if (s == "paste") return Variant::kPaste;
  throw InvalidInput("unknown variant: " + s);
}

struct ResourceReport {
  long long macs_inference = 0;
  long long macs_training = 0;
  long long params_total = 0;
  long long params_trainable = 0;
  long long architecture_bytes = 0;
};

namespace detail {

struct StageCost {
  long long macs = 0;
  long long params = 0;
};

inline std::vector<StageCost> per_stage_costs(const BackboneSpec& spec) {
  std::vector<StageCost> costs;
  int cin = spec.input_shape.c;
  int h = spec.input_shape.h;
  int w = spec.input_shape.w;
  for (const auto& st : spec.stages) {
    StageCost cost;
    int c = cin;
    for (const auto& cv : st.convs) {
      h = (h - 1) / cv.stride + 1;
      w = (w - 1) / cv.stride + 1;
      cost.macs += 1LL * cv.kernel * cv.kernel * c * st.out_channels * h * w;
      cost.params += 1LL * st.out_channels * c * cv.kernel * cv.kernel + st.out_channels;
      c = st.out_channels;
    }
    costs.push_back(cost);
    cin = st.out_channels;
  }
  return costs;
}

}  // namespace detail

/// Static MAC/parameter/memory accounting. Inference runs teacher and student;
/// the paste variant evaluates the shared prefix once. Training counts frozen
/// stages forward-only and trainable stages at 3x forward (backward = 2x).
inline ResourceReport count_resources(const BackboneSpec& spec, Variant variant) {
  spec.validate();
  const auto costs = detail::per_stage_costs(spec);
  long long prefix_macs = 0, post_macs = 0, prefix_params = 0, post_params = 0;
  for (int s = 1; s <= static_cast<int>(costs.size()); ++s) {
    if (s <= spec.split_index) {
      prefix_macs += costs[s - 1].macs;
      prefix_params += costs[s - 1].params;
    } else {
      post_macs += costs[s - 1].macs;
      post_params += costs[s - 1].params;
    }
  }
  ResourceReport r;
  if (variant == Variant::kStfpm) {
    r.macs_inference = 2 * (prefix_macs + post_macs);
    r.macs_training = 2 * prefix_macs + 4 * post_macs;
    r.params_total = 2 * (prefix_params + post_params);
  } else {
    r.macs_inference = prefix_macs + 2 * post_macs;
    r.macs_training = prefix_macs + 4 * post_macs;
    r.params_total = prefix_params + 2 * post_params;
  }
  r.params_trainable = post_params;
  r.architecture_bytes = 4 * r.params_total;
  return r;
}

}  // namespace vad
