// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0
//
// Fixed-capacity replay memory with balanced per-task quotas and four
// interchangeable codecs. Payload byte counts are exact: the per-entry files
// written by persist() contain nothing but the accounted payload.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vadstream/common.hpp"
#include "vadstream/feature_map.hpp"
#include "vadstream/fq.hpp"
#include "vadstream/pq.hpp"

namespace vad {

enum class Codec { kRawImage, kRawFeature, kFqFeature, kPqFeature };

inline std::string codec_name(Codec c) {
  switch (c) {
    case Codec::kRawImage: return "raw_image";
    case Codec::kRawFeature: return "raw_feature";
    case Codec::kFqFeature: return "fq_feature";
    case Codec::kPqFeature: return "pq_feature";
  }
  throw InvalidInput("unknown codec");
}

inline Codec codec_from_name(const std::string& s) {
  if (s == "raw_image") return Codec::kRawImage;
  if (s == "raw_feature") return Codec::kRawFeature;
  if (s == "fq_feature") return Codec::kFqFeature;
  if (s == "pq_feature") return Codec::kPqFeature;
  throw InvalidInput("unknown codec: " + s);
}

struct PqParams {
  int num_subvectors = 6;
  int bits = 7;

  int code_bytes() const { return (bits + 7) / 8; }
};

struct FootprintReport {
  long long per_sample_bytes = 0;
  long long payload_bytes = 0;
  long long codebook_bytes = 0;
  long long metadata_bytes = 0;
  long long total_bytes = 0;
};

/// Static footprint arithmetic (1 MB = 10^6 bytes when displayed).
///   raw_image:   3*H*W bytes per sample (8-bit RGB)
///   raw_feature: 4*C*h*w (float32)
///   fq_feature:  C*h*w + 8 (codes plus min and scale)
///   pq_feature:  (h*w) * m * ceil(b/8), codebooks itemized separately
inline FootprintReport memory_footprint(Codec codec, int capacity, const Shape3& image_shape,
                                        const Shape3& feature_shape,
                                        std::optional<PqParams> pq = std::nullopt,
                                        int num_tasks = 1) {
  if (capacity < 0) throw InvalidInput("memory_footprint: negative capacity");
  FootprintReport r;
  switch (codec) {
    case Codec::kRawImage:
      if (image_shape.c != 3 || image_shape.h <= 0 || image_shape.w <= 0) {
        throw InvalidInput("memory_footprint: raw_image needs a positive 3xHxW image shape");
      }
      r.per_sample_bytes = 3LL * image_shape.h * image_shape.w;
      break;
    case Codec::kRawFeature:
      if (feature_shape.elems() <= 0) throw InvalidInput("memory_footprint: bad feature shape");
      r.per_sample_bytes = 4LL * feature_shape.elems();
      break;
    case Codec::kFqFeature:
      if (feature_shape.elems() <= 0) throw InvalidInput("memory_footprint: bad feature shape");
      r.per_sample_bytes = feature_shape.elems() + 8;
      break;
    case Codec::kPqFeature: {
      if (!pq.has_value()) throw InvalidInput("memory_footprint: pq codec requires pq params");
      if (feature_shape.elems() <= 0) throw InvalidInput("memory_footprint: bad feature shape");
      if (feature_shape.c % pq->num_subvectors != 0) {
        throw InvalidInput("memory_footprint: num_subvectors must divide channel count");
      }
      r.per_sample_bytes = 1LL * feature_shape.h * feature_shape.w * pq->num_subvectors * pq->code_bytes();
      const long long dsub = feature_shape.c / pq->num_subvectors;
      r.codebook_bytes = 1LL * num_tasks * pq->num_subvectors * (1LL << pq->bits) * dsub * 4;
      break;
    }
  }
  r.payload_bytes = r.per_sample_bytes * capacity;
  r.total_bytes = r.payload_bytes + r.codebook_bytes + r.metadata_bytes;
  return r;
}

// ---------------------------------------------------------------------------
// Per-codec encoding.

struct EncodedSample {
  int task_id = 0;
  Shape3 shape;
  int stage_origin = -1;
  std::vector<std::uint8_t> payload;
};

namespace detail {

inline void append_f32(std::vector<std::uint8_t>& out, float v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + 4);
}

inline float read_f32(const std::uint8_t* p) {
  float v;
  std::memcpy(&v, p, 4);
  return v;
}

inline EncodedSample encode_raw_image(const FeatureMap& img) {
  if (img.channels() != 3 || img.stage_origin != -1) {
    throw InvalidInput("raw_image codec expects raw 3-channel images");
  }
  EncodedSample e;
  e.shape = img.shape();
  e.stage_origin = img.stage_origin;
  e.payload.reserve(static_cast<std::size_t>(e.shape.elems()));
  for (int c = 0; c < 3; ++c) {
    for (Eigen::Index j = 0; j < img.data.cols(); ++j) {
      const float v = std::min(1.0f, std::max(0.0f, img.data(c, j)));
      e.payload.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
    }
  }
  return e;
}

inline FeatureMap decode_raw_image(const EncodedSample& e) {
  FeatureMap img(e.shape.c, e.shape.h, e.shape.w, e.stage_origin);
  const Eigen::Index n = img.data.cols();
  for (int c = 0; c < 3; ++c) {
    for (Eigen::Index j = 0; j < n; ++j) {
      img.data(c, j) = e.payload[static_cast<std::size_t>(c) * n + j] / 255.0f;
    }
  }
  return img;
}

inline EncodedSample encode_raw_feature(const FeatureMap& f) {
  EncodedSample e;
  e.shape = f.shape();
  e.stage_origin = f.stage_origin;
  e.payload.resize(static_cast<std::size_t>(f.data.size()) * 4);
  std::memcpy(e.payload.data(), f.data.data(), e.payload.size());
  return e;
}

inline FeatureMap decode_raw_feature(const EncodedSample& e) {
  FeatureMap f(e.shape.c, e.shape.h, e.shape.w, e.stage_origin);
  std::memcpy(f.data.data(), e.payload.data(), e.payload.size());
  return f;
}

inline EncodedSample encode_fq(const FeatureMap& f) {
  const QuantizedFeature q = fq_quantize(f);
  EncodedSample e;
  e.shape = f.shape();
  e.stage_origin = f.stage_origin;
  e.payload.assign(q.codes.data(), q.codes.data() + q.codes.size());
  append_f32(e.payload, q.min_value);
  append_f32(e.payload, q.scale);
  return e;
}

inline FeatureMap decode_fq(const EncodedSample& e) {
  QuantizedFeature q;
  q.original_shape = e.shape;
  q.stage_origin = e.stage_origin;
  const std::size_t n = static_cast<std::size_t>(e.shape.elems());
  if (e.payload.size() != n + 8) throw IoError("fq payload size mismatch");
  q.codes.resize(e.shape.c, static_cast<Eigen::Index>(e.shape.h) * e.shape.w);
  std::memcpy(q.codes.data(), e.payload.data(), n);
  q.min_value = read_f32(e.payload.data() + n);
  q.scale = read_f32(e.payload.data() + n + 4);
  return fq_dequantize(q);
}

inline EncodedSample encode_pq(const FeatureMap& f, const Codebook& cb, const PqParams& pq) {
  const PQCode code = pq_encode(f, cb);
  EncodedSample e;
  e.shape = f.shape();
  e.stage_origin = f.stage_origin;
  const int cbytes = pq.code_bytes();
  e.payload.reserve(static_cast<std::size_t>(code.codes.size()) * cbytes);
  for (Eigen::Index j = 0; j < code.codes.cols(); ++j) {
    for (Eigen::Index m = 0; m < code.codes.rows(); ++m) {
      const std::uint16_t v = code.codes(m, j);
      e.payload.push_back(static_cast<std::uint8_t>(v & 0xff));
      if (cbytes == 2) e.payload.push_back(static_cast<std::uint8_t>(v >> 8));
    }
  }
  return e;
}

inline FeatureMap decode_pq(const EncodedSample& e, const Codebook& cb, const PqParams& pq) {
  PQCode code;
  code.original_shape = e.shape;
  code.stage_origin = e.stage_origin;
  const Eigen::Index n = static_cast<Eigen::Index>(e.shape.h) * e.shape.w;
  code.codes.resize(pq.num_subvectors, n);
  const int cbytes = pq.code_bytes();
  if (e.payload.size() != static_cast<std::size_t>(n) * pq.num_subvectors * cbytes) {
    throw IoError("pq payload size mismatch");
  }
  std::size_t pos = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int m = 0; m < pq.num_subvectors; ++m) {
      std::uint16_t v = e.payload[pos++];
      if (cbytes == 2) v |= static_cast<std::uint16_t>(e.payload[pos++]) << 8;
      code.codes(m, j) = v;
    }
  }
  return pq_decode(code, cb);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Replay memory.

class ReplayMemory {
 public:
  ReplayMemory(Codec codec, int capacity, std::uint64_t seed,
               std::optional<PqParams> pq = std::nullopt)
      : codec_(codec), capacity_(capacity), pq_(pq), seed_(seed), rng_(seed) {
    if (capacity < 0) throw InvalidInput("ReplayMemory: negative capacity");
    if (codec == Codec::kPqFeature && !pq.has_value()) {
      throw InvalidInput("ReplayMemory: pq codec requires pq params");
    }
  }

  Codec codec() const { return codec_; }
  int capacity() const { return capacity_; }
  const std::optional<PqParams>& pq_params() const { return pq_; }

  int size() const {
    int n = 0;
    for (const auto& [task, entries] : entries_) n += static_cast<int>(entries.size());
    return n;
  }
  bool empty() const { return size() == 0; }

  std::vector<int> task_ids() const {
    std::vector<int> ids;
    for (const auto& [task, entries] : entries_) ids.push_back(task);
    return ids;
  }

  int count_for_task(int task_id) const {
    auto it = entries_.find(task_id);
    return it == entries_.end() ? 0 : static_cast<int>(it->second.size());
  }

  const Codebook* codebook_for_task(int task_id) const {
    auto it = codebooks_.find(task_id);
    return it == codebooks_.end() ? nullptr : &it->second;
  }

  /// Rebalances quotas over all tasks seen (earliest tasks keep the remainder),
  /// evicts uniformly at random from over-quota tasks, and inserts this task's
  /// samples encoded with the memory codec. For the pq codec a codebook is
  /// trained on the stored samples first; codebooks of old tasks never change.
  void update(int task_id, const std::vector<FeatureMap>& samples) {
    if (entries_.count(task_id)) throw InvalidInput("ReplayMemory: task already inserted");
    if (capacity_ == 0) return;
    check_sample_kind(samples);

    entries_[task_id];  // register so quotas include the new task
    const auto quotas = balanced_quotas();
    for (auto& [task, entries] : entries_) {
      const int quota = quotas.at(task);
      while (static_cast<int>(entries.size()) > quota) {
        std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
        entries.erase(entries.begin() + static_cast<std::ptrdiff_t>(pick(rng_)));
      }
    }

    // seeded shuffle, then keep the first quota samples
    const int quota = quotas.at(task_id);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::shuffle(order.begin(), order.end(), rng_);
    const int keep = std::min<int>(quota, static_cast<int>(samples.size()));

    if (codec_ == Codec::kPqFeature && keep > 0) {
      MatX<float> vectors(samples[order[0]].channels(),
                          static_cast<Eigen::Index>(keep) * samples[order[0]].positions());
      for (int i = 0; i < keep; ++i) {
        const auto& f = samples[order[i]];
        vectors.middleCols(static_cast<Eigen::Index>(i) * f.positions(), f.positions()) = f.data;
      }
      codebooks_.emplace(task_id,
                         pq_train(vectors, pq_->num_subvectors, pq_->bits,
                                  mix_seed(seed_, 0xc0debULL + static_cast<std::uint64_t>(task_id))));
    }

    auto& dest = entries_[task_id];
    for (int i = 0; i < keep; ++i) {
      EncodedSample e = encode(samples[order[i]], task_id);
      e.task_id = task_id;
      dest.push_back(std::move(e));
    }
  }

  struct Batch {
    std::vector<FeatureMap> samples;
    std::vector<int> task_ids;
  };

  /// n entries uniformly without replacement (with replacement when n exceeds
  /// the stored count), decoded through the codec.
  Batch draw(int n, std::mt19937_64& rng) const {
    if (empty()) throw InvalidInput("ReplayMemory: draw from empty memory");
    if (n < 1) throw InvalidInput("ReplayMemory: draw size must be >= 1");

    std::vector<const EncodedSample*> flat;
    flat.reserve(size());
    for (const auto& [task, entries] : entries_) {
      for (const auto& e : entries) flat.push_back(&e);
    }

    Batch batch;
    if (n <= static_cast<int>(flat.size())) {
      // partial Fisher-Yates
      std::vector<std::size_t> idx(flat.size());
      std::iota(idx.begin(), idx.end(), std::size_t(0));
      for (int i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
        batch.samples.push_back(decode(*flat[idx[i]]));
        batch.task_ids.push_back(flat[idx[i]]->task_id);
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, flat.size() - 1);
      for (int i = 0; i < n; ++i) {
        const auto* e = flat[pick(rng)];
        batch.samples.push_back(decode(*e));
        batch.task_ids.push_back(e->task_id);
      }
    }
    return batch;
  }

  /// Footprint of the current contents; metadata_bytes is the exact size of
  /// the manifest persist() would write.
  FootprintReport footprint() const {
    FootprintReport r;
    long long n = 0;
    for (const auto& [task, entries] : entries_) {
      for (const auto& e : entries) {
        r.payload_bytes += static_cast<long long>(e.payload.size());
        ++n;
      }
    }
    for (const auto& [task, cb] : codebooks_) {
      r.codebook_bytes += 4LL * cb.num_subvectors * cb.ksub() * cb.subvector_dim;
    }
    r.per_sample_bytes = n == 0 ? 0 : r.payload_bytes / n;
    r.metadata_bytes = static_cast<long long>(manifest_json().dump(2).size());
    r.total_bytes = r.payload_bytes + r.codebook_bytes + r.metadata_bytes;
    return r;
  }

  void persist(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "entries");
    if (!codebooks_.empty()) fs::create_directories(fs::path(dir) / "codebooks");

    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw IoError("ReplayMemory: cannot write manifest in " + dir);
    mf << manifest_json().dump(2);
    mf.close();

    for (const auto& [task, entries] : entries_) {
      for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto path = fs::path(dir) / "entries" / entry_file(task, i);
        std::ofstream out(path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(entries[i].payload.data()),
                  static_cast<std::streamsize>(entries[i].payload.size()));
        if (!out) throw IoError("ReplayMemory: failed writing " + path.string());
      }
    }
    for (const auto& [task, cb] : codebooks_) {
      const auto path = fs::path(dir) / "codebooks" / ("t" + std::to_string(task) + ".bin");
      std::ofstream out(path, std::ios::binary);
      for (const auto& table : cb.centroids) {
        out.write(reinterpret_cast<const char*>(table.data()),
                  static_cast<std::streamsize>(table.size() * sizeof(float)));
      }
      if (!out) throw IoError("ReplayMemory: failed writing " + path.string());
    }
  }

  static ReplayMemory load(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw IoError("ReplayMemory: no manifest in " + dir);
    nlohmann::json j;
    try {
      mf >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("ReplayMemory: malformed manifest: ") + e.what());
    }

    std::optional<PqParams> pq;
    if (j.contains("pq")) pq = PqParams{j["pq"]["num_subvectors"].get<int>(), j["pq"]["bits"].get<int>()};
    ReplayMemory mem(codec_from_name(j.at("codec").get<std::string>()), j.at("capacity").get<int>(),
                     j.value("seed", std::uint64_t{0}), pq);
    std::istringstream rng_state(j.at("rng_state").get<std::string>());
    rng_state >> mem.rng_;

    for (const auto& jt : j.at("tasks")) {
      const int task = jt.at("task_id").get<int>();
      auto& dest = mem.entries_[task];
      int i = 0;
      for (const auto& je : jt.at("entries")) {
        EncodedSample e;
        e.task_id = task;
        e.shape = {je.at("shape").at(0).get<int>(), je.at("shape").at(1).get<int>(),
                   je.at("shape").at(2).get<int>()};
        e.stage_origin = je.at("stage_origin").get<int>();
        const auto path = fs::path(dir) / "entries" / entry_file(task, i++);
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("ReplayMemory: missing payload " + path.string());
        e.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        dest.push_back(std::move(e));
      }
      if (jt.contains("codebook")) {
        const auto& jc = jt.at("codebook");
        Codebook cb;
        cb.num_subvectors = jc.at("num_subvectors").get<int>();
        cb.bits = jc.at("bits").get<int>();
        cb.subvector_dim = jc.at("subvector_dim").get<int>();
        const auto path = fs::path(dir) / "codebooks" / ("t" + std::to_string(task) + ".bin");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("ReplayMemory: missing codebook " + path.string());
        for (int m = 0; m < cb.num_subvectors; ++m) {
          MatX<float> table(cb.subvector_dim, cb.ksub());
          in.read(reinterpret_cast<char*>(table.data()),
                  static_cast<std::streamsize>(table.size() * sizeof(float)));
          if (!in) throw IoError("ReplayMemory: truncated codebook " + path.string());
          cb.centroids.push_back(std::move(table));
        }
        cb.validate();
        mem.codebooks_.emplace(task, std::move(cb));
      }
    }
    return mem;
  }

  /// Balanced quota per task for the current task count: floor(capacity/T)
  /// plus one for the earliest tasks taking the remainder.
  std::map<int, int> balanced_quotas() const {
    std::map<int, int> quotas;
    const int t_count = static_cast<int>(entries_.size());
    if (t_count == 0) return quotas;
    const int base = capacity_ / t_count;
    int remainder = capacity_ % t_count;
    for (const auto& [task, entries] : entries_) {  // std::map iterates tasks ascending
      quotas[task] = base + (remainder > 0 ? 1 : 0);
      if (remainder > 0) --remainder;
    }
    return quotas;
  }

 private:
  void check_sample_kind(const std::vector<FeatureMap>& samples) const {
    for (const auto& s : samples) {
      if (codec_ == Codec::kRawImage) {
        if (s.stage_origin != -1 || s.channels() != 3) {
          throw InvalidInput("ReplayMemory: raw_image codec expects raw RGB images");
        }
      } else if (s.stage_origin < 0) {
        throw InvalidInput("ReplayMemory: feature codec expects split-layer feature maps");
      }
    }
  }

  EncodedSample encode(const FeatureMap& f, int task_id) const {
    switch (codec_) {
      case Codec::kRawImage: return detail::encode_raw_image(f);
      case Codec::kRawFeature: return detail::encode_raw_feature(f);
      case Codec::kFqFeature: return detail::encode_fq(f);
      case Codec::kPqFeature: return detail::encode_pq(f, codebooks_.at(task_id), *pq_);
    }
    throw InvalidInput("unknown codec");
  }

  FeatureMap decode(const EncodedSample& e) const {
    switch (codec_) {
      case Codec::kRawImage: return detail::decode_raw_image(e);
      case Codec::kRawFeature: return detail::decode_raw_feature(e);
      case Codec::kFqFeature: return detail::decode_fq(e);
      case Codec::kPqFeature: return detail::decode_pq(e, codebooks_.at(e.task_id), *pq_);
    }
    throw InvalidInput("unknown codec");
  }

  static std::string entry_file(int task, std::size_t i) {
    return "t" + std::to_string(task) + "_" + std::to_string(i) + ".bin";
  }

  nlohmann::json manifest_json() const {
    nlohmann::json j;
    j["codec"] = codec_name(codec_);
    j["capacity"] = capacity_;
    j["seed"] = seed_;
    if (pq_) j["pq"] = {{"num_subvectors", pq_->num_subvectors}, {"bits", pq_->bits}};
    std::ostringstream rng_state;
    rng_state << rng_;
    j["rng_state"] = rng_state.str();
    j["tasks"] = nlohmann::json::array();
    for (const auto& [task, entries] : entries_) {
      nlohmann::json jt;
      jt["task_id"] = task;
      jt["entries"] = nlohmann::json::array();
      for (const auto& e : entries) {
        jt["entries"].push_back({{"shape", {e.shape.c, e.shape.h, e.shape.w}},
                                 {"stage_origin", e.stage_origin},
                                 {"bytes", e.payload.size()}});
      }
      auto cb = codebooks_.find(task);
      if (cb != codebooks_.end()) {
        jt["codebook"] = {{"num_subvectors", cb->second.num_subvectors},
                          {"bits", cb->second.bits},
                          {"subvector_dim", cb->second.subvector_dim}};
      }
      j["tasks"].push_back(jt);
    }
    return j;
  }

  Codec codec_;
  int capacity_;
  std::optional<PqParams> pq_;
  std::uint64_t seed_ = 0;
  std::map<int, std::vector<EncodedSample>> entries_;  // ascending task order
  std::map<int, Codebook> codebooks_;
  mutable std::mt19937_64 rng_;
};

}  // namespace vad
