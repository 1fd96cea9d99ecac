// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "vadstream/feature_map.hpp"

namespace vad {

/// Product-quantization centroid tables: one table of 2^bits centroids per
/// subspace. A d-dimensional vector splits into num_subvectors contiguous
/// chunks of subvector_dim entries each.
template <typename Scalar>
struct CodebookT {
  int num_subvectors = 0;
  int bits = 0;
  int subvector_dim = 0;
  std::vector<MatX<Scalar>> centroids;  // per subspace: subvector_dim x 2^bits, column = centroid

  int dim() const { return num_subvectors * subvector_dim; }
  int ksub() const { return 1 << bits; }

  void validate() const {
    if (num_subvectors <= 0 || bits <= 0 || bits > 16 || subvector_dim <= 0) {
      throw InvalidInput("Codebook: invalid parameters");
    }
    if (static_cast<int>(centroids.size()) != num_subvectors) {
      throw InvalidInput("Codebook: table count mismatch");
    }
    for (const auto& table : centroids) {
      if (table.rows() != subvector_dim || table.cols() != ksub()) {
        throw InvalidInput("Codebook: table dimensions mismatch");
      }
      if (!table.allFinite()) throw InvalidInput("Codebook: non-finite centroids");
    }
  }
};

using Codebook = CodebookT<float>;

/// Centroid indices for a batch of vectors: one row per subspace, one column
/// per vector.
struct PQCode {
  Eigen::Matrix<std::uint16_t, Eigen::Dynamic, Eigen::Dynamic> codes;  // num_subvectors x num_vectors
  Shape3 original_shape;
  int stage_origin = -1;

  long long num_vectors() const { return codes.cols(); }
};

namespace detail {

template <typename Scalar>
int nearest_centroid(const Eigen::Ref<const VecX<Scalar>>& v, const MatX<Scalar>& table) {
  int best = 0;
  Scalar best_dist = (v - table.col(0)).squaredNorm();
  for (int k = 1; k < table.cols(); ++k) {
    const Scalar d = (v - table.col(k)).squaredNorm();
    if (d < best_dist) {
      best_dist = d;
      best = k;
    }
  }
  return best;
}

// Lloyd iterations on the columns of data, at most max_iter rounds, stopping
// when the relative inertia improvement drops below tol. Empty clusters are
// reseeded to the point currently farthest from its assigned centroid.
template <typename Scalar>
MatX<Scalar> kmeans(const MatX<Scalar>& data, int k, std::uint64_t seed, int max_iter = 25,
                    double tol = 1e-4) {
  const Eigen::Index n = data.cols();
  const Eigen::Index d = data.rows();

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::mt19937 rng(static_cast<std::uint32_t>(seed) ^ static_cast<std::uint32_t>(seed >> 32));
  std::shuffle(order.begin(), order.end(), rng);

  MatX<Scalar> centroids(d, k);
  for (int c = 0; c < k; ++c) centroids.col(c) = data.col(order[c % n]);

  std::vector<int> assign(n, 0);
  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      Scalar best_dist = (data.col(i) - centroids.col(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const Scalar dist = (data.col(i) - centroids.col(c)).squaredNorm();
        if (dist < best_dist) {
          best_dist = dist;
          best = c;
        }
      }
      assign[i] = best;
      inertia += static_cast<double>(best_dist);
    }

    MatX<double> sums = MatX<double>::Zero(d, k);
    std::vector<Eigen::Index> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.col(assign[i]) += data.col(i).template cast<double>();
      ++counts[assign[i]];
    }
    std::vector<char> reseeded(n, 0);
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centroids.col(c) = (sums.col(c) / static_cast<double>(counts[c])).template cast<Scalar>();
      } else {
        // farthest point from its assigned centroid, each used at most once
        Eigen::Index far_idx = -1;
        Scalar far_dist = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (reseeded[i]) continue;
          const Scalar dist = (data.col(i) - centroids.col(assign[i])).squaredNorm();
          if (dist > far_dist) {
            far_dist = dist;
            far_idx = i;
          }
        }
        if (far_idx >= 0) {
          centroids.col(c) = data.col(far_idx);
          reseeded[far_idx] = 1;
        }
      }
    }

    if (prev_inertia - inertia <= tol * std::max(prev_inertia, 1e-30) && iter > 0) break;
    prev_inertia = inertia;
  }
  return centroids;
}

}  // namespace detail

/// Trains one k-means codebook per subspace (k = 2^bits) on the columns of
/// `vectors` (d x n). Deterministic given the seed. When a subspace has at
/// most 2^bits distinct sub-vectors, the centroids are exactly that distinct
/// set, so reconstruction is lossless.
template <typename Scalar>
CodebookT<Scalar> pq_train(const MatX<Scalar>& vectors, int num_subvectors, int bits,
                           std::uint64_t seed) {
  const int d = static_cast<int>(vectors.rows());
  const Eigen::Index n = vectors.cols();
  if (n < 1) throw InvalidInput("pq_train: empty input");
  if (num_subvectors <= 0 || d % num_subvectors != 0) {
    throw InvalidInput("pq_train: num_subvectors must divide the vector dimension");
  }
  if (bits <= 0 || bits > 16) throw InvalidInput("pq_train: bits out of [1,16]");
  if (!vectors.allFinite()) throw InvalidInput("pq_train: non-finite input");

  CodebookT<Scalar> cb;
  cb.num_subvectors = num_subvectors;
  cb.bits = bits;
  cb.subvector_dim = d / num_subvectors;
  const int k = cb.ksub();
  const int dsub = cb.subvector_dim;

  for (int m = 0; m < num_subvectors; ++m) {
    const MatX<Scalar> sub = vectors.middleRows(static_cast<Eigen::Index>(m) * dsub, dsub);

    // Distinct sub-vectors, bitwise compare, deterministic order.
    std::vector<Eigen::Index> uniq;
    {
      std::vector<Eigen::Index> idx(n);
      std::iota(idx.begin(), idx.end(), Eigen::Index(0));
      const auto less = [&](Eigen::Index a, Eigen::Index b) {
        for (int r = 0; r < dsub; ++r) {
          if (sub(r, a) != sub(r, b)) return sub(r, a) < sub(r, b);
        }
        return false;
      };
      std::sort(idx.begin(), idx.end(), less);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i == 0 || less(idx[i - 1], idx[i])) uniq.push_back(idx[i]);
        if (static_cast<int>(uniq.size()) > k) break;
      }
    }

    MatX<Scalar> table(dsub, k);
    if (static_cast<int>(uniq.size()) <= k) {
      for (int c = 0; c < k; ++c) {
        table.col(c) = sub.col(uniq[std::min<std::size_t>(c, uniq.size() - 1)]);
      }
    } else {
      table = detail::kmeans(sub, k, mix_seed(seed, static_cast<std::uint64_t>(m)));
    }
    cb.centroids.push_back(std::move(table));
  }
  cb.validate();
  return cb;
}

/// Maps each spatial position's channel vector to its nearest centroid per
/// subspace (squared Euclidean distance, ties to the lowest index).
template <typename Scalar>
PQCode pq_encode(const FeatureMapT<Scalar>& f, const CodebookT<Scalar>& cb) {
  cb.validate();
  if (f.channels() != cb.dim()) {
    throw InvalidInput("pq_encode: feature channel count does not match codebook dimension");
  }
  PQCode code;
  code.original_shape = f.shape();
  code.stage_origin = f.stage_origin;
  code.codes.resize(cb.num_subvectors, f.data.cols());
  const int dsub = cb.subvector_dim;
  for (Eigen::Index j = 0; j < f.data.cols(); ++j) {
    for (int m = 0; m < cb.num_subvectors; ++m) {
      const VecX<Scalar> v = f.data.col(j).segment(static_cast<Eigen::Index>(m) * dsub, dsub);
      code.codes(m, j) =
          static_cast<std::uint16_t>(detail::nearest_centroid<Scalar>(v, cb.centroids[m]));
    }
  }
  return code;
}

/// Concatenates the indexed centroids back into a feature map.
template <typename Scalar>
FeatureMapT<Scalar> pq_decode(const PQCode& code, const CodebookT<Scalar>& cb) {
  cb.validate();
  const Shape3 s = code.original_shape;
  if (s.c != cb.dim()) throw InvalidInput("pq_decode: shape/codebook dimension mismatch");
  if (code.codes.rows() != cb.num_subvectors ||
      code.codes.cols() != static_cast<Eigen::Index>(s.h) * s.w) {
    throw InvalidInput("pq_decode: code grid inconsistent with recorded shape");
  }
  FeatureMapT<Scalar> f(s.c, s.h, s.w, code.stage_origin);
  const int dsub = cb.subvector_dim;
  for (Eigen::Index j = 0; j < code.codes.cols(); ++j) {
    for (int m = 0; m < cb.num_subvectors; ++m) {
      const int idx = code.codes(m, j);
      if (idx >= cb.ksub()) throw InvalidInput("pq_decode: centroid index out of range");
      f.data.col(j).segment(static_cast<Eigen::Index>(m) * dsub, dsub) = cb.centroids[m].col(idx);
    }
  }
  return f;
}

}  // namespace vad
