// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "vadstream/fq.hpp"
#include "vadstream/pq.hpp"

using namespace vad;

namespace {

FeatureMap random_map(int c, int h, int w, std::uint32_t seed, float lo = -2.0f, float hi = 3.0f) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  FeatureMap f(c, h, w, 1);
  for (Eigen::Index i = 0; i < f.data.size(); ++i) f.data.data()[i] = dist(rng);
  return f;
}

}  // namespace

TEST_CASE("fq quantize known values") {
  FeatureMap f(1, 1, 3);
  f.data << 0.0f, 0.5f, 1.0f;
  const auto q = fq_quantize(f);
  CHECK(q.min_value == 0.0f);
  CHECK(q.scale == doctest::Approx(1.0f / 255.0f));
  CHECK(q.codes(0, 0) == 0);
  CHECK(q.codes(0, 1) == 128);  // 127.5 rounds half away from zero
  CHECK(q.codes(0, 2) == 255);

  const auto back = fq_dequantize(q);
  CHECK(back.data(0, 0) == doctest::Approx(0.0f));
  CHECK(back.data(0, 1) == doctest::Approx(128.0f / 255.0f));
  CHECK(back.data(0, 2) == doctest::Approx(1.0f));
}

TEST_CASE("fq constant map degenerates to scale zero") {
  FeatureMap f(2, 2, 2);
  f.data.setConstant(3.7f);
  const auto q = fq_quantize(f);
  CHECK(q.scale == 0.0f);
  CHECK((q.codes.array() == 0).all());
  const auto back = fq_dequantize(q);
  CHECK((back.data.array() == 3.7f).all());
}

TEST_CASE("fq round-trip error bound and idempotence") {
  for (std::uint32_t seed = 0; seed < 40; ++seed) {
    const FeatureMap f = random_map(4, 6, 5, seed);
    const auto q = fq_quantize(f);
    const auto back = fq_dequantize(q);
    CHECK((f.data - back.data).cwiseAbs().maxCoeff() <= q.scale / 2 + 1e-7f);

    // dequantize(quantize(dequantize)) is a fixed point on the code lattice
    const auto q2 = fq_quantize(back);
    const auto back2 = fq_dequantize(q2);
    CHECK((back.data - back2.data).cwiseAbs().maxCoeff() <= 1e-6f);
  }
}

TEST_CASE("fq codes are monotone in the input") {
  const FeatureMap f = random_map(1, 1, 64, 99);
  const auto q = fq_quantize(f);
  std::vector<std::pair<float, int>> pairs;
  for (Eigen::Index j = 0; j < f.data.cols(); ++j) pairs.emplace_back(f.data(0, j), q.codes(0, j));
  std::sort(pairs.begin(), pairs.end());
  for (std::size_t i = 1; i < pairs.size(); ++i) CHECK(pairs[i].second >= pairs[i - 1].second);
}

TEST_CASE("fq dequantize validates the shape record") {
  QuantizedFeature q;
  q.original_shape = {2, 2, 2};
  q.codes.resize(2, 3);  // inconsistent
  CHECK_THROWS_AS(fq_dequantize(q), InvalidInput);
}

// ---------------------------------------------------------------------------

TEST_CASE("pq nearest-centroid by inspection") {
  Codebook cb;
  cb.num_subvectors = 2;
  cb.bits = 1;
  cb.subvector_dim = 2;
  MatX<float> t0(2, 2), t1(2, 2);
  t0 << 0, 1, 0, 1;  // centroids (0,0), (1,1)
  t1 << 0, 1, 1, 0;  // centroids (0,1), (1,0)
  cb.centroids = {t0, t1};

  FeatureMap f(4, 1, 1);
  f.data << 0.9f, 0.9f, 0.1f, 0.8f;
  f.stage_origin = 1;
  const PQCode code = pq_encode(f, cb);
  CHECK(code.codes(0, 0) == 1);
  CHECK(code.codes(1, 0) == 0);

  const auto back = pq_decode(code, cb);
  CHECK(back.data(0, 0) == 1.0f);
  CHECK(back.data(1, 0) == 1.0f);
  CHECK(back.data(2, 0) == 0.0f);
  CHECK(back.data(3, 0) == 1.0f);

  // a vector equal to centroids (t0[0], t1[1]) encodes losslessly
  FeatureMap g(4, 1, 1);
  g.data << 0.0f, 0.0f, 1.0f, 0.0f;
  const PQCode gc = pq_encode(g, cb);
  CHECK(gc.codes(0, 0) == 0);
  CHECK(gc.codes(1, 0) == 1);
  CHECK((pq_decode(gc, cb).data - g.data).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("pq_train on identical vectors reconstructs exactly") {
  MatX<float> vectors(4, 10);
  for (int j = 0; j < 10; ++j) vectors.col(j) << 0.3f, -1.2f, 0.5f, 2.0f;
  const auto cb = pq_train(vectors, 2, 3, 7);
  FeatureMap f(4, 1, 10);
  f.data = vectors;
  const auto back = pq_decode(pq_encode(f, cb), cb);
  CHECK((back.data - vectors).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("pq_train with few distinct sub-vectors is lossless") {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> pick(0, 3);  // 4 distinct values <= 2^2
  MatX<float> vectors(6, 50);
  const float values[4] = {-1.0f, 0.0f, 0.5f, 2.0f};
  for (int j = 0; j < 50; ++j) {
    for (int r = 0; r < 6; r += 2) {
      const float v = values[pick(rng)];
      vectors(r, j) = v;
      vectors(r + 1, j) = -v;
    }
  }
  const auto cb = pq_train(vectors, 3, 2, 11);
  FeatureMap f(6, 5, 10);
  f.data = vectors;
  const auto back = pq_decode(pq_encode(f, cb), cb);
  CHECK((back.data - vectors).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("pq paper hyperparameters give 6 tables of 128 rows") {
  std::mt19937 rng(3);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  MatX<float> vectors(12, 400);
  for (Eigen::Index i = 0; i < vectors.size(); ++i) vectors.data()[i] = dist(rng);
  const auto cb = pq_train(vectors, 6, 7, 1);
  CHECK(cb.centroids.size() == 6);
  for (const auto& table : cb.centroids) {
    CHECK(table.cols() == 128);
    CHECK(table.rows() == 2);
  }
}

TEST_CASE("pq_encode matches the brute-force oracle") {
  std::mt19937 rng(17);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = trial % 2 == 0 ? 2 : 4;
    const int d = m * (2 + trial % 3);
    const int b = 2 + trial % 3;
    MatX<float> train(d, 120);
    for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = dist(rng);
    const auto cb = pq_train(train, m, b, 100 + trial);

    FeatureMap f(d, 4, 5);
    for (Eigen::Index i = 0; i < f.data.size(); ++i) f.data.data()[i] = dist(rng);
    const PQCode code = pq_encode(f, cb);
    for (Eigen::Index j = 0; j < f.data.cols(); ++j) {
      const VecX<float> v = f.data.col(j);
      const auto ref = oracles::brute_pq_encode(v, cb);
      for (int mm = 0; mm < m; ++mm) CHECK(code.codes(mm, j) == ref[mm]);
    }
  }
}

TEST_CASE("pq decode error bounded by nearest-centroid distances") {
  std::mt19937 rng(21);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  MatX<float> train(8, 200);
  for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = dist(rng);
  const auto cb = pq_train(train, 4, 3, 5);

  FeatureMap f(8, 3, 3);
  for (Eigen::Index i = 0; i < f.data.size(); ++i) f.data.data()[i] = dist(rng);
  const auto back = pq_decode(pq_encode(f, cb), cb);
  for (Eigen::Index j = 0; j < f.data.cols(); ++j) {
    double bound = 0.0;
    for (int m = 0; m < cb.num_subvectors; ++m) {
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < cb.ksub(); ++k) {
        const double d2 = (f.data.col(j).segment(m * cb.subvector_dim, cb.subvector_dim) -
                           cb.centroids[m].col(k))
                              .squaredNorm();
        best = std::min(best, d2);
      }
      bound += best;
    }
    const double err = (back.data.col(j) - f.data.col(j)).squaredNorm();
    CHECK(err <= bound + 1e-6);
  }
}

TEST_CASE("pq_train determinism and validation") {
  std::mt19937 rng(2);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  MatX<float> train(6, 90);
  for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = dist(rng);

  const auto a = pq_train(train, 3, 4, 42);
  const auto b = pq_train(train, 3, 4, 42);
  for (int m = 0; m < 3; ++m) CHECK((a.centroids[m] - b.centroids[m]).cwiseAbs().maxCoeff() == 0.0f);

  CHECK_THROWS_AS(pq_train(train, 4, 4, 1), InvalidInput);  // 4 does not divide 6
  CHECK_THROWS_AS(pq_train(MatX<float>(6, 0), 3, 4, 1), InvalidInput);

  FeatureMap wrong(5, 1, 1);
  CHECK_THROWS_AS(pq_encode(wrong, a), InvalidInput);
}
