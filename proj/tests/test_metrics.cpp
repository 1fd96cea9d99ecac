// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "vadstream/metrics.hpp"

using namespace vad;

namespace {

ScoredSet make_set(std::vector<double> scores, std::vector<int> labels) {
  return ScoredSet{std::move(scores), std::move(labels)};
}

}  // namespace

TEST_CASE("roc_auc basics") {
  CHECK(roc_auc(make_set({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0})) == doctest::Approx(1.0));
  CHECK(roc_auc(make_set({0.4, 0.4, 0.4, 0.4}, {1, 0, 1, 0})) == doctest::Approx(0.5));
  // frozen from the pairwise oracle: positives {0.9, 0.1}, negatives {0.3, 0.8}
  const auto s = make_set({0.9, 0.3, 0.8, 0.1}, {1, 0, 0, 1});
  CHECK(roc_auc(s) == doctest::Approx(0.5));
  CHECK(roc_auc(s) == oracles::roc_pairwise(s));
  CHECK(roc_auc(make_set({0.1, 0.2}, {1, 1})) == doctest::Approx(0.5));  // single class
  CHECK_THROWS_AS(roc_auc(make_set({}, {})), InvalidInput);
}

TEST_CASE("roc_auc properties") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> score(-2.0, 2.0);
  std::bernoulli_distribution label(0.4);
  for (int trial = 0; trial < 50; ++trial) {
    ScoredSet s;
    const int n = 2 + trial % 12;
    for (int i = 0; i < n; ++i) {
      s.scores.push_back(score(rng));
      s.labels.push_back(label(rng) ? 1 : 0);
    }
    // invariance under strictly increasing transforms
    ScoredSet warped = s;
    for (auto& v : warped.scores) v = std::exp(v) + 3.0 * v;
    CHECK(roc_auc(s) == doctest::Approx(roc_auc(warped)).epsilon(1e-12));
    // flip complement (scores are continuous, so tie-free almost surely)
    ScoredSet flipped = s;
    for (auto& l : flipped.labels) l = 1 - l;
    if (s.num_positives() > 0 && s.num_positives() < static_cast<int>(s.size())) {
      CHECK(roc_auc(s) + roc_auc(flipped) == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(roc_auc(s) == oracles::roc_pairwise(s));
  }
}

TEST_CASE("f1_max examples") {
  const auto best = f1_max(make_set({0.9, 0.8, 0.2}, {1, 0, 1}));
  CHECK(best.f1 == doctest::Approx(0.8));
  CHECK(best.threshold == doctest::Approx(0.2));

  CHECK(f1_max(make_set({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0})).f1 == doctest::Approx(1.0));

  const auto all_pos = f1_max(make_set({0.5, 0.2, 0.9}, {1, 1, 1}));
  CHECK(all_pos.f1 == doctest::Approx(1.0));
  CHECK(all_pos.threshold == doctest::Approx(0.2));

  CHECK_THROWS_AS(f1_max(make_set({0.5}, {0})), InvalidInput);
}

TEST_CASE("f1_max is invariant under increasing transforms") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    ScoredSet s;
    for (int i = 0; i < 9; ++i) {
      s.scores.push_back(score(rng));
      s.labels.push_back(i % 3 == 0 ? 1 : 0);
    }
    ScoredSet warped = s;
    for (auto& v : warped.scores) v = v * v * v + 2.0 * v;
    CHECK(f1_max(s).f1 == doctest::Approx(f1_max(warped).f1).epsilon(1e-12));
  }
}

TEST_CASE("pr_auc examples") {
  CHECK(pr_auc(make_set({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0})) == doctest::Approx(1.0));
  CHECK(pr_auc(make_set({0.4, 0.4, 0.4, 0.4}, {1, 0, 0, 0})) == doctest::Approx(0.25));
  CHECK(pr_auc(make_set({0.9, 0.8, 0.2}, {1, 0, 1})) == doctest::Approx(5.0 / 6.0));
  CHECK_THROWS_AS(pr_auc(make_set({0.5}, {0})), InvalidInput);
}

TEST_CASE("threshold metrics match enumeration oracles on small grids") {
  // all ScoredSets of size <= 5 over a 4-value score grid (full size-8 sweep
  // runs in the acceptance suite)
  const double grid[4] = {0.0, 0.25, 0.5, 1.0};
  for (int n = 1; n <= 5; ++n) {
    std::vector<int> score_idx(n, 0);
    while (true) {
      for (int label_bits = 0; label_bits < (1 << n); ++label_bits) {
        ScoredSet s;
        for (int i = 0; i < n; ++i) {
          s.scores.push_back(grid[score_idx[i]]);
          s.labels.push_back((label_bits >> i) & 1);
        }
        CHECK(roc_auc(s) == oracles::roc_pairwise(s));
        if (s.num_positives() > 0) {
          const auto mine = f1_max(s);
          const auto ref = oracles::f1_sweep(s);
          CHECK(mine.f1 == ref.f1);
          CHECK(mine.threshold == ref.threshold);
          CHECK(pr_auc(s) == oracles::ap_stepwise(s));
        }
      }
      int carry = n - 1;
      while (carry >= 0 && ++score_idx[carry] == 4) score_idx[carry--] = 0;
      if (carry < 0) break;
    }
  }
}

namespace {

GridX<float> grid_from(std::initializer_list<std::initializer_list<float>> rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.begin()->size());
  GridX<float> g(h, w);
  int y = 0;
  for (const auto& row : rows) {
    int x = 0;
    for (float v : row) g(y, x++) = v;
    ++y;
  }
  return g;
}

MaskGrid mask_from(std::initializer_list<std::initializer_list<int>> rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.begin()->size());
  MaskGrid g(h, w);
  int y = 0;
  for (const auto& row : rows) {
    int x = 0;
    for (int v : row) g(y, x++) = static_cast<std::uint8_t>(v);
    ++y;
  }
  return g;
}

}  // namespace

TEST_CASE("aupro on perfect and inverted maps") {
  const auto mask = mask_from({{0, 0, 0, 0}, {0, 1, 1, 0}, {0, 1, 1, 0}, {0, 0, 0, 0}});
  GridX<float> perfect(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) perfect(y, x) = mask(y, x) ? 1.0f : 0.0f;
  }
  CHECK(aupro({perfect}, {mask}) == doctest::Approx(1.0));

  GridX<float> inverted = (1.0f - perfect.array()).matrix();
  CHECK(aupro({inverted}, {mask}) == doctest::Approx(0.0));
  CHECK(aupro({inverted}, {mask}) ==
        doctest::Approx(oracles::aupro_sweep({inverted}, {mask}, 0.3)).epsilon(1e-9));
}

TEST_CASE("aupro weights regions equally regardless of size") {
  // region A: single pixel; region B: 3x3 block; map detects only A at zero FPR
  MaskGrid mask = MaskGrid::Zero(8, 8);
  mask(0, 0) = 1;
  for (int y = 4; y < 7; ++y) {
    for (int x = 4; x < 7; ++x) mask(y, x) = 1;
  }
  GridX<float> map = GridX<float>::Zero(8, 8);
  map(0, 0) = 1.0f;

  // detecting the small region fully contributes PRO 1/2 at FPR 0
  CHECK(aupro({map}, {mask}, 1e-6) == doctest::Approx(0.5).epsilon(1e-4));
  // frozen from the sweep oracle: curve (0,0) -> (0,0.5) -> (1,1) on [0,0.3]
  const double expected = oracles::aupro_sweep({map}, {mask}, 0.3);
  CHECK(expected == doctest::Approx(0.575).epsilon(1e-9));
  CHECK(aupro({map}, {mask}) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("aupro with one region reduces to a TPR curve integral") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> noise(0.0f, 1.0f);
  MaskGrid mask = MaskGrid::Zero(8, 8);
  for (int y = 2; y < 5; ++y) {
    for (int x = 1; x < 4; ++x) mask(y, x) = 1;
  }
  GridX<float> map(8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) map(y, x) = noise(rng) + (mask(y, x) ? 0.4f : 0.0f);
  }
  CHECK(aupro({map}, {mask}) == doctest::Approx(oracles::aupro_sweep({map}, {mask}, 0.3)).epsilon(1e-9));
}

TEST_CASE("aupro input validation") {
  const auto mask = mask_from({{0, 0}, {0, 0}});
  GridX<float> map = GridX<float>::Zero(2, 2);
  CHECK_THROWS_AS(aupro({map}, {mask}), InvalidInput);  // no anomalous pixels
  CHECK_THROWS_AS(aupro({map}, {}), InvalidInput);
}

TEST_CASE("forgetting") {
  ResultMatrix m("pixel_f1", 2);
  m.set(0, 0, 0.5);
  m.set(1, 0, 0.4);
  m.set(1, 1, 0.6);
  CHECK(forgetting(m).value == doctest::Approx(0.2));
  CHECK(forgetting(m, ForgettingMode::kAbsolute).value == doctest::Approx(0.1));

  ResultMatrix up("pixel_f1", 3);
  up.set(0, 0, 0.3);
  up.set(1, 0, 0.4);
  up.set(1, 1, 0.5);
  up.set(2, 0, 0.45);
  up.set(2, 1, 0.5);
  up.set(2, 2, 0.6);
  CHECK(forgetting(up).value == doctest::Approx(0.0));

  ResultMatrix tiny("pixel_f1", 1);
  CHECK_THROWS_AS(forgetting(tiny), InvalidInput);

  // zero-peak task is excluded from the mean
  ResultMatrix zero("pixel_f1", 3);
  zero.set(0, 0, 0.0);
  zero.set(1, 0, 0.0);
  zero.set(1, 1, 0.8);
  zero.set(2, 0, 0.0);
  zero.set(2, 1, 0.4);
  zero.set(2, 2, 0.7);
  const auto r = forgetting(zero);
  CHECK(r.skipped_tasks == std::vector<int>{0});
  CHECK(r.value == doctest::Approx(0.5));
}

TEST_CASE("jt_gap") {
  CHECK(jt_gap(0.36, 0.42) == doctest::Approx(0.142857).epsilon(1e-5));
  CHECK(jt_gap(0.42, 0.42) == doctest::Approx(0.0));
  CHECK(jt_gap(0.0, 0.42) == doctest::Approx(1.0));
  CHECK_THROWS_AS(jt_gap(0.3, 0.0), InvalidInput);
}

TEST_CASE("result matrix structure") {
  ResultMatrix m("x", 3);
  CHECK_THROWS_AS(m.set(0, 1, 1.0), InvalidInput);
  CHECK_THROWS_AS(m(3, 0), InvalidInput);
  m.set(2, 0, 0.2);
  m.set(2, 1, 0.4);
  m.set(2, 2, kUndefined);
  CHECK(m.defined(2, 0));
  CHECK(!m.defined(2, 2));
  CHECK(m.row_mean(2) == doctest::Approx(0.3));
  CHECK(std::isnan(m.row_mean(0)));
}
