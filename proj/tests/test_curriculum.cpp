/*
 * Copyright 2026 The fedcl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedcl/curriculum.hpp"
#include "fedcl/errors.hpp"

namespace fedcl {
namespace {

bool is_permutation_of_range(std::vector<Index> perm) {
  std::sort(perm.begin(), perm.end());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    if (perm[k] != static_cast<Index>(k)) return false;
  }
  return true;
}

// Exact probability that each index lands in the first `b` draws of
// sequential weighted sampling without replacement, by enumeration.
std::vector<double> exact_prefix_marginals(const std::vector<double>& w, int b) {
  std::vector<double> out(w.size(), 0.0);
  std::vector<bool> used(w.size(), false);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  auto recurse = [&](auto&& self, int depth, double prob, double mass) -> void {
    if (depth == b) return;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (used[k]) continue;
      const double p = prob * w[k] / mass;
      out[k] += p;
      used[k] = true;
      self(self, depth + 1, p, mass - w[k]);
      used[k] = false;
    }
  };
  recurse(recurse, 0, 1.0, total);
  return out;
}

TEST(Score, TruthTable) {
  for (int y = 0; y <= 1; ++y) {
    for (int local = 0; local <= 1; ++local) {
      for (int global = 0; global <= 1; ++global) {
        const double expected = (local == y && global != y) ? 2.0 : 1.0;
        EXPECT_EQ(score(y, local, global), expected) << y << local << global;
      }
    }
  }
  EXPECT_EQ(score(1, 1, 0), 2.0);
  EXPECT_EQ(score(1, 1, 1), 1.0);
  EXPECT_EQ(score(0, 1, 1), 1.0);
}

TEST(Permutation, ProbabilitiesNormalize) {
  const std::vector<double> rho{2, 1, 1};
  RngStream rng(1);
  VectorXr gamma;
  build_permutation(rho, rng, &gamma);
  EXPECT_DOUBLE_EQ(gamma[0], 0.5);
  EXPECT_DOUBLE_EQ(gamma[1], 0.25);
  EXPECT_DOUBLE_EQ(gamma[2], 0.25);
}

TEST(Permutation, WeightedFirstPositionFrequency) {
  const std::vector<double> rho{2, 1, 1};
  RngStream rng(2);
  int first = 0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const auto perm = build_permutation(rho, rng);
    ASSERT_TRUE(is_permutation_of_range(perm));
    first += perm[0] == 0;
  }
  EXPECT_NEAR(first / static_cast<double>(draws), 0.5, 0.02);
}

TEST(Permutation, UniformScoresGiveUniformFirstPosition) {
  const int m = 8;
  const std::vector<double> rho(m, 1.0);
  RngStream rng(3);
  std::vector<int> counts(m, 0);
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) ++counts[static_cast<std::size_t>(build_permutation(rho, rng)[0])];
  const double p = 1.0 / m;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (int c : counts) EXPECT_NEAR(c, draws * p, 3 * sigma);
}

TEST(Permutation, PrefixMarginalsMatchExactEnumeration) {
  const std::vector<double> rho{1, 2, 1, 2, 2, 1, 1, 2, 1, 1};
  const int b = 3;
  const auto exact = exact_prefix_marginals(rho, b);
  RngStream rng(4);
  std::vector<int> hits(rho.size(), 0);
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const auto perm = build_permutation(rho, rng);
    for (int j = 0; j < b; ++j) ++hits[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
  }
  for (std::size_t k = 0; k < rho.size(); ++k) {
    const double p = exact[k];
    const double sigma = std::sqrt(p * (1 - p) / draws);
    EXPECT_NEAR(hits[k] / static_cast<double>(draws), p, 4 * sigma) << "index " << k;
  }
}

TEST(Permutation, PrefixMarginalsNondecreasingInScore) {
  std::vector<double> rho(10);
  std::iota(rho.begin(), rho.end(), 1.0);
  std::reverse(rho.begin(), rho.end());
  RngStream rng(5);
  std::vector<int> hits(rho.size(), 0);
  for (int k = 0; k < 10000; ++k) {
    const auto perm = build_permutation(rho, rng);
    for (int j = 0; j < 3; ++j) ++hits[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
  }
  const auto exact = exact_prefix_marginals(rho, 3);
  for (std::size_t k = 1; k < rho.size(); ++k) {
    EXPECT_LE(exact[k], exact[k - 1]);
    // Neighbouring scores differ by one unit; allow sampling noise.
    EXPECT_LE(hits[k], hits[k - 1] + 250) << k;
  }
  EXPECT_GT(hits.front(), hits.back());
}

TEST(Permutation, SingletonAndLargeInputs) {
  RngStream rng(6);
  const std::vector<double> one{1.0};
  EXPECT_EQ(build_permutation(one, rng), std::vector<Index>{0});
  std::vector<double> many(5000, 1.0);
  for (std::size_t k = 0; k < many.size(); k += 3) many[k] = 2.0;
  EXPECT_TRUE(is_permutation_of_range(build_permutation(many, rng)));
}

TEST(Permutation, RejectsNonPositiveScores) {
  RngStream rng(7);
  const std::vector<double> bad{1.0, 0.0};
  EXPECT_THROW(build_permutation(bad, rng), ValidationError);
}

TEST(NextBatch, WorkedExample) {
  CurriculumState state;
  state.permutation = {2, 0, 1};
  const auto first = next_batch(state, 2);
  ASSERT_TRUE(first.has_value());
  EXPECT_EQ(std::vector<Index>(first->begin(), first->end()), (std::vector<Index>{2, 0}));
  const auto second = next_batch(state, 2);
  ASSERT_TRUE(second.has_value());
  EXPECT_EQ(std::vector<Index>(second->begin(), second->end()), std::vector<Index>{1});
  EXPECT_FALSE(next_batch(state, 2).has_value());
}

TEST(NextBatch, QtimesBFitsWithoutWrap) {
  for (Index m : {120, 287, 1022, 596}) {
    const Index q = 120;
    const Index b = m / q;
    CurriculumState state;
    RngStream rng(8);
    reset_uniform(state, m, rng);
    for (Index k = 0; k < q; ++k) {
      const auto batch = next_batch(state, b);
      ASSERT_TRUE(batch.has_value());
      EXPECT_EQ(static_cast<Index>(batch->size()), b);
    }
  }
}

TEST(NextBatch, CyclicCursorIsIndependentAndWraps) {
  CurriculumState state;
  state.permutation = {2, 0, 1};
  EXPECT_EQ(next_cyclic_batch(state, 2), (std::vector<Index>{2, 0}));
  EXPECT_EQ(next_cyclic_batch(state, 2), (std::vector<Index>{1, 2}));
  EXPECT_EQ(state.cursor, 0);
  const auto main = next_batch(state, 3);
  EXPECT_EQ(main->size(), 3u);
}

TEST(Refresh, IdenticalPredictionsGiveUnitScores) {
  CurriculumState state;
  state.local_preds = {1, 0, 1, 1};
  state.global_preds = state.local_preds;
  const std::vector<int> labels{1, 1, 0, 1};
  RngStream rng(9);
  refresh_curriculum(state, labels, rng);
  EXPECT_TRUE((state.scores.array() == 1.0).all());
  EXPECT_EQ(state.forgotten(), 0);
  EXPECT_NEAR(state.entropy(), std::log(4.0), 1e-12);
}

TEST(Refresh, AllPositiveLocalModelOnBalancedLabels) {
  // Local predicts all-positive; only the positives are locally correct,
  // so exactly they can be forgotten by an all-negative global model.
  CurriculumState state;
  const std::vector<int> labels{1, 0, 1, 0, 1, 0};
  state.local_preds.assign(6, 1);
  state.global_preds.assign(6, 0);
  RngStream rng(10);
  refresh_curriculum(state, labels, rng);
  EXPECT_EQ(state.forgotten(), 3);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    EXPECT_EQ(state.scores[static_cast<Index>(k)], labels[k] == 1 ? 2.0 : 1.0);
  }
  EXPECT_NEAR(state.probabilities.sum(), 1.0, 1e-12);
  EXPECT_TRUE(is_permutation_of_range(state.permutation));
}

TEST(Refresh, StaleSnapshotsAreRejected) {
  CurriculumState state;
  state.local_preds = {1};
  const std::vector<int> labels{1, 0};
  RngStream rng(11);
  EXPECT_THROW(refresh_curriculum(state, labels, rng), StateError);
}

TEST(Snapshot, PredictionsAreDeterministic) {
  LocalModel m;
  RngStream rng(12);
  m.feature.init(rng);
  m.classifier.init(rng);
  MatrixXr x(20, 16);
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); ++c) x(r, c) = rng.normal();
  }
  EXPECT_EQ(snapshot_predictions(m, x), snapshot_predictions(m, x));
}

}  // namespace
}  // namespace fedcl
