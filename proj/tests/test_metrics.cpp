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

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "fedcl/errors.hpp"
#include "fedcl/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace fedcl {
namespace {

VectorXr vec(std::initializer_list<double> v) {
  VectorXr out(static_cast<Index>(v.size()));
  Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

Eigen::VectorXi ivec(std::initializer_list<int> v) {
  Eigen::VectorXi out(static_cast<Index>(v.size()));
  Index k = 0;
  for (int x : v) out[k++] = x;
  return out;
}

TEST(CrossEntropy, Examples) {
  EXPECT_NEAR(cross_entropy(vec({1.0, 0.0}), ivec({1, 0})), 0.0, 1e-6);
  EXPECT_NEAR(cross_entropy(vec({0.5}), ivec({1})), std::log(2.0), 1e-12);
  EXPECT_NEAR(cross_entropy(vec({0.9, 0.1}), ivec({1, 0})), 0.2107, 1e-4);
  EXPECT_TRUE(std::isfinite(cross_entropy(vec({0.0}), ivec({1}))));
  EXPECT_THROW(cross_entropy(vec({0.5, 0.5}), ivec({1})), ShapeError);
}

TEST(RocAuc, WorkedExample) {
  EXPECT_DOUBLE_EQ(roc_auc(vec({0.1, 0.4, 0.35, 0.8}), ivec({0, 0, 1, 1})), 0.75);
}

TEST(RocAuc, SeparatedAndTied) {
  EXPECT_DOUBLE_EQ(roc_auc(vec({0.1, 0.2, 0.8, 0.9}), ivec({0, 0, 1, 1})), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc(vec({0.3, 0.3, 0.3, 0.3}), ivec({0, 1, 0, 1})), 0.5);
}

TEST(RocAuc, SingleClassIsUndefined) {
  EXPECT_THROW(roc_auc(vec({0.1, 0.2}), ivec({1, 1})), UndefinedMetricError);
  EXPECT_THROW(roc_auc(vec({0.1, 0.2}), ivec({0, 0})), UndefinedMetricError);
}

TEST(RocAuc, MonotoneTransformInvariance) {
  RngStream rng(3);
  for (int k = 1; k < 60; ++k) {
    const auto inst = testing::random_instance(rng, k);
    const VectorXr t = (3.0 * inst.scores.array()).exp() - 7.0;
    EXPECT_DOUBLE_EQ(roc_auc(inst.scores, inst.labels), roc_auc(t, inst.labels));
  }
}

TEST(RocAuc, NegationComplementsWithoutTies) {
  RngStream rng(4);
  for (int k = 1; k < 60; ++k) {
    if (k % 3 == 0) continue;
    const auto inst = testing::random_instance(rng, k);
    const VectorXr neg = -inst.scores;
    EXPECT_NEAR(roc_auc(inst.scores, inst.labels) + roc_auc(neg, inst.labels), 1.0, 1e-12);
  }
}

TEST(Auc, MatchesBruteForceOracles) {
  RngStream rng(2024);
  for (int k = 0; k < 200; ++k) {
    const auto inst = testing::random_instance(rng, k);
    EXPECT_NEAR(roc_auc(inst.scores, inst.labels),
                testing::brute_roc_auc(inst.scores, inst.labels), 1e-9);
    EXPECT_NEAR(pr_auc(inst.scores, inst.labels),
                testing::brute_pr_auc(inst.scores, inst.labels), 1e-9);
  }
}

TEST(PrAuc, Examples) {
  EXPECT_DOUBLE_EQ(pr_auc(vec({0.9, 0.8, 0.1, 0.2}), ivec({1, 1, 0, 0})), 1.0);
  EXPECT_DOUBLE_EQ(pr_auc(vec({0.9, 0.5, 0.1}), ivec({1, 0, 0})), 1.0);
  // Ranking pos, neg, pos: AP = 0.5 * 1 + 0.5 * 2/3.
  EXPECT_NEAR(pr_auc(vec({0.9, 0.5, 0.1}), ivec({1, 0, 1})), 5.0 / 6.0, 1e-15);
  EXPECT_THROW(pr_auc(vec({0.9, 0.5}), ivec({0, 0})), UndefinedMetricError);
}

TEST(WelchTTest, IdenticalSamples) {
  const std::vector<double> a{1, 2, 3};
  const auto r = welch_ttest(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_NEAR(r.p, 1.0, 1e-12);
}

TEST(WelchTTest, ShiftedSamplesAreSignificant) {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> b{11, 12, 13};
  EXPECT_LT(welch_ttest(a, b).p, 0.01);
}

TEST(WelchTTest, SwapNegatesTAndKeepsP) {
  const std::vector<double> a{0.71, 0.74, 0.69, 0.77, 0.72};
  const std::vector<double> b{0.78, 0.75, 0.81, 0.79, 0.80};
  const auto ab = welch_ttest(a, b);
  const auto ba = welch_ttest(b, a);
  EXPECT_DOUBLE_EQ(ab.t, -ba.t);
  EXPECT_DOUBLE_EQ(ab.p, ba.p);
}

TEST(WelchTTest, MatchesReferenceDistribution) {
  RngStream rng(77);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> a(2 + rng.below(8));
    std::vector<double> b(2 + rng.below(8));
    const double shift = 2.0 * rng.uniform();
    const double scale = 0.2 + 3.0 * rng.uniform();
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = shift + scale * rng.normal();
    const auto r = welch_ttest(a, b);
    const boost::math::students_t dist(r.df);
    const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
    EXPECT_NEAR(r.p, p, 1e-8) << "df " << r.df << " t " << r.t;
    EXPECT_NEAR(student_t_cdf(r.t, r.df), boost::math::cdf(dist, r.t), 1e-8);
  }
}

TEST(WelchTTest, DegenerateInputs) {
  const std::vector<double> one{1.0};
  const std::vector<double> flat{2.0, 2.0};
  EXPECT_THROW(welch_ttest(one, flat), ValidationError);
  EXPECT_THROW(welch_ttest(flat, flat), ValidationError);
}

TEST(IncompleteBeta, KnownValues) {
  EXPECT_NEAR(regularized_incomplete_beta(1, 1, 0.3), 0.3, 1e-14);
  EXPECT_NEAR(regularized_incomplete_beta(2, 3, 0.4), 0.5248, 1e-12);
  EXPECT_EQ(regularized_incomplete_beta(2, 3, 0.0), 0.0);
  EXPECT_EQ(regularized_incomplete_beta(2, 3, 1.0), 1.0);
}

std::vector<Embedding> blobs(Index n, const std::vector<double>& offsets, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<Embedding> out;
  for (std::size_t s = 0; s < offsets.size(); ++s) {
    Embedding e;
    e.site_id = static_cast<int>(s);
    e.vectors = testing::random_matrix(n, 4, rng);
    e.vectors.array() += offsets[s];
    out.push_back(e);
  }
  return out;
}

TEST(Probe, IdenticalDistributionsNearChance) {
  const auto e = blobs(400, {0.0, 0.0, 0.0}, 5);
  RngStream rng(1);
  EXPECT_NEAR(domain_confusion_probe(e, rng), 1.0 / 3.0, 0.08);
}

TEST(Probe, DisjointSupportsNearOne) {
  const auto e = blobs(200, {0.0, 20.0}, 6);
  RngStream rng(1);
  EXPECT_GT(domain_confusion_probe(e, rng), 0.99);
}

TEST(Probe, AccuracyInUnitIntervalAndDegenerateSplit) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto e = blobs(30, {0.0, 0.5}, seed);
    RngStream rng(seed);
    const double acc = domain_confusion_probe(e, rng);
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 1.0);
  }
  RngStream rng(1);
  EXPECT_THROW(domain_confusion_probe(blobs(1, {0.0, 1.0}, 1), rng), ValidationError);
  EXPECT_THROW(domain_confusion_probe(blobs(10, {0.0}, 1), rng), ValidationError);
}

TEST(Evaluate, ReportsMeanLossAndCounts) {
  LocalModel m;
  const std::size_t last = m.classifier.params().entries().size();
  m.classifier.params().view(last - 2).setZero();
  m.classifier.params().view(last - 1).setZero();
  SiteDataset d;
  d.site_id = 4;
  RngStream rng(3);
  for (int k = 0; k < 6; ++k) {
    Sample s;
    s.features = VectorXr::NullaryExpr(16, [&]() { return rng.normal(); });
    s.label = k % 2;
    d.test.push_back(s);
  }
  const auto r = evaluate(m, d, Split::test);
  EXPECT_EQ(r.site_id, 4);
  EXPECT_EQ(r.split, "test");
  EXPECT_EQ(r.n, 6);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(r.roc_auc, 0.5);
}

}  // namespace
}  // namespace fedcl
