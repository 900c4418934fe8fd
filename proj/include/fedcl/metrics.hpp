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
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedcl/autodiff.hpp"
#include "fedcl/data.hpp"
#include "fedcl/errors.hpp"
#include "fedcl/models.hpp"
#include "fedcl/rng.hpp"

namespace fedcl {

inline constexpr double kProbabilityClamp = 1e-7;

/// Summed binary cross entropy, probabilities clamped to [1e-7, 1 - 1e-7].
template <typename DerivedP, typename DerivedY>
double cross_entropy(const Eigen::DenseBase<DerivedP>& p,
                     const Eigen::DenseBase<DerivedY>& y) {
  if (p.size() != y.size()) throw ShapeError("cross_entropy: length mismatch");
  double loss = 0;
  for (Index k = 0; k < p.size(); ++k) {
    const double pk = std::clamp(static_cast<double>(p.derived().coeff(k)),
                                 kProbabilityClamp, 1 - kProbabilityClamp);
    const double yk = static_cast<double>(y.derived().coeff(k));
    loss -= yk * std::log(pk) + (1 - yk) * std::log(1 - pk);
  }
  return loss;
}

namespace detail {

template <typename DerivedS, typename DerivedY>
void check_scoring_input(const Eigen::DenseBase<DerivedS>& scores,
                         const Eigen::DenseBase<DerivedY>& labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("scores and labels differ in length");
  }
}

// Indices sorted by descending score.
template <typename DerivedS>
std::vector<Index> descending_order(const Eigen::DenseBase<DerivedS>& scores) {
  std::vector<Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return scores.derived().coeff(a) > scores.derived().coeff(b);
  });
  return order;
}

}  // namespace detail

/// Normalized Mann-Whitney U: P(score_pos > score_neg) + 0.5 P(tie).
template <typename DerivedS, typename DerivedY>
double roc_auc(const Eigen::DenseBase<DerivedS>& scores,
               const Eigen::DenseBase<DerivedY>& labels) {
  detail::check_scoring_input(scores, labels);
  const auto order = detail::descending_order(scores);
  double positives = 0;
  double negatives = 0;
  // Walking tie groups from high to low: every positive in a group beats
  // all negatives strictly below it and ties with the group's negatives.
  double wins = 0;
  double negatives_below_total = 0;
  for (Index k = 0; k < labels.size(); ++k) {
    labels.derived().coeff(k) == 1 ? ++positives : ++negatives;
  }
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("roc_auc needs both classes present");
  }
  negatives_below_total = negatives;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    double group_pos = 0;
    double group_neg = 0;
    while (j < order.size() &&
           scores.derived().coeff(order[j]) == scores.derived().coeff(order[i])) {
      labels.derived().coeff(order[j]) == 1 ? ++group_pos : ++group_neg;
      ++j;
    }
    negatives_below_total -= group_neg;
    wins += group_pos * (negatives_below_total + 0.5 * group_neg);
    i = j;
  }
  return wins / (positives * negatives);
}

/// Average precision: sum over distinct thresholds of
/// (recall_k - recall_{k-1}) * precision_k.
template <typename DerivedS, typename DerivedY>
double pr_auc(const Eigen::DenseBase<DerivedS>& scores,
              const Eigen::DenseBase<DerivedY>& labels) {
  detail::check_scoring_input(scores, labels);
  double positives = 0;
  for (Index k = 0; k < labels.size(); ++k) positives += labels.derived().coeff(k) == 1;
  if (positives == 0) throw UndefinedMetricError("pr_auc needs at least one positive");
  const auto order = detail::descending_order(scores);
  double tp = 0;
  double seen = 0;
  double prev_recall = 0;
  double ap = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() &&
           scores.derived().coeff(order[j]) == scores.derived().coeff(order[i])) {
      tp += labels.derived().coeff(order[j]) == 1;
      ++seen;
      ++j;
    }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / seen);
    prev_recall = recall;
    i = j;
  }
  return ap;
}

struct EvalReport {
  int site_id = 0;
  std::string split;
  double roc_auc = 0;
  double pr_auc = 0;
  double loss = 0;  // mean cross entropy
  Index n = 0;
};

EvalReport evaluate(const LocalModel& model, const SiteDataset& data, Split split);

struct TTestResult {
  double t = 0;
  double p = 1;
  double df = 0;
};

/// Welch's unequal-variance two-sample t-test, two-sided.
TTestResult welch_ttest(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double df);

struct ProbeOptions {
  double train_fraction = 0.7;
  int iterations = 400;
  double learning_rate = 0.05;
};

/// Trains a fresh multinomial logistic probe to predict the site from
/// embeddings and returns held-out accuracy. Sites are subsampled to equal
/// size first so chance is exactly 1/N.
double domain_confusion_probe(std::span<const Embedding> sites, RngStream& rng,
                              const ProbeOptions& options = {});

}  // namespace fedcl
