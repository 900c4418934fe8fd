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

#include <optional>
#include <span>
#include <vector>

#include "fedcl/autodiff.hpp"
#include "fedcl/models.hpp"
#include "fedcl/rng.hpp"

namespace fedcl {

inline constexpr double kForgottenScore = 2.0;
inline constexpr double kDefaultScore = 1.0;
inline constexpr double kPredictionThreshold = 0.5;

/// Memory-aware score: a sample the local model got right and the freshly
/// deployed global model gets wrong is "forgotten" and scores 2.0.
double score(int label, int local_pred, int global_pred);

struct CurriculumState {
  VectorXr scores;
  VectorXr probabilities;
  std::vector<Index> permutation;
  std::vector<int> local_preds;
  std::vector<int> global_preds;
  Index cursor = 0;
  // Alignment draws walk the same permutation cyclically so they never
  // starve the classification stream.
  Index align_cursor = 0;

  Index forgotten() const;
  // Shannon entropy (nats) of the current probabilities.
  double entropy() const;
};

enum class SnapshotTime { pre_aggregation, post_deployment };

/// Thresholded eval-mode predictions over `x`.
std::vector<int> snapshot_predictions(const LocalModel& model, const MatrixXr& x);

/// Sequential weighted sampling without replacement under gamma = rho / sum(rho).
std::vector<Index> build_permutation(std::span<const double> scores, RngStream& rng,
                                     VectorXr* probabilities = nullptr);
std::vector<Index> uniform_permutation(Index m, RngStream& rng);

/// Recomputes scores from the stored snapshots and redraws the permutation.
void refresh_curriculum(CurriculumState& state, std::span<const int> labels,
                        RngStream& rng);
/// Uniform shuffle with all scores reset to 1.
void reset_uniform(CurriculumState& state, Index m, RngStream& rng);

/// Next consecutive slice of the permutation; nullopt once the epoch is
/// exhausted. A final short slice is returned as-is.
std::optional<std::span<const Index>> next_batch(CurriculumState& state, Index batch_size);
/// Same permutation, separate cursor, wraps at the end.
std::vector<Index> next_cyclic_batch(CurriculumState& state, Index batch_size);

}  // namespace fedcl
