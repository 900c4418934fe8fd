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

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fedcl/autodiff.hpp"
#include "fedcl/rng.hpp"

namespace fedcl {

struct ArchConfig {
  Index input_dim = 16;
  std::vector<Index> feature_hidden{64, 32};
  Index embedding_dim = 16;
  Index classifier_hidden = 8;
  bool classifier_batchnorm = true;
  double dropout_rate = 0.5;
  Index discriminator_hidden = 4;

  // Stable short hash of the layer layout, stamped into snapshots.
  std::string hash() const;
};

/// Feature extractor, classifier, and per-site domain discriminator.
struct LocalModel {
  ArchConfig arch;
  Network<double> feature;
  Network<double> classifier;
  Network<double> discriminator;

  explicit LocalModel(const ArchConfig& arch);
  LocalModel() : LocalModel(ArchConfig{}) {}
};

struct Embedding {
  MatrixXr vectors;
  int site_id = 0;
  bool noised = false;
};

struct Prediction {
  MatrixXr probabilities;  // columns: P(negative), P(positive)
  Embedding embedding;
};

/// Eval-mode prediction; the embedding is returned un-noised.
Prediction predict(const LocalModel& model, const MatrixXr& x, int site_id = 0);
VectorXr positive_probability(const LocalModel& model, const MatrixXr& x);

struct SharedParams {
  ParamVector<double> feature;
  ParamVector<double> classifier;
};

// The discriminator is never part of the exchanged weights.
SharedParams export_params(const LocalModel& model);
void import_params(LocalModel& model, const ParamVector<double>& feature,
                   const ParamVector<double>& classifier);

// Running variances can dip below zero after noisy averaging.
void project_running_stats(Network<double>& net);

inline constexpr int kSnapshotVersion = 1;

void save_snapshot(const std::filesystem::path& path, const LocalModel& model);
void load_snapshot(const std::filesystem::path& path, LocalModel& model);

}  // namespace fedcl
