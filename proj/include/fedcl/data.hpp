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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fedcl/autodiff.hpp"
#include "fedcl/rng.hpp"

namespace fedcl {

struct Sample {
  VectorXr features;
  int label = 0;  // 1 is the positive (malignant-analog) class
  int site_id = 0;
  std::int64_t sample_id = 0;
};

enum class Split { train, val, test };
std::string to_string(Split split);

struct SiteDataset {
  int site_id = 0;
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;

  Index m() const { return static_cast<Index>(train.size()); }
  Index dim() const;
  const std::vector<Sample>& split(Split s) const;
};

enum class BaseDistribution { gaussian_blobs, rings };
std::string to_string(BaseDistribution base);
BaseDistribution parse_base_distribution(const std::string& name);

struct DomainSpec {
  int site_id = 0;
  double intensity_shift = 0.0;
  double intensity_scale = 1.0;
  double class_balance = 0.5;
  Index n_samples = 0;
  BaseDistribution base_distribution = BaseDistribution::gaussian_blobs;
  Index feature_dim = 16;
  // Geometry of the class-conditional distribution. Sites that share these
  // share the underlying task; only the intensity transform differs.
  std::uint64_t task_seed = 2024;
  int blobs_per_class = 2;
  double class_separation = 2.0;
};

/// Default three-site benchmark: sizes {1460, 410, 852} times `size_factor`,
/// positive fractions {0.5, 0.3, 0.5}, intensity shifts {0, +2, -2}.
std::vector<DomainSpec> default_benchmark(double size_factor = 1.0,
                                          Index feature_dim = 16);

SiteDataset generate_site(const DomainSpec& spec, RngStream& rng);

// Deterministic 70/10/20 split of `samples` (order given by `rng`).
SiteDataset split_samples(int site_id, std::vector<Sample> samples,
                          RngStream& rng);

struct CsvSchema {
  Index feature_dim = 0;  // 0 infers the width from the header
  int site_id = 0;
};

/// Reads `f0,...,f{d-1},label` rows and splits them with `split_seed`.
SiteDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema,
                     std::uint64_t split_seed);

void write_csv(const std::filesystem::path& path, std::span<const Sample> rows);

/// Per-feature z-scoring with statistics from the train split only.
SiteDataset standardize(const SiteDataset& dataset);

MatrixXr feature_matrix(std::span<const Sample> samples);
Eigen::VectorXi label_vector(std::span<const Sample> samples);

}  // namespace fedcl
