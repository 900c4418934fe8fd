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
#include <string>
#include <vector>

#include "fedcl/data.hpp"
#include "fedcl/federation.hpp"

namespace fedcl {

struct DataSource {
  enum class Kind { synthetic, csv };
  Kind kind = Kind::synthetic;
  std::filesystem::path csv_dir;
  double size_factor = 1.0;
  Index feature_dim = 16;
  std::uint64_t seed = 7;  // data generation and splits; fixed across run seeds
  // Per-feature z-scoring with each site's own train statistics. Off by
  // default: it is affine, so it would erase the synthetic intensity shift.
  bool standardize = false;
  std::vector<DomainSpec> sites;  // empty selects default_benchmark()
};

// "synthetic" or "csv:<dir>".
DataSource parse_data_flag(const std::string& flag, DataSource base = {});

/// Generates or loads every site. CSV directories hold one file per site
/// (sorted by name, site ids assigned in that order).
std::vector<SiteDataset> load_sites(const DataSource& source);

struct ExperimentPlan {
  std::vector<Strategy> strategies{Strategy::fed, Strategy::fed_align, Strategy::fed_align_cl};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  DataSource data;
  FederationConfig federation;
  std::vector<int> tau_grid;
  std::vector<double> sigma2_grid;
  std::filesystem::path out;
  int threads = 1;  // plan cells run concurrently
  bool log_messages = false;

  void validate() const;
};

/// Reads a JSON plan document. Unknown keys are rejected.
ExperimentPlan load_plan(const std::filesystem::path& path);
ExperimentPlan plan_from_json(const std::string& text);
std::string plan_to_json(const ExperimentPlan& plan);

// "1,2,3" or "1-5" or a mix.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<Strategy> parse_strategy_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

}  // namespace fedcl
