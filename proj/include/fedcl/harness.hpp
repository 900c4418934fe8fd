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

#include "fedcl/config.hpp"
#include "fedcl/federation.hpp"
#include "fedcl/metrics.hpp"

namespace fedcl {

struct CellResult {
  Strategy strategy = Strategy::fed;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<ReportRow> rows;
  double probe_accuracy = 0;
};

struct SummaryRow {
  std::string label;
  std::vector<double> roc_auc;  // per site, NaN where suppressed
  std::vector<double> pr_auc;
  double average_roc_auc = 0;
  double average_pr_auc = 0;
  double probe_accuracy = 0;
  int runs = 0;
};

struct TTestRow {
  std::string a;
  std::string b;
  std::string metric;
  TTestResult result;
  bool defined = true;
};

struct PlanResult {
  std::vector<int> site_ids;
  std::vector<CellResult> cells;
  std::vector<SummaryRow> summary;
  std::vector<TTestRow> ttests;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
  const SummaryRow* row(const std::string& label) const;
};

double median(std::vector<double> values);

/// Runs every (strategy, seed) cell, writing artifacts under plan.out when
/// it is non-empty. Failed cells are recorded and the plan continues.
PlanResult run_plan(const ExperimentPlan& plan);

CellResult run_cell(const ExperimentPlan& plan, const std::vector<SiteDataset>& sites,
                    Strategy strategy, std::uint64_t seed);

std::vector<SummaryRow> summarize(const std::vector<CellResult>& cells,
                                  const std::vector<int>& site_ids,
                                  const std::vector<Strategy>& strategies);
std::vector<TTestRow> pairwise_ttests(const std::vector<CellResult>& cells,
                                      const std::vector<Strategy>& strategies);

std::string render_summary_markdown(const PlanResult& result);
std::string render_summary_csv(const PlanResult& result);
std::string render_ttests_csv(const std::vector<TTestRow>& rows);

/// Rebuilds the summary from the cell records of a finished run.
PlanResult load_report(const std::filesystem::path& out_dir);

struct SweepRow {
  int tau = 0;
  double sigma2 = 0;
  std::string strategy;
  double average_roc_auc = 0;
  double average_pr_auc = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  // One line per (tau, strategy): whether AUC is non-increasing in sigma^2.
  std::vector<std::string> degradation;
  bool monotone = true;
  std::vector<std::string> failures;
};

inline constexpr double kDegradationTolerance = 0.02;

SweepResult sweep(const ExperimentPlan& plan);
std::string render_sweep_csv(const SweepResult& result);

}  // namespace fedcl
