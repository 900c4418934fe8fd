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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedcl/config.hpp"
#include "fedcl/errors.hpp"
#include "fedcl/harness.hpp"

namespace fedcl {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fedcl_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentPlan small_plan(std::vector<Strategy> strategies) {
  ExperimentPlan p;
  p.strategies = std::move(strategies);
  p.seeds = {1, 2};
  p.data.size_factor = 0.25;
  p.federation.epochs = 2;
  p.federation.warmup_epochs = 1;
  p.federation.iterations = 20;
  p.federation.pace = 5;
  return p;
}

TEST(Config, SeedAndListParsing) {
  EXPECT_EQ(parse_seed_list("1-5"), (std::vector<std::uint64_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(parse_seed_list("3,7-8"), (std::vector<std::uint64_t>{3, 7, 8}));
  EXPECT_THROW(parse_seed_list("5-1"), ConfigError);
  EXPECT_THROW(parse_seed_list("x"), ConfigError);
  EXPECT_EQ(parse_strategy_list("fed,fed_align_cl").size(), 2u);
  EXPECT_THROW(parse_strategy_list("fed,nope"), ConfigError);
  EXPECT_EQ(parse_double_list("0,0.001").size(), 2u);
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(plan_from_json(R"({"epochs": 3})"), ConfigError);
  EXPECT_THROW(plan_from_json(R"({"federation": {"lr": 1}})"), ConfigError);
  EXPECT_THROW(plan_from_json("{"), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  const auto plan = plan_from_json(
      R"({"strategies": ["fed", "mix"], "seeds": [4], "federation": {"tau": 10, "sigma2": 0.01},
          "sweep": {"tau": [5, 10], "sigma2": [0, 0.1]}})");
  EXPECT_EQ(plan.federation.pace, 10);
  EXPECT_DOUBLE_EQ(plan.federation.noise_variance, 0.01);
  EXPECT_EQ(plan.tau_grid, (std::vector<int>{5, 10}));
  const auto again = plan_from_json(plan_to_json(plan));
  EXPECT_EQ(plan_to_json(again), plan_to_json(plan));
}

TEST(Config, PlanValidation) {
  auto p = small_plan({Strategy::fed});
  EXPECT_NO_THROW(p.validate());
  p.tau_grid = {50};
  EXPECT_THROW(p.validate(), ConfigError);
  p.tau_grid.clear();
  p.seeds.clear();
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Config, DataFlag) {
  EXPECT_EQ(parse_data_flag("synthetic").kind, DataSource::Kind::synthetic);
  const auto csv = parse_data_flag("csv:/tmp/x");
  EXPECT_EQ(csv.kind, DataSource::Kind::csv);
  EXPECT_EQ(csv.csv_dir, fs::path("/tmp/x"));
  EXPECT_THROW(parse_data_flag("parquet:/x"), ConfigError);
}

TEST(Harness, MedianIgnoresNan) {
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2);
  EXPECT_DOUBLE_EQ(median({4, 1, std::nan(""), 2, 3}), 2.5);
  EXPECT_TRUE(std::isnan(median({})));
}

TEST(Harness, RunPlanWritesCellsAndSummary) {
  auto plan = small_plan({Strategy::fed, Strategy::fed_align});
  plan.out = scratch_dir("plan");
  const auto r = run_plan(plan);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.cells.size(), 4u);
  EXPECT_EQ(r.site_ids, (std::vector<int>{0, 1, 2}));
  for (const char* label : {"fed", "fed_align"}) {
    const auto* row = r.row(label);
    ASSERT_NE(row, nullptr);
    EXPECT_EQ(row->runs, 2);
    EXPECT_EQ(row->roc_auc.size(), 3u);
    EXPECT_GE(row->average_roc_auc, 0.0);
    EXPECT_LE(row->average_roc_auc, 1.0);
  }
  ASSERT_EQ(r.ttests.size(), 2u);
  for (const char* f : {"plan.json", "manifest.json", "summary.md", "summary.csv", "ttests.csv"}) {
    EXPECT_TRUE(fs::exists(plan.out / f)) << f;
  }
  EXPECT_FALSE(fs::exists(plan.out / "failures.json"));
  const auto cell = plan.out / "cells" / "fed_align" / "seed_2";
  for (const char* f : {"reports.jsonl", "epochs.jsonl", "rounds.jsonl", "embeddings.csv",
                        "cell.json"}) {
    EXPECT_TRUE(fs::exists(cell / f)) << f;
  }
  EXPECT_EQ(slurp(cell / "embeddings.csv").substr(0, 19), "site_id,label,e0,e1");
}

TEST(Harness, RerunIsByteIdenticalAndReloads) {
  auto plan = small_plan({Strategy::fed_cl});
  plan.out = scratch_dir("rerun_a");
  const auto a = run_plan(plan);
  auto other = plan;
  other.out = scratch_dir("rerun_b");
  other.threads = 2;
  run_plan(other);
  for (const char* f : {"summary.csv", "ttests.csv"}) {
    EXPECT_EQ(slurp(plan.out / f), slurp(other.out / f)) << f;
  }
  EXPECT_EQ(slurp(plan.out / "cells/fed_cl/seed_1/rounds.jsonl"),
            slurp(other.out / "cells/fed_cl/seed_1/rounds.jsonl"));
  const auto loaded = load_report(plan.out);
  EXPECT_EQ(render_summary_csv(loaded), render_summary_csv(a));
  EXPECT_EQ(render_summary_markdown(loaded), render_summary_markdown(a));
}

TEST(Harness, CrossSuppressesTrainingSite) {
  auto plan = small_plan({Strategy::cross, Strategy::single});
  plan.seeds = {1};
  const auto r = run_plan(plan);
  ASSERT_TRUE(r.ok());
  for (int site : r.site_ids) {
    const auto* row = r.row("cross@" + std::to_string(site));
    ASSERT_NE(row, nullptr);
    for (std::size_t k = 0; k < r.site_ids.size(); ++k) {
      EXPECT_EQ(std::isnan(row->roc_auc[k]), r.site_ids[k] == site);
    }
    EXPECT_TRUE(std::isnan(row->probe_accuracy));
  }
  EXPECT_NE(r.row("single"), nullptr);
  EXPECT_TRUE(r.ttests.empty());
}

TEST(Harness, FailedCellIsRecorded) {
  auto plan = small_plan({Strategy::fed});
  plan.federation.iterations = 100;  // more steps than the smallest site has samples
  plan.federation.pace = 10;
  plan.seeds = {1};
  plan.out = scratch_dir("fail");
  const auto r = run_plan(plan);
  EXPECT_FALSE(r.ok());
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].rfind("fed/seed_1: ", 0), 0u);
  EXPECT_TRUE(fs::exists(plan.out / "failures.json"));
}

TEST(Harness, SweepCoversGrid) {
  auto plan = small_plan({Strategy::fed});
  plan.seeds = {1};
  plan.tau_grid = {5, 20};
  plan.sigma2_grid = {0, 0.01};
  plan.out = scratch_dir("sweep");
  const auto s = sweep(plan);
  EXPECT_TRUE(s.failures.empty());
  EXPECT_EQ(s.rows.size(), 4u);
  EXPECT_EQ(s.degradation.size(), 2u);
  EXPECT_TRUE(fs::exists(plan.out / "sweep.csv"));
  EXPECT_TRUE(fs::exists(plan.out / "sweep" / "tau_20_sigma2_0.01" / "summary.csv"));
  EXPECT_EQ(render_sweep_csv(s).substr(0, 8), "tau,sigm");
}

}  // namespace
}  // namespace fedcl
