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
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedcl/config.hpp"
#include "fedcl/errors.hpp"
#include "fedcl/harness.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string strategy;
  std::string seeds;
  std::string out;
  std::string data;
  std::string tau;
  std::string sigma2;
  std::optional<int> epochs;
  std::optional<int> warmup;
  std::optional<int> threads;
};

void add_plan_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON plan file");
  cmd->add_option("--strategy", o.strategy, "comma-separated strategies");
  cmd->add_option("--seeds", o.seeds, "seed list, e.g. 1-5 or 1,3,7");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--data", o.data, "synthetic | csv:<dir>");
  cmd->add_option("--tau", o.tau, "communication pace (comma list for sweep)");
  cmd->add_option("--sigma2", o.sigma2, "noise variance (comma list for sweep)");
  cmd->add_option("--epochs", o.epochs);
  cmd->add_option("--warmup", o.warmup, "warm-up epochs");
  cmd->add_option("--threads", o.threads, "concurrent plan cells");
}

fedcl::ExperimentPlan build_plan(const Overrides& o, bool grids) {
  fedcl::ExperimentPlan plan = o.config.empty() ? fedcl::ExperimentPlan{}
                                                : fedcl::load_plan(o.config);
  if (!o.strategy.empty()) plan.strategies = fedcl::parse_strategy_list(o.strategy);
  if (!o.seeds.empty()) plan.seeds = fedcl::parse_seed_list(o.seeds);
  if (!o.out.empty()) plan.out = o.out;
  if (!o.data.empty()) plan.data = fedcl::parse_data_flag(o.data, plan.data);
  if (!o.tau.empty()) {
    const auto taus = fedcl::parse_int_list(o.tau);
    if (grids) {
      plan.tau_grid = taus;
    } else if (taus.size() != 1) {
      throw fedcl::ConfigError("--tau takes a single value for run");
    } else {
      plan.federation.pace = taus.front();
    }
  }
  if (!o.sigma2.empty()) {
    const auto values = fedcl::parse_double_list(o.sigma2);
    if (grids) {
      plan.sigma2_grid = values;
    } else if (values.size() != 1) {
      throw fedcl::ConfigError("--sigma2 takes a single value for run");
    } else {
      plan.federation.noise_variance = values.front();
    }
  }
  if (o.epochs) plan.federation.epochs = *o.epochs;
  if (o.warmup) plan.federation.warmup_epochs = *o.warmup;
  if (o.threads) plan.threads = *o.threads;
  if (grids && plan.tau_grid.empty() && plan.sigma2_grid.empty()) {
    throw fedcl::ConfigError("sweep needs --tau or --sigma2 grid");
  }
  plan.validate();
  return plan;
}

void print_failure(const std::string& kind, const std::vector<std::string>& failures) {
  nlohmann::ordered_json j;
  j["status"] = "failed";
  j["kind"] = kind;
  j["failures"] = failures;
  std::cerr << j.dump(1) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-aware curriculum federated learning simulator"};
  app.require_subcommand(1);

  Overrides run_opts;
  Overrides sweep_opts;
  std::string report_dir;
  auto* run = app.add_subcommand("run", "run every (strategy, seed) cell of a plan");
  add_plan_flags(run, run_opts);
  auto* sw = app.add_subcommand("sweep", "grid over tau and sigma2");
  add_plan_flags(sw, sweep_opts);
  auto* report = app.add_subcommand("report", "re-render summary tables from a result directory");
  report->add_option("--out", report_dir, "result directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto plan = build_plan(run_opts, false);
      const auto result = fedcl::run_plan(plan);
      std::cout << fedcl::render_summary_markdown(result);
      for (const auto& t : result.ttests) {
        std::cout << t.a << " vs " << t.b << " " << t.metric << ": t=" << t.result.t
                  << " p=" << t.result.p << '\n';
      }
      if (!result.ok()) {
        print_failure("cells", result.failures);
        return 1;
      }
      return 0;
    }
    if (sw->parsed()) {
      const auto plan = build_plan(sweep_opts, true);
      const auto result = fedcl::sweep(plan);
      std::cout << fedcl::render_sweep_csv(result);
      for (const auto& line : result.degradation) std::cout << line << '\n';
      if (!result.failures.empty()) {
        print_failure("cells", result.failures);
        return 1;
      }
      return 0;
    }
    const auto result = fedcl::load_report(report_dir);
    std::cout << fedcl::render_summary_markdown(result);
    std::cout << fedcl::render_ttests_csv(result.ttests);
    if (!result.ok()) {
      print_failure("cells", result.failures);
      return 1;
    }
    return 0;
  } catch (const fedcl::ConfigError& e) {
    print_failure("config", {e.what()});
    return 2;
  } catch (const fedcl::ParseError& e) {
    print_failure("config", {e.what()});
    return 2;
  } catch (const std::exception& e) {
    print_failure("error", {e.what()});
    return 1;
  }
}
