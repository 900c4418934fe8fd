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
#include "fedcl/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

#include "fedcl/errors.hpp"
#include "parallel.hpp"

namespace fedcl {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string shortest(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, ptr) : "nan";
}

std::string fixed4(double v) {
  if (std::isnan(v)) return "n/a";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << v;
  return os.str();
}

ordered_json number_or_null(double v) {
  return std::isnan(v) ? ordered_json(nullptr) : ordered_json(v);
}

double read_number(const nlohmann::json& j) {
  return j.is_null() ? kNaN : j.get<double>();
}

ordered_json report_json(const EvalReport& r) {
  return {{"site_id", r.site_id},   {"split", r.split},
          {"roc_auc", number_or_null(r.roc_auc)}, {"pr_auc", number_or_null(r.pr_auc)},
          {"loss", number_or_null(r.loss)},       {"n", r.n}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.site_id = j.at("site_id").get<int>();
  r.split = j.at("split").get<std::string>();
  r.roc_auc = read_number(j.at("roc_auc"));
  r.pr_auc = read_number(j.at("pr_auc"));
  r.loss = read_number(j.at("loss"));
  r.n = j.at("n").get<Index>();
  return r;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

fs::path cell_dir(const fs::path& out, Strategy strategy, std::uint64_t seed) {
  return out / "cells" / to_string(strategy) / ("seed_" + std::to_string(seed));
}

std::string embeddings_csv(const std::vector<Embedding>& embeddings,
                           const std::vector<std::vector<int>>& labels) {
  std::ostringstream os;
  const Index dim = embeddings.empty() ? 0 : embeddings.front().vectors.cols();
  os << "site_id,label";
  for (Index c = 0; c < dim; ++c) os << ",e" << c;
  os << '\n';
  for (std::size_t s = 0; s < embeddings.size(); ++s) {
    const auto& v = embeddings[s].vectors;
    for (Index r = 0; r < v.rows(); ++r) {
      os << embeddings[s].site_id << ',' << labels[s][static_cast<std::size_t>(r)];
      for (Index c = 0; c < v.cols(); ++c) os << ',' << shortest(v(r, c));
      os << '\n';
    }
  }
  return os.str();
}

ordered_json cell_json(const CellResult& cell) {
  ordered_json rows = ordered_json::array();
  for (const auto& row : cell.rows) {
    ordered_json sites = ordered_json::array();
    for (const auto& r : row.sites) sites.push_back(report_json(r));
    rows.push_back({{"label", row.label}, {"trained_on", row.trained_on}, {"sites", sites}});
  }
  return {{"strategy", to_string(cell.strategy)},
          {"seed", cell.seed},
          {"ok", cell.ok},
          {"error", cell.error},
          {"probe_accuracy", number_or_null(cell.probe_accuracy)},
          {"rows", rows}};
}

CellResult cell_from_json(const nlohmann::json& j) {
  CellResult cell;
  cell.strategy = parse_strategy(j.at("strategy").get<std::string>());
  cell.seed = j.at("seed").get<std::uint64_t>();
  cell.ok = j.at("ok").get<bool>();
  cell.error = j.at("error").get<std::string>();
  cell.probe_accuracy = read_number(j.at("probe_accuracy"));
  for (const auto& r : j.at("rows")) {
    ReportRow row;
    row.label = r.at("label").get<std::string>();
    row.trained_on = r.at("trained_on").get<int>();
    for (const auto& s : r.at("sites")) row.sites.push_back(report_from_json(s));
    cell.rows.push_back(std::move(row));
  }
  return cell;
}

double row_average(const ReportRow& row, double EvalReport::*metric) {
  double sum = 0;
  for (const auto& r : row.sites) sum += r.*metric;
  return row.sites.empty() ? kNaN : sum / static_cast<double>(row.sites.size());
}

std::vector<std::string> row_labels(Strategy s, const std::vector<int>& site_ids) {
  if (s != Strategy::cross) return {to_string(s)};
  std::vector<std::string> out;
  for (int id : site_ids) out.push_back("cross@" + std::to_string(id));
  return out;
}

}  // namespace

double median(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
               values.end());
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

const SummaryRow* PlanResult::row(const std::string& label) const {
  for (const auto& r : summary) {
    if (r.label == label) return &r;
  }
  return nullptr;
}

CellResult run_cell(const ExperimentPlan& plan, const std::vector<SiteDataset>& sites,
                    Strategy strategy, std::uint64_t seed) {
  CellResult cell;
  cell.strategy = strategy;
  cell.seed = seed;
  FederationConfig config = plan.federation;
  config.strategy = strategy;
  config.seed = seed;
  const ExperimentResult result = run_experiment(config, sites);
  cell.ok = true;
  cell.rows = result.rows;
  cell.probe_accuracy = result.probe_accuracy;

  if (!plan.out.empty()) {
    const fs::path dir = cell_dir(plan.out, strategy, seed);
    fs::create_directories(dir);
    std::ostringstream reports;
    for (const auto& row : result.rows) {
      for (const auto& r : row.sites) {
        ordered_json j = report_json(r);
        j["row"] = row.label;
        reports << j.dump() << '\n';
      }
    }
    write_file(dir / "reports.jsonl", reports.str());
    std::ostringstream epochs;
    for (std::size_t e = 0; e < result.epoch_reports.size(); ++e) {
      ordered_json j;
      j["epoch"] = e + 1;
      ordered_json sites_json = ordered_json::array();
      for (const auto& r : result.epoch_reports[e]) sites_json.push_back(report_json(r));
      j["val"] = sites_json;
      epochs << j.dump() << '\n';
    }
    write_file(dir / "epochs.jsonl", epochs.str());
    std::ostringstream rounds;
    for (const auto& log : result.logs) rounds << to_jsonl(log, plan.log_messages) << '\n';
    write_file(dir / "rounds.jsonl", rounds.str());
    for (std::size_t g = 0; g < result.embeddings.size(); ++g) {
      const std::string name =
          strategy == Strategy::cross
              ? "embeddings_tr" + std::to_string(result.rows[g].trained_on) + ".csv"
              : "embeddings.csv";
      write_file(dir / name, embeddings_csv(result.embeddings[g], result.embedding_labels[g]));
    }
    write_file(dir / "cell.json", cell_json(cell).dump(1) + "\n");
  }
  return cell;
}

std::vector<SummaryRow> summarize(const std::vector<CellResult>& cells,
                                  const std::vector<int>& site_ids,
                                  const std::vector<Strategy>& strategies) {
  std::vector<SummaryRow> out;
  for (Strategy s : strategies) {
    for (const auto& label : row_labels(s, site_ids)) {
      SummaryRow summary;
      summary.label = label;
      std::vector<std::vector<double>> roc(site_ids.size());
      std::vector<std::vector<double>> pr(site_ids.size());
      std::vector<double> avg_roc;
      std::vector<double> avg_pr;
      std::vector<double> probe;
      for (const auto& cell : cells) {
        if (cell.strategy != s || !cell.ok) continue;
        for (const auto& row : cell.rows) {
          if (row.label != label) continue;
          ++summary.runs;
          for (const auto& r : row.sites) {
            const auto it = std::find(site_ids.begin(), site_ids.end(), r.site_id);
            if (it == site_ids.end()) continue;
            const auto k = static_cast<std::size_t>(it - site_ids.begin());
            roc[k].push_back(r.roc_auc);
            pr[k].push_back(r.pr_auc);
          }
          avg_roc.push_back(row_average(row, &EvalReport::roc_auc));
          avg_pr.push_back(row_average(row, &EvalReport::pr_auc));
        }
        probe.push_back(cell.probe_accuracy);
      }
      for (std::size_t k = 0; k < site_ids.size(); ++k) {
        summary.roc_auc.push_back(median(roc[k]));
        summary.pr_auc.push_back(median(pr[k]));
      }
      summary.average_roc_auc = median(avg_roc);
      summary.average_pr_auc = median(avg_pr);
      summary.probe_accuracy = s == Strategy::cross ? kNaN : median(probe);
      out.push_back(std::move(summary));
    }
  }
  return out;
}

std::vector<TTestRow> pairwise_ttests(const std::vector<CellResult>& cells,
                                      const std::vector<Strategy>& strategies) {
  std::vector<Strategy> federated;
  for (Strategy s : strategies) {
    if (is_federated(s)) federated.push_back(s);
  }
  auto per_seed = [&](Strategy s, double EvalReport::*metric) {
    std::vector<double> v;
    for (const auto& cell : cells) {
      if (cell.strategy == s && cell.ok && !cell.rows.empty()) {
        v.push_back(row_average(cell.rows.front(), metric));
      }
    }
    return v;
  };
  std::vector<TTestRow> out;
  for (std::size_t a = 0; a < federated.size(); ++a) {
    for (std::size_t b = a + 1; b < federated.size(); ++b) {
      for (auto [name, metric] : {std::pair{"average_roc_auc", &EvalReport::roc_auc},
                                  std::pair{"average_pr_auc", &EvalReport::pr_auc}}) {
        TTestRow row{to_string(federated[a]), to_string(federated[b]), name, {}, true};
        try {
          row.result = welch_ttest(per_seed(federated[a], metric), per_seed(federated[b], metric));
        } catch (const ValidationError&) {
          row.defined = false;
          row.result = {kNaN, kNaN, kNaN};
        }
        out.push_back(row);
      }
    }
  }
  return out;
}

std::string render_summary_markdown(const PlanResult& result) {
  std::ostringstream os;
  os << "| Strategy |";
  for (int id : result.site_ids) os << " site " << id << " ROC-AUC | site " << id << " PR-AUC |";
  os << " Avg ROC-AUC | Avg PR-AUC | Probe acc. | Runs |\n|---|";
  for (std::size_t k = 0; k < result.site_ids.size(); ++k) os << "---|---|";
  os << "---|---|---|---|\n";
  for (const auto& row : result.summary) {
    os << "| " << row.label << " |";
    for (std::size_t k = 0; k < result.site_ids.size(); ++k) {
      os << ' ' << fixed4(row.roc_auc[k]) << " | " << fixed4(row.pr_auc[k]) << " |";
    }
    os << ' ' << fixed4(row.average_roc_auc) << " | " << fixed4(row.average_pr_auc) << " | "
       << fixed4(row.probe_accuracy) << " | " << row.runs << " |\n";
  }
  return os.str();
}

std::string render_summary_csv(const PlanResult& result) {
  std::ostringstream os;
  os << "strategy";
  for (int id : result.site_ids) os << ",site" << id << "_roc_auc,site" << id << "_pr_auc";
  os << ",average_roc_auc,average_pr_auc,probe_accuracy,runs\n";
  for (const auto& row : result.summary) {
    os << row.label;
    for (std::size_t k = 0; k < result.site_ids.size(); ++k) {
      os << ',' << shortest(row.roc_auc[k]) << ',' << shortest(row.pr_auc[k]);
    }
    os << ',' << shortest(row.average_roc_auc) << ',' << shortest(row.average_pr_auc) << ','
       << shortest(row.probe_accuracy) << ',' << row.runs << '\n';
  }
  return os.str();
}

std::string render_ttests_csv(const std::vector<TTestRow>& rows) {
  std::ostringstream os;
  os << "a,b,metric,t,df,p\n";
  for (const auto& r : rows) {
    os << r.a << ',' << r.b << ',' << r.metric << ',' << shortest(r.result.t) << ','
       << shortest(r.result.df) << ',' << shortest(r.result.p) << '\n';
  }
  return os.str();
}

namespace {

void write_plan_outputs(const ExperimentPlan& plan, const PlanResult& result) {
  fs::create_directories(plan.out);
  write_file(plan.out / "plan.json", plan_to_json(plan) + "\n");
  write_file(plan.out / "summary.md", render_summary_markdown(result));
  write_file(plan.out / "summary.csv", render_summary_csv(result));
  write_file(plan.out / "ttests.csv", render_ttests_csv(result.ttests));
  ordered_json manifest;
  manifest["status"] = result.ok() ? "ok" : "failed";
  manifest["site_ids"] = result.site_ids;
  ordered_json cells = ordered_json::array();
  for (const auto& c : result.cells) {
    cells.push_back({{"strategy", to_string(c.strategy)},
                     {"seed", c.seed},
                     {"ok", c.ok},
                     {"error", c.error}});
  }
  manifest["cells"] = cells;
  manifest["failures"] = result.failures;
  write_file(plan.out / "manifest.json", manifest.dump(1) + "\n");
  const fs::path failures = plan.out / "failures.json";
  if (!result.ok()) {
    write_file(failures, manifest.dump(1) + "\n");
  } else if (fs::exists(failures)) {
    fs::remove(failures);
  }
}

}  // namespace

PlanResult run_plan(const ExperimentPlan& input) {
  input.validate();
  const std::vector<SiteDataset> sites = load_sites(input.data);
  ExperimentPlan plan = input;
  if (!sites.empty()) plan.federation.arch.input_dim = sites.front().dim();

  PlanResult result;
  for (const auto& s : sites) result.site_ids.push_back(s.site_id);
  for (Strategy s : plan.strategies) {
    for (auto seed : plan.seeds) {
      CellResult c;
      c.strategy = s;
      c.seed = seed;
      result.cells.push_back(c);
    }
  }
  detail::parallel_for(result.cells.size(), plan.threads, [&](std::size_t i) {
    auto& cell = result.cells[i];
    try {
      cell = run_cell(plan, sites, cell.strategy, cell.seed);
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  });
  for (const auto& c : result.cells) {
    if (!c.ok) {
      result.failures.push_back(to_string(c.strategy) + "/seed_" + std::to_string(c.seed) +
                                ": " + c.error);
    }
  }
  result.summary = summarize(result.cells, result.site_ids, plan.strategies);
  result.ttests = pairwise_ttests(result.cells, plan.strategies);
  if (!plan.out.empty()) write_plan_outputs(plan, result);
  return result;
}

PlanResult load_report(const fs::path& out_dir) {
  const ExperimentPlan plan = load_plan(out_dir / "plan.json");
  std::ifstream in(out_dir / "manifest.json");
  if (!in) throw ConfigError("no manifest.json in " + out_dir.string());
  nlohmann::json manifest;
  in >> manifest;
  PlanResult result;
  result.site_ids = manifest.at("site_ids").get<std::vector<int>>();
  for (Strategy s : plan.strategies) {
    for (auto seed : plan.seeds) {
      const fs::path path = cell_dir(out_dir, s, seed) / "cell.json";
      std::ifstream cell_in(path);
      if (!cell_in) {
        CellResult missing;
        missing.strategy = s;
        missing.seed = seed;
        missing.error = "missing " + path.string();
        result.cells.push_back(missing);
        result.failures.push_back(to_string(s) + "/seed_" + std::to_string(seed) + ": missing");
        continue;
      }
      nlohmann::json j;
      cell_in >> j;
      result.cells.push_back(cell_from_json(j));
      if (!result.cells.back().ok) {
        result.failures.push_back(to_string(s) + "/seed_" + std::to_string(seed) + ": " +
                                  result.cells.back().error);
      }
    }
  }
  result.summary = summarize(result.cells, result.site_ids, plan.strategies);
  result.ttests = pairwise_ttests(result.cells, plan.strategies);
  return result;
}

SweepResult sweep(const ExperimentPlan& plan) {
  plan.validate();
  const std::vector<int> taus =
      plan.tau_grid.empty() ? std::vector<int>{plan.federation.pace} : plan.tau_grid;
  std::vector<double> sigmas = plan.sigma2_grid.empty()
                                   ? std::vector<double>{plan.federation.noise_variance}
                                   : plan.sigma2_grid;
  SweepResult out;
  for (int tau : taus) {
    for (double s2 : sigmas) {
      ExperimentPlan point = plan;
      point.federation.pace = tau;
      point.federation.noise_variance = s2;
      if (!plan.out.empty()) {
        point.out = plan.out / "sweep" / ("tau_" + std::to_string(tau) + "_sigma2_" + shortest(s2));
      }
      const PlanResult r = run_plan(point);
      for (const auto& f : r.failures) out.failures.push_back(f);
      for (const auto& row : r.summary) {
        out.rows.push_back({tau, s2, row.label, row.average_roc_auc, row.average_pr_auc});
      }
    }
  }
  // Degradation check: with sigma^2 ascending, AUC may not rise by more
  // than the tolerance.
  std::map<std::pair<int, std::string>, std::vector<SweepRow>> groups;
  for (const auto& row : out.rows) groups[{row.tau, row.strategy}].push_back(row);
  for (auto& [key, rows] : groups) {
    std::sort(rows.begin(), rows.end(),
              [](const SweepRow& a, const SweepRow& b) { return a.sigma2 < b.sigma2; });
    bool ok = true;
    std::string detail;
    for (std::size_t k = 1; k < rows.size(); ++k) {
      if (rows[k].average_roc_auc > rows[k - 1].average_roc_auc + kDegradationTolerance) {
        ok = false;
        detail += " rises at sigma2=" + shortest(rows[k].sigma2);
      }
    }
    out.monotone = out.monotone && ok;
    out.degradation.push_back("tau=" + std::to_string(key.first) + " " + key.second + ": " +
                              (ok ? "non-increasing in sigma2" : "violated:" + detail));
  }
  if (!plan.out.empty()) {
    fs::create_directories(plan.out);
    write_file(plan.out / "sweep.csv", render_sweep_csv(out));
    std::ostringstream os;
    for (const auto& line : out.degradation) os << line << '\n';
    write_file(plan.out / "sweep_degradation.txt", os.str());
  }
  return out;
}

std::string render_sweep_csv(const SweepResult& result) {
  std::ostringstream os;
  os << "tau,sigma2,strategy,average_roc_auc,average_pr_auc\n";
  for (const auto& r : result.rows) {
    os << r.tau << ',' << shortest(r.sigma2) << ',' << r.strategy << ','
       << shortest(r.average_roc_auc) << ',' << shortest(r.average_pr_auc) << '\n';
  }
  return os.str();
}

}  // namespace fedcl
