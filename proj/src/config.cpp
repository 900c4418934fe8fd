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
#include "fedcl/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "fedcl/errors.hpp"

namespace fedcl {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (allowed.count(key) == 0) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& dest) {
  if (!obj.contains(key)) return;
  try {
    dest = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_scalar(const std::string& s) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("cannot parse '" + s + "' as a number");
  }
  return value;
}

DomainSpec parse_domain(const json& j, int index) {
  reject_unknown(j,
                 {"site_id", "intensity_shift", "intensity_scale", "class_balance", "n_samples",
                  "base_distribution", "feature_dim", "task_seed", "blobs_per_class",
                  "class_separation"},
                 "data.sites[" + std::to_string(index) + "]");
  DomainSpec d;
  d.site_id = index;
  read(j, "site_id", d.site_id);
  read(j, "intensity_shift", d.intensity_shift);
  read(j, "intensity_scale", d.intensity_scale);
  read(j, "class_balance", d.class_balance);
  read(j, "n_samples", d.n_samples);
  read(j, "feature_dim", d.feature_dim);
  read(j, "task_seed", d.task_seed);
  read(j, "blobs_per_class", d.blobs_per_class);
  read(j, "class_separation", d.class_separation);
  if (j.contains("base_distribution")) {
    d.base_distribution = parse_base_distribution(j.at("base_distribution").get<std::string>());
  }
  return d;
}

void parse_arch(const json& j, ArchConfig& a) {
  reject_unknown(j,
                 {"input_dim", "feature_hidden", "embedding_dim", "classifier_hidden",
                  "classifier_batchnorm", "dropout_rate", "discriminator_hidden"},
                 "federation.arch");
  read(j, "input_dim", a.input_dim);
  read(j, "feature_hidden", a.feature_hidden);
  read(j, "embedding_dim", a.embedding_dim);
  read(j, "classifier_hidden", a.classifier_hidden);
  read(j, "classifier_batchnorm", a.classifier_batchnorm);
  read(j, "dropout_rate", a.dropout_rate);
  read(j, "discriminator_hidden", a.discriminator_hidden);
}

void parse_federation(const json& j, FederationConfig& f) {
  reject_unknown(j,
                 {"epochs", "warmup", "iterations", "tau", "learning_rate", "sigma2",
                  "sensitivity", "weighting", "init", "threads", "record_wall_time", "arch",
                  "strategy", "seed"},
                 "federation");
  read(j, "epochs", f.epochs);
  read(j, "warmup", f.warmup_epochs);
  read(j, "iterations", f.iterations);
  read(j, "tau", f.pace);
  read(j, "learning_rate", f.learning_rate);
  read(j, "sigma2", f.noise_variance);
  read(j, "sensitivity", f.sensitivity);
  read(j, "threads", f.threads);
  read(j, "record_wall_time", f.record_wall_time);
  read(j, "seed", f.seed);
  if (j.contains("weighting")) f.weighting = parse_weighting(j.at("weighting").get<std::string>());
  if (j.contains("init")) f.init = parse_init_mode(j.at("init").get<std::string>());
  if (j.contains("strategy")) f.strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (j.contains("arch")) parse_arch(j.at("arch"), f.arch);
}

json domain_to_json(const DomainSpec& d) {
  return {{"site_id", d.site_id},
          {"intensity_shift", d.intensity_shift},
          {"intensity_scale", d.intensity_scale},
          {"class_balance", d.class_balance},
          {"n_samples", d.n_samples},
          {"base_distribution", to_string(d.base_distribution)},
          {"feature_dim", d.feature_dim},
          {"task_seed", d.task_seed},
          {"blobs_per_class", d.blobs_per_class},
          {"class_separation", d.class_separation}};
}

}  // namespace

DataSource parse_data_flag(const std::string& flag, DataSource base) {
  if (flag == "synthetic") {
    base.kind = DataSource::Kind::synthetic;
  } else if (flag.rfind("csv:", 0) == 0 && flag.size() > 4) {
    base.kind = DataSource::Kind::csv;
    base.csv_dir = flag.substr(4);
  } else {
    throw ConfigError("--data must be 'synthetic' or 'csv:<dir>', got '" + flag + "'");
  }
  return base;
}

std::vector<SiteDataset> load_sites(const DataSource& source) {
  std::vector<SiteDataset> sites;
  if (source.kind == DataSource::Kind::synthetic) {
    auto specs = source.sites.empty() ? default_benchmark(source.size_factor, source.feature_dim)
                                      : source.sites;
    for (const auto& spec : specs) {
      RngStream rng = RngStream::derive(source.seed, static_cast<std::uint64_t>(spec.site_id),
                                        StreamPurpose::data);
      sites.push_back(generate_site(spec, rng));
    }
  } else {
    namespace fs = std::filesystem;
    if (!fs::is_directory(source.csv_dir)) {
      throw ConfigError("csv data directory not found: " + source.csv_dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(source.csv_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no .csv files in " + source.csv_dir.string());
    for (std::size_t i = 0; i < files.size(); ++i) {
      sites.push_back(load_csv(files[i], {0, static_cast<int>(i)}, source.seed));
    }
  }
  if (source.standardize) {
    for (auto& s : sites) s = standardize(s);
  }
  return sites;
}

void ExperimentPlan::validate() const {
  if (strategies.empty()) throw ConfigError("plan needs at least one strategy");
  if (seeds.empty()) throw ConfigError("plan needs at least one seed");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  federation.validate();
  for (int t : tau_grid) {
    if (t < 1 || t > federation.iterations) throw ConfigError("tau grid value out of range");
  }
  for (double s : sigma2_grid) {
    if (!(s >= 0)) throw ConfigError("sigma2 grid values must be >= 0");
  }
}

ExperimentPlan plan_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(doc,
                 {"strategies", "seeds", "data", "federation", "sweep", "out", "threads",
                  "log_messages"},
                 "config");
  ExperimentPlan plan;
  if (doc.contains("strategies")) {
    plan.strategies.clear();
    for (const auto& s : doc.at("strategies")) plan.strategies.push_back(parse_strategy(s.get<std::string>()));
  }
  read(doc, "seeds", plan.seeds);
  read(doc, "threads", plan.threads);
  read(doc, "log_messages", plan.log_messages);
  if (doc.contains("out")) plan.out = doc.at("out").get<std::string>();
  if (doc.contains("data")) {
    const auto& d = doc.at("data");
    reject_unknown(d, {"source", "size_factor", "feature_dim", "seed", "standardize", "sites"},
                   "data");
    if (d.contains("source")) plan.data = parse_data_flag(d.at("source").get<std::string>(), plan.data);
    read(d, "size_factor", plan.data.size_factor);
    read(d, "feature_dim", plan.data.feature_dim);
    read(d, "seed", plan.data.seed);
    read(d, "standardize", plan.data.standardize);
    if (d.contains("sites")) {
      int i = 0;
      for (const auto& s : d.at("sites")) plan.data.sites.push_back(parse_domain(s, i++));
    }
  }
  if (doc.contains("federation")) parse_federation(doc.at("federation"), plan.federation);
  if (doc.contains("sweep")) {
    const auto& s = doc.at("sweep");
    reject_unknown(s, {"tau", "sigma2"}, "sweep");
    read(s, "tau", plan.tau_grid);
    read(s, "sigma2", plan.sigma2_grid);
  }
  return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return plan_from_json(ss.str());
}

std::string plan_to_json(const ExperimentPlan& plan) {
  nlohmann::ordered_json doc;
  std::vector<std::string> strategies;
  for (auto s : plan.strategies) strategies.push_back(to_string(s));
  doc["strategies"] = strategies;
  doc["seeds"] = plan.seeds;
  json sites = json::array();
  for (const auto& s : plan.data.sites) sites.push_back(domain_to_json(s));
  doc["data"] = {{"source", plan.data.kind == DataSource::Kind::csv
                                ? "csv:" + plan.data.csv_dir.string()
                                : std::string("synthetic")},
                 {"size_factor", plan.data.size_factor},
                 {"feature_dim", plan.data.feature_dim},
                 {"seed", plan.data.seed},
                 {"standardize", plan.data.standardize},
                 {"sites", sites}};
  const auto& f = plan.federation;
  doc["federation"] = {{"epochs", f.epochs},
                       {"warmup", f.warmup_epochs},
                       {"iterations", f.iterations},
                       {"tau", f.pace},
                       {"learning_rate", f.learning_rate},
                       {"sigma2", f.noise_variance},
                       {"sensitivity", f.sensitivity},
                       {"weighting", to_string(f.weighting)},
                       {"init", to_string(f.init)},
                       {"threads", f.threads},
                       {"record_wall_time", f.record_wall_time},
                       {"arch",
                        {{"input_dim", f.arch.input_dim},
                         {"feature_hidden", f.arch.feature_hidden},
                         {"embedding_dim", f.arch.embedding_dim},
                         {"classifier_hidden", f.arch.classifier_hidden},
                         {"classifier_batchnorm", f.arch.classifier_batchnorm},
                         {"dropout_rate", f.arch.dropout_rate},
                         {"discriminator_hidden", f.arch.discriminator_hidden}}}};
  doc["sweep"] = {{"tau", plan.tau_grid}, {"sigma2", plan.sigma2_grid}};
  doc["threads"] = plan.threads;
  doc["log_messages"] = plan.log_messages;
  return doc.dump(2);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split(text, ',')) {
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = parse_scalar<std::uint64_t>(item.substr(0, dash));
      const auto hi = parse_scalar<std::uint64_t>(item.substr(dash + 1));
      if (hi < lo) throw ConfigError("empty seed range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(parse_scalar<std::uint64_t>(item));
    }
  }
  if (out.empty()) throw ConfigError("seed list is empty");
  return out;
}

std::vector<Strategy> parse_strategy_list(const std::string& text) {
  std::vector<Strategy> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_strategy(item));
  if (out.empty()) throw ConfigError("strategy list is empty");
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_scalar<int>(item));
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_scalar<double>(item));
  return out;
}

}  // namespace fedcl
