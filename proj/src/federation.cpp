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
#include "fedcl/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "fedcl/errors.hpp"
#include "parallel.hpp"

namespace fedcl {

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::single:
      return "single";
    case Strategy::cross:
      return "cross";
    case Strategy::mix:
      return "mix";
    case Strategy::fed:
      return "fed";
    case Strategy::fed_cl:
      return "fed_cl";
    case Strategy::fed_align:
      return "fed_align";
    case Strategy::fed_align_cl:
      return "fed_align_cl";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  for (Strategy s : {Strategy::single, Strategy::cross, Strategy::mix, Strategy::fed,
                     Strategy::fed_cl, Strategy::fed_align, Strategy::fed_align_cl}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown strategy '" + name + "'");
}

bool is_federated(Strategy s) {
  return s == Strategy::fed || s == Strategy::fed_cl || s == Strategy::fed_align ||
         s == Strategy::fed_align_cl;
}
bool uses_alignment(Strategy s) {
  return s == Strategy::fed_align || s == Strategy::fed_align_cl;
}
bool uses_curriculum(Strategy s) { return s == Strategy::fed_cl || s == Strategy::fed_align_cl; }

std::string to_string(Weighting w) { return w == Weighting::sized ? "sized" : "uniform"; }
Weighting parse_weighting(const std::string& name) {
  if (name == "uniform") return Weighting::uniform;
  if (name == "sized") return Weighting::sized;
  throw ConfigError("unknown weighting '" + name + "'");
}

std::string to_string(InitMode m) { return m == InitMode::scratch ? "scratch" : "shared"; }
InitMode parse_init_mode(const std::string& name) {
  if (name == "shared") return InitMode::shared;
  if (name == "scratch") return InitMode::scratch;
  throw ConfigError("unknown init mode '" + name + "'");
}

void FederationConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs >= epochs) {
    throw ConfigError("warmup epochs must satisfy 0 <= warmup < epochs");
  }
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (pace < 1 || pace > iterations) {
    throw ConfigError("communication pace must lie in [1, iterations]");
  }
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be > 0");
  if (!(noise_variance >= 0)) throw ConfigError("noise variance must be >= 0");
  if (!(sensitivity >= 0)) throw ConfigError("sensitivity must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

namespace {

constexpr int kSharedInitKey = 0x5eed;
constexpr int kPooledSiteId = 1000;

MatrixXr gather_rows(const MatrixXr& x, std::span<const Index> rows) {
  MatrixXr out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = x.row(rows[r]);
  return out;
}

// Mean cross entropy on the positive-class probability of a two-logit head.
double classification_loss(const MatrixXr& logits, std::span<const int> labels,
                           MatrixXr& grad) {
  const MatrixXr p = softmax_rows(logits);
  const double n = static_cast<double>(logits.rows());
  grad = MatrixXr::Zero(logits.rows(), logits.cols());
  double loss = 0;
  for (Index r = 0; r < logits.rows(); ++r) {
    const Index y = labels[static_cast<std::size_t>(r)];
    const double py = p(r, y);
    const double clamped = std::clamp(py, kProbabilityClamp, 1 - kProbabilityClamp);
    loss -= std::log(clamped);
    if (clamped == py) {
      grad.row(r) = p.row(r) / n;
      grad(r, y) -= 1.0 / n;
    }
  }
  return loss / n;
}

std::uint64_t noise_digest(const ParamVector<double>& noised, const ParamVector<double>& raw) {
  return checksum(noised.values() - raw.values());
}

EvalReport safe_evaluate(const LocalModel& model, const SiteDataset& data, Split split) {
  try {
    return evaluate(model, data, split);
  } catch (const UndefinedMetricError&) {
    EvalReport r;
    r.site_id = data.site_id;
    r.split = to_string(split);
    r.n = static_cast<Index>(data.split(split).size());
    r.roc_auc = r.pr_auc = r.loss = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
}

}  // namespace

ClientState make_client(const SiteDataset& data, const FederationConfig& config,
                        int stream_key) {
  const auto key = static_cast<std::uint64_t>(stream_key < 0 ? data.site_id : stream_key);
  ClientState c{.site_id = data.site_id,
                .model = LocalModel(config.arch),
                .data = data,
                .train_x = feature_matrix(data.train),
                .train_y = {},
                .batch_size = 0,
                .feature_opt = {},
                .classifier_opt = {},
                .discriminator_opt = {},
                .shuffle_rng = RngStream::derive(config.seed, key, StreamPurpose::shuffle),
                .dropout_rng = RngStream::derive(config.seed, key, StreamPurpose::dropout),
                .noise_rng = RngStream::derive(config.seed, key, StreamPurpose::noise),
                .curriculum = {},
                .current_batch = {}};
  if (data.m() > 0 && data.dim() != config.arch.input_dim) {
    throw ShapeError("site " + std::to_string(data.site_id) + " has " +
                     std::to_string(data.dim()) + " features, model expects " +
                     std::to_string(config.arch.input_dim));
  }
  c.batch_size = data.m() / config.iterations;
  if (c.batch_size < 1) {
    throw ConfigError("site " + std::to_string(data.site_id) + " has " +
                      std::to_string(data.m()) + " training samples, fewer than " +
                      std::to_string(config.iterations) + " iterations");
  }
  for (const auto& s : data.train) c.train_y.push_back(s.label);

  const auto init_key = config.init == InitMode::shared
                            ? static_cast<std::uint64_t>(kSharedInitKey)
                            : key;
  RngStream init = RngStream::derive(config.seed, init_key, StreamPurpose::init);
  c.model.feature.init(init);
  c.model.classifier.init(init);
  RngStream d_init = RngStream::derive(config.seed, key, StreamPurpose::discriminator_init);
  c.model.discriminator.init(d_init);
  c.feature_opt = AdamState<double>(c.model.feature.params().size());
  c.classifier_opt = AdamState<double>(c.model.classifier.params().size());
  c.discriminator_opt = AdamState<double>(c.model.discriminator.params().size());
  return c;
}

StepResult local_classification_step(ClientState& client, std::span<const Index> batch,
                                     double lr) {
  if (batch.empty()) return {0, true};
  const MatrixXr x = gather_rows(client.train_x, batch);
  std::vector<int> y;
  y.reserve(batch.size());
  for (Index k : batch) y.push_back(client.train_y[static_cast<std::size_t>(k)]);

  auto& net = client.model;
  Tape<double> feature_tape;
  Tape<double> classifier_tape;
  const MatrixXr emb = net.feature.forward(x, Mode::train, &client.dropout_rng, &feature_tape);
  const MatrixXr logits =
      net.classifier.forward(emb, Mode::train, &client.dropout_rng, &classifier_tape);
  MatrixXr grad;
  const double loss = classification_loss(logits, y, grad);
  net.feature.params().zero_grad();
  net.classifier.params().zero_grad();
  const MatrixXr emb_grad = net.classifier.backward(classifier_tape, grad);
  net.feature.backward(feature_tape, emb_grad);
  adam_step(net.feature.params(), client.feature_opt, lr);
  adam_step(net.classifier.params(), client.classifier_opt, lr);
  return {loss, false};
}

ParamVector<double> add_dp_noise(const ParamVector<double>& params, double variance,
                                 double sensitivity, RngStream& rng) {
  if (variance < 0) throw ConfigError("noise variance must be >= 0");
  ParamVector<double> out = params;
  if (variance == 0) return out;
  const double stddev = sensitivity * std::sqrt(variance);
  auto& v = out.values();
  for (Index k = 0; k < v.size(); ++k) v[k] += stddev * rng.normal();
  return out;
}

GlobalWeights average_updates(std::span<const ClientUpdate> updates, Weighting weighting) {
  if (updates.empty()) throw ProtocolError("aggregate called with no client updates");
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return updates[a].site_id < updates[b].site_id; });
  const auto& first = updates[order.front()];
  double total = 0;
  for (const auto& u : updates) {
    if (!u.feature.same_layout(first.feature) || !u.classifier.same_layout(first.classifier)) {
      throw ProtocolError("site " + std::to_string(u.site_id) +
                          " sent an update with a different parameter layout");
    }
    total += static_cast<double>(u.train_size);
  }
  if (weighting == Weighting::sized && !(total > 0)) {
    throw ProtocolError("sized weighting needs positive training sizes");
  }
  GlobalWeights out{first.feature, first.classifier};
  out.feature.values().setZero();
  out.classifier.values().setZero();
  out.feature.zero_grad();
  out.classifier.zero_grad();
  for (std::size_t i : order) {
    const auto& u = updates[i];
    const double w = weighting == Weighting::uniform
                         ? 1.0 / static_cast<double>(updates.size())
                         : static_cast<double>(u.train_size) / total;
    out.feature.values() += w * u.feature.values();
    out.classifier.values() += w * u.classifier.values();
  }
  return out;
}

GlobalWeights aggregate(std::span<const ClientUpdate> updates, double variance,
                        double sensitivity, Weighting weighting, RngStream& rng) {
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return updates[a].site_id < updates[b].site_id; });
  std::vector<ClientUpdate> noised;
  noised.reserve(updates.size());
  for (std::size_t i : order) {
    const auto& u = updates[i];
    noised.push_back({u.site_id, add_dp_noise(u.feature, variance, sensitivity, rng),
                      add_dp_noise(u.classifier, variance, sensitivity, rng), u.train_size});
  }
  return average_updates(noised, weighting);
}

std::string to_jsonl(const RoundLog& log, bool with_messages) {
  nlohmann::ordered_json j;
  j["epoch"] = log.epoch;
  j["round"] = log.round;
  j["classification_loss"] = log.classification_loss;
  j["aggregated"] = log.aggregated;
  j["noise_checksums"] = log.noise_checksums;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& p : log.alignment) {
    pairs.push_back({{"source", p.source},
                     {"target", p.target},
                     {"L_D", p.discriminator},
                     {"L_F", p.feature}});
  }
  j["alignment"] = pairs;
  if (!log.curriculum.empty()) {
    auto cl = nlohmann::ordered_json::array();
    for (const auto& c : log.curriculum) {
      cl.push_back({{"site", c.site_id}, {"forgotten", c.forgotten}, {"entropy", c.entropy}});
    }
    j["curriculum"] = cl;
  }
  j["message_count"] = log.messages.size();
  if (with_messages) {
    auto msgs = nlohmann::ordered_json::array();
    for (const auto& m : log.messages) {
      msgs.push_back({{"kind", to_string(m.kind)},
                      {"from", m.from},
                      {"to", m.to},
                      {"component", m.component},
                      {"noised", m.noised},
                      {"size", m.size},
                      {"checksum", m.checksum}});
    }
    j["messages"] = msgs;
  }
  if (!log.warnings.empty()) j["warnings"] = log.warnings;
  j["wall_ms"] = log.wall_ms;
  return j.dump();
}

Federation::Federation(const FederationConfig& config, const std::vector<SiteDataset>& sites,
                       PrivacyAudit* audit)
    : config_(config), audit_(audit) {
  config_.validate();
  if (sites.empty()) throw ConfigError("federation needs at least one site");
  for (const auto& site : sites) {
    for (const auto& c : clients_) {
      if (c.site_id == site.site_id) {
        throw ConfigError("duplicate site id " + std::to_string(site.site_id));
      }
    }
    clients_.push_back(make_client(site, config_));
  }
  std::sort(clients_.begin(), clients_.end(),
            [](const ClientState& a, const ClientState& b) { return a.site_id < b.site_id; });
}

bool Federation::curriculum_active(int epoch) const {
  return uses_curriculum(config_.strategy) && epoch > config_.warmup_epochs;
}

void Federation::begin_epoch(int epoch) {
  for (auto& c : clients_) {
    const auto m = static_cast<std::size_t>(c.data.m());
    if (curriculum_active(epoch) && c.curriculum.local_preds.size() == m &&
        c.curriculum.global_preds.size() == m) {
      refresh_curriculum(c.curriculum, c.train_y, c.shuffle_rng);
    } else {
      reset_uniform(c.curriculum, c.data.m(), c.shuffle_rng);
    }
  }
}

RoundLog Federation::run_round(int epoch, int round) {
  if (round < 1 || round > config_.iterations) {
    throw ConfigError("round index out of range: " + std::to_string(round));
  }
  const auto start = std::chrono::steady_clock::now();
  RoundLog log;
  log.epoch = epoch;
  log.round = round;
  if (round == 1) {
    for (const auto& c : clients_) {
      log.curriculum.push_back({c.site_id, c.curriculum.forgotten(), c.curriculum.entropy()});
    }
  }

  std::vector<StepResult> steps(clients_.size());
  detail::parallel_for(clients_.size(), config_.threads, [&](std::size_t i) {
    auto& c = clients_[i];
    const auto batch = next_batch(c.curriculum, c.batch_size);
    if (!batch) {
      c.current_batch.clear();
      steps[i] = {0, true};
      return;
    }
    c.current_batch.assign(batch->begin(), batch->end());
    try {
      steps[i] = local_classification_step(c, *batch, config_.learning_rate);
    } catch (const Error& e) {
      throw ProtocolError("site " + std::to_string(c.site_id) + ": " + e.what());
    }
  });
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    log.classification_loss.push_back(steps[i].loss);
    if (steps[i].skipped) {
      log.warnings.push_back("site " + std::to_string(clients_[i].site_id) +
                             ": empty batch, step skipped");
    }
  }

  if (uses_alignment(config_.strategy) && epoch > config_.warmup_epochs &&
      clients_.size() > 1) {
    align(epoch, log);
  }

  if (round % config_.pace == 0) {
    const bool snapshot = uses_curriculum(config_.strategy) &&
                          round == config_.pace * config_.aggregations_per_epoch();
    if (snapshot) {
      for (auto& c : clients_) c.curriculum.local_preds = snapshot_predictions(c.model, c.train_x);
    }
    aggregate_and_deploy(epoch, round, log);
    if (snapshot) {
      for (auto& c : clients_) c.curriculum.global_preds = snapshot_predictions(c.model, c.train_x);
    }
  }

  if (config_.record_wall_time) {
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            start)
                      .count();
  }
  if (on_step) on_step(epoch, round, clients_);
  logs_.push_back(log);
  return log;
}

void Federation::align(int /*epoch*/, RoundLog& log) {
  for (auto& source : clients_) {
    const MatrixXr source_x = gather_rows(source.train_x, source.current_batch);
    for (auto& target : clients_) {
      if (target.site_id == source.site_id) continue;
      const auto target_rows = next_cyclic_batch(target.curriculum, target.batch_size);
      const MatrixXr target_x = gather_rows(target.train_x, target_rows);
      PairAlignmentContext ctx{source.site_id, target.site_id, config_.noise_variance,
                               config_.sensitivity};
      AlignmentParty src{source.site_id, &source.model.feature, &source.feature_opt,
                         &source.noise_rng, &source.dropout_rng};
      AlignmentParty tgt{target.site_id, &target.model.feature, &target.feature_opt,
                         &target.noise_rng, &target.dropout_rng};
      try {
        log.alignment.push_back(align_pair(ctx, src, source.model.discriminator,
                                           source.discriminator_opt, tgt, source_x, target_x,
                                           config_.learning_rate, &log.messages, audit_));
      } catch (const Error& e) {
        throw ProtocolError("alignment " + std::to_string(source.site_id) + "->" +
                            std::to_string(target.site_id) + ": " + e.what());
      }
    }
  }
}

void Federation::aggregate_and_deploy(int /*epoch*/, int /*round*/, RoundLog& log) {
  std::vector<ClientUpdate> uploads(clients_.size());
  std::vector<SharedParams> raw(clients_.size());
  // Step 1: each client noises its own weights before upload.
  detail::parallel_for(clients_.size(), config_.threads, [&](std::size_t i) {
    auto& c = clients_[i];
    raw[i] = export_params(c.model);
    if (audit_ != nullptr) {
      audit_->record_raw(raw[i].feature.checksum());
      audit_->record_raw(raw[i].classifier.checksum());
    }
    uploads[i] = {c.site_id,
                  add_dp_noise(raw[i].feature, config_.noise_variance, config_.sensitivity,
                               c.noise_rng),
                  add_dp_noise(raw[i].classifier, config_.noise_variance, config_.sensitivity,
                               c.noise_rng),
                  c.data.m()};
  });
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    const int site = clients_[i].site_id;
    log.noise_checksums.push_back(noise_digest(uploads[i].feature, raw[i].feature));
    log.noise_checksums.push_back(noise_digest(uploads[i].classifier, raw[i].classifier));
    log.messages.push_back({MessageKind::parameters, site, kServerId, "F", true,
                            uploads[i].feature.size(), uploads[i].feature.checksum()});
    log.messages.push_back({MessageKind::parameters, site, kServerId, "Cls", true,
                            uploads[i].classifier.size(), uploads[i].classifier.checksum()});
  }
  // Step 2: server-side average.
  global_ = average_updates(uploads, config_.weighting);
  has_global_ = true;
  ++aggregations_;
  log.aggregated = true;
  // Steps 3-4: deploy, clients resume from the global weights.
  for (auto& c : clients_) {
    import_params(c.model, global_.feature, global_.classifier);
    log.messages.push_back({MessageKind::deployment, kServerId, c.site_id, "F", true,
                            global_.feature.size(), global_.feature.checksum()});
    log.messages.push_back({MessageKind::deployment, kServerId, c.site_id, "Cls", true,
                            global_.classifier.size(), global_.classifier.checksum()});
  }
}

LocalModel Federation::global_model() const {
  LocalModel m = clients_.front().model;
  if (has_global_) import_params(m, global_.feature, global_.classifier);
  return m;
}

std::vector<EvalReport> Federation::run_epoch(int epoch) {
  begin_epoch(epoch);
  for (int q = 1; q <= config_.iterations; ++q) run_round(epoch, q);
  const LocalModel model = global_model();
  std::vector<EvalReport> reports;
  for (const auto& c : clients_) reports.push_back(safe_evaluate(model, c.data, Split::val));
  epoch_reports_.push_back(reports);
  return reports;
}

void Federation::run() {
  for (int e = 1; e <= config_.epochs; ++e) run_epoch(e);
}

LocalModel train_standalone(const SiteDataset& data, const FederationConfig& config,
                            int stream_key, const StepObserver& on_step,
                            std::vector<std::vector<EvalReport>>* epoch_reports) {
  config.validate();
  ClientState client = make_client(data, config, stream_key);
  for (int e = 1; e <= config.epochs; ++e) {
    reset_uniform(client.curriculum, client.data.m(), client.shuffle_rng);
    for (int q = 1; q <= config.iterations; ++q) {
      const auto batch = next_batch(client.curriculum, client.batch_size);
      if (batch) local_classification_step(client, *batch, config.learning_rate);
      if (on_step) on_step(e, q, std::span<const ClientState>(&client, 1));
    }
    if (epoch_reports != nullptr) {
      epoch_reports->push_back({safe_evaluate(client.model, client.data, Split::val)});
    }
  }
  return client.model;
}

SiteDataset pool_sites(const std::vector<SiteDataset>& sites, int pooled_id) {
  SiteDataset out;
  out.site_id = pooled_id;
  for (const auto& s : sites) {
    out.train.insert(out.train.end(), s.train.begin(), s.train.end());
    out.val.insert(out.val.end(), s.val.begin(), s.val.end());
    out.test.insert(out.test.end(), s.test.begin(), s.test.end());
  }
  return out;
}

namespace {

void collect_embeddings(const LocalModel& model, const std::vector<SiteDataset>& sites,
                        std::vector<Embedding>& embeddings, std::vector<std::vector<int>>& labels) {
  for (const auto& s : sites) {
    const MatrixXr x = feature_matrix(s.test);
    embeddings.push_back(predict(model, x, s.site_id).embedding);
    std::vector<int> y;
    for (const auto& sample : s.test) y.push_back(sample.label);
    labels.push_back(std::move(y));
  }
}

double probe(const FederationConfig& config, const std::vector<Embedding>& embeddings) {
  if (embeddings.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  RngStream rng = RngStream::derive(config.seed, 0, StreamPurpose::probe);
  return domain_confusion_probe(embeddings, rng);
}

}  // namespace

ExperimentResult run_experiment(const FederationConfig& config,
                                const std::vector<SiteDataset>& sites, PrivacyAudit* audit) {
  config.validate();
  if (sites.empty()) throw ConfigError("experiment needs at least one site");
  ExperimentResult out;
  out.strategy = config.strategy;
  out.probe_accuracy = std::numeric_limits<double>::quiet_NaN();

  if (is_federated(config.strategy)) {
    Federation fed(config, sites, audit);
    fed.run();
    const LocalModel model = fed.global_model();
    ReportRow row{to_string(config.strategy), -1, {}};
    for (const auto& c : fed.clients()) row.sites.push_back(evaluate(model, c.data, Split::test));
    out.rows.push_back(std::move(row));
    out.epoch_reports = fed.epoch_reports();
    out.logs = fed.logs();
    out.embeddings.emplace_back();
    out.embedding_labels.emplace_back();
    collect_embeddings(model, sites, out.embeddings.back(), out.embedding_labels.back());
    out.probe_accuracy = probe(config, out.embeddings.back());
    out.models.push_back(model);
    return out;
  }

  if (config.strategy == Strategy::mix) {
    const SiteDataset pooled = pool_sites(sites, kPooledSiteId);
    LocalModel model =
        train_standalone(pooled, config, kPooledSiteId, {}, &out.epoch_reports);
    ReportRow row{"mix", -1, {}};
    for (const auto& s : sites) row.sites.push_back(evaluate(model, s, Split::test));
    out.rows.push_back(std::move(row));
    out.embeddings.emplace_back();
    out.embedding_labels.emplace_back();
    collect_embeddings(model, sites, out.embeddings.back(), out.embedding_labels.back());
    out.probe_accuracy = probe(config, out.embeddings.back());
    out.models.push_back(std::move(model));
    return out;
  }

  // single and cross share the per-site standalone models.
  std::vector<std::vector<std::vector<EvalReport>>> per_site_epochs(sites.size());
  std::vector<LocalModel> models(sites.size());
  detail::parallel_for(sites.size(), config.threads, [&](std::size_t i) {
    models[i] = train_standalone(sites[i], config, sites[i].site_id, {}, &per_site_epochs[i]);
  });
  for (int e = 0; e < config.epochs; ++e) {
    std::vector<EvalReport> reports;
    for (const auto& site_epochs : per_site_epochs) {
      reports.push_back(site_epochs[static_cast<std::size_t>(e)].front());
    }
    out.epoch_reports.push_back(std::move(reports));
  }
  if (config.strategy == Strategy::single) {
    ReportRow row{"single", -1, {}};
    out.embeddings.emplace_back();
    out.embedding_labels.emplace_back();
    for (std::size_t i = 0; i < sites.size(); ++i) {
      row.sites.push_back(evaluate(models[i], sites[i], Split::test));
      std::vector<Embedding> e;
      std::vector<std::vector<int>> l;
      collect_embeddings(models[i], {sites[i]}, e, l);
      out.embeddings.back().push_back(std::move(e.front()));
      out.embedding_labels.back().push_back(std::move(l.front()));
    }
    out.rows.push_back(std::move(row));
    out.probe_accuracy = probe(config, out.embeddings.back());
  } else {
    for (std::size_t a = 0; a < sites.size(); ++a) {
      ReportRow row{"cross@" + std::to_string(sites[a].site_id), sites[a].site_id, {}};
      for (std::size_t b = 0; b < sites.size(); ++b) {
        if (b == a) continue;
        row.sites.push_back(evaluate(models[a], sites[b], Split::test));
      }
      out.rows.push_back(std::move(row));
      out.embeddings.emplace_back();
      out.embedding_labels.emplace_back();
      collect_embeddings(models[a], sites, out.embeddings.back(), out.embedding_labels.back());
    }
  }
  out.models = std::move(models);
  return out;
}

}  // namespace fedcl
