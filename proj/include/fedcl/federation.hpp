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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fedcl/alignment.hpp"
#include "fedcl/autodiff.hpp"
#include "fedcl/curriculum.hpp"
#include "fedcl/data.hpp"
#include "fedcl/messages.hpp"
#include "fedcl/metrics.hpp"
#include "fedcl/models.hpp"
#include "fedcl/rng.hpp"

namespace fedcl {

enum class Strategy { single, cross, mix, fed, fed_cl, fed_align, fed_align_cl };
std::string to_string(Strategy strategy);
Strategy parse_strategy(const std::string& name);
bool is_federated(Strategy strategy);
bool uses_alignment(Strategy strategy);
bool uses_curriculum(Strategy strategy);

enum class Weighting { uniform, sized };
std::string to_string(Weighting weighting);
Weighting parse_weighting(const std::string& name);

// shared: every site starts from the same F/Cls weights; scratch: each site
// draws its own.
enum class InitMode { shared, scratch };
std::string to_string(InitMode mode);
InitMode parse_init_mode(const std::string& name);

struct FederationConfig {
  int epochs = 50;
  int warmup_epochs = 5;
  int iterations = 120;  // local steps per epoch
  int pace = 20;         // local steps between aggregations
  double learning_rate = 1e-3;
  double noise_variance = 0.001;
  double sensitivity = 1.0;
  Strategy strategy = Strategy::fed;
  Weighting weighting = Weighting::uniform;
  InitMode init = InitMode::shared;
  std::uint64_t seed = 1;
  ArchConfig arch;
  int threads = 1;
  bool record_wall_time = false;

  void validate() const;
  // Aggregations that happen in one epoch: floor(iterations / pace).
  int aggregations_per_epoch() const { return iterations / pace; }
};

struct ClientState {
  int site_id = 0;
  LocalModel model;
  SiteDataset data;
  MatrixXr train_x;
  std::vector<int> train_y;
  Index batch_size = 1;  // floor(m_n / iterations)
  AdamState<double> feature_opt;
  AdamState<double> classifier_opt;
  AdamState<double> discriminator_opt;
  RngStream shuffle_rng;
  RngStream dropout_rng;
  RngStream noise_rng;
  CurriculumState curriculum;
  std::vector<Index> current_batch;
};

/// Builds a client with its model initialized and RNG streams derived from
/// (config.seed, stream_key). `stream_key` defaults to the site id.
ClientState make_client(const SiteDataset& data, const FederationConfig& config,
                        int stream_key = -1);

struct StepResult {
  double loss = 0;
  bool skipped = false;
};

/// One Adam step on F and Cls against the cross entropy of `batch`.
StepResult local_classification_step(ClientState& client, std::span<const Index> batch,
                                     double lr);

/// Copy of `params` with i.i.d. N(0, sensitivity^2 * variance) added.
ParamVector<double> add_dp_noise(const ParamVector<double>& params, double variance,
                                 double sensitivity, RngStream& rng);

struct ClientUpdate {
  int site_id = 0;
  ParamVector<double> feature;
  ParamVector<double> classifier;
  Index train_size = 0;
};

struct GlobalWeights {
  ParamVector<double> feature;
  ParamVector<double> classifier;
};

/// Weighted mean of (already noised) updates, reduced in site-id order.
GlobalWeights average_updates(std::span<const ClientUpdate> updates, Weighting weighting);

/// Noises each update with `rng` (in site-id order) and averages.
GlobalWeights aggregate(std::span<const ClientUpdate> updates, double variance,
                        double sensitivity, Weighting weighting, RngStream& rng);

struct CurriculumDiagnostics {
  int site_id = 0;
  Index forgotten = 0;
  double entropy = 0;
};

struct RoundLog {
  int epoch = 0;
  int round = 0;
  std::vector<double> classification_loss;  // per site, in site order
  bool aggregated = false;
  std::vector<std::uint64_t> noise_checksums;
  std::vector<PairLosses> alignment;
  std::vector<Message> messages;
  std::vector<CurriculumDiagnostics> curriculum;
  std::vector<std::string> warnings;
  double wall_ms = 0;
};

std::string to_jsonl(const RoundLog& log, bool with_messages);

using StepObserver =
    std::function<void(int epoch, int round, std::span<const ClientState> clients)>;

/// Synchronous round engine over N clients.
class Federation {
 public:
  Federation(const FederationConfig& config, const std::vector<SiteDataset>& sites,
             PrivacyAudit* audit = nullptr);

  void begin_epoch(int epoch);
  RoundLog run_round(int epoch, int round);
  // Runs every round of the epoch and returns the per-site val reports of
  // the deployed global weights.
  std::vector<EvalReport> run_epoch(int epoch);
  void run();

  const FederationConfig& config() const { return config_; }
  std::vector<ClientState>& clients() { return clients_; }
  const std::vector<ClientState>& clients() const { return clients_; }
  const std::vector<RoundLog>& logs() const { return logs_; }
  const std::vector<std::vector<EvalReport>>& epoch_reports() const { return epoch_reports_; }
  bool has_global() const { return has_global_; }
  const GlobalWeights& global() const { return global_; }
  // Copy of site 0's model carrying the global F/Cls weights.
  LocalModel global_model() const;
  int aggregation_count() const { return aggregations_; }

  StepObserver on_step;

 private:
  void aggregate_and_deploy(int epoch, int round, RoundLog& log);
  void align(int epoch, RoundLog& log);
  bool curriculum_active(int epoch) const;

  FederationConfig config_;
  std::vector<ClientState> clients_;
  PrivacyAudit* audit_ = nullptr;
  std::vector<RoundLog> logs_;
  std::vector<std::vector<EvalReport>> epoch_reports_;
  GlobalWeights global_;
  bool has_global_ = false;
  int aggregations_ = 0;
};

/// Single-site Adam trainer with the same batch schedule as a client.
/// Used for the single/cross/mix baselines.
LocalModel train_standalone(const SiteDataset& data, const FederationConfig& config,
                            int stream_key, const StepObserver& on_step = {},
                            std::vector<std::vector<EvalReport>>* epoch_reports = nullptr);

struct ReportRow {
  std::string label;  // strategy name, or "cross@<site>"
  int trained_on = -1;
  std::vector<EvalReport> sites;
};

struct ExperimentResult {
  Strategy strategy = Strategy::fed;
  std::vector<ReportRow> rows;
  std::vector<std::vector<EvalReport>> epoch_reports;
  std::vector<RoundLog> logs;
  // Final-F test embeddings per site (one group per row for cross).
  std::vector<std::vector<Embedding>> embeddings;
  std::vector<std::vector<std::vector<int>>> embedding_labels;
  double probe_accuracy = 0;  // NaN for cross
  std::vector<LocalModel> models;
};

ExperimentResult run_experiment(const FederationConfig& config,
                                const std::vector<SiteDataset>& sites,
                                PrivacyAudit* audit = nullptr);

// Pools every site's splits into one dataset (the mix baseline).
SiteDataset pool_sites(const std::vector<SiteDataset>& sites, int pooled_id);

}  // namespace fedcl
