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

#include <vector>

#include "fedcl/autodiff.hpp"
#include "fedcl/messages.hpp"
#include "fedcl/models.hpp"
#include "fedcl/rng.hpp"

namespace fedcl {

struct PairAlignmentContext {
  int source_id = 0;
  int target_id = 1;
  double noise_variance = 0;
  double sensitivity = 1;
};

/// Adds N(0, sensitivity^2 * variance) to every element. Throws if the
/// embedding was already noised.
Embedding noise_embedding(const Embedding& raw, double variance, double sensitivity,
                          RngStream& rng);

// The discriminator's first output is read as P(source).
struct AdversarialLoss {
  double value = 0;
  MatrixXr source_grad;  // d loss / d source logits
  MatrixXr target_grad;  // d loss / d target logits
};

// -mean log D(src) - mean log(1 - D(tgt))
AdversarialLoss discriminator_loss(const MatrixXr& source_logits,
                                   const MatrixXr& target_logits);
// -mean log D(src) - mean log D(tgt)
AdversarialLoss feature_loss(const MatrixXr& source_logits, const MatrixXr& target_logits);

/// Updates D only. The source feature extractor is evaluated frozen.
double discriminator_step(const PairAlignmentContext& ctx, const Network<double>& source_feature,
                          Network<double>& discriminator, AdamState<double>& discriminator_opt,
                          const MatrixXr& source_x, const Embedding& target, double lr);

struct FeatureStepResult {
  double loss = 0;
  MatrixXr target_gradient;  // to be sent back to the target site
};

/// Updates the source feature extractor; D is frozen. Returns the gradient
/// with respect to the received target embedding.
FeatureStepResult feature_step(const PairAlignmentContext& ctx, Network<double>& source_feature,
                               AdamState<double>& source_opt,
                               const Network<double>& discriminator,
                               const MatrixXr& source_x, const Embedding& target, double lr,
                               RngStream* dropout_rng = nullptr);

struct AlignmentParty {
  int site_id = 0;
  Network<double>* feature = nullptr;
  AdamState<double>* feature_opt = nullptr;
  RngStream* noise_rng = nullptr;
  RngStream* dropout_rng = nullptr;
};

struct PairLosses {
  int source = 0;
  int target = 0;
  double discriminator = 0;
  double feature = 0;
};

/// Full two-step exchange for one ordered (source, target) pair: the target
/// noises its embedding, the source steps D then F, and the target applies
/// the returned embedding gradient to its own feature extractor.
PairLosses align_pair(const PairAlignmentContext& ctx, AlignmentParty& source,
                      Network<double>& discriminator, AdamState<double>& discriminator_opt,
                      AlignmentParty& target, const MatrixXr& source_x,
                      const MatrixXr& target_x, double lr, std::vector<Message>* messages,
                      PrivacyAudit* audit = nullptr);

}  // namespace fedcl
