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
#include "fedcl/alignment.hpp"

#include <algorithm>
#include <cmath>

#include "fedcl/errors.hpp"
#include "fedcl/metrics.hpp"

namespace fedcl {

std::string to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::parameters:
      return "parameters";
    case MessageKind::embedding:
      return "embedding";
    case MessageKind::embedding_gradient:
      return "embedding_gradient";
    case MessageKind::deployment:
      return "deployment";
  }
  return "?";
}

Embedding noise_embedding(const Embedding& raw, double variance, double sensitivity,
                          RngStream& rng) {
  if (raw.noised) {
    throw ContractViolation("embedding from site " + std::to_string(raw.site_id) +
                            " is already noised");
  }
  if (variance < 0) throw ConfigError("noise variance must be >= 0");
  Embedding out = raw;
  out.noised = true;
  if (variance == 0) return out;
  const double stddev = sensitivity * std::sqrt(variance);
  for (Index r = 0; r < out.vectors.rows(); ++r) {
    for (Index c = 0; c < out.vectors.cols(); ++c) {
      out.vectors(r, c) += stddev * rng.normal();
    }
  }
  return out;
}

namespace {

// -mean log P(class `cls`) over rows, with the clamp's zero gradient where
// it binds.
double clamped_nll(const MatrixXr& logits, Index cls, MatrixXr& grad) {
  const MatrixXr p = softmax_rows(logits);
  const double n = static_cast<double>(logits.rows());
  grad = MatrixXr::Zero(logits.rows(), logits.cols());
  double loss = 0;
  for (Index r = 0; r < logits.rows(); ++r) {
    const double pr = p(r, cls);
    const double clamped = std::clamp(pr, kProbabilityClamp, 1 - kProbabilityClamp);
    loss -= std::log(clamped);
    if (clamped == pr) {
      grad.row(r) = p.row(r) / n;
      grad(r, cls) -= 1.0 / n;
    }
  }
  return loss / n;
}

constexpr Index kSourceClass = 0;
constexpr Index kTargetClass = 1;

void check_pair(const PairAlignmentContext& ctx) {
  if (ctx.source_id == ctx.target_id) {
    throw ContractViolation("alignment pair must join two different sites");
  }
}

}  // namespace

AdversarialLoss discriminator_loss(const MatrixXr& source_logits,
                                   const MatrixXr& target_logits) {
  AdversarialLoss out;
  out.value = clamped_nll(source_logits, kSourceClass, out.source_grad) +
              clamped_nll(target_logits, kTargetClass, out.target_grad);
  return out;
}

AdversarialLoss feature_loss(const MatrixXr& source_logits, const MatrixXr& target_logits) {
  AdversarialLoss out;
  out.value = clamped_nll(source_logits, kSourceClass, out.source_grad) +
              clamped_nll(target_logits, kSourceClass, out.target_grad);
  return out;
}

double discriminator_step(const PairAlignmentContext& ctx, const Network<double>& source_feature,
                          Network<double>& discriminator, AdamState<double>& discriminator_opt,
                          const MatrixXr& source_x, const Embedding& target, double lr) {
  check_pair(ctx);
  if (!target.noised) throw ContractViolation("target embedding must be noised before use");
  const Index rows = std::min(source_x.rows(), target.vectors.rows());
  const MatrixXr source_emb = source_feature.evaluate(source_x.topRows(rows));
  Tape<double> source_tape;
  Tape<double> target_tape;
  const MatrixXr source_logits =
      discriminator.forward(source_emb, Mode::train, nullptr, &source_tape);
  const MatrixXr target_logits =
      discriminator.forward(target.vectors.topRows(rows), Mode::train, nullptr, &target_tape);
  const AdversarialLoss loss = discriminator_loss(source_logits, target_logits);
  discriminator.params().zero_grad();
  discriminator.backward(source_tape, loss.source_grad);
  discriminator.backward(target_tape, loss.target_grad);
  adam_step(discriminator.params(), discriminator_opt, lr);
  return loss.value;
}

FeatureStepResult feature_step(const PairAlignmentContext& ctx, Network<double>& source_feature,
                               AdamState<double>& source_opt,
                               const Network<double>& discriminator,
                               const MatrixXr& source_x, const Embedding& target, double lr,
                               RngStream* dropout_rng) {
  check_pair(ctx);
  if (!target.noised) throw ContractViolation("target embedding must be noised before use");
  const Index rows = std::min(source_x.rows(), target.vectors.rows());
  Tape<double> feature_tape;
  const MatrixXr source_emb =
      source_feature.forward(source_x.topRows(rows), Mode::train, dropout_rng, &feature_tape);
  // D is frozen: its forward runs in eval mode and its backward only
  // propagates to the inputs.
  Tape<double> source_tape;
  Tape<double> target_tape;
  const MatrixXr source_logits = discriminator.evaluate(source_emb, &source_tape);
  const MatrixXr target_logits =
      discriminator.evaluate(target.vectors.topRows(rows), &target_tape);
  const AdversarialLoss loss = feature_loss(source_logits, target_logits);
  const MatrixXr source_emb_grad = discriminator.input_gradient(source_tape, loss.source_grad);
  FeatureStepResult out;
  out.loss = loss.value;
  out.target_gradient = discriminator.input_gradient(target_tape, loss.target_grad);
  source_feature.params().zero_grad();
  source_feature.backward(feature_tape, source_emb_grad);
  adam_step(source_feature.params(), source_opt, lr);
  return out;
}

PairLosses align_pair(const PairAlignmentContext& ctx, AlignmentParty& source,
                      Network<double>& discriminator, AdamState<double>& discriminator_opt,
                      AlignmentParty& target, const MatrixXr& source_x,
                      const MatrixXr& target_x, double lr, std::vector<Message>* messages,
                      PrivacyAudit* audit) {
  check_pair(ctx);
  const Index rows = std::min(source_x.rows(), target_x.rows());
  PairLosses out{ctx.source_id, ctx.target_id, 0, 0};
  if (rows == 0) return out;

  // Target side: embed, noise, send.
  Tape<double> target_tape;
  Embedding raw;
  raw.site_id = ctx.target_id;
  raw.vectors = target.feature->forward(target_x.topRows(rows), Mode::train,
                                        target.dropout_rng, &target_tape);
  if (audit != nullptr) audit->record_raw(checksum(raw.vectors));
  const Embedding shared =
      noise_embedding(raw, ctx.noise_variance, ctx.sensitivity, *target.noise_rng);
  if (messages != nullptr) {
    messages->push_back({MessageKind::embedding, ctx.target_id, ctx.source_id, "embedding",
                         shared.noised, shared.vectors.size(), checksum(shared.vectors)});
  }

  // Source side: two-step update.
  out.discriminator = discriminator_step(ctx, *source.feature, discriminator,
                                         discriminator_opt, source_x.topRows(rows), shared, lr);
  const FeatureStepResult fstep =
      feature_step(ctx, *source.feature, *source.feature_opt, discriminator,
                   source_x.topRows(rows), shared, lr, source.dropout_rng);
  out.feature = fstep.loss;
  if (messages != nullptr) {
    messages->push_back({MessageKind::embedding_gradient, ctx.source_id, ctx.target_id,
                         "embedding", false, fstep.target_gradient.size(),
                         checksum(fstep.target_gradient)});
  }

  // Target side: the noise is an additive constant, so the received
  // gradient flows straight into the target feature extractor.
  target.feature->params().zero_grad();
  target.feature->backward(target_tape, fstep.target_gradient);
  adam_step(target.feature->params(), *target.feature_opt, lr);
  return out;
}

}  // namespace fedcl
