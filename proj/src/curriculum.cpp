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
#include "fedcl/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedcl/errors.hpp"

namespace fedcl {

double score(int label, int local_pred, int global_pred) {
  return (local_pred == label && global_pred != label) ? kForgottenScore : kDefaultScore;
}

Index CurriculumState::forgotten() const {
  Index n = 0;
  for (Index k = 0; k < scores.size(); ++k) n += scores[k] == kForgottenScore;
  return n;
}

double CurriculumState::entropy() const {
  double h = 0;
  for (Index k = 0; k < probabilities.size(); ++k) {
    const double p = probabilities[k];
    if (p > 0) h -= p * std::log(p);
  }
  return h;
}

std::vector<int> snapshot_predictions(const LocalModel& model, const MatrixXr& x) {
  const VectorXr p = positive_probability(model, x);
  std::vector<int> out(static_cast<std::size_t>(p.size()));
  for (Index k = 0; k < p.size(); ++k) {
    out[static_cast<std::size_t>(k)] = p[k] >= kPredictionThreshold ? 1 : 0;
  }
  return out;
}

namespace {

// Fenwick tree over non-negative weights supporting prefix-mass search.
class MassTree {
 public:
  explicit MassTree(std::span<const double> weights) : tree_(weights.size() + 1, 0.0) {
    for (std::size_t i = 0; i < weights.size(); ++i) add(i, weights[i]);
    size_ = weights.size();
  }

  void add(std::size_t i, double delta) {
    for (std::size_t k = i + 1; k < tree_.size(); k += k & (~k + 1)) tree_[k] += delta;
  }

  // Smallest index whose inclusive prefix sum exceeds `target`.
  std::size_t find(double target) const {
    std::size_t pos = 0;
    std::size_t step = 1;
    while (step * 2 <= size_) step *= 2;
    for (; step > 0; step /= 2) {
      if (pos + step <= size_ && tree_[pos + step] <= target) {
        pos += step;
        target -= tree_[pos];
      }
    }
    return pos;
  }

 private:
  std::vector<double> tree_;
  std::size_t size_ = 0;
};

}  // namespace

std::vector<Index> build_permutation(std::span<const double> scores, RngStream& rng,
                                     VectorXr* probabilities) {
  double total = 0;
  for (double s : scores) {
    if (!(s > 0) || !std::isfinite(s)) {
      throw ValidationError("curriculum scores must be positive and finite");
    }
    total += s;
  }
  if (probabilities != nullptr) {
    probabilities->resize(static_cast<Index>(scores.size()));
    for (std::size_t k = 0; k < scores.size(); ++k) {
      (*probabilities)[static_cast<Index>(k)] = scores[k] / total;
    }
  }
  std::vector<double> remaining(scores.begin(), scores.end());
  MassTree tree(remaining);
  std::vector<Index> perm;
  perm.reserve(scores.size());
  double mass = total;
  for (std::size_t draw = 0; draw < scores.size(); ++draw) {
    std::size_t pick = tree.find(rng.uniform() * mass);
    // Floating-point drift can land on an already-drawn slot or run off the
    // end; fall back to the last live index.
    if (pick >= remaining.size() || remaining[pick] == 0) {
      pick = remaining.size();
      while (pick-- > 0 && remaining[pick] == 0) {
      }
    }
    perm.push_back(static_cast<Index>(pick));
    tree.add(pick, -remaining[pick]);
    mass -= remaining[pick];
    remaining[pick] = 0;
    if (mass <= 0) {
      // Recompute from scratch when cancellation erodes the running total.
      mass = std::accumulate(remaining.begin(), remaining.end(), 0.0);
    }
  }
  return perm;
}

std::vector<Index> uniform_permutation(Index m, RngStream& rng) {
  std::vector<Index> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  return perm;
}

void refresh_curriculum(CurriculumState& state, std::span<const int> labels,
                        RngStream& rng) {
  const auto m = labels.size();
  if (state.local_preds.size() != m || state.global_preds.size() != m) {
    throw StateError("curriculum snapshots are missing or stale");
  }
  std::vector<double> rho(m);
  for (std::size_t k = 0; k < m; ++k) {
    rho[k] = score(labels[k], state.local_preds[k], state.global_preds[k]);
  }
  state.scores = Eigen::Map<const VectorXr>(rho.data(), static_cast<Index>(m));
  state.permutation = build_permutation(rho, rng, &state.probabilities);
  state.cursor = 0;
  state.align_cursor = 0;
}

void reset_uniform(CurriculumState& state, Index m, RngStream& rng) {
  state.scores = VectorXr::Ones(m);
  state.probabilities = VectorXr::Constant(m, 1.0 / static_cast<double>(m));
  state.permutation = uniform_permutation(m, rng);
  state.cursor = 0;
  state.align_cursor = 0;
}

std::optional<std::span<const Index>> next_batch(CurriculumState& state, Index batch_size) {
  const auto m = static_cast<Index>(state.permutation.size());
  if (state.cursor >= m || batch_size <= 0) return std::nullopt;
  const Index take = std::min(batch_size, m - state.cursor);
  std::span<const Index> out(state.permutation.data() + state.cursor,
                             static_cast<std::size_t>(take));
  state.cursor += take;
  return out;
}

std::vector<Index> next_cyclic_batch(CurriculumState& state, Index batch_size) {
  const auto m = static_cast<Index>(state.permutation.size());
  std::vector<Index> out;
  if (m == 0) return out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (Index k = 0; k < batch_size; ++k) {
    out.push_back(state.permutation[static_cast<std::size_t>(state.align_cursor)]);
    state.align_cursor = (state.align_cursor + 1) % m;
  }
  return out;
}

}  // namespace fedcl
