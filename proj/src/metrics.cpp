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
#include "fedcl/metrics.hpp"

#include <cmath>
#include <limits>

namespace fedcl {

EvalReport evaluate(const LocalModel& model, const SiteDataset& data, Split split) {
  const auto& samples = data.split(split);
  if (samples.empty()) {
    throw UndefinedMetricError("site " + std::to_string(data.site_id) + " has an empty " +
                               to_string(split) + " split");
  }
  const MatrixXr x = feature_matrix(samples);
  const Eigen::VectorXi y = label_vector(samples);
  const VectorXr p = positive_probability(model, x);
  EvalReport report;
  report.site_id = data.site_id;
  report.split = to_string(split);
  report.n = static_cast<Index>(samples.size());
  report.loss = cross_entropy(p, y) / static_cast<double>(report.n);
  report.roc_auc = roc_auc(p, y);
  report.pr_auc = pr_auc(p, y);
  return report;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  if (x > (a + 1) / (a + b + 2)) return 1 - regularized_incomplete_beta(b, a, 1 - x);
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  constexpr double tiny = 1e-300;
  constexpr double tol = 1e-15;
  double c = 1;
  double d = 1 - (a + b) * x / (a + 1);
  if (std::abs(d) < tiny) d = tiny;
  d = 1 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const double m2 = 2.0 * m;
    double num = m * (b - m) * x / ((a + m2 - 1) * (a + m2));
    d = 1 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1 / d;
    h *= d * c;
    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1));
    d = 1 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1) < tol) break;
  }
  return std::exp(log_front) * h / a;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0)) throw ValidationError("student_t_cdf: df must be positive");
  const double tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t > 0 ? 1 - tail : tail;
}

TTestResult welch_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw ValidationError("welch_ttest needs at least two values per group");
  }
  auto moments = [](std::span<const double> v) {
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss / static_cast<double>(v.size() - 1)};
  };
  const auto [mean_a, var_a] = moments(a);
  const auto [mean_b, var_b] = moments(b);
  if (var_a == 0 && var_b == 0) {
    throw ValidationError("welch_ttest: both groups have zero variance");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double sa = var_a / na;
  const double sb = var_b / nb;
  TTestResult out;
  out.t = (mean_a - mean_b) / std::sqrt(sa + sb);
  out.df = (sa + sb) * (sa + sb) /
           (sa * sa / (na - 1) + sb * sb / (nb - 1));
  out.p = regularized_incomplete_beta(0.5 * out.df, 0.5, out.df / (out.df + out.t * out.t));
  return out;
}

double domain_confusion_probe(std::span<const Embedding> sites, RngStream& rng,
                              const ProbeOptions& options) {
  if (sites.size() < 2) throw ValidationError("probe needs at least two sites");
  Index per_site = std::numeric_limits<Index>::max();
  for (const auto& s : sites) per_site = std::min(per_site, s.vectors.rows());
  const Index n_train = static_cast<Index>(std::floor(options.train_fraction * per_site));
  if (n_train < 1 || per_site - n_train < 1) {
    throw ValidationError("probe split is degenerate: " + std::to_string(per_site) +
                          " samples per site");
  }
  const Index dim = sites.front().vectors.cols();
  const Index n_sites = static_cast<Index>(sites.size());
  MatrixXr train_x(n_train * n_sites, dim);
  MatrixXr test_x((per_site - n_train) * n_sites, dim);
  std::vector<int> train_y;
  std::vector<int> test_y;
  for (Index s = 0; s < n_sites; ++s) {
    const auto& v = sites[static_cast<std::size_t>(s)].vectors;
    if (v.cols() != dim) throw ShapeError("probe embeddings differ in width");
    std::vector<Index> order(static_cast<std::size_t>(v.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (Index k = 0; k < per_site; ++k) {
      const auto row = v.row(order[static_cast<std::size_t>(k)]);
      if (k < n_train) {
        train_x.row(static_cast<Index>(train_y.size())) = row;
        train_y.push_back(static_cast<int>(s));
      } else {
        test_x.row(static_cast<Index>(test_y.size())) = row;
        test_y.push_back(static_cast<int>(s));
      }
    }
  }
  const VectorXr mean = train_x.colwise().mean().transpose();
  const VectorXr stddev =
      ((train_x.rowwise() - mean.transpose()).array().square().colwise().mean().sqrt())
          .transpose()
          .cwiseMax(1e-8);
  auto normalize = [&](MatrixXr& x) {
    x = ((x.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array())
            .matrix();
  };
  normalize(train_x);
  normalize(test_x);

  Network<double> probe("probe", dim, {LayerSpec::linear(n_sites)});
  probe.init(rng);
  AdamState<double> opt(probe.params().size());
  MatrixXr onehot = MatrixXr::Zero(train_x.rows(), n_sites);
  for (std::size_t r = 0; r < train_y.size(); ++r) onehot(static_cast<Index>(r), train_y[r]) = 1;
  for (int it = 0; it < options.iterations; ++it) {
    Tape<double> tape;
    const MatrixXr logits = probe.forward(train_x, Mode::train, nullptr, &tape);
    const MatrixXr grad =
        (softmax_rows(logits) - onehot) / static_cast<double>(train_x.rows());
    probe.params().zero_grad();
    probe.backward(tape, grad);
    adam_step(probe.params(), opt, options.learning_rate);
  }
  const MatrixXr logits = probe.evaluate(test_x);
  Index correct = 0;
  for (Index r = 0; r < logits.rows(); ++r) {
    Index argmax = 0;
    logits.row(r).maxCoeff(&argmax);
    correct += argmax == test_y[static_cast<std::size_t>(r)];
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

}  // namespace fedcl
