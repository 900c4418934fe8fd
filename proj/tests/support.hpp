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

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fedcl/alignment.hpp"
#include "fedcl/autodiff.hpp"
#include "fedcl/rng.hpp"

namespace fedcl::testing {

inline MatrixXr random_matrix(Index rows, Index cols, RngStream& rng, double scale = 1.0) {
  MatrixXr m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  }
  return m;
}

inline double relative_error(const VectorXr& analytic, const VectorXr& numeric) {
  const double denom = std::max(analytic.norm() + numeric.norm(), 1e-12);
  return (analytic - numeric).norm() / denom;
}

// Central differences of a scalar function over a flat vector, in place.
inline VectorXr numeric_gradient(VectorXr& x, const std::function<double()>& f,
                                 double h = 1e-6) {
  VectorXr g(x.size());
  for (Index k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + h;
    const double up = f();
    x[k] = saved - h;
    const double down = f();
    x[k] = saved;
    g[k] = (up - down) / (2 * h);
  }
  return g;
}

inline VectorXr flatten(const MatrixXr& m) {
  return Eigen::Map<const VectorXr>(m.data(), m.size());
}

struct GradCheck {
  double params = 0;  // relative error over trainable parameters
  double input = 0;   // relative error over the network input
};

// Checks sum(upstream .* net(x)) in the given mode. Train-mode dropout
// replays the same mask by restarting `mask_seed` for every evaluation.
inline GradCheck check_network(Network<double> net, MatrixXr x, const MatrixXr& upstream,
                               Mode mode, std::uint64_t mask_seed = 11) {
  auto objective = [&]() {
    RngStream rng(mask_seed);
    Network<double> copy = net;
    return copy.forward(x, mode, &rng, nullptr).cwiseProduct(upstream).sum();
  };
  RngStream rng(mask_seed);
  Tape<double> tape;
  Network<double> work = net;
  work.forward(x, mode, &rng, &tape);
  work.params().zero_grad();
  const MatrixXr dx = work.backward(tape, upstream);

  GradCheck out;
  VectorXr analytic_params;
  VectorXr numeric_params;
  for (const auto& e : net.params().entries()) {
    if (!e.trainable) continue;
    VectorXr& values = net.params().values();
    VectorXr block = values.segment(e.offset, e.size());
    const auto f = [&]() {
      values.segment(e.offset, e.size()) = block;
      return objective();
    };
    const VectorXr g = numeric_gradient(block, f);
    values.segment(e.offset, e.size()) = block;
    const VectorXr a = work.params().grads().segment(e.offset, e.size());
    analytic_params.conservativeResize(analytic_params.size() + a.size());
    analytic_params.tail(a.size()) = a;
    numeric_params.conservativeResize(numeric_params.size() + g.size());
    numeric_params.tail(g.size()) = g;
  }
  out.params = analytic_params.size() == 0 ? 0 : relative_error(analytic_params, numeric_params);

  VectorXr flat = flatten(x);
  const auto fx = [&]() {
    x = Eigen::Map<const MatrixXr>(flat.data(), x.rows(), x.cols());
    return objective();
  };
  const VectorXr gx = numeric_gradient(flat, fx);
  x = Eigen::Map<const MatrixXr>(flat.data(), x.rows(), x.cols());
  out.input = relative_error(flatten(dx), gx);
  return out;
}

struct AdversarialCheck {
  double discriminator_params = 0;  // d L_D / d D
  double feature_source = 0;        // d L_F / d F_S
  double feature_target = 0;        // d L_F / d target embedding
};

// Finite-difference check of both adversarial losses through small random
// F_S and D networks with a fixed target embedding.
inline AdversarialCheck check_adversarial(std::uint64_t seed) {
  RngStream rng(seed);
  const Index dim = 3 + static_cast<Index>(rng.below(4));
  const Index emb = 2 + static_cast<Index>(rng.below(4));
  const Index rows = 2 + static_cast<Index>(rng.below(6));
  Network<double> feature("F", dim, {LayerSpec::linear(6), LayerSpec::relu(),
                                     LayerSpec::linear(emb)});
  Network<double> disc("D", emb, {LayerSpec::linear(4), LayerSpec::relu(),
                                  LayerSpec::linear(2)});
  feature.init(rng);
  disc.init(rng);
  // Nonzero biases keep every ReLU away from its kink.
  for (auto* net : {&feature, &disc}) {
    VectorXr& v = net->params().values();
    v += 0.1 * flatten(random_matrix(v.size(), 1, rng));
  }
  const MatrixXr xs = random_matrix(rows, dim, rng);
  const MatrixXr target = random_matrix(rows, emb, rng);

  auto ld = [&](const Network<double>& f, const Network<double>& d, const MatrixXr& t) {
    const MatrixXr s = f.evaluate(xs);
    return discriminator_loss(d.evaluate(s), d.evaluate(t)).value;
  };
  auto lf = [&](const Network<double>& f, const Network<double>& d, const MatrixXr& t) {
    const MatrixXr s = f.evaluate(xs);
    return feature_loss(d.evaluate(s), d.evaluate(t)).value;
  };

  AdversarialCheck out;
  {
    Tape<double> ts;
    Tape<double> tt;
    const MatrixXr s = feature.evaluate(xs);
    Network<double> d = disc;
    const MatrixXr ls = d.forward(s, Mode::train, nullptr, &ts);
    const MatrixXr lt = d.forward(target, Mode::train, nullptr, &tt);
    const AdversarialLoss loss = discriminator_loss(ls, lt);
    d.params().zero_grad();
    d.backward(ts, loss.source_grad);
    d.backward(tt, loss.target_grad);
    Network<double> probe = disc;
    VectorXr& v = probe.params().values();
    const VectorXr g = numeric_gradient(v, [&]() { return ld(feature, probe, target); });
    out.discriminator_params = relative_error(d.params().grads(), g);
  }
  {
    Tape<double> tf;
    Tape<double> ts;
    Tape<double> tt;
    Network<double> f = feature;
    const MatrixXr s = f.forward(xs, Mode::train, nullptr, &tf);
    const MatrixXr ls = disc.evaluate(s, &ts);
    const MatrixXr lt = disc.evaluate(target, &tt);
    const AdversarialLoss loss = feature_loss(ls, lt);
    const MatrixXr ds = disc.input_gradient(ts, loss.source_grad);
    const MatrixXr dt = disc.input_gradient(tt, loss.target_grad);
    f.params().zero_grad();
    f.backward(tf, ds);
    Network<double> probe = feature;
    VectorXr& v = probe.params().values();
    const VectorXr g = numeric_gradient(v, [&]() { return lf(probe, disc, target); });
    out.feature_source = relative_error(f.params().grads(), g);
    MatrixXr t = target;
    VectorXr flat = flatten(t);
    const VectorXr gt = numeric_gradient(flat, [&]() {
      t = Eigen::Map<const MatrixXr>(flat.data(), t.rows(), t.cols());
      return lf(feature, disc, t);
    });
    out.feature_target = relative_error(flatten(dt), gt);
  }
  return out;
}

// Random small stack around one layer of the given kind.
inline Network<double> random_layer_net(LayerKind kind, RngStream& rng, Index& in_dim) {
  in_dim = 2 + static_cast<Index>(rng.below(5));
  const Index width = 2 + static_cast<Index>(rng.below(5));
  std::vector<LayerSpec> specs{LayerSpec::linear(width)};
  switch (kind) {
    case LayerKind::linear:
      specs.push_back(LayerSpec::linear(2 + static_cast<Index>(rng.below(4))));
      break;
    case LayerKind::relu:
      specs.push_back(LayerSpec::relu());
      break;
    case LayerKind::sigmoid:
      specs.push_back(LayerSpec::sigmoid());
      break;
    case LayerKind::dropout:
      specs.push_back(LayerSpec::dropout(0.2 + 0.5 * rng.uniform()));
      break;
    case LayerKind::batchnorm:
      specs.push_back(LayerSpec::batchnorm());
      break;
  }
  specs.push_back(LayerSpec::linear(2));
  Network<double> net("N", in_dim, specs);
  net.init(rng);
  // Non-trivial batchnorm affine parameters.
  for (const auto& e : net.params().entries()) {
    if (e.name.find(".gamma") != std::string::npos || e.name.find(".beta") != std::string::npos) {
      for (Index k = 0; k < e.size(); ++k) {
        net.params().values()[e.offset + k] = 0.5 + rng.uniform();
      }
    }
  }
  return net;
}

inline GradCheck check_layer(LayerKind kind, std::uint64_t seed) {
  RngStream rng(seed);
  Index in_dim = 0;
  Network<double> net = random_layer_net(kind, rng, in_dim);
  const Index rows = 3 + static_cast<Index>(rng.below(6));
  const MatrixXr x = random_matrix(rows, in_dim, rng);
  const MatrixXr upstream = random_matrix(rows, net.output_dim(), rng);
  return check_network(net, x, upstream, Mode::train, seed + 1);
}

}  // namespace fedcl::testing
