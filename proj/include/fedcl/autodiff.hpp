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

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fedcl/errors.hpp"
#include "fedcl/rng.hpp"

namespace fedcl {

using Index = Eigen::Index;

// Batches are stored one sample per row.
template <typename Scalar>
using Matrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXr = Matrix<double>;
using VectorXr = Vector<double>;

// FNV-1a over the raw bytes of a dense block.
template <typename Derived>
std::uint64_t checksum(const Eigen::DenseBase<Derived>& block) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Index r = 0; r < block.rows(); ++r) {
    for (Index c = 0; c < block.cols(); ++c) {
      const auto value = block.derived().coeff(r, c);
      unsigned char bytes[sizeof(value)];
      std::memcpy(bytes, &value, sizeof(value));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& block) {
  return block.derived().array().isFinite().all();
}

struct ParamInfo {
  std::string name;
  Index offset = 0;
  Index rows = 0;
  Index cols = 0;
  // Batchnorm running statistics ride along in the store but are never
  // touched by the optimizer.
  bool trainable = true;

  Index size() const { return rows * cols; }
};

/// Flat, named parameter store with a gradient buffer of equal length.
///
/// Entries are laid out contiguously in insertion order, so iteration order
/// and the flattened layout are deterministic for a given architecture.
template <typename Scalar>
class ParamVector {
 public:
  using MatrixMap = Eigen::Map<Matrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const Matrix<Scalar>>;

  std::size_t add(std::string name, Index rows, Index cols,
                  bool trainable = true) {
    if (lookup_.count(name) != 0) {
      throw ConfigError("duplicate parameter name '" + name + "'");
    }
    const Index offset = values_.size();
    entries_.push_back({name, offset, rows, cols, trainable});
    lookup_.emplace(std::move(name), entries_.size() - 1);
    values_.conservativeResize(offset + rows * cols);
    grads_.conservativeResize(offset + rows * cols);
    values_.tail(rows * cols).setZero();
    grads_.tail(rows * cols).setZero();
    return entries_.size() - 1;
  }

  Index size() const { return values_.size(); }
  const std::vector<ParamInfo>& entries() const { return entries_; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
  }

  const ParamInfo* find(std::string_view name) const {
    auto it = lookup_.find(std::string(name));
    return it == lookup_.end() ? nullptr : &entries_[it->second];
  }

  Vector<Scalar>& values() { return values_; }
  const Vector<Scalar>& values() const { return values_; }
  Vector<Scalar>& grads() { return grads_; }
  const Vector<Scalar>& grads() const { return grads_; }

  MatrixMap view(std::size_t entry) {
    const auto& e = entries_[entry];
    return MatrixMap(values_.data() + e.offset, e.rows, e.cols);
  }
  ConstMatrixMap view(std::size_t entry) const {
    const auto& e = entries_[entry];
    return ConstMatrixMap(values_.data() + e.offset, e.rows, e.cols);
  }
  MatrixMap grad_view(std::size_t entry) {
    const auto& e = entries_[entry];
    return MatrixMap(grads_.data() + e.offset, e.rows, e.cols);
  }

  void zero_grad() { grads_.setZero(); }

  std::uint64_t checksum() const { return fedcl::checksum(values_); }

  // True when both stores have the same names and shapes in the same order.
  bool same_layout(const ParamVector& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& a = entries_[i];
      const auto& b = other.entries_[i];
      if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<ParamInfo> entries_;
  std::unordered_map<std::string, std::size_t> lookup_;
  Vector<Scalar> values_;
  Vector<Scalar> grads_;
};

enum class LayerKind { linear, relu, sigmoid, dropout, batchnorm };
enum class Mode { train, eval };

struct LayerSpec {
  LayerKind kind = LayerKind::linear;
  Index out_dim = 0;        // linear only
  double dropout_rate = 0;  // dropout only

  static LayerSpec linear(Index out) { return {LayerKind::linear, out, 0}; }
  static LayerSpec relu() { return {LayerKind::relu, 0, 0}; }
  static LayerSpec sigmoid() { return {LayerKind::sigmoid, 0, 0}; }
  static LayerSpec dropout(double p) { return {LayerKind::dropout, 0, p}; }
  static LayerSpec batchnorm() { return {LayerKind::batchnorm, 0, 0}; }
};

constexpr double kBatchnormMomentum = 0.1;
// Small enough that train-mode outputs are unit variance to within 1e-6.
constexpr double kBatchnormEps = 1e-7;

struct Layer {
  LayerKind kind = LayerKind::linear;
  Index in_dim = 0;
  Index out_dim = 0;
  double dropout_rate = 0;
  // Indices into the owning ParamVector: weight/bias for linear,
  // gamma/beta/running_mean/running_var for batchnorm.
  std::vector<std::size_t> params;
};

template <typename Scalar>
class Network;

/// Intermediates recorded by a train-or-eval forward pass for one backward.
template <typename Scalar>
class Tape {
 public:
  bool consumed() const { return consumed_; }
  bool empty() const { return records_.empty(); }

 private:
  friend class Network<Scalar>;
  struct Record {
    Matrix<Scalar> input;   // layer input
    Matrix<Scalar> aux;     // relu/dropout mask, sigmoid output, bn x-hat
    Vector<Scalar> inv_std; // batchnorm
    Mode mode = Mode::train;
  };
  const void* owner_ = nullptr;
  std::vector<Record> records_;
  bool consumed_ = false;
};

enum class ParamGrads { accumulate, skip };

/// Sequential stack of dense layers with exact reverse-mode gradients.
template <typename Scalar>
class Network {
 public:
  Network() = default;

  Network(std::string name, Index input_dim, const std::vector<LayerSpec>& specs)
      : name_(std::move(name)), input_dim_(input_dim) {
    Index width = input_dim;
    int linear_count = 0;
    int bn_count = 0;
    for (const auto& spec : specs) {
      Layer layer;
      layer.kind = spec.kind;
      layer.in_dim = width;
      switch (spec.kind) {
        case LayerKind::linear: {
          if (spec.out_dim <= 0) {
            throw ConfigError(name_ + ": linear layer needs out_dim > 0");
          }
          layer.out_dim = spec.out_dim;
          const std::string stem = name_ + ".fc" + std::to_string(linear_count++);
          layer.params.push_back(params_.add(stem + ".weight", width, spec.out_dim));
          layer.params.push_back(params_.add(stem + ".bias", 1, spec.out_dim));
          break;
        }
        case LayerKind::batchnorm: {
          layer.out_dim = width;
          const std::string stem = name_ + ".bn" + std::to_string(bn_count++);
          layer.params.push_back(params_.add(stem + ".gamma", 1, width));
          layer.params.push_back(params_.add(stem + ".beta", 1, width));
          layer.params.push_back(params_.add(stem + ".running_mean", 1, width, false));
          layer.params.push_back(params_.add(stem + ".running_var", 1, width, false));
          params_.view(layer.params[0]).setOnes();
          params_.view(layer.params[3]).setOnes();
          break;
        }
        case LayerKind::dropout:
          if (!(spec.dropout_rate >= 0.0 && spec.dropout_rate <= 1.0)) {
            throw ConfigError(name_ + ": dropout rate must lie in [0, 1]");
          }
          layer.dropout_rate = spec.dropout_rate;
          layer.out_dim = width;
          break;
        case LayerKind::relu:
        case LayerKind::sigmoid:
          layer.out_dim = width;
          break;
      }
      width = layer.out_dim;
      layers_.push_back(std::move(layer));
    }
    output_dim_ = width;
  }

  const std::string& name() const { return name_; }
  Index input_dim() const { return input_dim_; }
  Index output_dim() const { return output_dim_; }
  const std::vector<Layer>& layers() const { return layers_; }
  ParamVector<Scalar>& params() { return params_; }
  const ParamVector<Scalar>& params() const { return params_; }

  bool has_dropout() const {
    for (const auto& l : layers_) {
      if (l.kind == LayerKind::dropout && l.dropout_rate > 0) return true;
    }
    return false;
  }

  // Uniform Glorot init for linear weights, zero biases; batchnorm reset to
  // the identity transform.
  void init(RngStream& rng) {
    for (const auto& layer : layers_) {
      if (layer.kind == LayerKind::linear) {
        const double limit =
            std::sqrt(6.0 / static_cast<double>(layer.in_dim + layer.out_dim));
        auto w = params_.view(layer.params[0]);
        for (Index r = 0; r < w.rows(); ++r) {
          for (Index c = 0; c < w.cols(); ++c) {
            w(r, c) = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * limit);
          }
        }
        params_.view(layer.params[1]).setZero();
      } else if (layer.kind == LayerKind::batchnorm) {
        params_.view(layer.params[0]).setOnes();
        params_.view(layer.params[1]).setZero();
        params_.view(layer.params[2]).setZero();
        params_.view(layer.params[3]).setOnes();
      }
    }
  }

  /// Forward pass. Train mode draws dropout masks from `rng` and updates
  /// batchnorm running statistics; eval mode is a pure function of `x`.
  Matrix<Scalar> forward(const Matrix<Scalar>& x, Mode mode, RngStream* rng,
                         Tape<Scalar>* tape) {
    check_input(x);
    if (tape != nullptr) {
      tape->owner_ = this;
      tape->records_.clear();
      tape->records_.reserve(layers_.size());
      tape->consumed_ = false;
    }
    Matrix<Scalar> h = x;
    for (const auto& layer : layers_) {
      typename Tape<Scalar>::Record rec;
      rec.mode = mode;
      Matrix<Scalar> out = apply(layer, h, mode, rng, rec);
      if (tape != nullptr) {
        rec.input = std::move(h);
        tape->records_.push_back(std::move(rec));
      }
      h = std::move(out);
    }
    return h;
  }

  /// Eval-mode forward. With a tape, the pass can later be differentiated
  /// with respect to its input by input_gradient().
  Matrix<Scalar> evaluate(const Matrix<Scalar>& x, Tape<Scalar>* tape = nullptr) const {
    check_input(x);
    if (tape != nullptr) {
      tape->owner_ = this;
      tape->records_.clear();
      tape->consumed_ = false;
    }
    Matrix<Scalar> h = x;
    for (const auto& layer : layers_) {
      typename Tape<Scalar>::Record rec;
      rec.mode = Mode::eval;
      Matrix<Scalar> out = apply_eval(layer, h, rec);
      if (tape != nullptr) {
        rec.input = std::move(h);
        tape->records_.push_back(std::move(rec));
      }
      h = std::move(out);
    }
    return h;
  }

  /// Reverse pass. Parameter gradients are added into params().grads();
  /// the gradient with respect to the network input is returned.
  Matrix<Scalar> backward(Tape<Scalar>& tape, const Matrix<Scalar>& upstream,
                          ParamGrads param_grads = ParamGrads::accumulate) {
    return backprop(tape, upstream,
                    param_grads == ParamGrads::accumulate ? &params_.grads() : nullptr);
  }

  /// Gradient with respect to the input only; parameter grads untouched.
  Matrix<Scalar> input_gradient(Tape<Scalar>& tape, const Matrix<Scalar>& upstream) const {
    return backprop(tape, upstream, nullptr);
  }

 private:
  Matrix<Scalar> backprop(Tape<Scalar>& tape, const Matrix<Scalar>& upstream,
                          Vector<Scalar>* grads) const {
    auto grad_view = [&](std::size_t entry) {
      const auto& e = params_.entries()[entry];
      return Eigen::Map<Matrix<Scalar>>(grads->data() + e.offset, e.rows, e.cols);
    };
    if (tape.consumed_) throw StateError(name_ + ": tape already consumed");
    if (tape.owner_ != this || tape.records_.size() != layers_.size()) {
      throw StateError(name_ + ": tape was recorded by a different network");
    }
    if (upstream.cols() != output_dim_ ||
        upstream.rows() != tape.records_.front().input.rows()) {
      throw ShapeError(name_ + ": upstream gradient has wrong shape");
    }
    tape.consumed_ = true;
    const bool write = grads != nullptr;
    Matrix<Scalar> g = upstream;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const auto& layer = layers_[i];
      auto& rec = tape.records_[i];
      switch (layer.kind) {
        case LayerKind::linear: {
          auto w = params_.view(layer.params[0]);
          if (write) {
            grad_view(layer.params[0]).noalias() +=
                rec.input.transpose() * g;
            grad_view(layer.params[1]) += g.colwise().sum();
          }
          Matrix<Scalar> gin = g * w.transpose();
          g = std::move(gin);
          break;
        }
        case LayerKind::relu:
        case LayerKind::dropout:
          g = g.cwiseProduct(rec.aux);
          break;
        case LayerKind::sigmoid:
          g = g.array() * rec.aux.array() * (1 - rec.aux.array());
          break;
        case LayerKind::batchnorm: {
          const auto gamma = params_.view(layer.params[0]);
          const Matrix<Scalar>& xhat = rec.aux;
          if (write) {
            grad_view(layer.params[0]) +=
                g.cwiseProduct(xhat).colwise().sum();
            grad_view(layer.params[1]) += g.colwise().sum();
          }
          Matrix<Scalar> dxhat = g.array().rowwise() * gamma.row(0).array();
          if (rec.mode == Mode::eval) {
            g = dxhat.array().rowwise() * rec.inv_std.transpose().array();
          } else {
            // dx = inv_std / n * (n * dxhat - sum(dxhat) - xhat * sum(dxhat * xhat))
            const Scalar n = static_cast<Scalar>(g.rows());
            const Matrix<Scalar> sum_d = dxhat.colwise().sum();
            const Matrix<Scalar> sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
            Matrix<Scalar> gin = n * dxhat;
            gin.rowwise() -= sum_d.row(0);
            gin -= (xhat.array().rowwise() * sum_dx.row(0).array()).matrix();
            gin = gin.array().rowwise() * (rec.inv_std.transpose().array() / n);
            g = std::move(gin);
          }
          break;
        }
      }
    }
    return g;
  }

  void check_input(const Matrix<Scalar>& x) const {
    if (x.cols() != input_dim_) {
      throw ShapeError(name_ + ": expected " + std::to_string(input_dim_) +
                       " input columns, got " + std::to_string(x.cols()));
    }
  }

  Matrix<Scalar> apply(const Layer& layer, const Matrix<Scalar>& h, Mode mode,
                       RngStream* rng, typename Tape<Scalar>::Record& rec) {
    if (mode == Mode::eval) return apply_eval(layer, h, rec);
    switch (layer.kind) {
      case LayerKind::dropout: {
        const double p = layer.dropout_rate;
        rec.aux.resize(h.rows(), h.cols());
        if (p <= 0) {
          rec.aux.setOnes();
          return h;
        }
        if (rng == nullptr) {
          throw StateError(name_ + ": train-mode dropout needs an rng stream");
        }
        const Scalar keep_scale = p >= 1 ? Scalar(0) : Scalar(1.0 / (1.0 - p));
        for (Index r = 0; r < h.rows(); ++r) {
          for (Index c = 0; c < h.cols(); ++c) {
            rec.aux(r, c) = rng->uniform() < p ? Scalar(0) : keep_scale;
          }
        }
        return h.cwiseProduct(rec.aux);
      }
      case LayerKind::batchnorm: {
        auto gamma = params_.view(layer.params[0]);
        auto beta = params_.view(layer.params[1]);
        auto running_mean = params_.view(layer.params[2]);
        auto running_var = params_.view(layer.params[3]);
        const Scalar n = static_cast<Scalar>(h.rows());
        Vector<Scalar> mean = h.colwise().mean().transpose();
        Matrix<Scalar> centered = h.rowwise() - mean.transpose();
        Vector<Scalar> var =
            (centered.array().square().colwise().sum() / n).transpose();
        rec.inv_std = (var.array() + Scalar(kBatchnormEps)).rsqrt();
        rec.aux = centered.array().rowwise() * rec.inv_std.transpose().array();
        const Scalar m = Scalar(kBatchnormMomentum);
        running_mean.row(0) = (1 - m) * running_mean.row(0) + m * mean.transpose();
        running_var.row(0) = (1 - m) * running_var.row(0) + m * var.transpose();
        return (rec.aux.array().rowwise() * gamma.row(0).array()).rowwise() +
               beta.row(0).array();
      }
      default:
        return apply_eval(layer, h, rec);
    }
  }

  Matrix<Scalar> apply_eval(const Layer& layer, const Matrix<Scalar>& h,
                            typename Tape<Scalar>::Record& rec) const {
    switch (layer.kind) {
      case LayerKind::linear: {
        const auto w = params_.view(layer.params[0]);
        const auto b = params_.view(layer.params[1]);
        Matrix<Scalar> out = h * w;
        out.rowwise() += b.row(0);
        return out;
      }
      case LayerKind::relu:
        rec.aux = (h.array() > Scalar(0)).template cast<Scalar>();
        return h.cwiseMax(Scalar(0));
      case LayerKind::sigmoid:
        rec.aux = (Scalar(1) / (Scalar(1) + (-h.array()).exp())).matrix();
        return rec.aux;
      case LayerKind::dropout:
        rec.aux = Matrix<Scalar>::Ones(h.rows(), h.cols());
        return h;
      case LayerKind::batchnorm: {
        const auto gamma = params_.view(layer.params[0]);
        const auto beta = params_.view(layer.params[1]);
        const auto running_mean = params_.view(layer.params[2]);
        const auto running_var = params_.view(layer.params[3]);
        rec.inv_std = (running_var.row(0).array().max(Scalar(0)) +
                       Scalar(kBatchnormEps))
                          .rsqrt()
                          .transpose();
        rec.aux = (h.rowwise() - running_mean.row(0)).array().rowwise() *
                  rec.inv_std.transpose().array();
        return (rec.aux.array().rowwise() * gamma.row(0).array()).rowwise() +
               beta.row(0).array();
      }
    }
    return h;
  }

  std::string name_;
  Index input_dim_ = 0;
  Index output_dim_ = 0;
  std::vector<Layer> layers_;
  ParamVector<Scalar> params_;
};

template <typename Scalar>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  Vector<Scalar> first_moment;
  Vector<Scalar> second_moment;

  AdamState() = default;
  explicit AdamState(Index size)
      : first_moment(Vector<Scalar>::Zero(size)),
        second_moment(Vector<Scalar>::Zero(size)) {}
};

/// One Adam update over every trainable entry of `params`, using its grads.
template <typename Scalar>
void adam_step(ParamVector<Scalar>& params, AdamState<Scalar>& opt, double lr) {
  if (opt.first_moment.size() != params.size() ||
      opt.second_moment.size() != params.size()) {
    throw ShapeError("adam state size does not match parameter store");
  }
  for (const auto& e : params.entries()) {
    if (!all_finite(params.grads().segment(e.offset, e.size()))) {
      throw NumericalError("non-finite gradient in parameter '" + e.name + "'");
    }
  }
  ++opt.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  auto& values = params.values();
  const auto& grads = params.grads();
  for (const auto& e : params.entries()) {
    if (!e.trainable) continue;
    for (Index k = e.offset; k < e.offset + e.size(); ++k) {
      const Scalar g = grads[k];
      opt.first_moment[k] = opt.beta1 * opt.first_moment[k] + (1 - opt.beta1) * g;
      opt.second_moment[k] =
          opt.beta2 * opt.second_moment[k] + (1 - opt.beta2) * g * g;
      const Scalar m_hat = opt.first_moment[k] / bc1;
      const Scalar v_hat = opt.second_moment[k] / bc2;
      values[k] -= lr * m_hat / (std::sqrt(v_hat) + opt.eps);
    }
  }
}

// Numerically stable row-wise softmax.
template <typename Derived>
Matrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> out = logits;
  for (Index r = 0; r < out.rows(); ++r) {
    const Scalar mx = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

}  // namespace fedcl
