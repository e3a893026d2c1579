// Copyright 2026 The PEAD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Small fully connected networks with hand-written backpropagation, the Adam
// optimizer, and soft target tracking. Samples are rows: a batch is a
// (batch x in) matrix and a layer computes act(x W + b) with W stored in x out.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pead {

enum class Activation { kLinear, kRelu, kTanh };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
  Eigen::MatrixXd w;  // in x out
  Eigen::VectorXd b;  // out
  Activation activation = Activation::kLinear;

  Eigen::Index in() const { return w.rows(); }
  Eigen::Index out() const { return w.cols(); }
};

struct LayerSpec {
  Eigen::Index in = 0;
  Eigen::Index out = 0;
  Activation activation = Activation::kLinear;
};

struct LayerGradient {
  Eigen::MatrixXd dw;
  Eigen::VectorXd db;
};

class Mlp;

struct GradientSet {
  std::vector<LayerGradient> layers;

  static GradientSet zeros_like(const Mlp& net);
  bool all_finite() const;
  double max_abs() const;
  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double s);
};

// Activations recorded by a forward pass; consumed by backward().
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;   // input to each layer
  std::vector<Eigen::MatrixXd> outputs;  // post-activation output of each layer
};

struct Backprop {
  GradientSet grads;
  Eigen::MatrixXd dx;  // gradient w.r.t. the batch input
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  // Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  static Mlp random(std::span<const LayerSpec> specs, std::mt19937_64& rng);

  Eigen::Index in_dim() const;
  Eigen::Index out_dim() const;
  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }

  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  // Swaps in a layer; shapes must still chain with the neighbours.
  void replace_layer(std::size_t i, DenseLayer layer);

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x,
                                ForwardCache* cache = nullptr) const;

  // Gradients of sum(upstream .* output) given the cache of the matching
  // forward_batch call.
  Backprop backward(const ForwardCache& cache,
                    const Eigen::MatrixXd& upstream) const;

  bool same_architecture(const Mlp& other) const;
  bool all_finite() const;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  friend class Optimizer;
  friend void soft_update(Mlp& target, const Mlp& online, double tau);
  std::vector<DenseLayer> layers_;
};

// Single-sample conveniences.
Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& x);
Backprop backward(const Mlp& net, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& upstream);

enum class OptimizerKind { kAdam, kSgd };

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  Optimizer() = default;
  explicit Optimizer(const Mlp& net, OptimizerKind kind = OptimizerKind::kAdam,
                     AdamConfig cfg = {});

  // One descent step: params -= lr * update(g).
  void apply(Mlp& net, const GradientSet& g, double lr);

  // Zeroes (and reshapes) the moment estimates of one layer.
  void reset_layer(std::size_t i, const DenseLayer& layer);

  OptimizerKind kind() const { return kind_; }
  std::int64_t steps() const { return steps_; }
  const GradientSet& first_moment() const { return m_; }
  const GradientSet& second_moment() const { return v_; }

  void write(std::ostream& os) const;
  static Optimizer read(std::istream& is);

 private:
  OptimizerKind kind_ = OptimizerKind::kAdam;
  AdamConfig cfg_;
  std::int64_t steps_ = 0;
  GradientSet m_;
  GradientSet v_;
};

// target <- tau * online + (1 - tau) * target, parameter-wise.
void soft_update(Mlp& target, const Mlp& online, double tau);

// Text checkpoint of one network (see docs/checkpoint_format.md).
void write_mlp(std::ostream& os, const Mlp& net);
Mlp read_mlp(std::istream& is);

}  // namespace pead
