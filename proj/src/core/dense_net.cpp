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

#include "dense_net.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <utility>

#include "error.hpp"

namespace pead {
namespace {

void apply_activation(Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::kLinear:
      break;
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kTanh:
      z = z.array().tanh().matrix();
      break;
  }
}

// d(act)/d(pre) expressed through the post-activation output.
void activation_backward(Eigen::MatrixXd& grad, const Eigen::MatrixXd& out,
                         Activation a) {
  switch (a) {
    case Activation::kLinear:
      break;
    case Activation::kRelu:
      grad = (out.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::kTanh:
      grad = (grad.array() * (1.0 - out.array().square())).matrix();
      break;
  }
}

void check_chain(const std::vector<DenseLayer>& layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    require(l.b.size() == l.out(), ErrorCode::kShapeMismatch,
            "layer " + std::to_string(i) + ": bias length " +
                std::to_string(l.b.size()) + " != " + std::to_string(l.out()));
    if (i + 1 < layers.size()) {
      require(l.out() == layers[i + 1].in(), ErrorCode::kShapeMismatch,
              "layer " + std::to_string(i) + " outputs " + std::to_string(l.out()) +
                  " but layer " + std::to_string(i + 1) + " expects " +
                  std::to_string(layers[i + 1].in()));
    }
  }
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      os << m(r, c) << (c + 1 == m.cols() ? '\n' : ' ');
    }
  }
}

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    os << v(i) << (i + 1 == v.size() ? '\n' : ' ');
  }
  if (v.size() == 0) os << '\n';
}

void expect_token(std::istream& is, const std::string& want) {
  std::string got;
  is >> got;
  require(static_cast<bool>(is) && got == want, ErrorCode::kIo,
          "checkpoint: expected '" + want + "', found '" + got + "'");
}

template <typename T>
T read_value(std::istream& is, const char* what) {
  T v{};
  is >> v;
  require(static_cast<bool>(is), ErrorCode::kIo,
          std::string("checkpoint: failed to read ") + what);
  return v;
}

Eigen::MatrixXd read_matrix(std::istream& is, Eigen::Index rows,
                            Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_value<double>(is, "matrix entry");
  }
  return m;
}

Eigen::VectorXd read_vector(std::istream& is, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = read_value<double>(is, "vector entry");
  return v;
}

void write_gradients(std::ostream& os, const GradientSet& g) {
  for (const auto& l : g.layers) {
    write_matrix(os, l.dw);
    write_vector(os, l.db);
  }
}

GradientSet read_gradients_like(std::istream& is, const GradientSet& shape) {
  GradientSet g = shape;
  for (auto& l : g.layers) {
    l.dw = read_matrix(is, l.dw.rows(), l.dw.cols());
    l.db = read_vector(is, l.db.size());
  }
  return g;
}

}  // namespace

const char* to_string(Activation a) {
  switch (a) {
    case Activation::kLinear:
      return "linear";
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::kLinear;
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  fail(ErrorCode::kIo, "unknown activation '" + s + "'");
}

GradientSet GradientSet::zeros_like(const Mlp& net) {
  GradientSet g;
  g.layers.reserve(net.size());
  for (const auto& l : net.layers()) {
    g.layers.push_back({Eigen::MatrixXd::Zero(l.in(), l.out()),
                        Eigen::VectorXd::Zero(l.out())});
  }
  return g;
}

bool GradientSet::all_finite() const {
  for (const auto& l : layers) {
    if (!l.dw.allFinite() || !l.db.allFinite()) return false;
  }
  return true;
}

double GradientSet::max_abs() const {
  double m = 0.0;
  for (const auto& l : layers) {
    if (l.dw.size() > 0) m = std::max(m, l.dw.cwiseAbs().maxCoeff());
    if (l.db.size() > 0) m = std::max(m, l.db.cwiseAbs().maxCoeff());
  }
  return m;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  require(layers.size() == other.layers.size(), ErrorCode::kShapeMismatch,
          "gradient sets have different depth");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].dw += other.layers[i].dw;
    layers[i].db += other.layers[i].db;
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double s) {
  for (auto& l : layers) {
    l.dw *= s;
    l.db *= s;
  }
  return *this;
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  check_chain(layers_);
}

Mlp Mlp::random(std::span<const LayerSpec> specs, std::mt19937_64& rng) {
  std::vector<DenseLayer> layers;
  layers.reserve(specs.size());
  for (const auto& s : specs) {
    require(s.in > 0 && s.out > 0, ErrorCode::kShapeMismatch,
            "layer dimensions must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer l;
    l.w.resize(s.in, s.out);
    l.b.resize(s.out);
    l.activation = s.activation;
    for (Eigen::Index r = 0; r < s.in; ++r) {
      for (Eigen::Index c = 0; c < s.out; ++c) l.w(r, c) = u(rng);
    }
    for (Eigen::Index c = 0; c < s.out; ++c) l.b(c) = u(rng);
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

Eigen::Index Mlp::in_dim() const { return layers_.empty() ? 0 : layers_.front().in(); }
Eigen::Index Mlp::out_dim() const { return layers_.empty() ? 0 : layers_.back().out(); }

void Mlp::replace_layer(std::size_t i, DenseLayer layer) {
  require(i < layers_.size(), ErrorCode::kInvalidArgument, "replace_layer: index out of range");
  std::vector<DenseLayer> next = layers_;
  next[i] = std::move(layer);
  check_chain(next);
  layers_ = std::move(next);
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  require(x.size() == in_dim(), ErrorCode::kShapeMismatch,
          "forward: input has " + std::to_string(x.size()) + " components, expected " +
              std::to_string(in_dim()));
  Eigen::MatrixXd row = x.transpose();
  return forward_batch(row).row(0).transpose();
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x,
                                   ForwardCache* cache) const {
  require(!layers_.empty(), ErrorCode::kState, "forward: empty network");
  require(x.cols() == in_dim(), ErrorCode::kShapeMismatch,
          "forward: input has " + std::to_string(x.cols()) + " columns, expected " +
              std::to_string(in_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  Eigen::MatrixXd h = x;
  for (const auto& l : layers_) {
    Eigen::MatrixXd z = h * l.w;
    z.rowwise() += l.b.transpose();
    apply_activation(z, l.activation);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->outputs.push_back(z);
    }
    h = std::move(z);
  }
  return h;
}

Backprop Mlp::backward(const ForwardCache& cache,
                       const Eigen::MatrixXd& upstream) const {
  require(cache.inputs.size() == layers_.size() && cache.outputs.size() == layers_.size(),
          ErrorCode::kState, "backward: cache does not match network");
  require(upstream.rows() == cache.outputs.back().rows() && upstream.cols() == out_dim(),
          ErrorCode::kShapeMismatch, "backward: upstream gradient shape mismatch");
  Backprop bp;
  bp.grads.layers.resize(layers_.size());
  Eigen::MatrixXd grad = upstream;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    activation_backward(grad, cache.outputs[k], l.activation);
    bp.grads.layers[k].dw = cache.inputs[k].transpose() * grad;
    bp.grads.layers[k].db = grad.colwise().sum().transpose();
    grad = grad * l.w.transpose();
  }
  bp.dx = std::move(grad);
  return bp;
}

bool Mlp::same_architecture(const Mlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& a = layers_[i];
    const auto& b = other.layers_[i];
    if (a.in() != b.in() || a.out() != b.out() || a.activation != b.activation) return false;
  }
  return true;
}

bool Mlp::all_finite() const {
  for (const auto& l : layers_) {
    if (!l.w.allFinite() || !l.b.allFinite()) return false;
  }
  return true;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (!a.same_architecture(b)) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    if (a.layers_[i].w != b.layers_[i].w || a.layers_[i].b != b.layers_[i].b) return false;
  }
  return true;
}

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& x) {
  return net.forward(x);
}

Backprop backward(const Mlp& net, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& upstream) {
  require(x.size() == net.in_dim(), ErrorCode::kShapeMismatch,
          "backward: input length mismatch");
  require(upstream.size() == net.out_dim(), ErrorCode::kShapeMismatch,
          "backward: upstream length mismatch");
  ForwardCache cache;
  net.forward_batch(x.transpose(), &cache);
  return net.backward(cache, upstream.transpose());
}

Optimizer::Optimizer(const Mlp& net, OptimizerKind kind, AdamConfig cfg)
    : kind_(kind),
      cfg_(cfg),
      m_(GradientSet::zeros_like(net)),
      v_(GradientSet::zeros_like(net)) {}

void Optimizer::apply(Mlp& net, const GradientSet& g, double lr) {
  require(g.layers.size() == net.size() && m_.layers.size() == net.size(),
          ErrorCode::kShapeMismatch, "optimizer: gradient/network depth mismatch");
  require(g.all_finite(), ErrorCode::kNumerical, "optimizer: non-finite gradient");
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& l = net.layers_[i];
    require(g.layers[i].dw.rows() == l.in() && g.layers[i].dw.cols() == l.out() &&
                g.layers[i].db.size() == l.out() &&
                m_.layers[i].dw.rows() == l.in() && m_.layers[i].dw.cols() == l.out(),
            ErrorCode::kShapeMismatch,
            "optimizer: gradient shape mismatch at layer " + std::to_string(i));
  }

  if (kind_ == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < net.size(); ++i) {
      net.layers_[i].w -= lr * g.layers[i].dw;
      net.layers_[i].b -= lr * g.layers[i].db;
    }
  } else {
    ++steps_;
    const double b1 = cfg_.beta1;
    const double b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const double eps = cfg_.epsilon;
    auto step = [&](auto& param, auto& m, auto& v, const auto& grad) {
      m = b1 * m + (1.0 - b1) * grad;
      v = (b2 * v.array() + (1.0 - b2) * grad.array().square()).matrix();
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t i = 0; i < net.size(); ++i) {
      step(net.layers_[i].w, m_.layers[i].dw, v_.layers[i].dw, g.layers[i].dw);
      step(net.layers_[i].b, m_.layers[i].db, v_.layers[i].db, g.layers[i].db);
    }
  }
  require(net.all_finite(), ErrorCode::kNumerical,
          "optimizer: parameters became non-finite");
}

void Optimizer::reset_layer(std::size_t i, const DenseLayer& layer) {
  require(i < m_.layers.size(), ErrorCode::kInvalidArgument,
          "reset_layer: index out of range");
  for (GradientSet* s : {&m_, &v_}) {
    s->layers[i].dw = Eigen::MatrixXd::Zero(layer.in(), layer.out());
    s->layers[i].db = Eigen::VectorXd::Zero(layer.out());
  }
}

void Optimizer::write(std::ostream& os) const {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "optimizer " << (kind_ == OptimizerKind::kAdam ? "adam" : "sgd") << ' '
     << steps_ << ' ' << cfg_.beta1 << ' ' << cfg_.beta2 << ' ' << cfg_.epsilon
     << ' ' << m_.layers.size() << '\n';
  for (const auto& l : m_.layers) os << "moment " << l.dw.rows() << ' ' << l.dw.cols() << '\n';
  write_gradients(os, m_);
  write_gradients(os, v_);
  os.precision(old_precision);
}

Optimizer Optimizer::read(std::istream& is) {
  expect_token(is, "optimizer");
  Optimizer opt;
  const auto kind = read_value<std::string>(is, "optimizer kind");
  if (kind == "adam") {
    opt.kind_ = OptimizerKind::kAdam;
  } else if (kind == "sgd") {
    opt.kind_ = OptimizerKind::kSgd;
  } else {
    fail(ErrorCode::kIo, "checkpoint: unknown optimizer '" + kind + "'");
  }
  opt.steps_ = read_value<std::int64_t>(is, "optimizer steps");
  opt.cfg_.beta1 = read_value<double>(is, "beta1");
  opt.cfg_.beta2 = read_value<double>(is, "beta2");
  opt.cfg_.epsilon = read_value<double>(is, "epsilon");
  const auto n = read_value<std::size_t>(is, "moment count");
  GradientSet shape;
  for (std::size_t i = 0; i < n; ++i) {
    expect_token(is, "moment");
    const auto rows = read_value<Eigen::Index>(is, "moment rows");
    const auto cols = read_value<Eigen::Index>(is, "moment cols");
    shape.layers.push_back({Eigen::MatrixXd::Zero(rows, cols), Eigen::VectorXd::Zero(cols)});
  }
  opt.m_ = read_gradients_like(is, shape);
  opt.v_ = read_gradients_like(is, shape);
  return opt;
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  require(target.same_architecture(online), ErrorCode::kShapeMismatch,
          "soft_update: architecture mismatch");
  require(tau >= 0.0 && tau <= 1.0, ErrorCode::kInvalidArgument,
          "soft_update: tau must lie in [0, 1]");
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto& t = target.layers_[i];
    const auto& o = online.layers_[i];
    t.w = tau * o.w + (1.0 - tau) * t.w;
    t.b = tau * o.b + (1.0 - tau) * t.b;
  }
}

void write_mlp(std::ostream& os, const Mlp& net) {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "mlp " << net.size() << '\n';
  for (const auto& l : net.layers()) {
    os << "layer " << l.in() << ' ' << l.out() << ' ' << to_string(l.activation) << '\n';
    write_matrix(os, l.w);
    write_vector(os, l.b);
  }
  os.precision(old_precision);
}

Mlp read_mlp(std::istream& is) {
  expect_token(is, "mlp");
  const auto n = read_value<std::size_t>(is, "layer count");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i < n; ++i) {
    expect_token(is, "layer");
    const auto in = read_value<Eigen::Index>(is, "layer in");
    const auto out = read_value<Eigen::Index>(is, "layer out");
    require(in > 0 && out > 0, ErrorCode::kIo, "checkpoint: bad layer shape");
    DenseLayer l;
    l.activation = activation_from_string(read_value<std::string>(is, "activation"));
    l.w = read_matrix(is, in, out);
    l.b = read_vector(is, out);
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

}  // namespace pead
