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

#include "ppo.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "error.hpp"

namespace pead {
namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

void expect(std::istream& is, const std::string& want) {
  std::string got;
  is >> got;
  require(static_cast<bool>(is) && got == want, ErrorCode::kIo,
          "checkpoint: expected '" + want + "', found '" + got + "'");
}

template <typename T>
T read_field(std::istream& is, const std::string& key) {
  expect(is, key);
  T v{};
  is >> v;
  require(static_cast<bool>(is), ErrorCode::kIo, "checkpoint: bad value for " + key);
  return v;
}

// Column j of the widened log-std head copies the reduced column that feeds
// action j most strongly under lift().
DenseLayer duplicate_columns(const DenseLayer& l, const MappingMatrix& map) {
  const Eigen::MatrixXd& pinv = map.f_pinv();  // l x m
  DenseLayer out;
  out.activation = l.activation;
  out.w.resize(l.in(), pinv.cols());
  out.b.resize(pinv.cols());
  for (Eigen::Index j = 0; j < pinv.cols(); ++j) {
    Eigen::Index src = 0;
    pinv.col(j).cwiseAbs().maxCoeff(&src);
    out.w.col(j) = l.w.col(src);
    out.b(j) = l.b(src);
  }
  return out;
}

}  // namespace

void PpoConfig::validate() const {
  require(hidden > 0 && rollout_steps > 0 && epochs > 0 && minibatch > 0, ErrorCode::kConfig,
          "ppo: sizes must be positive");
  require(lr_actor > 0.0 && lr_critic > 0.0, ErrorCode::kConfig,
          "ppo: learning rates must be positive");
  require(gamma >= 0.0 && gamma <= 1.0 && clip_ratio > 0.0 && clip_ratio < 1.0,
          ErrorCode::kConfig, "ppo: need gamma in [0, 1] and clip ratio in (0, 1)");
  require(log_std_min < log_std_max, ErrorCode::kConfig, "ppo: empty log-std range");
  require(action_bound > 0.0, ErrorCode::kConfig, "ppo: action bound must be positive");
  require(value_scale > 0.0, ErrorCode::kConfig, "ppo: value_scale must be positive");
}

PpoActor PpoActor::random(int state_dim, int action_dim, int hidden, double initial_log_std,
                          std::mt19937_64& rng) {
  const LayerSpec t[] = {{state_dim, hidden, Activation::kRelu}};
  const LayerSpec h[] = {{hidden, action_dim, Activation::kLinear}};
  PpoActor a;
  a.trunk = Mlp::random(t, rng);
  a.mean = Mlp::random(h, rng);
  a.log_std = Mlp::random(h, rng);
  DenseLayer ls = a.log_std.layer(0);
  ls.b.array() += initial_log_std;
  a.log_std.replace_layer(0, std::move(ls));
  return a;
}

PpoActor::Output PpoActor::forward(const Eigen::MatrixXd& states, Cache* cache) const {
  const Eigen::MatrixXd h = trunk.forward_batch(states, cache ? &cache->trunk : nullptr);
  return {mean.forward_batch(h, cache ? &cache->mean : nullptr),
          log_std.forward_batch(h, cache ? &cache->log_std : nullptr)};
}

PpoActor::Grads PpoActor::backward(const Cache& cache, const Eigen::MatrixXd& d_mean,
                                   const Eigen::MatrixXd& d_log_std) const {
  Backprop m = mean.backward(cache.mean, d_mean);
  Backprop s = log_std.backward(cache.log_std, d_log_std);
  Backprop t = trunk.backward(cache.trunk, m.dx + s.dx);
  return {std::move(t.grads), std::move(m.grads), std::move(s.grads)};
}

double gaussian_log_prob(const Eigen::VectorXd& u, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std) {
  require(u.size() == mean.size() && u.size() == log_std.size(), ErrorCode::kShapeMismatch,
          "gaussian_log_prob: length mismatch");
  double lp = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double z = (u(j) - mean(j)) * std::exp(-log_std(j));
    lp += -0.5 * z * z - log_std(j) - kLogSqrt2Pi;
  }
  return lp;
}

SurrogateTerm clipped_surrogate(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  const double plain = ratio * advantage;
  const double capped = clipped * advantage;
  if (plain <= capped) return {plain, advantage};
  return {capped, 0.0};
}

PpoAgent::PpoAgent(int state_dim, int action_dim, PpoConfig cfg, std::uint64_t seed)
    : Agent(seed), cfg_(cfg), state_dim_(state_dim), store_(static_cast<std::size_t>(
                                                         std::max(cfg.rollout_steps, 1))) {
  cfg_.validate();
  require(state_dim > 0 && action_dim > 0, ErrorCode::kInvalidArgument,
          "ppo: dimensions must be positive");
  actor_ = PpoActor::random(state_dim, action_dim, cfg_.hidden, cfg_.initial_log_std, rng_);
  const LayerSpec c[] = {{state_dim, cfg_.hidden, Activation::kRelu},
                         {cfg_.hidden, 1, Activation::kLinear}};
  critic_ = Mlp::random(c, rng_);
  old_actor_ = actor_;
  trunk_opt_ = Optimizer(actor_.trunk);
  mean_opt_ = Optimizer(actor_.mean);
  log_std_opt_ = Optimizer(actor_.log_std);
  critic_opt_ = Optimizer(critic_);
}

Eigen::MatrixXd PpoAgent::log_std(const Eigen::MatrixXd& raw) const {
  return raw.cwiseMax(cfg_.log_std_min).cwiseMin(cfg_.log_std_max);
}

ActionSample PpoAgent::act(const Eigen::VectorXd& state, bool explore) {
  require(state.size() == state_dim_, ErrorCode::kShapeMismatch,
          "ppo: state has " + std::to_string(state.size()) + " components, expected " +
              std::to_string(state_dim_));
  const auto out = old_actor_.forward(state.transpose());
  const Eigen::VectorXd mu = out.mean.row(0).transpose();
  const Eigen::VectorXd ls = log_std(out.log_std_raw).row(0).transpose();
  require(mu.allFinite() && ls.allFinite(), ErrorCode::kNumerical,
          "ppo: non-finite policy parameters");
  ActionSample s;
  s.noise = ActionVec::Zero(mu.size());
  if (explore) {
    std::normal_distribution<double> n(0.0, 1.0);
    s.raw.resize(mu.size());
    for (Eigen::Index j = 0; j < mu.size(); ++j) s.raw(j) = mu(j) + std::exp(ls(j)) * n(rng_);
  } else {
    s.raw = mu;
  }
  s.log_prob = gaussian_log_prob(s.raw, mu, ls);
  s.action = s.raw.cwiseMax(-cfg_.action_bound).cwiseMin(cfg_.action_bound);
  return s;
}

void PpoAgent::record(const Eigen::VectorXd& state, const ActionSample& sample,
                      const ActionVec&, double reward, const Eigen::VectorXd&, bool done) {
  require(sample.raw.size() == action_dim(), ErrorCode::kShapeMismatch,
          "ppo: recorded action dimension mismatch");
  store_.add({state, sample.raw, sample.log_prob, reward, done});
}

void PpoAgent::end_episode(int) {
  if (store_.full()) update();
}

PpoLosses PpoAgent::update() {
  require(!store_.empty(), ErrorCode::kState, "ppo update: rollout store is empty");
  ScopedTimer timer(optimizer_ms_);
  const auto& steps = store_.steps();
  const auto n = static_cast<Eigen::Index>(steps.size());
  const int dim = action_dim();
  Eigen::MatrixXd s(n, state_dim_), u(n, dim);
  Eigen::VectorXd old_lp(n), ret(n);
  double g = 0.0;
  for (Eigen::Index i = n; i-- > 0;) {
    const auto& st = steps[static_cast<std::size_t>(i)];
    require(st.raw_action.size() == dim, ErrorCode::kShapeMismatch,
            "ppo update: stored action dimension mismatch");
    s.row(i) = st.state.transpose();
    u.row(i) = st.raw_action.transpose();
    old_lp(i) = st.log_prob;
    // The store is only flushed at episode ends, so the final step is terminal.
    g = st.reward + (st.done ? 0.0 : cfg_.gamma * g);
    ret(i) = g;
  }
  ret *= cfg_.value_scale;
  Eigen::VectorXd adv = ret - critic_.forward_batch(s).col(0);
  const double mean = adv.mean();
  const double var = n > 1 ? (adv.array() - mean).square().sum() / static_cast<double>(n - 1)
                           : 0.0;
  adv = (adv.array() - mean) / (std::sqrt(var) + 1e-8);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  PpoLosses losses;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_);
    double actor_sum = 0.0;
    double critic_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += cfg_.minibatch) {
      const Eigen::Index b = std::min<Eigen::Index>(cfg_.minibatch, n - start);
      Eigen::MatrixXd sb(b, state_dim_), ub(b, dim);
      Eigen::VectorXd lpb(b), ab(b), rb(b);
      for (Eigen::Index k = 0; k < b; ++k) {
        const Eigen::Index i = order[static_cast<std::size_t>(start + k)];
        sb.row(k) = s.row(i);
        ub.row(k) = u.row(i);
        lpb(k) = old_lp(i);
        ab(k) = adv(i);
        rb(k) = ret(i);
      }
      const double inv_b = 1.0 / static_cast<double>(b);

      PpoActor::Cache cache;
      const auto out = actor_.forward(sb, &cache);
      const Eigen::MatrixXd ls = log_std(out.log_std_raw);
      Eigen::MatrixXd d_mean(b, dim), d_ls(b, dim);
      for (Eigen::Index k = 0; k < b; ++k) {
        double lp = 0.0;
        for (int j = 0; j < dim; ++j) {
          const double z = (ub(k, j) - out.mean(k, j)) * std::exp(-ls(k, j));
          lp += -0.5 * z * z - ls(k, j) - kLogSqrt2Pi;
        }
        const double ratio = std::exp(lp - lpb(k));
        const SurrogateTerm term = clipped_surrogate(ratio, ab(k), cfg_.clip_ratio);
        actor_sum -= term.value;
        // d(-term)/d(logp) = -d_ratio * ratio.
        const double coef = -term.d_ratio * ratio * inv_b;
        for (int j = 0; j < dim; ++j) {
          const double inv_sigma = std::exp(-ls(k, j));
          const double z = (ub(k, j) - out.mean(k, j)) * inv_sigma;
          d_mean(k, j) = coef * z * inv_sigma;
          const bool inside = out.log_std_raw(k, j) > cfg_.log_std_min &&
                              out.log_std_raw(k, j) < cfg_.log_std_max;
          d_ls(k, j) = inside ? coef * (z * z - 1.0) : 0.0;
        }
      }
      const auto grads = actor_.backward(cache, d_mean, d_ls);
      trunk_opt_.apply(actor_.trunk, grads.trunk, cfg_.lr_actor);
      mean_opt_.apply(actor_.mean, grads.mean, cfg_.lr_actor);
      log_std_opt_.apply(actor_.log_std, grads.log_std, cfg_.lr_actor);

      ForwardCache cc;
      const Eigen::VectorXd v = critic_.forward_batch(sb, &cc).col(0);
      const Eigen::VectorXd err = v - rb;
      critic_sum += err.squaredNorm();
      const Backprop bp = critic_.backward(cc, (2.0 * inv_b) * err);
      critic_opt_.apply(critic_, bp.grads, cfg_.lr_critic);
      ++losses.minibatch_updates;
    }
    losses.actor_loss = actor_sum / static_cast<double>(n);
    losses.critic_loss = critic_sum / static_cast<double>(n);
  }
  sync_old_actor();
  ++updates_;
  return losses;
}

void PpoAgent::sync_old_actor() {
  old_actor_ = actor_;
  store_.clear();
}

void PpoAgent::extend(const MappingMatrix& map) {
  require(!extended_, ErrorCode::kState, "ppo: agent already extended");
  require(store_.empty(), ErrorCode::kState,
          "ppo: extension must happen right after the old actor sync, but the rollout store "
          "holds " +
              std::to_string(store_.size()) + " steps");
  require(map.low_dim() == action_dim(), ErrorCode::kShapeMismatch,
          "ppo: mapping reduces to " + std::to_string(map.low_dim()) +
              " dims but the agent acts in " + std::to_string(action_dim()));
  ScopedTimer timer(optimizer_ms_);
  for (PpoActor* a : {&actor_, &old_actor_}) {
    const DenseLayer& m = a->mean.layer(0);
    LayerParams p = extend_actor_output_layer(m.w, m.b, map);
    a->mean.replace_layer(0, {std::move(p.w), std::move(p.b), m.activation});
    a->log_std.replace_layer(0, duplicate_columns(a->log_std.layer(0), map));
  }
  mean_opt_.reset_layer(0, actor_.mean.layer(0));
  log_std_opt_.reset_layer(0, actor_.log_std.layer(0));
  extended_ = true;
}

void PpoAgent::save(std::ostream& os) const {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "pead-agent 1\n"
     << "algo ppo\n"
     << "state_dim " << state_dim_ << '\n'
     << "action_dim " << action_dim() << '\n'
     << "extended " << (extended_ ? 1 : 0) << '\n'
     << "updates " << updates_ << '\n'
     << "config " << cfg_.hidden << ' ' << cfg_.lr_actor << ' ' << cfg_.lr_critic << ' '
     << cfg_.gamma << ' ' << cfg_.clip_ratio << ' ' << cfg_.rollout_steps << ' ' << cfg_.epochs
     << ' ' << cfg_.minibatch << ' ' << cfg_.log_std_min << ' ' << cfg_.log_std_max << ' '
     << cfg_.initial_log_std << ' ' << cfg_.action_bound << ' ' << cfg_.value_scale << '\n';
  auto net = [&](const char* name, const Mlp& m, const Optimizer& opt) {
    os << "net " << name << '\n';
    write_mlp(os, m);
    opt.write(os);
  };
  net("actor.trunk", actor_.trunk, trunk_opt_);
  net("actor.mean", actor_.mean, mean_opt_);
  net("actor.log_std", actor_.log_std, log_std_opt_);
  net("critic", critic_, critic_opt_);
  os << "old actor.trunk\n";
  write_mlp(os, old_actor_.trunk);
  os << "old actor.mean\n";
  write_mlp(os, old_actor_.mean);
  os << "old actor.log_std\n";
  write_mlp(os, old_actor_.log_std);
  os << "end\n";
  os.precision(old_precision);
}

std::unique_ptr<PpoAgent> PpoAgent::load(std::istream& is, std::uint64_t seed) {
  const int state_dim = read_field<int>(is, "state_dim");
  const int action_dim = read_field<int>(is, "action_dim");
  const int extended = read_field<int>(is, "extended");
  const auto updates = read_field<std::int64_t>(is, "updates");
  expect(is, "config");
  PpoConfig cfg;
  is >> cfg.hidden >> cfg.lr_actor >> cfg.lr_critic >> cfg.gamma >> cfg.clip_ratio >>
      cfg.rollout_steps >> cfg.epochs >> cfg.minibatch >> cfg.log_std_min >> cfg.log_std_max >>
      cfg.initial_log_std >> cfg.action_bound >> cfg.value_scale;
  require(static_cast<bool>(is), ErrorCode::kIo, "checkpoint: bad ppo config line");
  auto agent = std::make_unique<PpoAgent>(state_dim, action_dim, cfg, seed);
  auto net = [&](const char* name, Mlp& m, Optimizer& opt) {
    expect(is, "net");
    expect(is, name);
    m = read_mlp(is);
    opt = Optimizer::read(is);
  };
  net("actor.trunk", agent->actor_.trunk, agent->trunk_opt_);
  net("actor.mean", agent->actor_.mean, agent->mean_opt_);
  net("actor.log_std", agent->actor_.log_std, agent->log_std_opt_);
  net("critic", agent->critic_, agent->critic_opt_);
  auto old = [&](const char* name, Mlp& m) {
    expect(is, "old");
    expect(is, name);
    m = read_mlp(is);
  };
  old("actor.trunk", agent->old_actor_.trunk);
  old("actor.mean", agent->old_actor_.mean);
  old("actor.log_std", agent->old_actor_.log_std);
  expect(is, "end");
  require(agent->actor_.trunk.in_dim() == state_dim && agent->actor_.action_dim() == action_dim &&
              agent->actor_.log_std.out_dim() == action_dim &&
              agent->old_actor_.action_dim() == action_dim && agent->critic_.in_dim() == state_dim,
          ErrorCode::kIo, "checkpoint: network shapes do not match the header");
  agent->extended_ = extended != 0;
  agent->updates_ = updates;
  return agent;
}

}  // namespace pead
