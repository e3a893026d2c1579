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

#include "ddpg.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "error.hpp"

namespace pead {
namespace {

constexpr const char* kMagic = "pead-agent";
constexpr int kFormatVersion = 1;

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

Eigen::MatrixXd clip(const Eigen::MatrixXd& m, double bound) {
  return m.cwiseMax(-bound).cwiseMin(bound);
}

}  // namespace

void DdpgConfig::validate() const {
  require(hidden > 0 && batch_size > 0 && buffer_capacity >= batch_size && updates_per_step >= 0,
          ErrorCode::kConfig, "ddpg: sizes must be positive and buffer >= batch");
  require(lr_actor > 0.0 && lr_critic > 0.0, ErrorCode::kConfig,
          "ddpg: learning rates must be positive");
  require(tau >= 0.0 && tau <= 1.0 && gamma >= 0.0 && gamma <= 1.0, ErrorCode::kConfig,
          "ddpg: tau and gamma must lie in [0, 1]");
  require(warmup_episodes >= 0, ErrorCode::kConfig, "ddpg: warmup must be nonnegative");
  require(sigma_min > 0.0 && sigma0 >= sigma_min && sigma_decay > 0.0 && sigma_decay <= 1.0,
          ErrorCode::kConfig, "ddpg: need sigma0 >= sigma_min > 0 and decay in (0, 1]");
  require(action_bound > 0.0, ErrorCode::kConfig, "ddpg: action bound must be positive");
}

DdpgCritic DdpgCritic::random(int state_dim, int action_dim, int hidden,
                              std::mt19937_64& rng) {
  const LayerSpec s[] = {{state_dim, hidden, Activation::kRelu}};
  const LayerSpec a[] = {{action_dim, hidden, Activation::kRelu}};
  const LayerSpec h[] = {{2 * hidden, hidden, Activation::kRelu},
                         {hidden, 1, Activation::kLinear}};
  DdpgCritic c;
  c.state_path = Mlp::random(s, rng);
  c.action_path = Mlp::random(a, rng);
  c.head = Mlp::random(h, rng);
  return c;
}

Eigen::MatrixXd DdpgCritic::forward(const Eigen::MatrixXd& states,
                                    const Eigen::MatrixXd& actions, Cache* cache) const {
  require(states.rows() == actions.rows(), ErrorCode::kShapeMismatch,
          "critic: state/action batch sizes differ");
  const Eigen::MatrixXd hs = state_path.forward_batch(states, cache ? &cache->state : nullptr);
  const Eigen::MatrixXd ha =
      action_path.forward_batch(actions, cache ? &cache->action : nullptr);
  Eigen::MatrixXd joined(states.rows(), hs.cols() + ha.cols());
  joined << hs, ha;
  return head.forward_batch(joined, cache ? &cache->head : nullptr);
}

double DdpgCritic::value(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  return forward(s.transpose(), a.transpose())(0, 0);
}

DdpgCritic::Grads DdpgCritic::backward(const Cache& cache,
                                       const Eigen::MatrixXd& upstream) const {
  Backprop h = head.backward(cache.head, upstream);
  const Eigen::Index ns = state_path.out_dim();
  const Eigen::Index na = action_path.out_dim();
  Backprop s = state_path.backward(cache.state, h.dx.leftCols(ns));
  Backprop a = action_path.backward(cache.action, h.dx.rightCols(na));
  return {std::move(s.grads), std::move(a.grads), std::move(h.grads), std::move(a.dx)};
}

bool DdpgCritic::same_architecture(const DdpgCritic& o) const {
  return state_path.same_architecture(o.state_path) &&
         action_path.same_architecture(o.action_path) && head.same_architecture(o.head);
}

DdpgAgent::DdpgAgent(int state_dim, int action_dim, DdpgConfig cfg, std::uint64_t seed)
    : Agent(seed),
      cfg_(cfg),
      state_dim_(state_dim),
      action_dim_(action_dim),
      buffer_(static_cast<std::size_t>(std::max(cfg.buffer_capacity, 1))),
      noise_(action_dim, cfg.sigma0, cfg.sigma_decay, cfg.sigma_min) {
  cfg_.validate();
  require(state_dim > 0 && action_dim > 0, ErrorCode::kInvalidArgument,
          "ddpg: dimensions must be positive");
  const LayerSpec actor[] = {{state_dim, cfg_.hidden, Activation::kRelu},
                             {cfg_.hidden, action_dim, Activation::kLinear}};
  actor_ = Mlp::random(actor, rng_);
  critic_ = DdpgCritic::random(state_dim, action_dim, cfg_.hidden, rng_);
  actor_target_ = actor_;
  critic_target_ = critic_;
  actor_opt_ = Optimizer(actor_);
  critic_state_opt_ = Optimizer(critic_.state_path);
  critic_action_opt_ = Optimizer(critic_.action_path);
  critic_head_opt_ = Optimizer(critic_.head);
}

Eigen::VectorXd DdpgAgent::policy_raw(const Eigen::VectorXd& state) const {
  require(state.size() == state_dim_, ErrorCode::kShapeMismatch,
          "ddpg: state has " + std::to_string(state.size()) + " components, expected " +
              std::to_string(state_dim_));
  return actor_.forward(state);
}

ActionSample DdpgAgent::act(const Eigen::VectorXd& state, bool explore) {
  ActionSample out;
  out.raw = policy_raw(state);
  out.action = out.raw.cwiseMax(-cfg_.action_bound).cwiseMin(cfg_.action_bound);
  out.noise = explore ? noise_.sample(rng_) : ActionVec::Zero(action_dim_);
  return out;
}

void DdpgAgent::record(const Eigen::VectorXd& state, const ActionSample&,
                       const ActionVec& executed, double reward,
                       const Eigen::VectorXd& next_state, bool done) {
  require(executed.size() == action_dim_, ErrorCode::kShapeMismatch,
          "ddpg: recorded action dimension mismatch");
  buffer_.add({state, executed, reward, next_state, done});
}

void DdpgAgent::after_step(int episode) {
  if (episode < cfg_.warmup_episodes) return;
  if (buffer_.size() < static_cast<std::size_t>(cfg_.batch_size)) return;
  for (int i = 0; i < cfg_.updates_per_step; ++i) update_from_buffer();
}

void DdpgAgent::end_episode(int) { noise_.decay(); }

DdpgLosses DdpgAgent::update_from_buffer() {
  require(!buffer_.empty(), ErrorCode::kState, "ddpg update: replay buffer is empty");
  const auto idx = buffer_.sample_indices(
      std::min<std::size_t>(cfg_.batch_size, buffer_.size()), rng_);
  std::vector<Transition> batch;
  batch.reserve(idx.size());
  for (auto i : idx) batch.push_back(buffer_.at(i));
  return update(batch);
}

DdpgLosses DdpgAgent::update(const std::vector<Transition>& batch) {
  require(!batch.empty(), ErrorCode::kState, "ddpg update: empty batch");
  ScopedTimer timer(optimizer_ms_);
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd s(n, state_dim_), a(n, action_dim_), s2(n, state_dim_);
  Eigen::VectorXd r(n), not_done(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = batch[static_cast<std::size_t>(i)];
    require(t.state.size() == state_dim_ && t.next_state.size() == state_dim_ &&
                t.action.size() == action_dim_,
            ErrorCode::kShapeMismatch, "ddpg update: transition shape mismatch");
    s.row(i) = t.state.transpose();
    a.row(i) = t.action.transpose();
    s2.row(i) = t.next_state.transpose();
    r(i) = t.reward;
    not_done(i) = t.done ? 0.0 : 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  DdpgLosses losses;

  // Critic: regress onto r + gamma * Q'(s', pi'(s')).
  const Eigen::MatrixXd a2 = clip(actor_target_.forward_batch(s2), cfg_.action_bound);
  const Eigen::VectorXd q_next = critic_target_.forward(s2, a2).col(0);
  const Eigen::VectorXd y = r + cfg_.gamma * not_done.cwiseProduct(q_next);
  DdpgCritic::Cache cc;
  const Eigen::VectorXd q = critic_.forward(s, a, &cc).col(0);
  const Eigen::VectorXd td = q - y;
  losses.critic_loss = td.squaredNorm() * inv_n;
  {
    const Eigen::MatrixXd up = (2.0 * inv_n) * td;
    auto g = critic_.backward(cc, up);
    critic_state_opt_.apply(critic_.state_path, g.state, cfg_.lr_critic);
    critic_action_opt_.apply(critic_.action_path, g.action, cfg_.lr_critic);
    critic_head_opt_.apply(critic_.head, g.head, cfg_.lr_critic);
  }

  // Actor: ascend Q(s, pi(s)) through the critic's action input.
  ForwardCache ac;
  const Eigen::MatrixXd pre = actor_.forward_batch(s, &ac);
  const Eigen::MatrixXd pa = clip(pre, cfg_.action_bound);
  DdpgCritic::Cache qc;
  losses.actor_objective = critic_.forward(s, pa, &qc).mean();
  {
    const Eigen::MatrixXd up = Eigen::MatrixXd::Constant(n, 1, -inv_n);
    Eigen::MatrixXd d_pre = critic_.backward(qc, up).d_action;
    // Past the bound the clip has zero slope; keep only gradients that pull
    // the raw output back inside.
    for (Eigen::Index i = 0; i < d_pre.rows(); ++i) {
      for (Eigen::Index j = 0; j < d_pre.cols(); ++j) {
        if ((pre(i, j) > cfg_.action_bound && d_pre(i, j) < 0.0) ||
            (pre(i, j) < -cfg_.action_bound && d_pre(i, j) > 0.0)) {
          d_pre(i, j) = 0.0;
        }
      }
    }
    const Backprop bp = actor_.backward(ac, d_pre);
    actor_opt_.apply(actor_, bp.grads, cfg_.lr_actor);
  }

  soft_update(actor_target_, actor_, cfg_.tau);
  soft_update(critic_target_.state_path, critic_.state_path, cfg_.tau);
  soft_update(critic_target_.action_path, critic_.action_path, cfg_.tau);
  soft_update(critic_target_.head, critic_.head, cfg_.tau);
  ++updates_;
  return losses;
}

void DdpgAgent::sync_targets() {
  actor_target_ = actor_;
  critic_target_ = critic_;
}

void DdpgAgent::extend(const MappingMatrix& map) {
  require(!extended_, ErrorCode::kState, "ddpg: agent already extended");
  require(map.low_dim() == action_dim_, ErrorCode::kShapeMismatch,
          "ddpg: mapping reduces to " + std::to_string(map.low_dim()) +
              " dims but the agent acts in " + std::to_string(action_dim_));
  ScopedTimer timer(optimizer_ms_);
  const std::size_t out = actor_.size() - 1;
  for (Mlp* net : {&actor_, &actor_target_}) {
    const DenseLayer& l = net->layer(out);
    LayerParams p = extend_actor_output_layer(l.w, l.b, map);
    net->replace_layer(out, {std::move(p.w), std::move(p.b), l.activation});
  }
  for (DdpgCritic* c : {&critic_, &critic_target_}) {
    const DenseLayer& l = c->action_path.layer(0);
    c->action_path.replace_layer(
        0, {extend_critic_action_input_layer(l.w, map), l.b, l.activation});
  }
  actor_opt_.reset_layer(out, actor_.layer(out));
  critic_action_opt_.reset_layer(0, critic_.action_path.layer(0));
  buffer_.remap_actions(map);
  noise_.lift(map);
  action_dim_ = static_cast<int>(map.high_dim());
  extended_ = true;
}

void DdpgAgent::save(std::ostream& os) const {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << kMagic << ' ' << kFormatVersion << '\n'
     << "algo ddpg\n"
     << "state_dim " << state_dim_ << '\n'
     << "action_dim " << action_dim_ << '\n'
     << "extended " << (extended_ ? 1 : 0) << '\n'
     << "updates " << updates_ << '\n'
     << "config " << cfg_.hidden << ' ' << cfg_.lr_actor << ' ' << cfg_.lr_critic << ' '
     << cfg_.tau << ' ' << cfg_.gamma << ' ' << cfg_.batch_size << ' ' << cfg_.buffer_capacity
     << ' ' << cfg_.warmup_episodes << ' ' << cfg_.updates_per_step << ' ' << cfg_.sigma0
     << ' ' << cfg_.sigma_decay << ' ' << cfg_.sigma_min << ' ' << cfg_.action_bound << '\n';
  os << "noise";
  for (Eigen::Index i = 0; i < noise_.sigma().size(); ++i) os << ' ' << noise_.sigma()(i);
  os << '\n';
  auto net = [&](const char* name, const Mlp& m, const Optimizer& opt) {
    os << "net " << name << '\n';
    write_mlp(os, m);
    opt.write(os);
  };
  net("actor", actor_, actor_opt_);
  net("critic.state", critic_.state_path, critic_state_opt_);
  net("critic.action", critic_.action_path, critic_action_opt_);
  net("critic.head", critic_.head, critic_head_opt_);
  os << "target actor\n";
  write_mlp(os, actor_target_);
  os << "target critic.state\n";
  write_mlp(os, critic_target_.state_path);
  os << "target critic.action\n";
  write_mlp(os, critic_target_.action_path);
  os << "target critic.head\n";
  write_mlp(os, critic_target_.head);
  os << "end\n";
  os.precision(old_precision);
}

std::unique_ptr<DdpgAgent> DdpgAgent::load(std::istream& is, std::uint64_t seed) {
  const int state_dim = read_field<int>(is, "state_dim");
  const int action_dim = read_field<int>(is, "action_dim");
  const int extended = read_field<int>(is, "extended");
  const auto updates = read_field<std::int64_t>(is, "updates");
  expect(is, "config");
  DdpgConfig cfg;
  is >> cfg.hidden >> cfg.lr_actor >> cfg.lr_critic >> cfg.tau >> cfg.gamma >>
      cfg.batch_size >> cfg.buffer_capacity >> cfg.warmup_episodes >> cfg.updates_per_step >>
      cfg.sigma0 >> cfg.sigma_decay >> cfg.sigma_min >> cfg.action_bound;
  require(static_cast<bool>(is), ErrorCode::kIo, "checkpoint: bad ddpg config line");
  auto agent = std::make_unique<DdpgAgent>(state_dim, action_dim, cfg, seed);
  expect(is, "noise");
  Eigen::VectorXd sigma(action_dim);
  for (int i = 0; i < action_dim; ++i) is >> sigma(i);
  require(static_cast<bool>(is), ErrorCode::kIo, "checkpoint: bad noise line");
  agent->noise_.set_sigma(sigma);
  auto net = [&](const char* name, Mlp& m, Optimizer& opt) {
    expect(is, "net");
    expect(is, name);
    m = read_mlp(is);
    opt = Optimizer::read(is);
  };
  net("actor", agent->actor_, agent->actor_opt_);
  net("critic.state", agent->critic_.state_path, agent->critic_state_opt_);
  net("critic.action", agent->critic_.action_path, agent->critic_action_opt_);
  net("critic.head", agent->critic_.head, agent->critic_head_opt_);
  auto target = [&](const char* name, Mlp& m) {
    expect(is, "target");
    expect(is, name);
    m = read_mlp(is);
  };
  target("actor", agent->actor_target_);
  target("critic.state", agent->critic_target_.state_path);
  target("critic.action", agent->critic_target_.action_path);
  target("critic.head", agent->critic_target_.head);
  expect(is, "end");
  require(agent->actor_.in_dim() == state_dim && agent->actor_.out_dim() == action_dim &&
              agent->critic_.action_dim() == action_dim &&
              agent->actor_.same_architecture(agent->actor_target_) &&
              agent->critic_.same_architecture(agent->critic_target_),
          ErrorCode::kIo, "checkpoint: network shapes do not match the header");
  agent->extended_ = extended != 0;
  agent->updates_ = updates;
  return agent;
}

}  // namespace pead
