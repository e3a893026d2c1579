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

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "agent.hpp"
#include "dense_net.hpp"

namespace pead {

struct DdpgConfig {
  int hidden = 32;
  double lr_actor = 1e-3;
  double lr_critic = 1e-2;
  double tau = 1e-3;
  double gamma = 0.99;
  int batch_size = 64;
  int buffer_capacity = 20000;
  int warmup_episodes = 30;
  int updates_per_step = 1;
  double sigma0 = 0.3;
  double sigma_decay = 0.995;
  double sigma_min = 0.05;
  double action_bound = 0.8;
  void validate() const;
};

// Q(s, a) = head([relu(s Ws + bs), relu(a Wa + ba)]). Wa is the action-input
// layer that an extension widens.
struct DdpgCritic {
  Mlp state_path;
  Mlp action_path;
  Mlp head;

  struct Cache {
    ForwardCache state;
    ForwardCache action;
    ForwardCache head;
  };
  struct Grads {
    GradientSet state;
    GradientSet action;
    GradientSet head;
    Eigen::MatrixXd d_action;  // batch x action_dim
  };

  static DdpgCritic random(int state_dim, int action_dim, int hidden, std::mt19937_64& rng);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                          Cache* cache = nullptr) const;
  double value(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;
  Grads backward(const Cache& cache, const Eigen::MatrixXd& upstream) const;

  int action_dim() const { return static_cast<int>(action_path.in_dim()); }
  bool same_architecture(const DdpgCritic& o) const;
  friend bool operator==(const DdpgCritic&, const DdpgCritic&) = default;
};

struct DdpgLosses {
  double critic_loss = 0.0;  // mean squared TD error before the step
  double actor_objective = 0.0;  // mean Q(s, pi(s)) before the actor step
};

class DdpgAgent final : public Agent {
 public:
  DdpgAgent(int state_dim, int action_dim, DdpgConfig cfg, std::uint64_t seed);

  Algorithm algorithm() const override { return Algorithm::kDdpg; }
  int action_dim() const override { return action_dim_; }
  int state_dim() const override { return state_dim_; }

  ActionSample act(const Eigen::VectorXd& state, bool explore) override;
  void record(const Eigen::VectorXd& state, const ActionSample& sample,
              const ActionVec& executed, double reward, const Eigen::VectorXd& next_state,
              bool done) override;
  void after_step(int episode) override;
  void end_episode(int episode) override;

  bool ready_for_extension() const override { return !extended_; }
  void extend(const MappingMatrix& map) override;
  bool extended() const override { return extended_; }

  void save(std::ostream& os) const override;
  static std::unique_ptr<DdpgAgent> load(std::istream& is, std::uint64_t seed);

  // One optimization pass on an explicit batch: critic step, actor step,
  // then soft target updates.
  DdpgLosses update(const std::vector<Transition>& batch);
  // Samples a batch from the replay buffer and calls update().
  DdpgLosses update_from_buffer();

  // Unclipped actor output.
  Eigen::VectorXd policy_raw(const Eigen::VectorXd& state) const;

  const DdpgConfig& config() const { return cfg_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& actor_target() const { return actor_target_; }
  const DdpgCritic& critic() const { return critic_; }
  const DdpgCritic& critic_target() const { return critic_target_; }
  Mlp& mutable_actor() { return actor_; }
  DdpgCritic& mutable_critic() { return critic_; }
  void sync_targets();
  const ReplayBuffer& buffer() const { return buffer_; }
  ReplayBuffer& mutable_buffer() { return buffer_; }
  const NoiseProcess& noise() const { return noise_; }
  const Optimizer& actor_optimizer() const { return actor_opt_; }
  const Optimizer& critic_action_optimizer() const { return critic_action_opt_; }
  std::int64_t update_count() const { return updates_; }

 private:
  DdpgConfig cfg_;
  int state_dim_;
  int action_dim_;
  bool extended_ = false;
  Mlp actor_;
  Mlp actor_target_;
  DdpgCritic critic_;
  DdpgCritic critic_target_;
  Optimizer actor_opt_;
  Optimizer critic_state_opt_;
  Optimizer critic_action_opt_;
  Optimizer critic_head_opt_;
  ReplayBuffer buffer_;
  NoiseProcess noise_;
  std::int64_t updates_ = 0;
};

}  // namespace pead
