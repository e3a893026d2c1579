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

struct PpoConfig {
  int hidden = 64;
  double lr_actor = 1e-4;
  double lr_critic = 1e-3;
  double gamma = 0.99;
  double clip_ratio = 0.2;
  int rollout_steps = 512;
  int epochs = 10;
  int minibatch = 16;
  double log_std_min = -5.0;
  double log_std_max = 1.0;
  double initial_log_std = -0.7;  // bias of the log-std head at init
  // The value network regresses value_scale * return, keeping its targets
  // near unit size so it can catch up within a few hundred updates.
  double value_scale = 0.1;
  double action_bound = 0.8;
  void validate() const;
};

// Gaussian policy: trunk -> {mean head, log-std head}, both linear.
struct PpoActor {
  Mlp trunk;
  Mlp mean;
  Mlp log_std;

  struct Cache {
    ForwardCache trunk;
    ForwardCache mean;
    ForwardCache log_std;
  };
  struct Output {
    Eigen::MatrixXd mean;
    Eigen::MatrixXd log_std_raw;  // before clamping
  };
  struct Grads {
    GradientSet trunk;
    GradientSet mean;
    GradientSet log_std;
  };

  static PpoActor random(int state_dim, int action_dim, int hidden, double initial_log_std,
                         std::mt19937_64& rng);
  Output forward(const Eigen::MatrixXd& states, Cache* cache = nullptr) const;
  Grads backward(const Cache& cache, const Eigen::MatrixXd& d_mean,
                 const Eigen::MatrixXd& d_log_std) const;
  int action_dim() const { return static_cast<int>(mean.out_dim()); }
  friend bool operator==(const PpoActor&, const PpoActor&) = default;
};

// Diagonal Gaussian log density of u.
double gaussian_log_prob(const Eigen::VectorXd& u, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std);

// min(r A, clip(r, 1 - eps, 1 + eps) A) and its derivative with respect to r.
struct SurrogateTerm {
  double value = 0.0;
  double d_ratio = 0.0;
};
SurrogateTerm clipped_surrogate(double ratio, double advantage, double eps);

struct PpoLosses {
  double actor_loss = 0.0;   // -surrogate, mean over the last epoch
  double critic_loss = 0.0;  // mean squared return error, last epoch
  int minibatch_updates = 0;
};

class PpoAgent final : public Agent {
 public:
  PpoAgent(int state_dim, int action_dim, PpoConfig cfg, std::uint64_t seed);

  Algorithm algorithm() const override { return Algorithm::kPpo; }
  int action_dim() const override { return actor_.action_dim(); }
  int state_dim() const override { return state_dim_; }

  // Samples from the old actor; explore = false returns the clipped mean.
  ActionSample act(const Eigen::VectorXd& state, bool explore) override;
  void record(const Eigen::VectorXd& state, const ActionSample& sample,
              const ActionVec& executed, double reward, const Eigen::VectorXd& next_state,
              bool done) override;
  void after_step(int) override {}
  // Runs ppo_update once the rollout store is full.
  void end_episode(int episode) override;

  bool ready_for_extension() const override { return store_.empty(); }
  void extend(const MappingMatrix& map) override;
  bool extended() const override { return extended_; }

  void save(std::ostream& os) const override;
  static std::unique_ptr<PpoAgent> load(std::istream& is, std::uint64_t seed);

  // Clipped-surrogate epochs over the stored rollout, then sync_old_actor().
  PpoLosses update();
  void sync_old_actor();

  Eigen::MatrixXd log_std(const Eigen::MatrixXd& raw) const;

  const PpoConfig& config() const { return cfg_; }
  const PpoActor& actor() const { return actor_; }
  const PpoActor& old_actor() const { return old_actor_; }
  const Mlp& critic() const { return critic_; }
  PpoActor& mutable_actor() { return actor_; }
  const RolloutStore& store() const { return store_; }
  RolloutStore& mutable_store() { return store_; }
  std::int64_t update_count() const { return updates_; }

 private:
  PpoConfig cfg_;
  int state_dim_;
  bool extended_ = false;
  PpoActor actor_;
  PpoActor old_actor_;
  Mlp critic_;
  Optimizer trunk_opt_;
  Optimizer mean_opt_;
  Optimizer log_std_opt_;
  Optimizer critic_opt_;
  RolloutStore store_;
  std::int64_t updates_ = 0;
};

}  // namespace pead
