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

// Common surface of the DDPG and PPO agents, as seen by the episode loop.

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "assembly_env.hpp"
#include "mapping.hpp"
#include "replay.hpp"

namespace pead {

enum class Algorithm { kDdpg, kPpo };
const char* to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct ActionSample {
  ActionVec action;      // clipped to the action bound; fed to the gain law
  ActionVec noise;       // exploration noise a_n (zeros when not exploring / PPO)
  ActionVec raw;         // PPO: pre-clip Gaussian sample
  double log_prob = 0.0;  // PPO: log density of `raw` under the sampling policy
};

class Agent {
 public:
  virtual ~Agent() = default;

  virtual Algorithm algorithm() const = 0;
  virtual int action_dim() const = 0;
  virtual int state_dim() const = 0;

  virtual ActionSample act(const Eigen::VectorXd& state, bool explore) = 0;

  // Stores one environment step. `executed` is the multiplier actually applied
  // to the gains (a + a_n after the gain clamp), in the agent's own dimension.
  virtual void record(const Eigen::VectorXd& state, const ActionSample& sample,
                      const ActionVec& executed, double reward,
                      const Eigen::VectorXd& next_state, bool done) = 0;

  // Called after every training step and at every episode end.
  virtual void after_step(int episode) = 0;
  virtual void end_episode(int episode) = 0;

  virtual bool ready_for_extension() const = 0;
  virtual void extend(const MappingMatrix& map) = 0;
  virtual bool extended() const = 0;

  virtual void save(std::ostream& os) const = 0;

  // Wall time spent inside optimizer updates and extensions.
  double optimizer_ms() const { return optimizer_ms_; }
  void reset_optimizer_timer() { optimizer_ms_ = 0.0; }

  std::mt19937_64& rng() { return rng_; }

 protected:
  explicit Agent(std::uint64_t seed) : rng_(seed) {}

  class ScopedTimer {
   public:
    explicit ScopedTimer(double& sink)
        : sink_(sink), start_(std::chrono::steady_clock::now()) {}
    ~ScopedTimer() {
      sink_ += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start_)
                   .count();
    }
    ScopedTimer(const ScopedTimer&) = delete;
    ScopedTimer& operator=(const ScopedTimer&) = delete;

   private:
    double& sink_;
    std::chrono::steady_clock::time_point start_;
  };

  double optimizer_ms_ = 0.0;
  std::mt19937_64 rng_;
};

// Restores a DDPG or PPO agent from a checkpoint written by Agent::save().
std::unique_ptr<Agent> load_agent(std::istream& is, std::uint64_t seed);

struct EpisodeOptions {
  std::uint64_t env_seed = 0;
  std::optional<Pose> fixed_error;  // reset_to() instead of a random reset
  int episode = 0;
  bool train = true;
  bool explore = true;
  // Used to lift reduced actions to the six gain channels.
  const MappingMatrix* map = nullptr;
  // Replaces the agent's action with zeros (fixed-compliance baseline).
  bool baseline = false;
};

struct EpisodeResult {
  double total_reward = 0.0;
  int steps = 0;
  Outcome outcome = Outcome::kRunning;
  double optimizer_ms = 0.0;
  double cumulative_force = 0.0;   // sum over steps of |force|
  double cumulative_moment = 0.0;  // sum over steps of |moment|
};

EpisodeResult run_episode(Agent& agent, AssemblyEnv& env, const EpisodeOptions& opt);

}  // namespace pead
