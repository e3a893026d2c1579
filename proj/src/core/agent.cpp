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

#include "agent.hpp"

#include <istream>

#include "ddpg.hpp"
#include "error.hpp"
#include "ppo.hpp"

namespace pead {

const char* to_string(Algorithm a) {
  return a == Algorithm::kDdpg ? "ddpg" : "ppo";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "ddpg") return Algorithm::kDdpg;
  if (s == "ppo") return Algorithm::kPpo;
  fail(ErrorCode::kInvalidArgument, "unknown algorithm '" + s + "' (expected ddpg or ppo)");
}

std::unique_ptr<Agent> load_agent(std::istream& is, std::uint64_t seed) {
  std::string magic;
  int version = 0;
  is >> magic >> version;
  require(static_cast<bool>(is) && magic == "pead-agent" && version == 1, ErrorCode::kIo,
          "checkpoint: not a pead-agent version 1 file");
  std::string key, algo;
  is >> key >> algo;
  require(static_cast<bool>(is) && key == "algo", ErrorCode::kIo,
          "checkpoint: missing algo line");
  switch (algorithm_from_string(algo)) {
    case Algorithm::kDdpg:
      return DdpgAgent::load(is, seed);
    case Algorithm::kPpo:
      return PpoAgent::load(is, seed);
  }
  fail(ErrorCode::kIo, "checkpoint: unreachable algorithm");
}

EpisodeResult run_episode(Agent& agent, AssemblyEnv& env, const EpisodeOptions& opt) {
  const int dim = agent.action_dim();
  if (dim != 6) {
    require(opt.map != nullptr && opt.map->low_dim() == dim && opt.map->high_dim() == 6,
            ErrorCode::kShapeMismatch,
            "run_episode: a " + std::to_string(dim) + "-dim agent needs a matching mapping");
  }
  const EnvConfig& cfg = env.config();
  const double gain_clamp = cfg.control.gain_clamp;
  const double opt_before = agent.optimizer_ms();

  const EnvState* st = opt.fixed_error ? &env.reset_to(*opt.fixed_error) : &env.reset(opt.env_seed);
  EpisodeResult res;
  while (st->done == Outcome::kRunning) {
    const Eigen::VectorXd s = st->observation;
    ActionSample sample = agent.act(s, opt.explore && !opt.baseline);
    if (opt.baseline) {
      sample.action.setZero();
      sample.noise.setZero();
    }
    const ActionVec a6 = dim == 6 ? sample.action : lift(sample.action, *opt.map);
    const ActionVec n6 = dim == 6 ? sample.noise : lift(sample.noise, *opt.map);
    const ComplianceGains gains = modulate_gains(a6, n6, cfg.baseline, gain_clamp);
    const StepResult r = env.step(gains);
    st = &r.state;
    const bool done = st->done != Outcome::kRunning;

    res.total_reward += r.reward;
    res.cumulative_force += st->wrench.force_norm();
    res.cumulative_moment += st->wrench.moment_norm();
    ++res.steps;
    if (opt.train && !opt.baseline) {
      const ActionVec executed =
          (sample.action + sample.noise).cwiseMax(-gain_clamp).cwiseMin(gain_clamp);
      agent.record(s, sample, executed, r.reward, st->observation, done);
      agent.after_step(opt.episode);
    }
  }
  if (opt.train && !opt.baseline) agent.end_episode(opt.episode);
  res.outcome = st->done;
  res.optimizer_ms = agent.optimizer_ms() - opt_before;
  return res;
}

}  // namespace pead
