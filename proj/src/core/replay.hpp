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

#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mapping.hpp"

namespace pead {

struct Transition {
  Eigen::VectorXd state;
  ActionVec action;
  double reward = 0.0;
  Eigen::VectorXd next_state;
  bool done = false;
};

// Fixed-capacity ring buffer for off-policy learning.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const Transition& at(std::size_t i) const { return items_.at(i); }

  // Distinct indices, uniformly chosen (Floyd's algorithm, O(batch)).
  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const;

  // Rewrites every stored action through lift(). Other fields are untouched.
  void remap_actions(const MappingMatrix& map);

  void write(std::ostream& os) const;
  static ReplayBuffer read(std::istream& is);

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> items_;
};

// On-policy storage: cleared whenever the old policy is refreshed.
struct RolloutStep {
  Eigen::VectorXd state;
  ActionVec raw_action;  // pre-clip Gaussian sample
  double log_prob = 0.0;
  double reward = 0.0;
  bool done = false;
};

class RolloutStore {
 public:
  explicit RolloutStore(std::size_t capacity) : capacity_(capacity) {}

  void add(RolloutStep s) { steps_.push_back(std::move(s)); }
  void clear() { steps_.clear(); }
  std::size_t size() const { return steps_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return steps_.size() >= capacity_; }
  bool empty() const { return steps_.empty(); }
  const std::vector<RolloutStep>& steps() const { return steps_; }

 private:
  std::size_t capacity_;
  std::vector<RolloutStep> steps_;
};

// Independent Gaussian action noise per dimension with per-episode decay.
class NoiseProcess {
 public:
  NoiseProcess(int dim, double sigma0, double decay, double sigma_min);

  ActionVec sample(std::mt19937_64& rng) const;
  void decay();
  void lift(const MappingMatrix& map);

  int dim() const { return static_cast<int>(sigma_.size()); }
  const Eigen::VectorXd& sigma() const { return sigma_; }
  double sigma_min() const { return sigma_min_; }
  double decay_rate() const { return decay_; }
  void set_sigma(Eigen::VectorXd s) { sigma_ = std::move(s); }

 private:
  Eigen::VectorXd sigma_;
  double decay_;
  double sigma_min_;
};

}  // namespace pead
