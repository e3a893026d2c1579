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

#include "replay.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_set>

#include "error.hpp"

namespace pead {
namespace {

void write_vec(std::ostream& os, const Eigen::VectorXd& v) {
  os << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << v(i);
}

Eigen::VectorXd read_vec(std::istream& is) {
  Eigen::Index n = 0;
  is >> n;
  require(static_cast<bool>(is) && n >= 0, ErrorCode::kIo, "replay: bad vector length");
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) is >> v(i);
  require(static_cast<bool>(is), ErrorCode::kIo, "replay: truncated vector");
  return v;
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  require(capacity > 0, ErrorCode::kInvalidArgument, "replay buffer capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::add(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch,
                                                      std::mt19937_64& rng) const {
  require(!items_.empty(), ErrorCode::kState, "replay buffer is empty");
  require(batch <= items_.size(), ErrorCode::kState,
          "replay buffer holds " + std::to_string(items_.size()) + " transitions, batch needs " +
              std::to_string(batch));
  const std::size_t n = items_.size();
  std::vector<std::size_t> out;
  out.reserve(batch);
  std::unordered_set<std::size_t> taken;
  for (std::size_t j = n - batch; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t t = pick(rng);
    if (taken.insert(t).second) {
      out.push_back(t);
    } else {
      taken.insert(j);
      out.push_back(j);
    }
  }
  return out;
}

void ReplayBuffer::remap_actions(const MappingMatrix& map) {
  for (auto& t : items_) t.action = remap_action_record(t.action, map);
}

void ReplayBuffer::write(std::ostream& os) const {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "replay " << capacity_ << ' ' << cursor_ << ' ' << items_.size() << '\n';
  for (const auto& t : items_) {
    write_vec(os, t.state);
    os << ' ';
    write_vec(os, t.action);
    os << ' ' << t.reward << ' ';
    write_vec(os, t.next_state);
    os << ' ' << (t.done ? 1 : 0) << '\n';
  }
  os.precision(old_precision);
}

ReplayBuffer ReplayBuffer::read(std::istream& is) {
  std::string tag;
  std::size_t capacity = 0, cursor = 0, n = 0;
  is >> tag >> capacity >> cursor >> n;
  require(static_cast<bool>(is) && tag == "replay" && n <= capacity, ErrorCode::kIo,
          "replay: bad header");
  ReplayBuffer buf(capacity);
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    t.state = read_vec(is);
    t.action = read_vec(is);
    is >> t.reward;
    t.next_state = read_vec(is);
    int done = 0;
    is >> done;
    require(static_cast<bool>(is), ErrorCode::kIo, "replay: truncated transition");
    t.done = done != 0;
    buf.items_.push_back(std::move(t));
  }
  buf.cursor_ = cursor;
  return buf;
}

NoiseProcess::NoiseProcess(int dim, double sigma0, double decay, double sigma_min)
    : sigma_(Eigen::VectorXd::Constant(dim, std::max(sigma0, sigma_min))),
      decay_(decay),
      sigma_min_(sigma_min) {
  require(dim > 0, ErrorCode::kInvalidArgument, "noise dimension must be positive");
  require(sigma_min > 0.0 && decay > 0.0 && decay <= 1.0, ErrorCode::kInvalidArgument,
          "noise: need sigma_min > 0 and decay in (0, 1]");
}

ActionVec NoiseProcess::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> n(0.0, 1.0);
  ActionVec out(sigma_.size());
  for (Eigen::Index i = 0; i < sigma_.size(); ++i) out(i) = sigma_(i) * n(rng);
  return out;
}

void NoiseProcess::decay() {
  sigma_ = (sigma_ * decay_).cwiseMax(sigma_min_);
}

void NoiseProcess::lift(const MappingMatrix& map) {
  sigma_ = remap_action_record(sigma_, map).cwiseAbs().cwiseMax(sigma_min_);
}

}  // namespace pead
