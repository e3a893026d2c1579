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

// Linear action-space mapping between a reduced action space (dimension l)
// and a full action space (dimension m > l), plus the layer surgery that
// widens actor outputs and critic action inputs without changing what the
// networks compute.
//
// Row-vector convention throughout: a reduced action is a_rd = a * F and a
// full action is recovered as a = a_rd * pinv(F), where F is m x l.

#include <Eigen/Dense>

namespace pead {

using ActionVec = Eigen::VectorXd;

// Moore-Penrose pseudoinverse of a full-column-rank matrix through the normal
// equations (M^T M)^-1 M^T. Throws Error(kNumerical) when M^T M is singular
// or its condition number exceeds kMaxGramCondition.
Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& m);

inline constexpr double kMaxGramCondition = 1e12;

class MappingMatrix {
 public:
  // f is m x l with m > l >= 1 and full column rank.
  explicit MappingMatrix(Eigen::MatrixXd f);

  const Eigen::MatrixXd& f() const { return f_; }
  const Eigen::MatrixXd& f_pinv() const { return f_pinv_; }

  Eigen::Index high_dim() const { return f_.rows(); }
  Eigen::Index low_dim() const { return f_.cols(); }

 private:
  Eigen::MatrixXd f_;
  Eigen::MatrixXd f_pinv_;
};

// The 6 x 3 mapping that ties (dx, dy) into one planar multiplier, keeps dz,
// and ties (dalpha, dbeta, dgamma) into one rotational multiplier.
MappingMatrix canonical_mapping();

// Chains two extensions l -> m -> n. `inner` maps m -> l, `outer` maps n -> m;
// the result maps n -> l directly.
MappingMatrix compose(const MappingMatrix& outer, const MappingMatrix& inner);

// a (length m) -> a * F (length l).
ActionVec project(const ActionVec& a, const MappingMatrix& map);

// a_rd (length l) -> a_rd * pinv(F) (length m).
ActionVec lift(const ActionVec& a_rd, const MappingMatrix& map);

// Same as lift. Kept as its own entry point for replay-buffer and noise-state
// rewrites during an extension.
ActionVec remap_action_record(const ActionVec& a_rd, const MappingMatrix& map);

struct LayerParams {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

// Widens an actor output layer (w: h x l, b: l) to (w * pinv(F), b * pinv(F)).
// For any hidden vector h: project(h w' + b') == h w + b.
LayerParams extend_actor_output_layer(const Eigen::MatrixXd& w,
                                      const Eigen::VectorXd& b,
                                      const MappingMatrix& map);

// Widens a critic's action-input layer (w: l x h) to F * w. The layer bias is
// not touched. For any full action a: a (F w) == project(a) w.
Eigen::MatrixXd extend_critic_action_input_layer(const Eigen::MatrixXd& w,
                                                 const MappingMatrix& map);

}  // namespace pead
