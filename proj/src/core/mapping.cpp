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

#include "mapping.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "error.hpp"

namespace pead {
namespace {

std::string shape_str(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// Solves a * x = rhs by Gauss-Jordan elimination with partial pivoting.
// `a` is small (l <= 6). Dividing each pivot row by its pivot keeps results
// exact for diagonal systems.
Eigen::MatrixXd gauss_jordan_solve(Eigen::MatrixXd a, Eigen::MatrixXd rhs) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    }
    if (a(pivot, col) == 0.0) {
      fail(ErrorCode::kNumerical, "pseudoinverse: singular Gram matrix");
    }
    if (pivot != col) {
      a.row(pivot).swap(a.row(col));
      rhs.row(pivot).swap(rhs.row(col));
    }
    const double p = a(col, col);
    a.row(col) /= p;
    rhs.row(col) /= p;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = a(r, col);
      if (factor == 0.0) continue;
      a.row(r) -= factor * a.row(col);
      rhs.row(r) -= factor * rhs.row(col);
    }
  }
  return rhs;
}

}  // namespace

Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& m) {
  require(m.rows() >= m.cols() && m.cols() >= 1, ErrorCode::kShapeMismatch,
          "pseudoinverse: expected a tall matrix, got " + shape_str(m));
  require(m.allFinite(), ErrorCode::kNumerical,
          "pseudoinverse: non-finite input");
  const Eigen::MatrixXd gram = m.transpose() * m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram,
                                                     Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxGramCondition) {
    fail(ErrorCode::kNumerical,
         "pseudoinverse: rank-deficient or ill-conditioned input (cond(M^T M) = " +
             (lo > 0.0 ? std::to_string(hi / lo) : std::string("inf")) + ")");
  }
  return gauss_jordan_solve(gram, m.transpose());
}

MappingMatrix::MappingMatrix(Eigen::MatrixXd f) : f_(std::move(f)) {
  require(f_.cols() >= 1 && f_.rows() > f_.cols(), ErrorCode::kShapeMismatch,
          "mapping matrix must be m x l with m > l >= 1, got " + shape_str(f_));
  f_pinv_ = pseudoinverse(f_);
}

MappingMatrix canonical_mapping() {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(6, 3);
  f(0, 0) = 0.5;
  f(1, 0) = 0.5;
  f(2, 1) = 1.0;
  f(3, 2) = 1.0 / 3.0;
  f(4, 2) = 1.0 / 3.0;
  f(5, 2) = 1.0 / 3.0;
  return MappingMatrix(std::move(f));
}

MappingMatrix compose(const MappingMatrix& outer, const MappingMatrix& inner) {
  require(outer.low_dim() == inner.high_dim(), ErrorCode::kShapeMismatch,
          "compose: outer maps to " + std::to_string(outer.low_dim()) +
              " dims but inner expects " + std::to_string(inner.high_dim()));
  return MappingMatrix(outer.f() * inner.f());
}

ActionVec project(const ActionVec& a, const MappingMatrix& map) {
  require(a.size() == map.high_dim(), ErrorCode::kShapeMismatch,
          "project: action has " + std::to_string(a.size()) + " components, expected " +
              std::to_string(map.high_dim()));
  return map.f().transpose() * a;
}

ActionVec lift(const ActionVec& a_rd, const MappingMatrix& map) {
  require(a_rd.size() == map.low_dim(), ErrorCode::kShapeMismatch,
          "lift: action has " + std::to_string(a_rd.size()) + " components, expected " +
              std::to_string(map.low_dim()));
  return map.f_pinv().transpose() * a_rd;
}

ActionVec remap_action_record(const ActionVec& a_rd, const MappingMatrix& map) {
  return lift(a_rd, map);
}

LayerParams extend_actor_output_layer(const Eigen::MatrixXd& w,
                                      const Eigen::VectorXd& b,
                                      const MappingMatrix& map) {
  require(w.cols() == map.low_dim() && b.size() == map.low_dim(),
          ErrorCode::kShapeMismatch,
          "extend_actor_output_layer: layer is " + shape_str(w) + " with bias " +
              std::to_string(b.size()) + ", mapping reduces to " +
              std::to_string(map.low_dim()));
  return {w * map.f_pinv(), map.f_pinv().transpose() * b};
}

Eigen::MatrixXd extend_critic_action_input_layer(const Eigen::MatrixXd& w,
                                                 const MappingMatrix& map) {
  require(w.rows() == map.low_dim(), ErrorCode::kShapeMismatch,
          "extend_critic_action_input_layer: layer is " + shape_str(w) +
              ", mapping reduces to " + std::to_string(map.low_dim()));
  return map.f() * w;
}

}  // namespace pead
