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

#include "assembly_env.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <utility>

#include "error.hpp"

namespace pead {
namespace {

constexpr double kDepthTolerance = 1e-9;

Eigen::Matrix3d rotation(const Pose& p) {
  return (Eigen::AngleAxisd(p.gamma, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(p.beta, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(p.alpha, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

double clamp_abs(double v, double limit) { return std::clamp(v, -limit, limit); }

}  // namespace

double Wrench::force_norm() const { return std::sqrt(fx * fx + fy * fy + fz * fz); }
double Wrench::moment_norm() const { return std::sqrt(mx * mx + my * my + mz * mz); }

std::vector<std::array<double, 2>> Geometry::peg_centers() const {
  const double hx = 0.5 * spacing_x;
  const double hy = 0.5 * spacing_y;
  return {{hx, 0.0}, {-hx, hy}, {-hx, -hy}};
}

void Geometry::validate() const {
  require(hole_side > peg_side && peg_side > 0.0, ErrorCode::kConfig,
          "geometry: need hole_side > peg_side > 0");
  require(peg_length > 0.0 && hole_depth > 0.0, ErrorCode::kConfig,
          "geometry: lengths must be positive");
  require(spacing_x > hole_side && spacing_y > hole_side, ErrorCode::kConfig,
          "geometry: holes overlap");
  require(peg_count == 3, ErrorCode::kConfig, "geometry: only the three-peg pattern is modeled");
  require(contact_stiffness > 0.0 && tip_stiffness >= 0.0, ErrorCode::kConfig,
          "geometry: stiffness must be positive");
  require(points_per_edge >= 8, ErrorCode::kConfig,
          "geometry: need at least 8 sample points per edge");
}

void RewardConfig::validate() const {
  require(h_z >= 0.0 && h_f >= 0.0 && h_m >= 0.0 && success_bonus >= 0.0,
          ErrorCode::kConfig, "reward: coefficients must be nonnegative");
  require(force_norm > 0.0 && moment_norm > 0.0, ErrorCode::kConfig,
          "reward: normalizers must be positive");
}

void ControlConfig::validate() const {
  require(initial_depth >= 0.0 && target_depth > initial_depth, ErrorCode::kConfig,
          "control: need target_depth > initial_depth >= 0");
  require(target_steps > 0 && max_steps >= 1, ErrorCode::kConfig,
          "control: step counts must be positive");
  require(max_translation_step > 0.0 && max_rotation_step > 0.0, ErrorCode::kConfig,
          "control: per-step clamps must be positive");
  require(gain_clamp > 0.0 && gain_clamp < 1.0, ErrorCode::kConfig,
          "control: gain_clamp must lie in (0, 1)");
  require(jam_force > 0.0 && jam_moment > 0.0 && detect_force >= 0.0, ErrorCode::kConfig,
          "control: thresholds must be positive");
  require(reset_attempts >= 1, ErrorCode::kConfig, "control: reset_attempts must be >= 1");
  require(obs_force_scale > 0.0 && obs_moment_scale > 0.0, ErrorCode::kConfig,
          "control: observation scales must be positive");
}

void EnvConfig::validate() const {
  geometry.validate();
  control.validate();
  reward.validate();
  for (double k : baseline.k) {
    require(k > 0.0, ErrorCode::kConfig, "baseline compliance gains must be positive");
  }
  for (double r : error_range.to_array()) {
    require(r >= 0.0, ErrorCode::kConfig, "error range half-widths must be nonnegative");
  }
  require(geometry.hole_depth >= control.target_depth, ErrorCode::kConfig,
          "target depth exceeds hole depth");
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::kRunning:
      return "running";
    case Outcome::kSuccess:
      return "success";
    case Outcome::kJammed:
      return "jammed";
    case Outcome::kTimeout:
      return "timeout";
  }
  return "?";
}

ComplianceGains modulate_gains(const ActionVec& a, const ActionVec& a_n,
                               const ComplianceGains& baseline, double gain_clamp) {
  require(a.size() == 6 && a_n.size() == 6, ErrorCode::kShapeMismatch,
          "modulate_gains: expected 6-component action and noise");
  ComplianceGains out;
  for (int i = 0; i < 6; ++i) {
    const double m = std::clamp(a(i) + a_n(i), -gain_clamp, gain_clamp);
    out.k[i] = baseline.k[i] * (1.0 + m);
  }
  return out;
}

PoseCorrection compliance_step(const ComplianceGains& gains, const Wrench& wrench,
                               const Wrench& f_ref, const ControlConfig& control) {
  const auto w = wrench.to_array();
  const auto r = f_ref.to_array();
  std::array<double, 6> c{};
  for (int i = 0; i < 6; ++i) {
    const double limit = i < 3 ? control.max_translation_step : control.max_rotation_step;
    c[i] = clamp_abs(gains.k[i] * control.selection[i] * (w[i] - r[i]), limit);
  }
  return PoseCorrection::from_array(c);
}

Wrench contact_wrench(const Pose& pose, const Geometry& geom) {
  const Eigen::Matrix3d rot = rotation(pose);
  // Sensor origin in the hole frame: peg tips hang peg_length below it.
  const Eigen::Vector3d origin(pose.x, pose.y, pose.z + geom.peg_length);
  const double half_peg = 0.5 * geom.peg_side;
  const double half_hole = 0.5 * geom.hole_side;
  const int n = geom.points_per_edge;

  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  Eigen::Vector3d moment = Eigen::Vector3d::Zero();

  auto add = [&](const Eigen::Vector3d& arm, const Eigen::Vector3d& f) {
    force += f;
    moment += arm.cross(f);
  };

  for (const auto& c : geom.peg_centers()) {
    for (int sx = -1; sx <= 1; sx += 2) {
      for (int sy = -1; sy <= 1; sy += 2) {
        // Corner edge in the sensor frame: (ex, ey, -h), h in [0, peg_length].
        const Eigen::Vector3d top(c[0] + sx * half_peg, c[1] + sy * half_peg, 0.0);
        const Eigen::Vector3d top_w = rot * top;
        const Eigen::Vector3d down_w = rot * Eigen::Vector3d(0.0, 0.0, -1.0);
        // Height above the hole top at parameter h: origin.z + top_w.z + h * down_w.z.
        require(down_w.z() < 0.0, ErrorCode::kState, "contact_wrench: peg axis not pointing down");
        const double h_surface = -(origin.z() + top_w.z()) / down_w.z();
        const double h_tip = geom.peg_length;
        const double engaged = std::clamp(h_tip - h_surface, 0.0, geom.hole_depth);
        if (engaged <= 0.0) continue;

        const double weight =
            geom.contact_stiffness * engaged / (static_cast<double>(n) * geom.hole_depth);
        for (int j = 0; j < n; ++j) {
          const double h = h_tip - (j + 0.5) / n * engaged;
          const Eigen::Vector3d arm = top_w + h * down_w;
          const Eigen::Vector3d p = origin + arm;
          const double u = p.x() - c[0];
          const double v = p.y() - c[1];
          const double ex = std::abs(u) - half_hole;
          const double ey = std::abs(v) - half_hole;
          Eigen::Vector3d f = Eigen::Vector3d::Zero();
          if (ex > 0.0) f.x() = -std::copysign(weight * ex, u);
          if (ey > 0.0) f.y() = -std::copysign(weight * ey, v);
          if (ex > 0.0 || ey > 0.0) add(arm, f);
        }

        // Tip corner pressing on the top face when it sits outside the hole.
        const Eigen::Vector3d tip_arm = top_w + h_tip * down_w;
        const Eigen::Vector3d tip = origin + tip_arm;
        const double tip_depth = -tip.z();
        const double tip_excess = std::max(std::abs(tip.x() - c[0]) - half_hole,
                                           std::abs(tip.y() - c[1]) - half_hole);
        if (tip_depth > 0.0 && tip_excess > 0.0) {
          add(tip_arm,
              Eigen::Vector3d(0.0, 0.0, geom.tip_stiffness * std::min(tip_depth, tip_excess)));
        }
      }
    }
  }

  const Eigen::Vector3d fs = rot.transpose() * force;
  const Eigen::Vector3d ms = rot.transpose() * moment;
  return {fs.x(), fs.y(), fs.z(), ms.x(), ms.y(), ms.z()};
}

double compute_reward(double depth_increment, double nominal_step, const Wrench& wrench,
                      bool success, const RewardConfig& cfg) {
  return cfg.h_z * (depth_increment / nominal_step) -
         cfg.h_f * (wrench.force_norm() / cfg.force_norm) -
         cfg.h_m * (wrench.moment_norm() / cfg.moment_norm) +
         (success ? cfg.success_bonus : 0.0);
}

Eigen::VectorXd make_observation(const Wrench& w, double depth, const ControlConfig& control) {
  Eigen::VectorXd obs(kObservationDim);
  const auto a = w.to_array();
  for (int i = 0; i < 6; ++i) {
    obs(i) = a[i] / (i < 3 ? control.obs_force_scale : control.obs_moment_scale);
  }
  obs(6) = depth / control.target_depth;
  return obs.cwiseMax(-1.0).cwiseMin(1.0);
}

AssemblyEnv::AssemblyEnv(EnvConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

const EnvState& AssemblyEnv::reset(std::uint64_t seed) { return reset(seed, cfg_.error_range); }

const EnvState& AssemblyEnv::reset(std::uint64_t seed, const Pose& error_range) {
  std::mt19937_64 rng(seed);
  const auto range = error_range.to_array();
  for (int attempt = 0; attempt < cfg_.control.reset_attempts; ++attempt) {
    std::array<double, 6> e{};
    for (int i = 0; i < 6; ++i) {
      std::uniform_real_distribution<double> u(-range[i], range[i]);
      e[i] = range[i] > 0.0 ? u(rng) : 0.0;
    }
    start_from(Pose::from_array(e));
    if (state_.wrench.force_norm() > cfg_.control.detect_force) return state_;
  }
  started_ = false;
  fail(ErrorCode::kState, "reset: no pose with detectable contact force in " +
                              std::to_string(cfg_.control.reset_attempts) + " draws");
}

const EnvState& AssemblyEnv::reset_to(const Pose& error) {
  start_from(error);
  return state_;
}

void AssemblyEnv::start_from(const Pose& error) {
  state_ = EnvState{};
  state_.pose = error;
  state_.pose.z = error.z - cfg_.control.initial_depth;
  state_.wrench = contact_wrench(state_.pose, cfg_.geometry);
  state_.observation = make_observation(state_.wrench, state_.depth(), cfg_.control);
  started_ = true;
  trajectory_.clear();
  if (recording_) trajectory_.push_back({0, state_.pose, state_.wrench, 0.0});
}

StepResult AssemblyEnv::step(const ComplianceGains& gains) {
  require(started_, ErrorCode::kState, "step: environment not reset");
  require(state_.done == Outcome::kRunning, ErrorCode::kState,
          std::string("step: episode already finished (") + to_string(state_.done) + ")");
  const auto& ctl = cfg_.control;

  const PoseCorrection corr = compliance_step(gains, state_.wrench, ctl.f_ref, ctl);
  const double depth_before = state_.depth();
  Pose next = state_.pose;
  next.x += corr.x;
  next.y += corr.y;
  next.z += corr.z - ctl.nominal_feed();
  next.alpha += corr.alpha;
  next.beta += corr.beta;
  next.gamma += corr.gamma;

  state_.pose = next;
  state_.step_index += 1;

  const double half_pi = 0.5 * kPi;
  const bool angles_ok = std::abs(next.alpha) < half_pi && std::abs(next.beta) < half_pi &&
                         std::abs(next.gamma) < half_pi;
  state_.wrench = angles_ok ? contact_wrench(next, cfg_.geometry) : Wrench{};
  state_.observation = make_observation(state_.wrench, state_.depth(), ctl);

  // Reaching the target depth seats the pegs, whatever the wrench on the way.
  const bool success = angles_ok && state_.depth() >= ctl.target_depth - kDepthTolerance;
  const bool jammed = !success && (!angles_ok || state_.wrench.force_norm() > ctl.jam_force ||
                                   state_.wrench.moment_norm() > ctl.jam_moment);
  if (success) {
    // Seat the pegs so that accumulated feed round-off cannot leave the
    // reported depth a hair short of the target.
    state_.pose.z = -ctl.target_depth;
    state_.wrench = contact_wrench(state_.pose, cfg_.geometry);
    state_.observation = make_observation(state_.wrench, state_.depth(), ctl);
  }
  if (jammed) {
    state_.done = Outcome::kJammed;
  } else if (success) {
    state_.done = Outcome::kSuccess;
  } else if (state_.step_index >= ctl.max_steps) {
    state_.done = Outcome::kTimeout;
  }

  const double reward = compute_reward(state_.depth() - depth_before, ctl.nominal_feed(),
                                       state_.wrench, success, cfg_.reward);
  if (recording_) trajectory_.push_back({state_.step_index, state_.pose, state_.wrench, reward});
  return {state_, reward};
}

void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows) {
  const auto old_precision = os.precision(10);
  os << "step,x,y,z,alpha,beta,gamma,fx,fy,fz,mx,my,mz,reward\n";
  for (const auto& r : rows) {
    os << r.step;
    for (double v : r.pose.to_array()) os << ',' << v;
    for (double v : r.wrench.to_array()) os << ',' << v;
    os << ',' << r.reward << '\n';
  }
  os.precision(old_precision);
}

}  // namespace pead
