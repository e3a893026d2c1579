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

// Quasi-static three-peg / three-hole insertion with a variable admittance
// controller in the loop.
//
// Frames: the hole group is fixed with its top surface at z = 0 and the hole
// axes pointing down (-z). The peg group is rigid; its sensor frame sits at
// the top center of the pegs. Pose (x, y, z) is the offset of the peg tips
// from the hole tops, so z = -depth for an aligned insertion. Rotations are
// applied about the sensor origin as Rz(gamma) * Ry(beta) * Rx(alpha).
// Wrenches are the contact forces the holes exert on the pegs, expressed in
// the sensor frame.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mapping.hpp"

namespace pead {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegree = kPi / 180.0;

struct Pose {
  double x = 0.0;  // mm
  double y = 0.0;
  double z = 0.0;
  double alpha = 0.0;  // rad
  double beta = 0.0;
  double gamma = 0.0;

  std::array<double, 6> to_array() const { return {x, y, z, alpha, beta, gamma}; }
  static Pose from_array(const std::array<double, 6>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }
  friend bool operator==(const Pose&, const Pose&) = default;
};

// Same six components as Pose, read as an increment.
using PoseCorrection = Pose;

struct Wrench {
  double fx = 0.0;  // N
  double fy = 0.0;
  double fz = 0.0;
  double mx = 0.0;  // N mm
  double my = 0.0;
  double mz = 0.0;

  std::array<double, 6> to_array() const { return {fx, fy, fz, mx, my, mz}; }
  static Wrench from_array(const std::array<double, 6>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }
  double force_norm() const;
  double moment_norm() const;
  friend bool operator==(const Wrench&, const Wrench&) = default;
};

// Diagonal admittance gains: kx, ky, kz in mm/N, kalpha..kgamma in rad per
// unit of the (selection-scaled) moment.
struct ComplianceGains {
  std::array<double, 6> k{};

  static ComplianceGains baseline() { return {{8e-3, 8e-3, 8e-5, 2e-3, 2e-3, 2e-3}}; }
  friend bool operator==(const ComplianceGains&, const ComplianceGains&) = default;
};

struct Geometry {
  double peg_side = 9.9;     // mm
  double hole_side = 10.0;   // mm
  double peg_length = 30.0;  // mm
  double hole_depth = 30.0;  // mm
  double spacing_x = 50.0;   // mm between the lone peg and the pair
  double spacing_y = 40.0;   // mm between the two pegs of the pair
  int peg_count = 3;
  // Lateral stiffness of one peg corner edge engaged over the full hole
  // depth; a partially engaged edge scales linearly with engaged length.
  double contact_stiffness = 100.0;  // N/mm
  // Stiffness of a peg tip corner against the hole's top face.
  double tip_stiffness = 20.0;  // N/mm
  int points_per_edge = 8;

  // Peg (and hole) axis positions relative to the sensor origin, in mm.
  // The lone peg sits at +x; the pair is mirrored about y = 0.
  std::vector<std::array<double, 2>> peg_centers() const;
  void validate() const;
};

struct RewardConfig {
  double h_z = 0.5;
  double h_f = 0.1;
  double h_m = 0.5;
  double force_norm = 20.0;    // N
  double moment_norm = 200.0;  // N mm
  double success_bonus = 5.0;
  void validate() const;
};

struct ControlConfig {
  double initial_depth = 1.0;  // mm
  double target_depth = 30.0;  // mm
  int target_steps = 50;       // nominal feed = (target - initial) / target_steps
  int max_steps = 100;
  double max_translation_step = 0.2;       // mm
  double max_rotation_step = 0.2 * kDegree;  // rad
  // Diagonal of the selection matrix A: signs and the unit scale applied to
  // each wrench-error channel before the gains.
  std::array<double, 6> selection{1.0, 1.0, 1.0, 1e-2, 1e-2, 1e-2};
  Wrench f_ref{};
  double gain_clamp = 0.95;
  double jam_force = 50.0;    // N
  double jam_moment = 500.0;  // N mm
  double detect_force = 0.5;  // N, minimum contact force after reset
  int reset_attempts = 100;
  double obs_force_scale = 50.0;    // N
  double obs_moment_scale = 500.0;  // N mm

  double nominal_feed() const { return (target_depth - initial_depth) / target_steps; }
  void validate() const;
};

struct EnvConfig {
  Geometry geometry;
  ControlConfig control;
  RewardConfig reward;
  ComplianceGains baseline = ComplianceGains::baseline();
  // Half-widths of the uniform initial pose error.
  Pose error_range{0.2, 0.2, 0.2, 0.5 * kDegree, 0.5 * kDegree, 0.5 * kDegree};
  void validate() const;
};

enum class Outcome { kRunning, kSuccess, kJammed, kTimeout };
const char* to_string(Outcome o);

inline constexpr int kObservationDim = 7;

struct EnvState {
  Eigen::VectorXd observation;  // 6 normalized wrench components + depth / target
  Pose pose;
  Wrench wrench;
  int step_index = 0;
  Outcome done = Outcome::kRunning;

  double depth() const { return -pose.z; }
};

struct TrajectoryRow {
  int step = 0;
  Pose pose;
  Wrench wrench;
  double reward = 0.0;
};

// K = diag((a + a_n) * K_hat + K_hat), with a + a_n clamped to
// [-gain_clamp, gain_clamp] so every gain stays positive.
ComplianceGains modulate_gains(const ActionVec& a, const ActionVec& a_n,
                               const ComplianceGains& baseline,
                               double gain_clamp = 0.95);

// p_c = K * A * (wrench - f_ref), each component clamped to the per-step
// translation/rotation limits.
PoseCorrection compliance_step(const ComplianceGains& gains, const Wrench& wrench,
                               const Wrench& f_ref, const ControlConfig& control);

// Penalty contact between the peg corner edges and the hole walls, plus the
// peg tips against the hole top face.
Wrench contact_wrench(const Pose& pose, const Geometry& geom);

double compute_reward(double depth_increment, double nominal_step,
                      const Wrench& wrench, bool success, const RewardConfig& cfg);

Eigen::VectorXd make_observation(const Wrench& w, double depth,
                                 const ControlConfig& control);

struct StepResult {
  const EnvState& state;
  double reward;
};

class AssemblyEnv {
 public:
  explicit AssemblyEnv(EnvConfig cfg = {});

  // Random initial error within cfg.error_range, redrawn until the contact
  // force is detectable. Throws Error(kState) after reset_attempts misses.
  const EnvState& reset(std::uint64_t seed);
  // Reset with a range other than the configured one.
  const EnvState& reset(std::uint64_t seed, const Pose& error_range);
  // Deterministic initial error, no detectability requirement.
  const EnvState& reset_to(const Pose& error);

  StepResult step(const ComplianceGains& gains);

  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }

  void set_recording(bool on) { recording_ = on; }
  const std::vector<TrajectoryRow>& trajectory() const { return trajectory_; }

 private:
  void start_from(const Pose& error);

  EnvConfig cfg_;
  EnvState state_;
  bool started_ = false;
  bool recording_ = false;
  std::vector<TrajectoryRow> trajectory_;
};

void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows);

}  // namespace pead
