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

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "assembly_env.hpp"
#include "doctest.h"
#include "error.hpp"
#include "test_util.hpp"

using namespace pead;

namespace {

double wrench_norm(const Wrench& w) {
  double s = 0.0;
  for (double v : w.to_array()) s += v * v;
  return std::sqrt(s);
}

Pose mirror_y(const Pose& p) { return {p.x, -p.y, p.z, -p.alpha, p.beta, -p.gamma}; }

Pose random_pose(std::mt19937_64& rng, double depth) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {0.2 * u(rng), 0.2 * u(rng), -depth, 0.5 * kDegree * u(rng), 0.5 * kDegree * u(rng),
          0.5 * kDegree * u(rng)};
}

ActionVec zeros6() { return ActionVec::Zero(6); }

}  // namespace

TEST_SUITE("assembly_env") {
  TEST_CASE("modulate_gains examples") {
    const ComplianceGains base = ComplianceGains::baseline();
    CHECK(modulate_gains(zeros6(), zeros6(), base) == base);
    ActionVec a = zeros6();
    a(0) = 0.8;
    CHECK(modulate_gains(a, zeros6(), base).k[0] == doctest::Approx(1.44e-2).epsilon(1e-15));
    a(0) = -0.8;
    ActionVec n = zeros6();
    n(0) = -0.5;
    CHECK(modulate_gains(a, n, base).k[0] == doctest::Approx(4e-4).epsilon(1e-12));
    CHECK_THROWS_AS(modulate_gains(ActionVec::Zero(3), zeros6(), base), Error);
  }

  TEST_CASE("gains stay strictly positive") {
    std::mt19937_64 rng(4);
    const ComplianceGains base = ComplianceGains::baseline();
    for (int t = 0; t < 500; ++t) {
      const ComplianceGains k =
          modulate_gains(test::random_vector(6, rng, 3.0), test::random_vector(6, rng, 3.0), base);
      for (int i = 0; i < 6; ++i) {
        CHECK(k.k[i] > 0.0);
        CHECK(k.k[i] <= base.k[i] * 1.95 + 1e-18);
      }
    }
  }

  TEST_CASE("compliance_step examples") {
    const ControlConfig ctl;
    const ComplianceGains base = ComplianceGains::baseline();
    const PoseCorrection none = compliance_step(base, ctl.f_ref, ctl.f_ref, ctl);
    CHECK(none == Pose{});
    Wrench w;
    w.fx = 1.0;
    CHECK(compliance_step(base, w, ctl.f_ref, ctl).x == doctest::Approx(0.008).epsilon(1e-15));
    // Contact forces are what the holes exert on the pegs: pressing down
    // against a jam pushes back up (+z), and the correction lifts the pegs.
    Wrench up;
    up.fz = 10.0;
    const PoseCorrection c = compliance_step(base, up, ctl.f_ref, ctl);
    CHECK(c.z == doctest::Approx(8e-4).epsilon(1e-15));
    CHECK(c.z > 0.0);
    Wrench big;
    big.fx = -100.0;
    big.mx = 1e6;
    const PoseCorrection clamped = compliance_step(base, big, ctl.f_ref, ctl);
    CHECK(clamped.x == -ctl.max_translation_step);
    CHECK(clamped.alpha == ctl.max_rotation_step);
  }

  TEST_CASE("aligned poses carry no wrench") {
    const Geometry g;
    for (double depth : {0.0, 1.0, 5.0, 17.3, 30.0}) {
      CHECK(wrench_norm(contact_wrench({0, 0, -depth, 0, 0, 0}, g)) <= 1e-12);
      // Inside the 0.05 mm clearance there is still no contact.
      CHECK(wrench_norm(contact_wrench({0.04, -0.03, -depth, 0, 0, 0}, g)) <= 1e-12);
    }
  }

  TEST_CASE("x offset gives a restoring force") {
    const Wrench w = contact_wrench({0.1, 0, -5.0, 0, 0, 0}, Geometry{});
    CHECK(w.fx < 0.0);
    CHECK(std::abs(w.fy) <= 1e-9);
    CHECK(std::abs(w.mz) <= 1e-9);
  }

  TEST_CASE("alpha tilt gives an opposing moment about x") {
    const Geometry g;
    const Pose tilt{0, 0, -10.0, 0.3 * kDegree, 0, 0};
    const Wrench w = contact_wrench(tilt, g);
    CHECK(w.mx < 0.0);
    CHECK(std::abs(w.mx) > std::abs(w.my));
    CHECK(std::abs(w.mx) > std::abs(w.mz));
    const Wrench m = contact_wrench(mirror_y(tilt), g);
    CHECK(m.mx == doctest::Approx(-w.mx).epsilon(1e-12));
    CHECK(m.my == doctest::Approx(w.my).epsilon(1e-12));
  }

  TEST_CASE("wrench mirrors with the pose about the x-z plane") {
    std::mt19937_64 rng(12);
    const Geometry g;
    for (int t = 0; t < 300; ++t) {
      const Pose p = random_pose(rng, 0.5 + 29.0 * (t % 30) / 30.0);
      const auto a = contact_wrench(p, g).to_array();
      const auto b = contact_wrench(mirror_y(p), g).to_array();
      const double sign[6] = {1, -1, 1, -1, 1, -1};
      for (int i = 0; i < 6; ++i) CHECK(std::abs(b[i] - sign[i] * a[i]) <= 1e-9);
    }
  }

  TEST_CASE("wrench is continuous in the pose") {
    std::mt19937_64 rng(13);
    const Geometry g;
    for (int t = 0; t < 20; ++t) {
      const Pose p = random_pose(rng, 10.0);
      double prev = 1e300;
      for (double d : {1e-3, 1e-5, 1e-7, 1e-9}) {
        Pose q = p;
        q.x += d;
        q.alpha += d * 1e-2;
        q.z -= d;
        const double diff = wrench_norm(Wrench::from_array([&] {
          auto a = contact_wrench(p, g).to_array();
          const auto b = contact_wrench(q, g).to_array();
          for (int i = 0; i < 6; ++i) a[i] -= b[i];
          return a;
        }()));
        CHECK(diff <= prev + 1e-12);
        prev = diff;
      }
      CHECK(prev <= 1e-4);
    }
  }

  TEST_CASE("reward examples") {
    const RewardConfig r;
    CHECK(compute_reward(0.58, 0.58, Wrench{}, false, r) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(compute_reward(0.0, 0.58, Wrench{}, false, r) == 0.0);
    Wrench w;
    w.fx = 20.0;
    w.my = 200.0;
    CHECK(compute_reward(0.58, 0.58, w, false, r) == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(compute_reward(0.58, 0.58, Wrench{}, true, r) == doctest::Approx(5.5).epsilon(1e-15));
  }

  TEST_CASE("reset is seeded, bounded and detectable") {
    AssemblyEnv env;
    const EnvState a = env.reset(42);
    const EnvState b = env.reset(42);
    CHECK(a.pose == b.pose);
    CHECK(a.wrench == b.wrench);
    CHECK(a.observation == b.observation);
    CHECK(a.wrench.force_norm() > env.config().control.detect_force);

    const Pose range = env.config().error_range;
    for (std::uint64_t s = 0; s < 1000; ++s) {
      const EnvState& st = env.reset(s);
      CHECK(std::abs(st.pose.x) <= range.x);
      CHECK(std::abs(st.pose.y) <= range.y);
      CHECK(std::abs(st.pose.z + env.config().control.initial_depth) <= range.z);
      CHECK(std::abs(st.pose.alpha) <= range.alpha);
      CHECK(std::abs(st.pose.beta) <= range.beta);
      CHECK(std::abs(st.pose.gamma) <= range.gamma);
      CHECK(st.observation.cwiseAbs().maxCoeff() <= 1.0);
    }
    CHECK_THROWS_AS(env.reset(1, Pose{}), Error);
  }

  TEST_CASE("aligned start with baseline gains succeeds in exactly 50 steps") {
    AssemblyEnv env;
    env.reset_to(Pose{});
    const ComplianceGains base = ComplianceGains::baseline();
    double total = 0.0;
    while (env.state().done == Outcome::kRunning) {
      const StepResult r = env.step(base);
      CHECK(r.reward == doctest::Approx(r.state.done == Outcome::kSuccess ? 5.5 : 0.5));
      total += r.reward;
    }
    CHECK(env.state().done == Outcome::kSuccess);
    CHECK(env.state().step_index == 50);
    CHECK(env.state().depth() == 30.0);
    CHECK(total == doctest::Approx(50 * 0.5 + 5.0));
    CHECK_THROWS_AS(env.step(base), Error);
  }

  TEST_CASE("timeout at step 100") {
    EnvConfig cfg;
    cfg.control.target_steps = 200;  // feed too slow to reach the bottom in 100 steps
    AssemblyEnv env(cfg);
    env.reset_to(Pose{});
    while (env.state().done == Outcome::kRunning) env.step(ComplianceGains::baseline());
    CHECK(env.state().done == Outcome::kTimeout);
    CHECK(env.state().step_index == 100);
    CHECK(env.state().depth() < 30.0);
  }

  TEST_CASE("large lateral error jams") {
    EnvConfig cfg;
    AssemblyEnv env(cfg);
    env.reset_to({0.2, 0.2, 0, 0.5 * kDegree, -0.5 * kDegree, 0.5 * kDegree});
    ComplianceGains stiff;
    stiff.k.fill(1e-9);  // no compliance: the error is never corrected
    while (env.state().done == Outcome::kRunning) env.step(stiff);
    CHECK(env.state().done == Outcome::kJammed);
    const Wrench& w = env.state().wrench;
    CHECK((w.force_norm() > cfg.control.jam_force || w.moment_norm() > cfg.control.jam_moment));
  }

  TEST_CASE("success exactly when the target depth is reached") {
    // Noisy gains: a few of these episodes overshoot the target on the same
    // step that the wrench spikes past the jam limits.
    const EnvConfig cfg;
    int successes = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> n(0.0, 0.4);
      AssemblyEnv env(cfg);
      env.reset(seed);
      while (env.state().done == Outcome::kRunning) {
        ActionVec a(6);
        for (int k = 0; k < 6; ++k) a(k) = std::clamp(n(rng), -0.8, 0.8);
        env.step(modulate_gains(a, zeros6(), cfg.baseline));
      }
      const bool success = env.state().done == Outcome::kSuccess;
      CHECK(success == (env.state().depth() >= cfg.control.target_depth));
      CHECK(env.state().depth() <= cfg.control.target_depth + 1.0);
      successes += success;
    }
    CHECK(successes > 0);
    CHECK(successes < 200);
  }

  TEST_CASE("trajectories are deterministic and bounded") {
    std::mt19937_64 gains_rng(77);
    std::vector<ComplianceGains> gains;
    for (int i = 0; i < 100; ++i) {
      gains.push_back(modulate_gains(test::random_vector(6, gains_rng, 0.5), zeros6(),
                                     ComplianceGains::baseline()));
    }
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::vector<TrajectoryRow> runs[2];
      for (auto& run : runs) {
        AssemblyEnv env;
        env.set_recording(true);
        env.reset(seed);
        std::size_t i = 0;
        while (env.state().done == Outcome::kRunning) env.step(gains[i++]);
        CHECK(env.state().step_index <= 100);
        CHECK((env.state().done == Outcome::kSuccess) == (env.state().depth() >= 30.0));
        run = env.trajectory();
      }
      REQUIRE(runs[0].size() == runs[1].size());
      for (std::size_t i = 0; i < runs[0].size(); ++i) {
        CHECK(runs[0][i].pose == runs[1][i].pose);
        CHECK(runs[0][i].wrench == runs[1][i].wrench);
        CHECK(runs[0][i].reward == runs[1][i].reward);
      }
    }
  }

  TEST_CASE("trajectory csv columns") {
    AssemblyEnv env;
    env.set_recording(true);
    env.reset_to(Pose{});
    env.step(ComplianceGains::baseline());
    std::ostringstream os;
    write_trajectory_csv(os, env.trajectory());
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    CHECK(header == "step,x,y,z,alpha,beta,gamma,fx,fy,fz,mx,my,mz,reward");
    int rows = 0;
    for (std::string line; std::getline(is, line);) ++rows;
    CHECK(rows == 2);
  }

  TEST_CASE("config validation") {
    EnvConfig cfg;
    cfg.geometry.peg_side = 10.0;
    CHECK_THROWS_AS(AssemblyEnv{cfg}, Error);
    cfg = EnvConfig{};
    cfg.control.gain_clamp = 1.0;
    CHECK_THROWS_AS(AssemblyEnv{cfg}, Error);
    cfg = EnvConfig{};
    cfg.reward.h_f = -0.1;
    CHECK_THROWS_AS(AssemblyEnv{cfg}, Error);
  }
}
