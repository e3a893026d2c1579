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

// Experiment orchestration: seed sweeps over dim3 / dim6 / pead training,
// CSV output, checkpoint evaluation against the fixed-compliance baseline,
// and timing tables.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "agent.hpp"
#include "assembly_env.hpp"
#include "ddpg.hpp"
#include "ppo.hpp"

namespace pead {

enum class ActionMode { kDim3, kDim6, kPead };
const char* to_string(ActionMode m);
ActionMode action_mode_from_string(const std::string& s);

struct EvalConfig {
  int episodes = 20;
  // Each paired seed perturbs the corner error by up to this fraction of
  // error_range, so repeated episodes are not copies of one another.
  double jitter_fraction = 0.1;
  std::uint64_t seed = 1000;
};

struct HarnessConfig {
  Algorithm algorithm = Algorithm::kDdpg;
  ActionMode mode = ActionMode::kPead;
  int extension_scale = 150;
  int episodes = 300;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string output_dir = "runs";
  std::string run_id;  // empty: "<algo>-<mode>", plus "-<scale>" for pead
  bool learn = true;   // false: no updates and no extension
  bool record_timing = true;  // false: opt_ms written as 0
  bool checkpoints = true;
  int workers = 1;
  EvalConfig eval;
};

struct ExperimentConfig {
  HarnessConfig harness;
  EnvConfig env;
  DdpgConfig ddpg;
  PpoConfig ppo;

  std::string run_id() const;
  void validate() const;
};

// Per-algorithm defaults: DDPG 300 episodes / extension at 150,
// PPO 1200 episodes / extension at 800.
ExperimentConfig default_experiment(Algorithm algo);

// JSON document with sections "harness", "assembly_env" and "agents". Missing
// keys keep their defaults; unknown keys and wrong types throw Error(kConfig).
ExperimentConfig config_from_string(const std::string& text);
std::string config_to_string(const ExperimentConfig& cfg);
ExperimentConfig load_config_file(const std::string& path);
void save_config_file(const ExperimentConfig& cfg, const std::string& path);
// Sets a dotted key ("harness.episodes") in a config document. The value is
// parsed as JSON when possible and taken as a string otherwise.
std::string apply_override(const std::string& document, const std::string& dotted_key,
                           const std::string& value);

struct EpisodeRecord {
  std::string run_id;
  Algorithm algorithm = Algorithm::kDdpg;
  ActionMode mode = ActionMode::kDim6;
  std::uint64_t seed = 0;
  int episode = 0;
  double reward = 0.0;
  int steps = 0;
  Outcome outcome = Outcome::kRunning;
  double opt_ms = 0.0;
  bool extended = false;
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> records;
  int extension_episode = -1;  // first episode run with the widened agent
  std::unique_ptr<Agent> agent;
  double total_opt_ms() const;
};

struct AggregatePoint {
  int episode = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<SeedRun> runs;
  std::vector<AggregatePoint> aggregate;
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::unique_ptr<Agent> make_agent(const ExperimentConfig& cfg, int action_dim,
                                  std::uint64_t seed);

using ProgressFn = std::function<void(const EpisodeRecord&)>;

// Trains one seed an episode at a time, so several runs can be advanced in
// lockstep (the timing comparison does this to share machine load evenly).
class SeedRunner {
 public:
  SeedRunner(const ExperimentConfig& cfg, std::uint64_t seed);

  bool done() const;
  // Runs the next episode, extending a pead agent first when it is due.
  const EpisodeRecord& step();
  const SeedRun& run() const { return run_; }
  SeedRun finish() &&;

 private:
  ExperimentConfig cfg_;
  MappingMatrix map_;
  AssemblyEnv env_;
  std::string run_id_;
  SeedRun run_;
};

// One seed of run_experiment, with no file output.
SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                 const ProgressFn& progress = {});
// Validates, runs every seed and, when output_dir is non-empty, writes
// per_episode.csv, aggregate.csv, summary.txt, config.json and checkpoints/.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

std::vector<AggregatePoint> aggregate_rewards(const std::vector<EpisodeRecord>& records);

double final_window_mean(const std::vector<double>& rewards, int window = 50);
// First episode whose trailing 10-episode moving average reaches 90% of the
// final-window mean (110% when that mean is negative). Returns the episode
// count when the threshold is never reached.
int episodes_to_threshold(const std::vector<double>& rewards, int ma_window = 10,
                          int final_window = 50, double fraction = 0.9);

void write_per_episode_csv(std::ostream& os, const std::vector<EpisodeRecord>& records);
std::vector<EpisodeRecord> read_per_episode_csv(std::istream& is);
void write_aggregate_csv(std::ostream& os, const std::vector<AggregatePoint>& agg);

struct TimingRow {
  Algorithm algorithm = Algorithm::kDdpg;
  ActionMode mode = ActionMode::kDim6;
  int runs = 0;
  double mean_s = 0.0;
  double std_s = 0.0;  // sample std, 0 for a single run
};

// Mean and sample std of per-seed optimizer + extension seconds, grouped by
// (algorithm, mode).
std::vector<TimingRow> summarize_timing(const std::vector<EpisodeRecord>& records);
std::string format_timing_table(const std::vector<TimingRow>& rows, bool with_reference = true);

struct RunSummary {
  std::string run_id;
  Algorithm algorithm = Algorithm::kDdpg;
  ActionMode mode = ActionMode::kDim6;
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_mean;  // per seed
  std::vector<int> to_threshold;   // per seed
  std::vector<double> opt_s;       // per seed
  double mean_final() const;
  double mean_to_threshold() const;
};

std::vector<RunSummary> summarize_runs(const std::vector<EpisodeRecord>& records,
                                       int final_window = 50);
std::string format_summary(const std::vector<RunSummary>& runs,
                           const std::vector<TimingRow>& timing);

// Reads every per_episode.csv under dir (recursively) and returns the
// combined summary text. Throws Error(kIo) when none are found.
std::string report_directory(const std::string& dir);

struct EvalRow {
  std::string policy;  // "trained" or "baseline"
  std::string tag;     // "nominal", or "robustness" for the negative corner
  std::uint64_t seed = 0;
  Pose initial_error;
  Outcome outcome = Outcome::kRunning;
  int steps = 0;
  double reward = 0.0;
  double cumulative_force = 0.0;
  double cumulative_moment = 0.0;
};

struct EvalSummary {
  std::string policy;
  std::string tag;
  int episodes = 0;
  double success_rate = 0.0;
  double mean_steps = 0.0;
  // Means over successful episodes only; 0 when there are none.
  double mean_cumulative_force = 0.0;
  double mean_cumulative_moment = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<EvalSummary> summaries;
  const EvalSummary& find(const std::string& policy, const std::string& tag) const;
};

// Runs the agent greedily (no noise, no learning) and the zero-action
// baseline on the same seeds from initial_error plus jitter. The rows carry
// `tag`. When trajectory_dir is non-empty, the first episode of each policy is
// dumped as <dir>/<tag>_<policy>.csv.
EvalReport evaluate_policy(Agent& agent, const EnvConfig& env_cfg, const Pose& initial_error,
                           const EvalConfig& eval, const std::string& tag,
                           const std::string& trajectory_dir = "");
// Both corners of error_range: positive tagged "nominal", negative tagged
// "robustness".
EvalReport evaluate_corners(Agent& agent, const EnvConfig& env_cfg, const EvalConfig& eval,
                            const std::string& trajectory_dir = "");
void write_eval_csv(std::ostream& os, const EvalReport& report);
std::string format_eval_summary(const EvalReport& report);

}  // namespace pead
