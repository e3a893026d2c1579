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


#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "error.hpp"
#include "harness.hpp"
#include "test_util.hpp"

using namespace pead;
namespace fs = std::filesystem;

namespace {

// Scratch directory removed on scope exit.
struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("pead_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig quick_config(ActionMode mode, Algorithm algo = Algorithm::kDdpg) {
  ExperimentConfig c = default_experiment(algo);
  c.harness.mode = mode;
  c.harness.episodes = 10;
  c.harness.extension_scale = 5;
  c.harness.seeds = {0, 1};
  c.harness.output_dir = "";
  c.ddpg.hidden = 8;
  c.ddpg.batch_size = 8;
  c.ddpg.warmup_episodes = 2;
  c.ppo.hidden = 8;
  c.ppo.rollout_steps = 120;
  c.ppo.epochs = 2;
  c.ppo.minibatch = 32;
  return c;
}

EpisodeRecord record(std::uint64_t seed, int episode, double reward, double opt_ms,
                     ActionMode mode = ActionMode::kDim6) {
  EpisodeRecord r;
  r.run_id = std::string("ddpg-") + to_string(mode);
  r.mode = mode;
  r.seed = seed;
  r.episode = episode;
  r.reward = reward;
  r.steps = 50;
  r.outcome = Outcome::kSuccess;
  r.opt_ms = opt_ms;
  return r;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("mode names round trip") {
  for (ActionMode m : {ActionMode::kDim3, ActionMode::kDim6, ActionMode::kPead})
    CHECK(action_mode_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(action_mode_from_string("dim4"), Error);
}

TEST_CASE("per-algorithm defaults") {
  const ExperimentConfig d = default_experiment(Algorithm::kDdpg);
  CHECK(d.harness.episodes == 300);
  CHECK(d.harness.extension_scale == 150);
  CHECK(d.harness.seeds.size() == 5);
  CHECK(d.ddpg.lr_actor == 1e-3);
  CHECK(d.ddpg.lr_critic == 1e-2);
  CHECK(d.ddpg.tau == 1e-3);
  const ExperimentConfig p = default_experiment(Algorithm::kPpo);
  CHECK(p.harness.episodes == 1200);
  CHECK(p.harness.extension_scale == 800);
  CHECK(p.run_id() == "ppo-pead-800");
  ExperimentConfig q = p;
  q.harness.mode = ActionMode::kDim3;
  CHECK(q.run_id() == "ppo-dim3");
  q.harness.run_id = "custom";
  CHECK(q.run_id() == "custom");
}

TEST_CASE("derived seeds are distinct per stream and stable") {
  CHECK(derive_seed(0, 0) == derive_seed(0, 0));
  CHECK(derive_seed(0, 0) != derive_seed(0, 1));
  CHECK(derive_seed(0, 1) != derive_seed(1, 0));
}

TEST_CASE("two seeds of ten episodes give twenty rows") {
  const ExperimentResult r = run_experiment(quick_config(ActionMode::kDim6));
  REQUIRE(r.runs.size() == 2);
  std::size_t rows = 0;
  for (const auto& run : r.runs) {
    rows += run.records.size();
    for (std::size_t i = 0; i < run.records.size(); ++i) {
      CHECK(run.records[i].episode == static_cast<int>(i));
      CHECK(run.records[i].steps >= 1);
      CHECK(run.records[i].steps <= 100);
      CHECK(run.records[i].outcome != Outcome::kRunning);
      CHECK_FALSE(run.records[i].extended);
    }
    CHECK(run.extension_episode == -1);
  }
  CHECK(rows == 20);
  CHECK(r.aggregate.size() == 10);
}

TEST_CASE("pead extends exactly at the extension scale for ddpg") {
  const ExperimentResult r = run_experiment(quick_config(ActionMode::kPead));
  for (const auto& run : r.runs) {
    CHECK(run.extension_episode == 5);
    for (const auto& rec : run.records) CHECK(rec.extended == (rec.episode >= 5));
    CHECK(run.agent->action_dim() == 6);
  }
}

TEST_CASE("pead matches dim3 until the extension") {
  ExperimentConfig pead = quick_config(ActionMode::kPead);
  ExperimentConfig dim3 = quick_config(ActionMode::kDim3);
  pead.harness.seeds = dim3.harness.seeds = {3};
  const SeedRun a = run_seed(pead, 3);
  const SeedRun b = run_seed(dim3, 3);
  for (int ep = 0; ep < 5; ++ep) CHECK(a.records[ep].reward == b.records[ep].reward);
}

TEST_CASE("ppo extension waits for an empty rollout store") {
  ExperimentConfig c = quick_config(ActionMode::kPead, Algorithm::kPpo);
  c.harness.episodes = 12;
  c.harness.seeds = {0};
  const SeedRun run = run_seed(c, 0);
  REQUIRE(run.extension_episode >= 5);
  CHECK(run.extension_episode < 12);
  // the store was flushed at the end of the episode before the extension
  int steps = 0;
  for (int ep = 0; ep < run.extension_episode; ++ep) steps += run.records[ep].steps;
  CHECK(steps >= c.ppo.rollout_steps);
  CHECK(run.records[run.extension_episode].extended);
  CHECK_FALSE(run.records[run.extension_episode - 1].extended);
}

TEST_CASE("learn = false runs without updates or extension") {
  ExperimentConfig c = quick_config(ActionMode::kPead);
  c.harness.learn = false;
  const ExperimentResult r = run_experiment(c);
  for (const auto& run : r.runs) {
    CHECK(run.extension_episode == -1);
    CHECK(run.total_opt_ms() == 0.0);
    for (const auto& rec : run.records) CHECK(rec.opt_ms == 0.0);
  }
}

TEST_CASE("output files are byte-identical across runs without timing") {
  TempDir a, b;
  ExperimentConfig c = quick_config(ActionMode::kPead);
  c.harness.record_timing = false;
  c.harness.output_dir = a.path.string();
  run_experiment(c);
  c.harness.output_dir = b.path.string();
  c.harness.workers = 2;
  run_experiment(c);
  for (const char* f : {"per_episode.csv", "aggregate.csv", "extensions.csv",
                        "checkpoints/seed_0.ckpt", "checkpoints/seed_1.ckpt"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(a.path / f));
    CHECK(slurp(a.path / f) == slurp(b.path / f));
  }
  CHECK(fs::exists(a.path / "summary.txt"));
  CHECK(slurp(a.path / "extensions.csv") == "seed,episode\n0,5\n1,5\n");
  CHECK(slurp(a.path / "summary.txt").find("extended at episode 5") != std::string::npos);
  // the written config reproduces the run id
  CHECK(load_config_file((a.path / "config.json").string()).run_id() == "ddpg-pead-5");
}

TEST_CASE("per-episode csv has the documented header and round trips") {
  std::vector<EpisodeRecord> rows = {record(0, 0, -1.25, 3.5), record(0, 1, 0.1 + 0.2, 0.0)};
  rows[1].outcome = Outcome::kJammed;
  rows[1].extended = true;
  std::stringstream ss;
  write_per_episode_csv(ss, rows);
  std::string header;
  std::getline(std::istringstream(ss.str()) >> std::ws, header);
  CHECK(header == "run_id,algo,mode,seed,episode,reward,steps,outcome,opt_ms,extended_flag");
  const auto back = read_per_episode_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[1].reward == rows[1].reward);  // exact at max_digits10
  CHECK(back[1].outcome == Outcome::kJammed);
  CHECK(back[1].extended);
  CHECK(back[0].opt_ms == 3.5);
  std::istringstream bad("run_id,algo\nx,y\n");
  CHECK_THROWS_AS(read_per_episode_csv(bad), Error);
}

TEST_CASE("aggregate gives mean, min and max per episode") {
  const std::vector<EpisodeRecord> rows = {record(0, 0, 1.0, 0), record(1, 0, 4.0, 0),
                                           record(2, 0, -2.0, 0), record(0, 1, 5.0, 0)};
  const auto agg = aggregate_rewards(rows);
  REQUIRE(agg.size() == 2);
  CHECK(agg[0].episode == 0);
  CHECK(agg[0].mean == 1.0);
  CHECK(agg[0].min == -2.0);
  CHECK(agg[0].max == 4.0);
  CHECK(agg[1].mean == 5.0);
  CHECK(agg[1].min == 5.0);
}

TEST_CASE("aggregate of a real run matches a recomputation from its csv") {
  ExperimentConfig c = quick_config(ActionMode::kDim3);
  const ExperimentResult r = run_experiment(c);
  std::vector<EpisodeRecord> all;
  for (const auto& run : r.runs) all.insert(all.end(), run.records.begin(), run.records.end());
  std::stringstream ss;
  write_per_episode_csv(ss, all);
  const auto back = read_per_episode_csv(ss);
  for (int ep = 0; ep < 10; ++ep) {
    const double mean = (back[ep].reward + back[10 + ep].reward) / 2.0;
    CHECK(r.aggregate[ep].mean == doctest::Approx(mean).epsilon(1e-15));
    CHECK(r.aggregate[ep].min <= r.aggregate[ep].mean);
    CHECK(r.aggregate[ep].mean <= r.aggregate[ep].max);
  }
}

TEST_CASE("final window mean and episodes to threshold") {
  std::vector<double> rewards(60, 1.0);
  for (int i = 0; i < 10; ++i) rewards[i] = 0.0;
  CHECK(final_window_mean(rewards) == 1.0);
  // nine ones in the window first at index 18
  CHECK(episodes_to_threshold(rewards) == 19);
  // a flat curve reaches its own plateau as soon as the first window fills
  CHECK(episodes_to_threshold(std::vector<double>(60, 2.0)) == 10);
  // negative plateau: the threshold is 1.1 x plateau
  std::vector<double> neg(60, -2.0);
  for (int i = 0; i < 20; ++i) neg[i] = -4.0;
  // plateau (10 x -4 + 40 x -2) / 50 = -2.4, threshold -2.64;
  // window mean -4 + 0.2 k reaches it at k = 7, index 26
  CHECK(episodes_to_threshold(neg) == 27);
  // never reached: the final window is above every earlier window
  std::vector<double> rising(60);
  for (int i = 0; i < 60; ++i) rising[i] = i < 59 ? 0.0 : 1000.0;
  CHECK(episodes_to_threshold(rising) == 60);
  CHECK(final_window_mean({1.0, 3.0}, 50) == 2.0);
  CHECK_THROWS_AS(final_window_mean({}, 50), Error);
}

TEST_CASE("timing summary groups by mode and uses seconds") {
  std::vector<EpisodeRecord> rows;
  // seed 0 totals 1000 ms, seed 1 totals 3000 ms
  rows.push_back(record(0, 0, 0, 400));
  rows.push_back(record(0, 1, 0, 600));
  rows.push_back(record(1, 0, 0, 3000));
  rows.push_back(record(7, 0, 0, 2000, ActionMode::kDim3));
  const auto t = summarize_timing(rows);
  REQUIRE(t.size() == 2);
  const TimingRow& dim3 = t[0].mode == ActionMode::kDim3 ? t[0] : t[1];
  const TimingRow& dim6 = t[0].mode == ActionMode::kDim6 ? t[0] : t[1];
  CHECK(dim6.runs == 2);
  CHECK(dim6.mean_s == doctest::Approx(2.0));
  CHECK(dim6.std_s == doctest::Approx(std::sqrt(2.0)));
  CHECK(dim3.runs == 1);
  CHECK(dim3.std_s == 0.0);
  const std::string table = format_timing_table(t);
  CHECK(table.find("2.0") != std::string::npos);
  CHECK(table.find("DDPG") != std::string::npos);
}

TEST_CASE("run summaries collect per-seed metrics") {
  std::vector<EpisodeRecord> rows;
  for (int ep = 0; ep < 60; ++ep) rows.push_back(record(0, ep, ep < 10 ? 0.0 : 1.0, 1.0));
  for (int ep = 0; ep < 60; ++ep) rows.push_back(record(1, ep, 2.0, 1.0));
  const auto s = summarize_runs(rows);
  REQUIRE(s.size() == 1);
  CHECK(s[0].seeds.size() == 2);
  CHECK(s[0].to_threshold[0] == 19);
  CHECK(s[0].to_threshold[1] == 10);
  CHECK(s[0].mean_to_threshold() == 14.5);
  CHECK(s[0].mean_final() == 1.5);
  CHECK(s[0].opt_s[0] == doctest::Approx(0.06));
}

TEST_CASE("report reads every run below a directory") {
  TempDir d;
  CHECK_THROWS_AS(report_directory(d.path.string()), Error);
  ExperimentConfig c = quick_config(ActionMode::kDim6);
  c.harness.output_dir = (d.path / "a").string();
  run_experiment(c);
  c.harness.mode = ActionMode::kDim3;
  c.harness.output_dir = (d.path / "b").string();
  run_experiment(c);
  const std::string text = report_directory(d.path.string());
  CHECK(text.find("ddpg-dim6") != std::string::npos);
  CHECK(text.find("ddpg-dim3") != std::string::npos);
}

TEST_CASE("config json round trips") {
  ExperimentConfig c = default_experiment(Algorithm::kPpo);
  c.harness.mode = ActionMode::kDim3;
  c.harness.seeds = {4, 9};
  c.env.control.selection[4] = 0.25;
  c.env.error_range.gamma = 0.01;
  c.ppo.clip_ratio = 0.1;
  const std::string text = config_to_string(c);
  const ExperimentConfig back = config_from_string(text);
  CHECK(config_to_string(back) == text);
  CHECK(back.harness.algorithm == Algorithm::kPpo);
  CHECK(back.harness.seeds == std::vector<std::uint64_t>{4, 9});
  CHECK(back.env.control.selection[4] == 0.25);
  CHECK(back.ppo.clip_ratio == 0.1);

  TempDir d;
  save_config_file(c, (d.path / "c.json").string());
  CHECK(config_to_string(load_config_file((d.path / "c.json").string())) == text);
  CHECK_THROWS_AS(load_config_file((d.path / "missing.json").string()), Error);
}

TEST_CASE("partial configs keep per-algorithm defaults") {
  const ExperimentConfig c =
      config_from_string(R"({"harness": {"algorithm": "ppo", "action_mode": "dim6"}})");
  CHECK(c.harness.episodes == 1200);
  CHECK(c.harness.mode == ActionMode::kDim6);
  CHECK(config_from_string("{}").harness.algorithm == Algorithm::kDdpg);
}

TEST_CASE("config errors are reported") {
  auto code_of = [](const std::string& text) {
    try {
      config_from_string(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kOk;
  };
  CHECK(code_of(R"({"harness": {"episodez": 3}})") == ErrorCode::kConfig);
  CHECK(code_of(R"({"bogus": {}})") == ErrorCode::kConfig);
  CHECK(code_of(R"({"harness": {"episodes": "many"}})") == ErrorCode::kConfig);
  CHECK(code_of(R"({"harness": {"episodes": 100, "extension_scale": 100}})") ==
        ErrorCode::kConfig);
  CHECK(code_of(R"({"harness": {"seeds": [1, 1]}})") == ErrorCode::kConfig);
  CHECK(code_of(R"({"agents": {"ddpg": {"tau": 2}}})") == ErrorCode::kConfig);
  CHECK(code_of("{not json") == ErrorCode::kConfig);
  // extension scale only matters in pead mode
  CHECK(code_of(R"({"harness": {"action_mode": "dim6", "episodes": 100, "extension_scale": 100}})") ==
        ErrorCode::kOk);
}

TEST_CASE("dotted overrides") {
  std::string doc = "{}";
  doc = apply_override(doc, "harness.episodes", "40");
  doc = apply_override(doc, "harness.action_mode", "dim3");
  doc = apply_override(doc, "assembly_env.control.selection", "[1,1,1,0.1,0.1,0.1]");
  const ExperimentConfig c = config_from_string(doc);
  CHECK(c.harness.episodes == 40);
  CHECK(c.harness.mode == ActionMode::kDim3);
  CHECK(c.env.control.selection[3] == 0.1);
  CHECK_THROWS_AS(apply_override(doc, "", "1"), Error);
}

TEST_CASE("single-seed timing has zero spread") {
  ExperimentConfig c = quick_config(ActionMode::kDim6);
  c.harness.seeds = {0};
  const ExperimentResult r = run_experiment(c);
  std::vector<EpisodeRecord> all = r.runs[0].records;
  const auto t = summarize_timing(all);
  REQUIRE(t.size() == 1);
  CHECK(t[0].std_s == 0.0);
  CHECK(t[0].mean_s > 0.0);
  CHECK(t[0].mean_s == doctest::Approx(r.runs[0].total_opt_ms() / 1000.0));
}

TEST_CASE("evaluation pairs trained and baseline episodes") {
  ExperimentConfig c = quick_config(ActionMode::kDim6);
  c.harness.seeds = {0};
  const ExperimentResult r = run_experiment(c);
  EvalConfig eval;
  eval.episodes = 4;
  TempDir d;
  const EvalReport rep = evaluate_corners(*r.runs[0].agent, c.env, eval, d.path.string());
  REQUIRE(rep.rows.size() == 16);
  for (const char* tag : {"nominal", "robustness"}) {
    std::vector<std::uint64_t> trained, baseline;
    for (const auto& row : rep.rows) {
      if (row.tag != tag) continue;
      (row.policy == "trained" ? trained : baseline).push_back(row.seed);
    }
    CHECK(trained.size() == 4);
    CHECK(trained == baseline);
    CHECK(rep.find("trained", tag).episodes == 4);
    CHECK(fs::exists(d.path / (std::string(tag) + "_trained.csv")));
    CHECK(fs::exists(d.path / (std::string(tag) + "_baseline.csv")));
  }
  // the negative corner is the robustness case
  for (const auto& row : rep.rows) {
    if (row.tag == "robustness") {
      CHECK(row.initial_error.x < 0.0);
      CHECK(row.initial_error.alpha < 0.0);
    } else {
      CHECK(row.initial_error.x > 0.0);
    }
    // jitter stays within 10 % of the corner
    CHECK(std::abs(std::abs(row.initial_error.x) - 0.2) <= 0.02 + 1e-12);
  }
  CHECK_THROWS_AS(rep.find("trained", "sideways"), Error);
  std::stringstream csv;
  write_eval_csv(csv, rep);
  const std::string text = csv.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 17);
  CHECK(format_eval_summary(rep).find("robustness") != std::string::npos);
}

TEST_CASE("baseline from an aligned start meets no lateral force") {
  ExperimentConfig c = quick_config(ActionMode::kDim6);
  DdpgAgent agent(kObservationDim, 6, c.ddpg, 0);
  EvalConfig eval;
  eval.episodes = 2;
  eval.jitter_fraction = 0.0;
  const EvalReport rep = evaluate_policy(agent, c.env, Pose{}, eval, "aligned");
  const EvalSummary& b = rep.find("baseline", "aligned");
  CHECK(b.success_rate == 1.0);
  CHECK(b.mean_steps == 50.0);
  CHECK(b.mean_cumulative_force <= 1e-9);
}

}  // TEST_SUITE
