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

#include "harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "error.hpp"
#include "json.hpp"

namespace pead {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Reads keys from one JSON object and rejects whatever was not consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j_.is_object(), ErrorCode::kConfig, "config: '" + path_ + "' must be an object");
  }
  ~Section() = default;

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      fail(ErrorCode::kConfig, "config: bad value for '" + path_ + "." + key + "': " + e.what());
    }
  }

  template <std::size_t N>
  void get_array(const char* key, std::array<double, N>& out) {
    std::vector<double> v(out.begin(), out.end());
    get(key, v);
    require(v.size() == N, ErrorCode::kConfig,
            "config: '" + path_ + "." + key + "' needs " + std::to_string(N) + " numbers");
    std::copy(v.begin(), v.end(), out.begin());
  }

  Section sub(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return Section(it == j_.end() ? empty() : *it, path_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      require(used_.count(it.key()) > 0, ErrorCode::kConfig,
              "config: unknown key '" + path_ + "." + it.key() + "'");
    }
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

json pose_json(const Pose& p) {
  const auto a = p.to_array();
  return json(std::vector<double>(a.begin(), a.end()));
}

json wrench_json(const Wrench& w) {
  const auto a = w.to_array();
  return json(std::vector<double>(a.begin(), a.end()));
}

void read_env(Section s, EnvConfig& env) {
  {
    Section g = s.sub("geometry");
    Geometry& x = env.geometry;
    g.get("peg_side", x.peg_side);
    g.get("hole_side", x.hole_side);
    g.get("peg_length", x.peg_length);
    g.get("hole_depth", x.hole_depth);
    g.get("spacing_x", x.spacing_x);
    g.get("spacing_y", x.spacing_y);
    g.get("peg_count", x.peg_count);
    g.get("contact_stiffness", x.contact_stiffness);
    g.get("tip_stiffness", x.tip_stiffness);
    g.get("points_per_edge", x.points_per_edge);
    g.finish();
  }
  {
    Section c = s.sub("control");
    ControlConfig& x = env.control;
    c.get("initial_depth", x.initial_depth);
    c.get("target_depth", x.target_depth);
    c.get("target_steps", x.target_steps);
    c.get("max_steps", x.max_steps);
    c.get("max_translation_step", x.max_translation_step);
    c.get("max_rotation_step", x.max_rotation_step);
    c.get_array("selection", x.selection);
    auto ref = x.f_ref.to_array();
    c.get_array("f_ref", ref);
    x.f_ref = Wrench::from_array(ref);
    c.get("gain_clamp", x.gain_clamp);
    c.get("jam_force", x.jam_force);
    c.get("jam_moment", x.jam_moment);
    c.get("detect_force", x.detect_force);
    c.get("reset_attempts", x.reset_attempts);
    c.get("obs_force_scale", x.obs_force_scale);
    c.get("obs_moment_scale", x.obs_moment_scale);
    c.finish();
  }
  {
    Section r = s.sub("reward");
    RewardConfig& x = env.reward;
    r.get("h_z", x.h_z);
    r.get("h_f", x.h_f);
    r.get("h_m", x.h_m);
    r.get("force_norm", x.force_norm);
    r.get("moment_norm", x.moment_norm);
    r.get("success_bonus", x.success_bonus);
    r.finish();
  }
  s.get_array("baseline_gains", env.baseline.k);
  auto range = env.error_range.to_array();
  s.get_array("error_range", range);
  env.error_range = Pose::from_array(range);
  s.finish();
}

json env_json(const EnvConfig& env) {
  const Geometry& g = env.geometry;
  const ControlConfig& c = env.control;
  const RewardConfig& r = env.reward;
  json j;
  j["geometry"] = {{"peg_side", g.peg_side},
                   {"hole_side", g.hole_side},
                   {"peg_length", g.peg_length},
                   {"hole_depth", g.hole_depth},
                   {"spacing_x", g.spacing_x},
                   {"spacing_y", g.spacing_y},
                   {"peg_count", g.peg_count},
                   {"contact_stiffness", g.contact_stiffness},
                   {"tip_stiffness", g.tip_stiffness},
                   {"points_per_edge", g.points_per_edge}};
  j["control"] = {{"initial_depth", c.initial_depth},
                  {"target_depth", c.target_depth},
                  {"target_steps", c.target_steps},
                  {"max_steps", c.max_steps},
                  {"max_translation_step", c.max_translation_step},
                  {"max_rotation_step", c.max_rotation_step},
                  {"selection", c.selection},
                  {"f_ref", wrench_json(c.f_ref)},
                  {"gain_clamp", c.gain_clamp},
                  {"jam_force", c.jam_force},
                  {"jam_moment", c.jam_moment},
                  {"detect_force", c.detect_force},
                  {"reset_attempts", c.reset_attempts},
                  {"obs_force_scale", c.obs_force_scale},
                  {"obs_moment_scale", c.obs_moment_scale}};
  j["reward"] = {{"h_z", r.h_z},
                 {"h_f", r.h_f},
                 {"h_m", r.h_m},
                 {"force_norm", r.force_norm},
                 {"moment_norm", r.moment_norm},
                 {"success_bonus", r.success_bonus}};
  j["baseline_gains"] = env.baseline.k;
  j["error_range"] = pose_json(env.error_range);
  return j;
}

void read_ddpg(Section s, DdpgConfig& x) {
  s.get("hidden", x.hidden);
  s.get("lr_actor", x.lr_actor);
  s.get("lr_critic", x.lr_critic);
  s.get("tau", x.tau);
  s.get("gamma", x.gamma);
  s.get("batch_size", x.batch_size);
  s.get("buffer_capacity", x.buffer_capacity);
  s.get("warmup_episodes", x.warmup_episodes);
  s.get("updates_per_step", x.updates_per_step);
  s.get("sigma0", x.sigma0);
  s.get("sigma_decay", x.sigma_decay);
  s.get("sigma_min", x.sigma_min);
  s.get("action_bound", x.action_bound);
  s.finish();
}

json ddpg_json(const DdpgConfig& x) {
  return {{"hidden", x.hidden},
          {"lr_actor", x.lr_actor},
          {"lr_critic", x.lr_critic},
          {"tau", x.tau},
          {"gamma", x.gamma},
          {"batch_size", x.batch_size},
          {"buffer_capacity", x.buffer_capacity},
          {"warmup_episodes", x.warmup_episodes},
          {"updates_per_step", x.updates_per_step},
          {"sigma0", x.sigma0},
          {"sigma_decay", x.sigma_decay},
          {"sigma_min", x.sigma_min},
          {"action_bound", x.action_bound}};
}

void read_ppo(Section s, PpoConfig& x) {
  s.get("hidden", x.hidden);
  s.get("lr_actor", x.lr_actor);
  s.get("lr_critic", x.lr_critic);
  s.get("gamma", x.gamma);
  s.get("clip_ratio", x.clip_ratio);
  s.get("rollout_steps", x.rollout_steps);
  s.get("epochs", x.epochs);
  s.get("minibatch", x.minibatch);
  s.get("log_std_min", x.log_std_min);
  s.get("log_std_max", x.log_std_max);
  s.get("initial_log_std", x.initial_log_std);
  s.get("action_bound", x.action_bound);
  s.get("value_scale", x.value_scale);
  s.finish();
}

json ppo_json(const PpoConfig& x) {
  return {{"hidden", x.hidden},
          {"lr_actor", x.lr_actor},
          {"lr_critic", x.lr_critic},
          {"gamma", x.gamma},
          {"clip_ratio", x.clip_ratio},
          {"rollout_steps", x.rollout_steps},
          {"epochs", x.epochs},
          {"minibatch", x.minibatch},
          {"log_std_min", x.log_std_min},
          {"log_std_max", x.log_std_max},
          {"initial_log_std", x.initial_log_std},
          {"action_bound", x.action_bound},
          {"value_scale", x.value_scale}};
}

json parse_document(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("config: not valid JSON: ") + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write '" + p.string() + "'");
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Outcome outcome_from_string(const std::string& s) {
  for (Outcome o : {Outcome::kRunning, Outcome::kSuccess, Outcome::kJammed, Outcome::kTimeout}) {
    if (s == to_string(o)) return o;
  }
  fail(ErrorCode::kIo, "unknown outcome '" + s + "'");
}

std::string fmt(double v, int prec) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(prec) << v;
  return ss.str();
}

std::string pm(double mean, double sd, int prec) {
  return fmt(mean, prec) + " ± " + fmt(sd, prec);
}

const char* table_label(ActionMode m) {
  switch (m) {
    case ActionMode::kDim3:
      return "3-dim";
    case ActionMode::kDim6:
      return "6-dim";
    case ActionMode::kPead:
      return "PEAD";
  }
  return "?";
}

}  // namespace

const char* to_string(ActionMode m) {
  switch (m) {
    case ActionMode::kDim3:
      return "dim3";
    case ActionMode::kDim6:
      return "dim6";
    case ActionMode::kPead:
      return "pead";
  }
  return "?";
}

ActionMode action_mode_from_string(const std::string& s) {
  if (s == "dim3") return ActionMode::kDim3;
  if (s == "dim6") return ActionMode::kDim6;
  if (s == "pead") return ActionMode::kPead;
  fail(ErrorCode::kInvalidArgument,
       "unknown action mode '" + s + "' (expected dim3, dim6 or pead)");
}

std::string ExperimentConfig::run_id() const {
  if (!harness.run_id.empty()) return harness.run_id;
  std::string id = std::string(to_string(harness.algorithm)) + "-" + to_string(harness.mode);
  if (harness.mode == ActionMode::kPead) id += "-" + std::to_string(harness.extension_scale);
  return id;
}

void ExperimentConfig::validate() const {
  const HarnessConfig& h = harness;
  require(h.episodes > 0, ErrorCode::kConfig, "harness: episodes must be positive");
  require(!h.seeds.empty(), ErrorCode::kConfig, "harness: seed list is empty");
  std::set<std::uint64_t> unique(h.seeds.begin(), h.seeds.end());
  require(unique.size() == h.seeds.size(), ErrorCode::kConfig, "harness: duplicate seeds");
  if (h.mode == ActionMode::kPead) {
    require(h.extension_scale >= 0 && h.extension_scale < h.episodes, ErrorCode::kConfig,
            "harness: extension_scale (" + std::to_string(h.extension_scale) +
                ") must be below episodes (" + std::to_string(h.episodes) + ")");
  }
  require(h.workers >= 1, ErrorCode::kConfig, "harness: workers must be >= 1");
  require(h.eval.episodes > 0, ErrorCode::kConfig, "harness: eval episodes must be positive");
  require(h.eval.jitter_fraction >= 0.0 && h.eval.jitter_fraction <= 1.0, ErrorCode::kConfig,
          "harness: eval jitter_fraction must lie in [0, 1]");
  require(run_id().find_first_of(",\n\r\"") == std::string::npos, ErrorCode::kConfig,
          "harness: run_id may not contain commas, quotes or newlines");
  env.validate();
  ddpg.validate();
  ppo.validate();
}

ExperimentConfig default_experiment(Algorithm algo) {
  ExperimentConfig cfg;
  cfg.harness.algorithm = algo;
  if (algo == Algorithm::kPpo) {
    cfg.harness.episodes = 1200;
    cfg.harness.extension_scale = 800;
  }
  return cfg;
}

ExperimentConfig config_from_string(const std::string& text) {
  const json doc = parse_document(text);
  Section root(doc, "config");
  Section h = root.sub("harness");
  std::string algo = "ddpg";
  h.get("algorithm", algo);
  ExperimentConfig cfg = default_experiment(algorithm_from_string(algo));
  HarnessConfig& x = cfg.harness;
  std::string mode = to_string(x.mode);
  h.get("action_mode", mode);
  x.mode = action_mode_from_string(mode);
  h.get("extension_scale", x.extension_scale);
  h.get("episodes", x.episodes);
  h.get("seeds", x.seeds);
  h.get("output_dir", x.output_dir);
  h.get("run_id", x.run_id);
  h.get("learn", x.learn);
  h.get("record_timing", x.record_timing);
  h.get("checkpoints", x.checkpoints);
  h.get("workers", x.workers);
  {
    Section e = h.sub("eval");
    e.get("episodes", x.eval.episodes);
    e.get("jitter_fraction", x.eval.jitter_fraction);
    e.get("seed", x.eval.seed);
    e.finish();
  }
  h.finish();
  read_env(root.sub("assembly_env"), cfg.env);
  {
    Section a = root.sub("agents");
    read_ddpg(a.sub("ddpg"), cfg.ddpg);
    read_ppo(a.sub("ppo"), cfg.ppo);
    a.finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

std::string config_to_string(const ExperimentConfig& cfg) {
  const HarnessConfig& h = cfg.harness;
  json j;
  j["harness"] = {{"algorithm", to_string(h.algorithm)},
                  {"action_mode", to_string(h.mode)},
                  {"extension_scale", h.extension_scale},
                  {"episodes", h.episodes},
                  {"seeds", h.seeds},
                  {"output_dir", h.output_dir},
                  {"run_id", h.run_id},
                  {"learn", h.learn},
                  {"record_timing", h.record_timing},
                  {"checkpoints", h.checkpoints},
                  {"workers", h.workers},
                  {"eval",
                   {{"episodes", h.eval.episodes},
                    {"jitter_fraction", h.eval.jitter_fraction},
                    {"seed", h.eval.seed}}}};
  j["assembly_env"] = env_json(cfg.env);
  j["agents"] = {{"ddpg", ddpg_json(cfg.ddpg)}, {"ppo", ppo_json(cfg.ppo)}};
  return j.dump(2) + "\n";
}

ExperimentConfig load_config_file(const std::string& path) {
  return config_from_string(read_file(path));
}

void save_config_file(const ExperimentConfig& cfg, const std::string& path) {
  auto out = open_out(path);
  out << config_to_string(cfg);
}

std::string apply_override(const std::string& document, const std::string& dotted_key,
                           const std::string& value) {
  json doc = parse_document(document);
  require(doc.is_object(), ErrorCode::kConfig, "config: top level must be an object");
  require(!dotted_key.empty() && dotted_key.front() != '.' && dotted_key.back() != '.',
          ErrorCode::kConfig, "config: bad key '" + dotted_key + "'");
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot - start);
    require(!part.empty(), ErrorCode::kConfig, "config: bad key '" + dotted_key + "'");
    if (dot == std::string::npos) {
      json v = json::parse(value, nullptr, false);
      (*node)[part] = v.is_discarded() ? json(value) : v;
      break;
    }
    json& next = (*node)[part];
    if (next.is_null()) next = json::object();
    require(next.is_object(), ErrorCode::kConfig,
            "config: '" + part + "' in '" + dotted_key + "' is not a section");
    node = &next;
    start = dot + 1;
  }
  return doc.dump(2) + "\n";
}

double SeedRun::total_opt_ms() const {
  double t = 0.0;
  for (const auto& r : records) t += r.opt_ms;
  return t;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + stream + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::unique_ptr<Agent> make_agent(const ExperimentConfig& cfg, int action_dim,
                                  std::uint64_t seed) {
  if (cfg.harness.algorithm == Algorithm::kDdpg) {
    return std::make_unique<DdpgAgent>(kObservationDim, action_dim, cfg.ddpg, seed);
  }
  return std::make_unique<PpoAgent>(kObservationDim, action_dim, cfg.ppo, seed);
}

SeedRunner::SeedRunner(const ExperimentConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), map_(canonical_mapping()), env_(cfg.env), run_id_(cfg.run_id()) {
  const int dim = cfg_.harness.mode == ActionMode::kDim6 ? static_cast<int>(map_.high_dim())
                                                          : static_cast<int>(map_.low_dim());
  run_.seed = seed;
  run_.agent = make_agent(cfg_, dim, derive_seed(seed, 0));
  run_.records.reserve(static_cast<std::size_t>(cfg_.harness.episodes));
}

bool SeedRunner::done() const {
  return static_cast<int>(run_.records.size()) >= cfg_.harness.episodes;
}

const EpisodeRecord& SeedRunner::step() {
  require(!done(), ErrorCode::kState, "seed runner: all episodes already ran");
  const HarnessConfig& h = cfg_.harness;
  Agent& agent = *run_.agent;
  const int ep = static_cast<int>(run_.records.size());
  double extend_ms = 0.0;
  // PPO only widens once its rollout store has been flushed, which can be
  // a few episodes after extension_scale.
  if (h.mode == ActionMode::kPead && h.learn && !agent.extended() && ep >= h.extension_scale &&
      agent.ready_for_extension()) {
    const double before = agent.optimizer_ms();
    agent.extend(map_);
    extend_ms = agent.optimizer_ms() - before;
    run_.extension_episode = ep;
  }
  EpisodeOptions opt;
  opt.env_seed = derive_seed(run_.seed, static_cast<std::uint64_t>(ep) + 1);
  opt.episode = ep;
  opt.train = h.learn;
  opt.explore = true;
  opt.map = &map_;
  const EpisodeResult res = run_episode(agent, env_, opt);

  EpisodeRecord rec;
  rec.run_id = run_id_;
  rec.algorithm = h.algorithm;
  rec.mode = h.mode;
  rec.seed = run_.seed;
  rec.episode = ep;
  rec.reward = res.total_reward;
  rec.steps = res.steps;
  rec.outcome = res.outcome;
  rec.opt_ms = h.record_timing ? res.optimizer_ms + extend_ms : 0.0;
  rec.extended = agent.extended();
  run_.records.push_back(rec);
  return run_.records.back();
}

SeedRun SeedRunner::finish() && { return std::move(run_); }

SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const ProgressFn& progress) {
  SeedRunner runner(cfg, seed);
  while (!runner.done()) {
    const EpisodeRecord& rec = runner.step();
    if (progress) progress(rec);
  }
  return std::move(runner).finish();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  ExperimentResult result;
  result.config = cfg;
  const auto& seeds = cfg.harness.seeds;
  result.runs.resize(seeds.size());

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.harness.workers), seeds.size());
  std::mutex progress_mu;
  ProgressFn locked;
  if (progress) {
    locked = [&](const EpisodeRecord& r) {
      std::lock_guard<std::mutex> lock(progress_mu);
      progress(r);
    };
  }
  if (workers <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      result.runs[i] = run_seed(cfg, seeds[i], locked);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < seeds.size(); i = next++) {
            result.runs[i] = run_seed(cfg, seeds[i], locked);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<EpisodeRecord> all;
  for (const auto& r : result.runs) all.insert(all.end(), r.records.begin(), r.records.end());
  result.aggregate = aggregate_rewards(all);

  if (cfg.harness.output_dir.empty()) return result;
  const fs::path dir(cfg.harness.output_dir);
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "per_episode.csv");
    write_per_episode_csv(out, all);
  }
  {
    auto out = open_out(dir / "aggregate.csv");
    write_aggregate_csv(out, result.aggregate);
  }
  save_config_file(cfg, (dir / "config.json").string());
  {
    auto out = open_out(dir / "summary.txt");
    out << format_summary(summarize_runs(all), summarize_timing(all));
    if (cfg.harness.mode == ActionMode::kPead) {
      out << "\nExtension events\n";
      for (const auto& r : result.runs) {
        out << "  seed " << r.seed << ": ";
        if (r.extension_episode >= 0) {
          out << "extended at episode " << r.extension_episode << "\n";
        } else {
          out << "not extended\n";
        }
      }
    }
  }
  if (cfg.harness.mode == ActionMode::kPead) {
    auto out = open_out(dir / "extensions.csv");
    out << "seed,episode\n";
    for (const auto& r : result.runs) out << r.seed << ',' << r.extension_episode << '\n';
  }
  if (cfg.harness.checkpoints) {
    fs::create_directories(dir / "checkpoints");
    for (const auto& r : result.runs) {
      auto out = open_out(dir / "checkpoints" / ("seed_" + std::to_string(r.seed) + ".ckpt"));
      r.agent->save(out);
    }
  }
  return result;
}

std::vector<AggregatePoint> aggregate_rewards(const std::vector<EpisodeRecord>& records) {
  std::map<int, std::vector<double>> by_episode;
  for (const auto& r : records) by_episode[r.episode].push_back(r.reward);
  std::vector<AggregatePoint> out;
  out.reserve(by_episode.size());
  for (const auto& [ep, v] : by_episode) {
    AggregatePoint p;
    p.episode = ep;
    p.min = *std::min_element(v.begin(), v.end());
    p.max = *std::max_element(v.begin(), v.end());
    p.mean = std::clamp(mean_of(v), p.min, p.max);
    out.push_back(p);
  }
  return out;
}

double final_window_mean(const std::vector<double>& rewards, int window) {
  require(!rewards.empty() && window > 0, ErrorCode::kInvalidArgument,
          "final_window_mean: empty reward list or window");
  const auto n = std::min(rewards.size(), static_cast<std::size_t>(window));
  return std::accumulate(rewards.end() - static_cast<std::ptrdiff_t>(n), rewards.end(), 0.0) /
         static_cast<double>(n);
}

int episodes_to_threshold(const std::vector<double>& rewards, int ma_window, int final_window,
                          double fraction) {
  require(ma_window > 0 && fraction > 0.0 && fraction <= 1.0, ErrorCode::kInvalidArgument,
          "episodes_to_threshold: bad window or fraction");
  const double plateau = final_window_mean(rewards, final_window);
  const double threshold = plateau >= 0.0 ? fraction * plateau : (2.0 - fraction) * plateau;
  const auto w = static_cast<std::size_t>(ma_window);
  double sum = 0.0;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    sum += rewards[i];
    if (i >= w) sum -= rewards[i - w];
    if (i + 1 >= w && sum / static_cast<double>(w) >= threshold) return static_cast<int>(i + 1);
  }
  return static_cast<int>(rewards.size());
}

void write_per_episode_csv(std::ostream& os, const std::vector<EpisodeRecord>& records) {
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << "run_id,algo,mode,seed,episode,reward,steps,outcome,opt_ms,extended_flag\n";
  for (const auto& r : records) {
    os << r.run_id << ',' << to_string(r.algorithm) << ',' << to_string(r.mode) << ','
       << r.seed << ',' << r.episode << ',' << r.reward << ',' << r.steps << ','
       << to_string(r.outcome) << ',' << r.opt_ms << ',' << (r.extended ? 1 : 0) << '\n';
  }
  os.precision(old);
}

std::vector<EpisodeRecord> read_per_episode_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) &&
              line == "run_id,algo,mode,seed,episode,reward,steps,outcome,opt_ms,extended_flag",
          ErrorCode::kIo, "per_episode.csv: unexpected header");
  std::vector<EpisodeRecord> out;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    require(f.size() == 10, ErrorCode::kIo,
            "per_episode.csv line " + std::to_string(line_no) + ": expected 10 fields");
    try {
      EpisodeRecord r;
      r.run_id = f[0];
      r.algorithm = algorithm_from_string(f[1]);
      r.mode = action_mode_from_string(f[2]);
      r.seed = std::stoull(f[3]);
      r.episode = std::stoi(f[4]);
      r.reward = std::stod(f[5]);
      r.steps = std::stoi(f[6]);
      r.outcome = outcome_from_string(f[7]);
      r.opt_ms = std::stod(f[8]);
      r.extended = f[9] == "1";
      out.push_back(r);
    } catch (const std::exception& e) {
      fail(ErrorCode::kIo,
           "per_episode.csv line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_aggregate_csv(std::ostream& os, const std::vector<AggregatePoint>& agg) {
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << "episode,mean,min,max\n";
  for (const auto& p : agg) os << p.episode << ',' << p.mean << ',' << p.min << ',' << p.max << '\n';
  os.precision(old);
}

std::vector<TimingRow> summarize_timing(const std::vector<EpisodeRecord>& records) {
  // (algo, mode) -> (run_id, seed) -> seconds
  std::map<std::pair<int, int>, std::map<std::pair<std::string, std::uint64_t>, double>> groups;
  for (const auto& r : records) {
    groups[{static_cast<int>(r.algorithm), static_cast<int>(r.mode)}][{r.run_id, r.seed}] +=
        r.opt_ms / 1000.0;
  }
  std::vector<TimingRow> rows;
  for (const auto& [key, per_seed] : groups) {
    std::vector<double> v;
    for (const auto& [_, s] : per_seed) v.push_back(s);
    TimingRow row;
    row.algorithm = static_cast<Algorithm>(key.first);
    row.mode = static_cast<ActionMode>(key.second);
    row.runs = static_cast<int>(v.size());
    row.mean_s = mean_of(v);
    row.std_s = sample_std(v);
    rows.push_back(row);
  }
  return rows;
}

std::string format_timing_table(const std::vector<TimingRow>& rows, bool with_reference) {
  const ActionMode modes[] = {ActionMode::kDim3, ActionMode::kDim6, ActionMode::kPead};
  std::ostringstream os;
  os << "COMPARISON OF TIME-EFFICIENCY (optimizer + extension wall time, mean ± std)\n";
  os << std::left << std::setw(10) << "Algorithm";
  for (ActionMode m : modes) os << std::setw(26) << table_label(m);
  os << '\n';
  for (Algorithm a : {Algorithm::kDdpg, Algorithm::kPpo}) {
    bool any = false;
    std::ostringstream line;
    line << std::left << std::setw(10) << (a == Algorithm::kDdpg ? "DDPG" : "PPO");
    for (ActionMode m : modes) {
      std::string cell = "-";
      for (const auto& r : rows) {
        if (r.algorithm == a && r.mode == m) {
          cell = pm(r.mean_s, r.std_s, 3) + " s (n=" + std::to_string(r.runs) + ")";
          any = true;
        }
      }
      // setw counts bytes; the plus-minus sign is two bytes wide.
      line << std::setw(cell == "-" ? 26 : 27) << cell;
    }
    if (any) os << line.str() << '\n';
  }
  if (with_reference) {
    os << "Reference seconds from a full-scale simulator run (scale not comparable):\n"
       << "DDPG      628.0 ± 18.7 / 679.8 ± 27.4 / 657.9 ± 43.6  (3-dim / 6-dim / PEAD)\n"
       << "PPO       1563.7 ± 55.2 / 1625.9 ± 52.6 / 1596.5 ± 78.3  (3-dim / 6-dim / PEAD)\n";
  }
  return os.str();
}

double RunSummary::mean_final() const { return mean_of(final_mean); }

double RunSummary::mean_to_threshold() const {
  std::vector<double> v(to_threshold.begin(), to_threshold.end());
  return mean_of(v);
}

std::vector<RunSummary> summarize_runs(const std::vector<EpisodeRecord>& records,
                                       int final_window) {
  std::vector<RunSummary> out;
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::map<std::uint64_t, std::map<int, const EpisodeRecord*>>> series;
  for (const auto& r : records) {
    if (!index.count(r.run_id)) {
      index[r.run_id] = out.size();
      RunSummary s;
      s.run_id = r.run_id;
      s.algorithm = r.algorithm;
      s.mode = r.mode;
      out.push_back(s);
    }
    series[r.run_id][r.seed][r.episode] = &r;
  }
  for (auto& s : out) {
    for (const auto& [seed, eps] : series[s.run_id]) {
      std::vector<double> rewards;
      double opt = 0.0;
      for (const auto& [_, r] : eps) {
        rewards.push_back(r->reward);
        opt += r->opt_ms / 1000.0;
      }
      s.seeds.push_back(seed);
      s.final_mean.push_back(final_window_mean(rewards, final_window));
      s.to_threshold.push_back(episodes_to_threshold(rewards, 10, final_window));
      s.opt_s.push_back(opt);
    }
  }
  return out;
}

std::string format_summary(const std::vector<RunSummary>& runs,
                           const std::vector<TimingRow>& timing) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "run_id" << std::setw(6) << "algo" << std::setw(6)
     << "mode" << std::setw(7) << "seeds" << std::setw(22) << "final-50 reward"
     << std::setw(22) << "episodes-to-threshold" << "optimizer s\n";
  for (const auto& r : runs) {
    std::vector<double> ett(r.to_threshold.begin(), r.to_threshold.end());
    os << std::left << std::setw(24) << r.run_id << std::setw(6) << to_string(r.algorithm)
       << std::setw(6) << to_string(r.mode) << std::setw(7) << r.seeds.size() << std::setw(23)
       << pm(r.mean_final(), sample_std(r.final_mean), 3) << std::setw(23)
       << pm(mean_of(ett), sample_std(ett), 1) << pm(mean_of(r.opt_s), sample_std(r.opt_s), 3)
       << '\n';
  }
  os << "\nPer seed\n";
  for (const auto& r : runs) {
    for (std::size_t i = 0; i < r.seeds.size(); ++i) {
      os << "  " << r.run_id << " seed " << r.seeds[i] << ": final-50 " << fmt(r.final_mean[i], 3)
         << ", to-threshold " << r.to_threshold[i] << ", optimizer " << fmt(r.opt_s[i], 3)
         << " s\n";
    }
  }
  os << '\n' << format_timing_table(timing);
  return os.str();
}

std::string report_directory(const std::string& dir) {
  require(fs::is_directory(dir), ErrorCode::kIo, "report: '" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() == "per_episode.csv") files.push_back(e.path());
  }
  require(!files.empty(), ErrorCode::kIo, "report: no per_episode.csv found under '" + dir + "'");
  std::sort(files.begin(), files.end());
  std::vector<EpisodeRecord> all;
  for (const auto& f : files) {
    std::ifstream in(f);
    require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + f.string() + "'");
    auto recs = read_per_episode_csv(in);
    all.insert(all.end(), recs.begin(), recs.end());
  }
  require(!all.empty(), ErrorCode::kIo, "report: per_episode.csv files under '" + dir +
                                            "' hold no rows");
  return format_summary(summarize_runs(all), summarize_timing(all));
}

const EvalSummary& EvalReport::find(const std::string& policy, const std::string& tag) const {
  for (const auto& s : summaries) {
    if (s.policy == policy && s.tag == tag) return s;
  }
  fail(ErrorCode::kInvalidArgument, "eval report has no row for " + policy + "/" + tag);
}

EvalReport evaluate_policy(Agent& agent, const EnvConfig& env_cfg, const Pose& initial_error,
                           const EvalConfig& eval, const std::string& tag,
                           const std::string& trajectory_dir) {
  require(agent.state_dim() == kObservationDim, ErrorCode::kShapeMismatch,
          "eval: checkpoint expects " + std::to_string(agent.state_dim()) +
              "-dim states, the environment produces " + std::to_string(kObservationDim));
  const MappingMatrix map = canonical_mapping();
  require(agent.action_dim() == map.high_dim() || agent.action_dim() == map.low_dim(),
          ErrorCode::kShapeMismatch,
          "eval: unsupported action dimension " + std::to_string(agent.action_dim()));
  AssemblyEnv env(env_cfg);
  const auto range = env_cfg.error_range.to_array();
  const auto base = initial_error.to_array();
  EvalReport report;
  for (int i = 0; i < eval.episodes; ++i) {
    const std::uint64_t seed = derive_seed(eval.seed, static_cast<std::uint64_t>(i));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::array<double, 6> e{};
    for (int k = 0; k < 6; ++k) e[k] = base[k] + eval.jitter_fraction * range[k] * u(rng);
    const Pose err = Pose::from_array(e);
    for (const char* policy : {"trained", "baseline"}) {
      EpisodeOptions opt;
      opt.fixed_error = err;
      opt.train = false;
      opt.explore = false;
      opt.map = &map;
      opt.baseline = std::string(policy) == "baseline";
      const bool dump = i == 0 && !trajectory_dir.empty();
      env.set_recording(dump);
      const EpisodeResult res = run_episode(agent, env, opt);
      if (dump) {
        fs::create_directories(trajectory_dir);
        auto out = open_out(fs::path(trajectory_dir) / (tag + "_" + policy + ".csv"));
        write_trajectory_csv(out, env.trajectory());
      }
      EvalRow row;
      row.policy = policy;
      row.tag = tag;
      row.seed = seed;
      row.initial_error = err;
      row.outcome = res.outcome;
      row.steps = res.steps;
      row.reward = res.total_reward;
      row.cumulative_force = res.cumulative_force;
      row.cumulative_moment = res.cumulative_moment;
      report.rows.push_back(row);
    }
  }
  env.set_recording(false);
  for (const char* policy : {"trained", "baseline"}) {
    EvalSummary s;
    s.policy = policy;
    s.tag = tag;
    std::vector<double> steps, force, moment;
    int ok = 0;
    for (const auto& r : report.rows) {
      if (r.policy != policy) continue;
      ++s.episodes;
      steps.push_back(r.steps);
      if (r.outcome == Outcome::kSuccess) {
        ++ok;
        force.push_back(r.cumulative_force);
        moment.push_back(r.cumulative_moment);
      }
    }
    s.success_rate = s.episodes ? static_cast<double>(ok) / s.episodes : 0.0;
    s.mean_steps = mean_of(steps);
    s.mean_cumulative_force = mean_of(force);
    s.mean_cumulative_moment = mean_of(moment);
    report.summaries.push_back(s);
  }
  return report;
}

EvalReport evaluate_corners(Agent& agent, const EnvConfig& env_cfg, const EvalConfig& eval,
                            const std::string& trajectory_dir) {
  const Pose pos = env_cfg.error_range;
  auto neg_a = pos.to_array();
  for (double& v : neg_a) v = -v;
  EvalReport out = evaluate_policy(agent, env_cfg, pos, eval, "nominal", trajectory_dir);
  EvalReport neg =
      evaluate_policy(agent, env_cfg, Pose::from_array(neg_a), eval, "robustness", trajectory_dir);
  out.rows.insert(out.rows.end(), neg.rows.begin(), neg.rows.end());
  out.summaries.insert(out.summaries.end(), neg.summaries.begin(), neg.summaries.end());
  return out;
}

void write_eval_csv(std::ostream& os, const EvalReport& report) {
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << "policy,tag,seed,x,y,z,alpha,beta,gamma,outcome,steps,reward,cum_force,cum_moment\n";
  for (const auto& r : report.rows) {
    const Pose& e = r.initial_error;
    os << r.policy << ',' << r.tag << ',' << r.seed << ',' << e.x << ',' << e.y << ',' << e.z
       << ',' << e.alpha << ',' << e.beta << ',' << e.gamma << ',' << to_string(r.outcome) << ','
       << r.steps << ',' << r.reward << ',' << r.cumulative_force << ','
       << r.cumulative_moment << '\n';
  }
  os.precision(old);
}

std::string format_eval_summary(const EvalReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "policy" << std::setw(12) << "tag" << std::setw(10)
     << "episodes" << std::setw(10) << "success" << std::setw(12) << "mean steps"
     << std::setw(18) << "cum |force| N" << "cum |moment| N mm\n";
  for (const auto& s : report.summaries) {
    os << std::left << std::setw(10) << s.policy << std::setw(12) << s.tag << std::setw(10)
       << s.episodes << std::setw(10) << fmt(s.success_rate, 3) << std::setw(12)
       << fmt(s.mean_steps, 1) << std::setw(18) << fmt(s.mean_cumulative_force, 2)
       << fmt(s.mean_cumulative_moment, 2) << '\n';
  }
  return os.str();
}

}  // namespace pead
