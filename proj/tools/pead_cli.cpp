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

// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pead/pead.h"

namespace {

struct Failure {
  pead_status status;
  std::string message;
};

void check(pead_status s, const std::string& what) {
  if (s != PEAD_OK) throw Failure{s, what + ": " + pead_last_error()};
}

struct ConfigHandle {
  pead_config* p = nullptr;
  ~ConfigHandle() { pead_config_free(p); }
};

struct CommonOptions {
  std::string config_path;
  std::string algo;
  std::string mode;
  std::optional<int> extension_scale;
  std::optional<int> episodes;
  std::optional<int> seeds;
  std::optional<int> workers;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, CommonOptions& o, bool training) {
  app->add_option("--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app->add_option("--algo", o.algo, "ddpg or ppo")->check(CLI::IsMember({"ddpg", "ppo"}));
  if (training) {
    app->add_option("--mode", o.mode, "dim3, dim6 or pead")
        ->check(CLI::IsMember({"dim3", "dim6", "pead"}));
    app->add_option("--extension-scale", o.extension_scale, "episode index of the extension");
    app->add_option("--episodes", o.episodes, "episodes per seed");
    app->add_option("--seeds", o.seeds, "number of seeds (0 .. N-1)")->check(CLI::PositiveNumber);
    app->add_option("--workers", o.workers, "seeds run in parallel")->check(CLI::PositiveNumber);
  }
  app->add_option("--set", o.sets, "override a config key, e.g. --set agents.ddpg.tau=0.005");
}

std::string seed_list(int n) {
  std::ostringstream ss;
  ss << '[';
  for (int i = 0; i < n; ++i) ss << (i ? "," : "") << i;
  ss << ']';
  return ss.str();
}

void set(pead_config* cfg, const std::string& key, const std::string& value) {
  check(pead_config_set(cfg, key.c_str(), value.c_str()), "--set " + key);
}

// File first, then named flags, then --set in order.
void build_config(ConfigHandle& h, const CommonOptions& o) {
  if (!o.config_path.empty()) {
    check(pead_config_from_file(o.config_path.c_str(), &h.p), "reading " + o.config_path);
  } else {
    check(pead_config_default(o.algo.empty() ? "ddpg" : o.algo.c_str(), &h.p), "config");
  }
  if (!o.algo.empty()) set(h.p, "harness.algorithm", '"' + o.algo + '"');
  if (!o.mode.empty()) set(h.p, "harness.action_mode", '"' + o.mode + '"');
  if (o.extension_scale) set(h.p, "harness.extension_scale", std::to_string(*o.extension_scale));
  if (o.episodes) set(h.p, "harness.episodes", std::to_string(*o.episodes));
  if (o.seeds) set(h.p, "harness.seeds", seed_list(*o.seeds));
  if (o.workers) set(h.p, "harness.workers", std::to_string(*o.workers));
  if (!o.out.empty()) {
    std::string escaped;
    for (char c : o.out) {
      if (c == '"' || c == '\\') escaped += '\\';
      escaped += c;
    }
    set(h.p, "harness.output_dir", '"' + escaped + '"');
  }
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Failure{PEAD_ERR_INVALID_ARGUMENT, "--set expects key=value, got '" + kv + "'"};
    }
    set(h.p, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

void print_progress(const pead_episode_record* r, void* user) {
  const int every = *static_cast<int*>(user);
  if (every <= 0 || (r->episode + 1) % every != 0) return;
  std::fprintf(stderr, "[%s seed %llu] episode %d reward %.3f steps %d %s%s\n", r->run_id,
               static_cast<unsigned long long>(r->seed), r->episode + 1, r->reward, r->steps,
               r->outcome, r->extended ? " (extended)" : "");
}

void train(const pead_config* cfg, int progress_every, bool quiet) {
  char* summary = nullptr;
  check(pead_train(cfg, print_progress, &progress_every, quiet ? nullptr : &summary), "train");
  if (summary) {
    std::cout << summary;
    pead_string_free(summary);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive action-dimension extension for variable-compliance insertion"};
  app.require_subcommand(1);
  app.fallthrough();
  int progress_every = 0;
  app.add_option("--progress", progress_every, "print every Nth episode to stderr");

  CommonOptions train_opts;
  bool quiet = false;
  auto* train_cmd = app.add_subcommand("train", "train agents over a seed sweep");
  add_common(train_cmd, train_opts, true);
  train_cmd->add_option("--out", train_opts.out, "output directory");
  train_cmd->add_flag("--quiet", quiet, "do not print the summary");

  CommonOptions eval_opts;
  std::string checkpoint;
  std::optional<int> eval_episodes;
  auto* eval_cmd = app.add_subcommand("eval", "trained agent vs fixed-compliance baseline");
  add_common(eval_cmd, eval_opts, false);
  eval_cmd->add_option("--checkpoint", checkpoint, "agent checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--episodes", eval_episodes, "paired seeds per corner");
  std::string eval_out;
  eval_cmd->add_option("--out", eval_out, "directory for eval.csv and trajectories");

  CommonOptions sweep_opts;
  std::vector<std::string> sweep_modes{"dim3", "dim6", "pead"};
  std::vector<int> sweep_scales;
  auto* sweep_cmd = app.add_subcommand("sweep", "train several modes / extension scales");
  add_common(sweep_cmd, sweep_opts, true);
  sweep_cmd->add_option("--out", sweep_opts.out, "parent output directory")->required();
  sweep_cmd->add_option("--modes", sweep_modes, "action modes to run")
      ->delimiter(',')
      ->check(CLI::IsMember({"dim3", "dim6", "pead"}));
  sweep_cmd->add_option("--extension-scales", sweep_scales, "pead extension scales")
      ->delimiter(',');

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "summarize per_episode.csv files");
  report_cmd->add_option("dir", report_dir, "run directory")->required();

  CommonOptions show_opts;
  auto* show_cmd = app.add_subcommand("config", "print the effective config");
  add_common(show_cmd, show_opts, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      ConfigHandle cfg;
      build_config(cfg, train_opts);
      train(cfg.p, progress_every, quiet);
    } else if (*eval_cmd) {
      ConfigHandle cfg;
      build_config(cfg, eval_opts);
      if (eval_episodes) set(cfg.p, "harness.eval.episodes", std::to_string(*eval_episodes));
      pead_agent* agent = nullptr;
      check(pead_agent_load(checkpoint.c_str(), &agent), "loading " + checkpoint);
      std::unique_ptr<pead_agent, void (*)(pead_agent*)> guard(agent, pead_agent_free);
      std::string traj, csv;
      if (!eval_out.empty()) {
        std::filesystem::create_directories(eval_out);
        traj = (std::filesystem::path(eval_out) / "trajectories").string();
        csv = (std::filesystem::path(eval_out) / "eval.csv").string();
      }
      pead_eval_report* report = nullptr;
      check(pead_evaluate(agent, cfg.p, traj.empty() ? nullptr : traj.c_str(),
                          csv.empty() ? nullptr : csv.c_str(), &report),
            "eval");
      std::unique_ptr<pead_eval_report, void (*)(pead_eval_report*)> rguard(
          report, pead_eval_report_free);
      char* text = nullptr;
      check(pead_eval_report_text(report, &text), "eval");
      std::cout << text;
      pead_string_free(text);
    } else if (*sweep_cmd) {
      const std::filesystem::path parent(sweep_opts.out);
      CommonOptions base = sweep_opts;
      base.out.clear();
      for (const auto& mode : sweep_modes) {
        std::vector<std::optional<int>> scales{std::nullopt};
        if (mode == "pead" && !sweep_scales.empty()) {
          scales.assign(sweep_scales.begin(), sweep_scales.end());
        }
        for (const auto& scale : scales) {
          CommonOptions o = base;
          o.mode = mode;
          if (scale) o.extension_scale = scale;
          ConfigHandle cfg;
          build_config(cfg, o);
          std::string run_dir = mode;
          if (scale) run_dir += "-" + std::to_string(*scale);
          set(cfg.p, "harness.output_dir", '"' + (parent / run_dir).string() + '"');
          std::cerr << "sweep: " << run_dir << '\n';
          train(cfg.p, progress_every, true);
        }
      }
      char* text = nullptr;
      check(pead_report(parent.string().c_str(), &text), "report");
      std::cout << text;
      pead_string_free(text);
    } else if (*report_cmd) {
      char* text = nullptr;
      check(pead_report(report_dir.c_str(), &text), "report");
      std::cout << text;
      pead_string_free(text);
    } else if (*show_cmd) {
      ConfigHandle cfg;
      build_config(cfg, show_opts);
      char* text = nullptr;
      check(pead_config_to_string(cfg.p, &text), "config");
      std::cout << text;
      pead_string_free(text);
    }
  } catch (const Failure& f) {
    std::cerr << "error (" << pead_status_name(f.status) << "): " << f.message << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
