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

#include "pead/pead.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "agent.hpp"
#include "error.hpp"
#include "harness.hpp"
#include "mapping.hpp"

struct pead_config {
  std::string document;  // as supplied, overrides applied
  pead::ExperimentConfig parsed;
};

struct pead_agent {
  std::unique_ptr<pead::Agent> agent;
};

struct pead_eval_report {
  pead::EvalReport report;
};

namespace {

thread_local std::string g_last_error;

pead_status to_status(pead::ErrorCode c) {
  switch (c) {
    case pead::ErrorCode::kOk:
      return PEAD_OK;
    case pead::ErrorCode::kInvalidArgument:
      return PEAD_ERR_INVALID_ARGUMENT;
    case pead::ErrorCode::kShapeMismatch:
      return PEAD_ERR_SHAPE;
    case pead::ErrorCode::kNumerical:
      return PEAD_ERR_NUMERICAL;
    case pead::ErrorCode::kState:
      return PEAD_ERR_STATE;
    case pead::ErrorCode::kIo:
      return PEAD_ERR_IO;
    case pead::ErrorCode::kConfig:
      return PEAD_ERR_CONFIG;
  }
  return PEAD_ERR_INTERNAL;
}

template <typename Fn>
pead_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return PEAD_OK;
  } catch (const pead::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PEAD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PEAD_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return PEAD_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  pead::require(p != nullptr, pead::ErrorCode::kInvalidArgument,
                std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

pead_config* make_config(std::string document) {
  auto cfg = std::make_unique<pead_config>();
  cfg->parsed = pead::config_from_string(document);
  cfg->document = std::move(document);
  return cfg.release();
}

}  // namespace

extern "C" {

const char* pead_version(void) { return "1.0.0"; }

const char* pead_last_error(void) { return g_last_error.c_str(); }

const char* pead_status_name(pead_status status) {
  switch (status) {
    case PEAD_OK:
      return "ok";
    case PEAD_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case PEAD_ERR_SHAPE:
      return "shape mismatch";
    case PEAD_ERR_NUMERICAL:
      return "numerical error";
    case PEAD_ERR_STATE:
      return "invalid state";
    case PEAD_ERR_IO:
      return "i/o error";
    case PEAD_ERR_CONFIG:
      return "config error";
    case PEAD_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

void pead_string_free(char* s) { std::free(s); }

pead_status pead_project(const double* full6, double* reduced3) {
  return guarded([&] {
    need(full6, "full6");
    need(reduced3, "reduced3");
    const pead::MappingMatrix map = pead::canonical_mapping();
    const pead::ActionVec r = pead::project(Eigen::Map<const Eigen::VectorXd>(full6, 6), map);
    for (int i = 0; i < 3; ++i) reduced3[i] = r(i);
  });
}

pead_status pead_lift(const double* reduced3, double* full6) {
  return guarded([&] {
    need(reduced3, "reduced3");
    need(full6, "full6");
    const pead::MappingMatrix map = pead::canonical_mapping();
    const pead::ActionVec f = pead::lift(Eigen::Map<const Eigen::VectorXd>(reduced3, 3), map);
    for (int i = 0; i < 6; ++i) full6[i] = f(i);
  });
}

pead_status pead_config_default(const char* algorithm, pead_config** out) {
  return guarded([&] {
    need(algorithm, "algorithm");
    need(out, "out");
    *out = nullptr;
    pead::algorithm_from_string(algorithm);
    *out = make_config(pead::apply_override("{}", "harness.algorithm",
                                            "\"" + std::string(algorithm) + "\""));
  });
}

pead_status pead_config_from_string(const char* text, pead_config** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = nullptr;
    *out = make_config(text);
  });
}

pead_status pead_config_from_file(const char* path, pead_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    std::ifstream in(path);
    pead::require(static_cast<bool>(in), pead::ErrorCode::kIo,
                  std::string("cannot open config '") + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    *out = make_config(ss.str());
  });
}

pead_status pead_config_clone(const pead_config* cfg, pead_config** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = new pead_config(*cfg);
  });
}

pead_status pead_config_set(pead_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    std::string doc = pead::apply_override(cfg->document, key, value);
    pead::ExperimentConfig parsed = pead::config_from_string(doc);
    cfg->document = std::move(doc);
    cfg->parsed = std::move(parsed);
  });
}

pead_status pead_config_to_string(const pead_config* cfg, char** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = dup_string(pead::config_to_string(cfg->parsed));
  });
}

void pead_config_free(pead_config* cfg) { delete cfg; }

pead_status pead_train(const pead_config* cfg, pead_progress_fn progress, void* user,
                       char** summary) {
  return guarded([&] {
    need(cfg, "cfg");
    pead::ProgressFn fn;
    if (progress) {
      fn = [progress, user](const pead::EpisodeRecord& r) {
        pead_episode_record rec{r.run_id.c_str(), pead::to_string(r.algorithm),
                                pead::to_string(r.mode),  r.seed,
                                r.episode,                r.reward,
                                r.steps,                  pead::to_string(r.outcome),
                                r.opt_ms,                 r.extended ? 1 : 0};
        progress(&rec, user);
      };
    }
    const pead::ExperimentResult res = pead::run_experiment(cfg->parsed, fn);
    if (summary) {
      std::vector<pead::EpisodeRecord> all;
      for (const auto& run : res.runs) all.insert(all.end(), run.records.begin(), run.records.end());
      *summary = dup_string(
          pead::format_summary(pead::summarize_runs(all), pead::summarize_timing(all)));
    }
  });
}

pead_status pead_agent_load(const char* path, pead_agent** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    std::ifstream in(path);
    pead::require(static_cast<bool>(in), pead::ErrorCode::kIo,
                  std::string("cannot open checkpoint '") + path + "'");
    auto a = std::make_unique<pead_agent>();
    a->agent = pead::load_agent(in, 0);
    *out = a.release();
  });
}

pead_status pead_agent_save(const pead_agent* agent, const char* path) {
  return guarded([&] {
    need(agent, "agent");
    need(path, "path");
    std::ofstream out(path);
    pead::require(static_cast<bool>(out), pead::ErrorCode::kIo,
                  std::string("cannot write checkpoint '") + path + "'");
    agent->agent->save(out);
    pead::require(static_cast<bool>(out), pead::ErrorCode::kIo,
                  std::string("write failed for '") + path + "'");
  });
}

pead_status pead_agent_info(const pead_agent* agent, const char** algorithm, int* state_dim,
                            int* action_dim, int* extended) {
  return guarded([&] {
    need(agent, "agent");
    if (algorithm) *algorithm = pead::to_string(agent->agent->algorithm());
    if (state_dim) *state_dim = agent->agent->state_dim();
    if (action_dim) *action_dim = agent->agent->action_dim();
    if (extended) *extended = agent->agent->extended() ? 1 : 0;
  });
}

pead_status pead_agent_act(pead_agent* agent, const double* state, size_t state_len,
                           double* action, size_t action_len) {
  return guarded([&] {
    need(agent, "agent");
    need(state, "state");
    need(action, "action");
    const pead::Agent& a = *agent->agent;
    pead::require(state_len == static_cast<size_t>(a.state_dim()) &&
                      action_len == static_cast<size_t>(a.action_dim()),
                  pead::ErrorCode::kShapeMismatch,
                  "pead_agent_act: agent expects " + std::to_string(a.state_dim()) +
                      " state and " + std::to_string(a.action_dim()) + " action values");
    const pead::ActionSample s = agent->agent->act(
        Eigen::Map<const Eigen::VectorXd>(state, static_cast<Eigen::Index>(state_len)), false);
    for (size_t i = 0; i < action_len; ++i) action[i] = s.action(static_cast<Eigen::Index>(i));
  });
}

void pead_agent_free(pead_agent* agent) { delete agent; }

pead_status pead_evaluate(pead_agent* agent, const pead_config* cfg, const char* trajectory_dir,
                          const char* csv_path, pead_eval_report** out) {
  return guarded([&] {
    need(agent, "agent");
    need(cfg, "cfg");
    need(out, "out");
    *out = nullptr;
    auto r = std::make_unique<pead_eval_report>();
    r->report = pead::evaluate_corners(*agent->agent, cfg->parsed.env, cfg->parsed.harness.eval,
                                       trajectory_dir ? trajectory_dir : "");
    if (csv_path) {
      std::ofstream f(csv_path);
      pead::require(static_cast<bool>(f), pead::ErrorCode::kIo,
                    std::string("cannot write '") + csv_path + "'");
      pead::write_eval_csv(f, r->report);
    }
    *out = r.release();
  });
}

pead_status pead_eval_report_stats(const pead_eval_report* report, const char* policy,
                                   const char* tag, pead_eval_stats* out) {
  return guarded([&] {
    need(report, "report");
    need(policy, "policy");
    need(tag, "tag");
    need(out, "out");
    const pead::EvalSummary& s = report->report.find(policy, tag);
    *out = {s.episodes, s.success_rate, s.mean_steps, s.mean_cumulative_force,
            s.mean_cumulative_moment};
  });
}

pead_status pead_eval_report_text(const pead_eval_report* report, char** out) {
  return guarded([&] {
    need(report, "report");
    need(out, "out");
    *out = dup_string(pead::format_eval_summary(report->report));
  });
}

void pead_eval_report_free(pead_eval_report* report) { delete report; }

pead_status pead_report(const char* dir, char** text) {
  return guarded([&] {
    need(dir, "dir");
    need(text, "text");
    *text = dup_string(pead::report_directory(dir));
  });
}

}  // extern "C"
