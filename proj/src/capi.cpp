// Copyright 2026 The advsim authors
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

#include "advsim/advsim_c.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "advsim/agents.hpp"
#include "advsim/errors.hpp"
#include "advsim/eval.hpp"
#include "advsim/forge.hpp"
#include "advsim/pipeline.hpp"
#include "advsim/predictor.hpp"
#include "advsim/scenario.hpp"
#include "advsim/simulator.hpp"
#include "json_util.hpp"

struct advsim_scenario
{
  advsim::Scenario value;
};

struct advsim_simulator
{
  advsim::sim::Simulator value;
};

struct advsim_policy
{
  advsim::agents::PolicyParams value;
};

namespace
{

namespace fs = std::filesystem;
using advsim::ErrorCode;
using nlohmann::json;

thread_local std::string g_last_error;

advsim_status status_of(ErrorCode code)
{
  switch (code) {
    case ErrorCode::io:
      return ADVSIM_ERR_IO;
    case ErrorCode::parse:
      return ADVSIM_ERR_PARSE;
    case ErrorCode::schema:
      return ADVSIM_ERR_SCHEMA;
    case ErrorCode::invariant:
      return ADVSIM_ERR_INVARIANT;
    case ErrorCode::argument:
      return ADVSIM_ERR_ARGUMENT;
    case ErrorCode::state:
      return ADVSIM_ERR_STATE;
    case ErrorCode::internal:
      return ADVSIM_ERR_INTERNAL;
  }
  return ADVSIM_ERR_INTERNAL;
}

template <typename Fn>
advsim_status guarded(Fn && fn)
{
  try {
    fn();
    g_last_error.clear();
    return ADVSIM_OK;
  } catch (const advsim::Error & e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception & e) {
    g_last_error = e.what();
    return ADVSIM_ERR_INTERNAL;
  }
}

advsim_status arg_error(const char * message)
{
  g_last_error = message;
  return ADVSIM_ERR_ARGUMENT;
}

char * dup_string(const std::string & s)
{
  char * out = static_cast<char *>(std::malloc(s.size() + 1));
  if (out == nullptr) {
    throw std::bad_alloc();
  }
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_json_text(const char * text, const char * what)
{
  if (text == nullptr) {
    return json::object();
  }
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    advsim::fail(ErrorCode::parse, std::string("malformed JSON in ") + what);
  }
  return j;
}

// Optional-key accessors for configuration documents: absent keys keep the
// default, present keys must have the right type.

double opt_number(const json & j, const std::string & key, double fallback)
{
  const auto it = j.find(key);
  if (it == j.end()) {
    return fallback;
  }
  return advsim::jsonutil::require_number(*it, key);
}

int opt_int(const json & j, const std::string & key, int fallback)
{
  const auto it = j.find(key);
  if (it == j.end()) {
    return fallback;
  }
  return advsim::jsonutil::require_int(*it, key);
}

bool opt_bool(const json & j, const std::string & key, bool fallback)
{
  const auto it = j.find(key);
  if (it == j.end()) {
    return fallback;
  }
  return advsim::jsonutil::require_bool(*it, key);
}

std::string opt_string(const json & j, const std::string & key, const std::string & fallback)
{
  const auto it = j.find(key);
  if (it == j.end()) {
    return fallback;
  }
  return advsim::jsonutil::require_string(*it, key);
}

std::uint64_t opt_seed(const json & j, const std::string & key, std::uint64_t fallback)
{
  const auto it = j.find(key);
  if (it == j.end()) {
    return fallback;
  }
  if (!it->is_number_integer() && !it->is_number_unsigned()) {
    advsim::fail(ErrorCode::schema, key + ": expected an integer");
  }
  return it->get<std::uint64_t>();
}

// A fixed agent parsed from {"kind": ..., "policy_path": ...}; owns the
// loaded weights so the spec pointer stays valid.
struct OwnedAgent
{
  advsim::eval::AgentSpec spec;
  advsim::agents::PolicyParams weights;
};

OwnedAgent parse_agent(const json & options)
{
  OwnedAgent agent;
  const auto it = options.find("agent");
  if (it == options.end()) {
    return agent;
  }
  const json & a = *it;
  agent.spec.kind = advsim::eval::agent_kind_from_name(opt_string(a, "kind", "replay"));
  if (agent.spec.kind == advsim::eval::AgentKind::policy) {
    const std::string path = opt_string(a, "policy_path", "");
    if (path.empty()) {
      advsim::fail(ErrorCode::schema, "agent.policy_path: required for a policy agent");
    }
    agent.weights = advsim::agents::PolicyParams::load_file(path);
    agent.spec.policy = &agent.weights;
  }
  return agent;
}

std::unique_ptr<advsim::agents::Agent> instantiate(const OwnedAgent & agent)
{
  switch (agent.spec.kind) {
    case advsim::eval::AgentKind::replay:
      return std::make_unique<advsim::agents::ReplayAgent>();
    case advsim::eval::AgentKind::idm:
      return std::make_unique<advsim::agents::IdmAgent>(agent.spec.idm);
    case advsim::eval::AgentKind::policy:
      return std::make_unique<advsim::agents::PolicyAgent>(
        *agent.spec.policy, advsim::agents::ActMode::deterministic);
  }
  advsim::fail(ErrorCode::argument, "unknown agent kind");
}

// Loads scenarios from an explicit path list or a directory. A directory
// with a manifest.json honors the requested split ("train", "test", "all");
// otherwise every *.json file is taken in name order.
std::vector<advsim::pipeline::PoolEntry> load_pool(
  const json & cfg, const std::string & dir_key, const std::string & list_key)
{
  std::vector<advsim::pipeline::PoolEntry> pool;
  const auto add_file = [&pool](const fs::path & p) {
    pool.push_back({advsim::Scenario::load_file(p.string()), p.stem().string()});
  };

  if (const auto it = cfg.find(list_key); it != cfg.end()) {
    const auto & files = advsim::jsonutil::require_array(*it, list_key);
    for (const auto & f : files) {
      add_file(fs::path(advsim::jsonutil::require_string(f, list_key + "[]")));
    }
    return pool;
  }

  const std::string dir = opt_string(cfg, dir_key, "");
  if (dir.empty()) {
    advsim::fail(ErrorCode::schema, dir_key + " or " + list_key + ": required");
  }
  const std::string split = opt_string(cfg, "split", "all");
  if (split != "train" && split != "test" && split != "all") {
    advsim::fail(ErrorCode::schema, "split: expected train, test, or all");
  }

  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  if (fs::exists(manifest_path)) {
    const json manifest = advsim::jsonutil::load_json_file(manifest_path.string());
    const auto take = [&](const char * key) {
      const auto & files =
        advsim::jsonutil::require_array(advsim::jsonutil::require_key(manifest, key, "manifest"), key);
      for (const auto & f : files) {
        add_file(fs::path(dir) / advsim::jsonutil::require_string(f, std::string(key) + "[]"));
      }
    };
    if (split == "train" || split == "all") {
      take("train");
    }
    if (split == "test" || split == "all") {
      take("test");
    }
  } else {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) {
      advsim::fail(ErrorCode::io, dir_key + ": not a directory: " + dir);
    }
    for (const auto & entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto & f : files) {
      add_file(f);
    }
  }
  if (pool.empty()) {
    advsim::fail(ErrorCode::argument, "no scenarios found in " + dir);
  }
  return pool;
}

advsim::eval::AttackConfig parse_attack_config(const json & cfg)
{
  advsim::eval::AttackConfig out;
  out.m_candidates = opt_int(cfg, "m", out.m_candidates);
  out.n_buffer = opt_int(cfg, "n_buffer", out.n_buffer);
  out.alpha = opt_number(cfg, "alpha", out.alpha);
  out.generate = opt_bool(cfg, "generate", out.generate);
  out.seed = opt_seed(cfg, "seed", out.seed);
  const std::string selector = opt_string(cfg, "selector", "posterior");
  if (selector == "posterior") {
    out.selector = advsim::pipeline::CandidateSelector::posterior;
  } else if (selector == "prior_argmax") {
    out.selector = advsim::pipeline::CandidateSelector::prior_argmax;
  } else {
    advsim::fail(ErrorCode::schema, "selector: expected posterior or prior_argmax");
  }
  return out;
}

json rollout_summary(const advsim::sim::EpisodeResult & r)
{
  return {
    {"route_completion", r.route_completion},
    {"crashed", r.crashed},
    {"out_of_road", r.out_of_road},
    {"arrived", r.arrived},
    {"steps", r.steps},
    {"episode_return", r.episode_return},
    {"crash_partner", r.crash_partner},
  };
}

}  // namespace

extern "C" {

const char * advsim_version(void)
{
  return "0.1.0";
}

const char * advsim_last_error(void)
{
  return g_last_error.c_str();
}

void advsim_string_free(char * s)
{
  std::free(s);
}

advsim_status advsim_scenario_load(const char * path, advsim_scenario ** out)
{
  if (path == nullptr || out == nullptr) {
    return arg_error("advsim_scenario_load: null argument");
  }
  return guarded([&] { *out = new advsim_scenario{advsim::Scenario::load_file(path)}; });
}

advsim_status advsim_scenario_from_json(const char * json_text, advsim_scenario ** out)
{
  if (json_text == nullptr || out == nullptr) {
    return arg_error("advsim_scenario_from_json: null argument");
  }
  return guarded([&] {
    *out = new advsim_scenario{
      advsim::Scenario::from_json(parse_json_text(json_text, "scenario"))};
  });
}

advsim_status advsim_scenario_save(const advsim_scenario * s, const char * path)
{
  if (s == nullptr || path == nullptr) {
    return arg_error("advsim_scenario_save: null argument");
  }
  return guarded([&] { s->value.save_file(path); });
}

advsim_status advsim_scenario_to_json(const advsim_scenario * s, char ** out_json)
{
  if (s == nullptr || out_json == nullptr) {
    return arg_error("advsim_scenario_to_json: null argument");
  }
  return guarded([&] { *out_json = dup_string(s->value.to_json().dump(2)); });
}

void advsim_scenario_free(advsim_scenario * s)
{
  delete s;
}

advsim_status advsim_forge_scenario(
  const char * template_name, uint64_t seed, int n_background, advsim_scenario ** out)
{
  if (template_name == nullptr || out == nullptr) {
    return arg_error("advsim_forge_scenario: null argument");
  }
  return guarded([&] {
    advsim::forge::ForgeConfig cfg;
    cfg.tmpl = advsim::forge::template_from_name(template_name);
    cfg.seed = seed;
    cfg.n_background = n_background;
    *out = new advsim_scenario{advsim::forge::forge_scenario(cfg)};
  });
}

advsim_status advsim_forge_corpus(
  int count, double train_fraction, uint64_t seed, const char * dir)
{
  if (dir == nullptr) {
    return arg_error("advsim_forge_corpus: null dir");
  }
  return guarded([&] {
    advsim::forge::write_corpus(advsim::forge::forge_corpus(count, train_fraction, seed), dir);
  });
}

advsim_status advsim_predict(
  const advsim_scenario * s, const char * vehicle_id, int m, uint64_t seed,
  const char * out_path)
{
  if (s == nullptr || out_path == nullptr) {
    return arg_error("advsim_predict: null argument");
  }
  return guarded([&] {
    if (m <= 0) {
      advsim::fail(ErrorCode::argument, "advsim_predict: m must be positive");
    }
    const std::string vehicle =
      vehicle_id == nullptr ? s->value.adversary_id() : std::string(vehicle_id);
    advsim::Rng rng(seed);
    const auto set = advsim::pred::generate_candidates(
      s->value.history(), vehicle, static_cast<std::size_t>(m), rng);
    advsim::pred::save_candidates(set, vehicle, out_path);
  });
}

advsim_status advsim_attack_scene(
  const advsim_scenario * s, const char * options_json, advsim_scenario ** out,
  char ** info_json)
{
  if (s == nullptr || out == nullptr) {
    return arg_error("advsim_attack_scene: null argument");
  }
  return guarded([&] {
    const json options = parse_json_text(options_json, "attack options");
    const advsim::eval::AttackConfig cfg = parse_attack_config(options);
    const OwnedAgent agent = parse_agent(options);
    const auto driver = instantiate(agent);
    const advsim::sim::EgoMode mode = agent.spec.kind == advsim::eval::AgentKind::replay
                                        ? advsim::sim::EgoMode::replay
                                        : advsim::sim::EgoMode::policy;

    advsim::resample::EgoRolloutBuffer buffer(static_cast<std::size_t>(cfg.n_buffer));
    for (int k = 0; k < cfg.n_buffer; ++k) {
      advsim::sim::Simulator simulator(s->value, {}, {}, mode);
      auto episode = advsim::agents::run_episode(simulator, *driver);
      buffer.push(std::move(episode.trajectory), episode.log_prob_sum);
    }
    advsim::Rng rng(cfg.seed);
    auto generated = advsim::pipeline::generate_adversarial(
      s->value, buffer, cfg.m_candidates, cfg.alpha, rng, cfg.selector);
    if (info_json != nullptr) {
      json candidates = json::array();
      for (const auto & score : generated.scores) {
        json per_ego = json::array();
        for (const auto & term : score.per_ego) {
          per_ego.push_back({{"step", term.step}, {"likelihood", term.likelihood}});
        }
        candidates.push_back({
          {"index", score.index},
          {"prior", score.prior},
          {"posterior", score.posterior},
          {"per_ego", std::move(per_ego)},
        });
      }
      const json info = {
        {"format_version", 1},
        {"selected", generated.selected},
        {"posterior", generated.posterior},
        {"prior", generated.prior},
        {"gen_time_ms", generated.gen_time_ms},
        {"candidates", std::move(candidates)},
      };
      *info_json = dup_string(info.dump(2));
    }
    *out = new advsim_scenario{std::move(generated.scenario)};
  });
}

int advsim_observation_dim(void)
{
  return advsim::sim::kObservationDim;
}

advsim_status advsim_simulator_create(
  const advsim_scenario * s, const char * ego_mode, advsim_simulator ** out)
{
  if (s == nullptr || out == nullptr) {
    return arg_error("advsim_simulator_create: null argument");
  }
  return guarded([&] {
    advsim::sim::EgoMode mode = advsim::sim::EgoMode::policy;
    if (ego_mode != nullptr) {
      const std::string name = ego_mode;
      if (name == "replay") {
        mode = advsim::sim::EgoMode::replay;
      } else if (name != "policy") {
        advsim::fail(ErrorCode::argument, "ego_mode: expected policy or replay");
      }
    }
    *out = new advsim_simulator{advsim::sim::Simulator(s->value, {}, {}, mode)};
  });
}

advsim_status advsim_simulator_reset(advsim_simulator * sim, double * obs, int obs_len)
{
  if (sim == nullptr || obs == nullptr) {
    return arg_error("advsim_simulator_reset: null argument");
  }
  if (obs_len != advsim::sim::kObservationDim) {
    return arg_error("advsim_simulator_reset: obs_len must be advsim_observation_dim()");
  }
  return guarded([&] {
    const auto o = sim->value.reset();
    std::copy(o.begin(), o.end(), obs);
  });
}

advsim_status advsim_simulator_step(
  advsim_simulator * sim, double steer, double accel, double * obs, int obs_len,
  advsim_step * info)
{
  if (sim == nullptr || obs == nullptr) {
    return arg_error("advsim_simulator_step: null argument");
  }
  if (obs_len != advsim::sim::kObservationDim) {
    return arg_error("advsim_simulator_step: obs_len must be advsim_observation_dim()");
  }
  return guarded([&] {
    const auto r = sim->value.step({steer, accel});
    std::copy(r.observation.begin(), r.observation.end(), obs);
    if (info != nullptr) {
      info->reward = r.reward;
      info->done = r.done ? 1 : 0;
      info->crashed = r.info.crashed ? 1 : 0;
      info->out_of_road = r.info.out_of_road ? 1 : 0;
      info->arrived = r.info.arrived ? 1 : 0;
      info->truncated = r.info.truncated ? 1 : 0;
      info->crashed_with = r.info.crashed_with;
      info->frame = r.info.frame;
      info->progress = r.info.progress;
    }
  });
}

void advsim_simulator_free(advsim_simulator * sim)
{
  delete sim;
}

advsim_status advsim_policy_load(const char * path, advsim_policy ** out)
{
  if (path == nullptr || out == nullptr) {
    return arg_error("advsim_policy_load: null argument");
  }
  return guarded(
    [&] { *out = new advsim_policy{advsim::agents::PolicyParams::load_file(path)}; });
}

advsim_status advsim_policy_zeros(advsim_policy ** out)
{
  if (out == nullptr) {
    return arg_error("advsim_policy_zeros: null argument");
  }
  return guarded([&] { *out = new advsim_policy{advsim::agents::PolicyParams::zeros()}; });
}

advsim_status advsim_policy_save(const advsim_policy * p, const char * path)
{
  if (p == nullptr || path == nullptr) {
    return arg_error("advsim_policy_save: null argument");
  }
  return guarded([&] { p->value.save_file(path); });
}

void advsim_policy_free(advsim_policy * p)
{
  delete p;
}

advsim_status advsim_policy_act(
  const advsim_policy * p, const double * obs, int obs_len, double * steer, double * accel)
{
  if (p == nullptr || obs == nullptr || steer == nullptr || accel == nullptr) {
    return arg_error("advsim_policy_act: null argument");
  }
  return guarded([&] {
    const auto decision = advsim::agents::policy_act(
      p->value, std::span<const double>(obs, static_cast<std::size_t>(obs_len)),
      advsim::agents::ActMode::deterministic);
    *steer = decision.action.steer;
    *accel = decision.action.accel;
  });
}

advsim_status advsim_rollout(
  const advsim_scenario * s, const char * options_json, char ** trace_json,
  char ** summary_json)
{
  if (s == nullptr || trace_json == nullptr) {
    return arg_error("advsim_rollout: null argument");
  }
  return guarded([&] {
    const json options = parse_json_text(options_json, "rollout options");
    const OwnedAgent agent = parse_agent(options);
    const auto driver = instantiate(agent);
    const std::string default_mode =
      agent.spec.kind == advsim::eval::AgentKind::replay ? "replay" : "policy";
    const std::string mode_name = opt_string(options, "ego_mode", default_mode);
    advsim::sim::EgoMode mode;
    if (mode_name == "replay") {
      mode = advsim::sim::EgoMode::replay;
    } else if (mode_name == "policy") {
      mode = advsim::sim::EgoMode::policy;
    } else {
      advsim::fail(ErrorCode::schema, "ego_mode: expected policy or replay");
    }

    advsim::sim::EpisodeResult stats;
    const auto trace = advsim::eval::record_episode(s->value, *driver, mode, &stats);
    *trace_json = dup_string(trace.to_json().dump(2));
    if (summary_json != nullptr) {
      *summary_json = dup_string(rollout_summary(stats).dump(2));
    }
  });
}

advsim_status advsim_train(const char * config_json, char ** summary_json)
{
  if (config_json == nullptr) {
    return arg_error("advsim_train: null config");
  }
  return guarded([&] {
    const json cfg_j = parse_json_text(config_json, "train config");
    auto pool = load_pool(cfg_j, "pool_dir", "pool");

    advsim::pipeline::CatConfig cfg;
    cfg.m_candidates = opt_int(cfg_j, "m", cfg.m_candidates);
    cfg.n_buffer = opt_int(cfg_j, "n", cfg.n_buffer);
    cfg.alpha = opt_number(cfg_j, "alpha", cfg.alpha);
    cfg.generations = opt_int(cfg_j, "generations", cfg.generations);
    cfg.scenes_per_gen = opt_int(cfg_j, "scenes_per_gen", cfg.scenes_per_gen);
    cfg.mode = advsim::pipeline::mode_from_name(opt_string(cfg_j, "mode", "closed_loop"));
    cfg.seed = opt_seed(cfg_j, "seed", cfg.seed);
    cfg.cem.population = opt_int(cfg_j, "population", cfg.cem.population);
    cfg.cem.elite_fraction = opt_number(cfg_j, "elite_fraction", cfg.cem.elite_fraction);
    cfg.cem.noise_init = opt_number(cfg_j, "noise_init", cfg.cem.noise_init);
    cfg.cem.noise_decay = opt_number(cfg_j, "noise_decay", cfg.cem.noise_decay);
    cfg.cem.noise_floor = opt_number(cfg_j, "noise_floor", cfg.cem.noise_floor);
    if (const auto it = cfg_j.find("policy_stddev"); it != cfg_j.end()) {
      const auto & arr = advsim::jsonutil::require_array(*it, "policy_stddev");
      if (arr.size() != 2) {
        advsim::fail(ErrorCode::schema, "policy_stddev: expected two numbers");
      }
      cfg.policy_stddev[0] = advsim::jsonutil::require_number(arr[0], "policy_stddev[0]");
      cfg.policy_stddev[1] = advsim::jsonutil::require_number(arr[1], "policy_stddev[1]");
    }

    const std::string out_dir = opt_string(cfg_j, "out_dir", "");
    if (out_dir.empty()) {
      advsim::fail(ErrorCode::schema, "out_dir: required");
    }
    fs::create_directories(out_dir);
    const int checkpoint_every = opt_int(cfg_j, "checkpoint_every", 0);

    const std::string resume_from = opt_string(cfg_j, "resume_from", "");
    std::optional<advsim::pipeline::Trainer> trainer;
    if (!resume_from.empty()) {
      trainer.emplace(advsim::pipeline::Trainer::from_json(
        std::move(pool), advsim::jsonutil::load_json_file(resume_from)));
    } else {
      trainer.emplace(std::move(pool), cfg);
    }

    const int target = cfg.generations;
    while (trainer->generation() < target) {
      trainer->step();
      const int gen = trainer->generation();
      if (checkpoint_every > 0 && gen % checkpoint_every == 0 && gen < target) {
        advsim::jsonutil::save_json_file(
          trainer->to_json(),
          (fs::path(out_dir) / ("checkpoint_gen" + std::to_string(gen) + ".json")).string());
      }
    }

    {
      std::ofstream csv(fs::path(out_dir) / "metrics.csv");
      if (!csv) {
        advsim::fail(ErrorCode::io, "cannot write metrics.csv under " + out_dir);
      }
      csv << advsim::pipeline::metrics_csv(trainer->history());
    }
    advsim::jsonutil::save_json_file(
      trainer->to_json(), (fs::path(out_dir) / "checkpoint_final.json").string());
    trainer->policy().save_file((fs::path(out_dir) / "policy.json").string());

    if (summary_json != nullptr) {
      json summary = {
        {"generations", trainer->generation()},
        {"skipped_scenarios", trainer->skipped_scenarios()},
        {"out_dir", out_dir},
      };
      if (!trainer->history().empty()) {
        const auto & last = trainer->history().back();
        summary["final"] = {
          {"mean_return", last.mean_return},
          {"crash_rate", last.crash_rate},
          {"route_completion", last.route_completion},
          {"gen_time_ms", last.gen_time_ms},
        };
      }
      *summary_json = dup_string(summary.dump(2));
    }
  });
}

advsim_status advsim_eval_attack(const char * config_json, char ** report_json)
{
  if (config_json == nullptr || report_json == nullptr) {
    return arg_error("advsim_eval_attack: null argument");
  }
  return guarded([&] {
    const json cfg_j = parse_json_text(config_json, "attack eval config");
    const auto pool = load_pool(cfg_j, "scenes_dir", "scenes");
    const OwnedAgent agent = parse_agent(cfg_j);
    const advsim::eval::AttackConfig cfg = parse_attack_config(cfg_j);
    const auto report = advsim::eval::attack_success_rate(agent.spec, pool, cfg);
    *report_json = dup_string(report.to_json().dump(2));
  });
}

advsim_status advsim_eval_policy(const char * config_json, char ** report_json)
{
  if (config_json == nullptr || report_json == nullptr) {
    return arg_error("advsim_eval_policy: null argument");
  }
  return guarded([&] {
    const json cfg_j = parse_json_text(config_json, "policy eval config");
    const auto pool = load_pool(cfg_j, "scenes_dir", "scenes");
    const std::string policy_path = opt_string(cfg_j, "policy_path", "");
    if (policy_path.empty()) {
      advsim::fail(ErrorCode::schema, "policy_path: required");
    }
    const auto policy = advsim::agents::PolicyParams::load_file(policy_path);

    advsim::eval::PolicyEvalConfig cfg;
    cfg.traffic =
      advsim::eval::traffic_mode_from_name(opt_string(cfg_j, "traffic", "log_replay"));
    cfg.m_candidates = opt_int(cfg_j, "m", cfg.m_candidates);
    cfg.alpha = opt_number(cfg_j, "alpha", cfg.alpha);
    if (const auto it = cfg_j.find("seeds"); it != cfg_j.end()) {
      const auto & seeds = advsim::jsonutil::require_array(*it, "seeds");
      cfg.seeds.clear();
      for (const auto & s : seeds) {
        if (!s.is_number_integer() && !s.is_number_unsigned()) {
          advsim::fail(ErrorCode::schema, "seeds[]: expected integers");
        }
        cfg.seeds.push_back(s.get<std::uint64_t>());
      }
    }
    const auto report = advsim::eval::eval_policy(policy, pool, cfg);
    *report_json = dup_string(report.to_json().dump(2));
  });
}

advsim_status advsim_render(const char * trace_json, char ** svg)
{
  if (trace_json == nullptr || svg == nullptr) {
    return arg_error("advsim_render: null argument");
  }
  return guarded([&] {
    const auto trace =
      advsim::eval::EpisodeTrace::from_json(parse_json_text(trace_json, "trace"));
    *svg = dup_string(advsim::eval::render_episode(trace));
  });
}

}  // extern "C"
