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

// Exercises the shared library through its C surface only.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "advsim/advsim_c.h"
#include "doctest.h"
#include "json.hpp"

namespace
{

namespace fs = std::filesystem;
using nlohmann::json;

// Fresh scratch directory per test run.
fs::path scratch_dir()
{
  static const fs::path dir = [] {
    fs::path d = fs::current_path() / "capi_scratch";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct ScenarioHandle
{
  advsim_scenario * ptr = nullptr;
  ~ScenarioHandle() { advsim_scenario_free(ptr); }
};

std::string take_string(char * s)
{
  std::string out = s == nullptr ? "" : s;
  advsim_string_free(s);
  return out;
}

ScenarioHandle forge(const char * tmpl, uint64_t seed)
{
  ScenarioHandle h;
  REQUIRE(advsim_forge_scenario(tmpl, seed, 2, &h.ptr) == ADVSIM_OK);
  return h;
}

}  // namespace

TEST_CASE("version and observation dimension are exposed")
{
  CHECK(std::string(advsim_version()) == "0.1.0");
  CHECK(advsim_observation_dim() == 80);
}

TEST_CASE("null and bad arguments produce error codes with messages")
{
  CHECK(advsim_scenario_load(nullptr, nullptr) == ADVSIM_ERR_ARGUMENT);
  CHECK(std::string(advsim_last_error()).find("null") != std::string::npos);

  advsim_scenario * out = nullptr;
  CHECK(advsim_forge_scenario("roundabout", 1, 2, &out) == ADVSIM_ERR_ARGUMENT);
  CHECK(out == nullptr);
  CHECK(advsim_scenario_load("/nonexistent/scene.json", &out) == ADVSIM_ERR_IO);
  CHECK(advsim_scenario_from_json("{not json", &out) == ADVSIM_ERR_PARSE);
  CHECK(advsim_scenario_from_json("{\"format_version\": 1}", &out) == ADVSIM_ERR_SCHEMA);
}

TEST_CASE("scenarios round trip through files and JSON text")
{
  const auto scene = forge("straight_multilane", 11);
  const fs::path path = scratch_dir() / "scene.json";
  REQUIRE(advsim_scenario_save(scene.ptr, path.string().c_str()) == ADVSIM_OK);

  ScenarioHandle loaded;
  REQUIRE(advsim_scenario_load(path.string().c_str(), &loaded.ptr) == ADVSIM_OK);

  char * a = nullptr;
  char * b = nullptr;
  REQUIRE(advsim_scenario_to_json(scene.ptr, &a) == ADVSIM_OK);
  REQUIRE(advsim_scenario_to_json(loaded.ptr, &b) == ADVSIM_OK);
  const std::string ja = take_string(a);
  const std::string jb = take_string(b);
  CHECK(ja == jb);

  ScenarioHandle from_text;
  REQUIRE(advsim_scenario_from_json(ja.c_str(), &from_text.ptr) == ADVSIM_OK);
}

TEST_CASE("the simulator drives through the C surface")
{
  const auto scene = forge("curve", 3);
  advsim_simulator * sim = nullptr;
  REQUIRE(advsim_simulator_create(scene.ptr, "replay", &sim) == ADVSIM_OK);

  std::vector<double> obs(static_cast<std::size_t>(advsim_observation_dim()));
  // Stepping before reset is a state error.
  advsim_step info{};
  CHECK(
    advsim_simulator_step(sim, 0.0, 0.0, obs.data(), advsim_observation_dim(), &info) ==
    ADVSIM_ERR_STATE);

  REQUIRE(advsim_simulator_reset(sim, obs.data(), advsim_observation_dim()) == ADVSIM_OK);
  for (const double v : obs) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  CHECK(advsim_simulator_reset(sim, obs.data(), 7) == ADVSIM_ERR_ARGUMENT);

  int steps = 0;
  while (true) {
    REQUIRE(
      advsim_simulator_step(sim, 0.0, 0.0, obs.data(), advsim_observation_dim(), &info) ==
      ADVSIM_OK);
    ++steps;
    if (info.done != 0) {
      break;
    }
    REQUIRE(steps <= 80);
  }
  CHECK(info.crashed == 0);
  CHECK(
    advsim_simulator_step(sim, 0.0, 0.0, obs.data(), advsim_observation_dim(), &info) ==
    ADVSIM_ERR_STATE);
  advsim_simulator_free(sim);
}

TEST_CASE("policies act deterministically and round trip")
{
  advsim_policy * policy = nullptr;
  REQUIRE(advsim_policy_zeros(&policy) == ADVSIM_OK);

  std::vector<double> obs(static_cast<std::size_t>(advsim_observation_dim()), 0.25);
  double steer = 1.0;
  double accel = 1.0;
  REQUIRE(
    advsim_policy_act(policy, obs.data(), advsim_observation_dim(), &steer, &accel) ==
    ADVSIM_OK);
  CHECK(steer == 0.0);
  CHECK(accel == 0.0);

  const fs::path path = scratch_dir() / "policy.json";
  REQUIRE(advsim_policy_save(policy, path.string().c_str()) == ADVSIM_OK);
  advsim_policy * loaded = nullptr;
  REQUIRE(advsim_policy_load(path.string().c_str(), &loaded) == ADVSIM_OK);
  advsim_policy_free(policy);
  advsim_policy_free(loaded);
}

TEST_CASE("prediction writes a candidate document")
{
  const auto scene = forge("t_junction", 5);
  const fs::path path = scratch_dir() / "candidates.json";
  REQUIRE(advsim_predict(scene.ptr, nullptr, 8, 42, path.string().c_str()) == ADVSIM_OK);

  std::ifstream in(path);
  REQUIRE(in.good());
  const json doc = json::parse(in);
  CHECK(doc["candidates"].size() == 8);
}

TEST_CASE("attacking a scene returns a new scenario and a summary")
{
  const auto scene = forge("straight_multilane", 21);
  ScenarioHandle adv;
  char * info_text = nullptr;
  REQUIRE(
    advsim_attack_scene(scene.ptr, R"({"m": 16, "seed": 9})", &adv.ptr, &info_text) ==
    ADVSIM_OK);
  const json info = json::parse(take_string(info_text));
  CHECK(info.contains("selected"));
  CHECK(info.contains("posterior"));
  CHECK(info["gen_time_ms"].get<double>() >= 0.0);
  REQUIRE(info["candidates"].size() == 16);
  CHECK(info["candidates"][0].contains("prior"));
  CHECK(info["candidates"][0].contains("per_ego"));

  char * raw_text = nullptr;
  char * adv_text = nullptr;
  REQUIRE(advsim_scenario_to_json(scene.ptr, &raw_text) == ADVSIM_OK);
  REQUIRE(advsim_scenario_to_json(adv.ptr, &adv_text) == ADVSIM_OK);
  CHECK(take_string(raw_text) != take_string(adv_text));
}

TEST_CASE("rollout, render, and the full corpus-train-eval job chain")
{
  const fs::path corpus = scratch_dir() / "corpus";
  REQUIRE(advsim_forge_corpus(6, 0.5, 7, corpus.string().c_str()) == ADVSIM_OK);
  REQUIRE(fs::exists(corpus / "manifest.json"));

  const auto scene = forge("four_way_intersection", 2);
  char * trace_text = nullptr;
  char * summary_text = nullptr;
  REQUIRE(advsim_rollout(scene.ptr, nullptr, &trace_text, &summary_text) == ADVSIM_OK);
  const std::string trace = take_string(trace_text);
  const json summary = json::parse(take_string(summary_text));
  CHECK(summary["crashed"].get<bool>() == false);
  CHECK(summary["route_completion"].get<double>() >= 0.0);

  char * svg_text = nullptr;
  REQUIRE(advsim_render(trace.c_str(), &svg_text) == ADVSIM_OK);
  const std::string svg = take_string(svg_text);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);

  const fs::path run_dir = scratch_dir() / "run";
  const json train_cfg = {
    {"pool_dir", corpus.string()}, {"split", "train"},    {"mode", "no_adv"},
    {"generations", 2},            {"population", 4},     {"scenes_per_gen", 1},
    {"seed", 1},                   {"out_dir", run_dir.string()},
  };
  char * train_summary_text = nullptr;
  REQUIRE(advsim_train(train_cfg.dump().c_str(), &train_summary_text) == ADVSIM_OK);
  const json train_summary = json::parse(take_string(train_summary_text));
  CHECK(train_summary["generations"].get<int>() == 2);
  REQUIRE(fs::exists(run_dir / "metrics.csv"));
  REQUIRE(fs::exists(run_dir / "policy.json"));
  REQUIRE(fs::exists(run_dir / "checkpoint_final.json"));

  // Resuming from the final checkpoint continues to the new target.
  const json resume_cfg = {
    {"pool_dir", corpus.string()},
    {"split", "train"},
    {"generations", 3},
    {"out_dir", run_dir.string()},
    {"resume_from", (run_dir / "checkpoint_final.json").string()},
  };
  char * resume_summary_text = nullptr;
  REQUIRE(advsim_train(resume_cfg.dump().c_str(), &resume_summary_text) == ADVSIM_OK);
  const json resume_summary = json::parse(take_string(resume_summary_text));
  CHECK(resume_summary["generations"].get<int>() == 3);

  const json attack_cfg = {
    {"scenes_dir", corpus.string()},
    {"split", "test"},
    {"generate", false},
  };
  char * attack_text = nullptr;
  REQUIRE(advsim_eval_attack(attack_cfg.dump().c_str(), &attack_text) == ADVSIM_OK);
  const json attack = json::parse(take_string(attack_text));
  CHECK(attack["success_rate"].get<double>() == 0.0);

  const json eval_cfg = {
    {"policy_path", (run_dir / "policy.json").string()},
    {"scenes_dir", corpus.string()},
    {"split", "test"},
    {"seeds", {0}},
  };
  char * eval_text = nullptr;
  REQUIRE(advsim_eval_policy(eval_cfg.dump().c_str(), &eval_text) == ADVSIM_OK);
  const json eval_report = json::parse(take_string(eval_text));
  CHECK(eval_report["crash_rate_mean"].get<double>() >= 0.0);
  CHECK(eval_report["episodes"].size() == 3);
}
