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

// Command-line front end. All engine functionality is reached through the
// shared library's C interface.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "advsim/advsim_c.h"
#include "json.hpp"

namespace
{

namespace fs = std::filesystem;
using nlohmann::json;

int report_failure(advsim_status status, const std::string & what)
{
  std::fprintf(stderr, "error: %s: %s (status %d)\n", what.c_str(), advsim_last_error(),
               static_cast<int>(status));
  return 1;
}

std::string take_string(char * s)
{
  std::string out = s == nullptr ? "" : s;
  advsim_string_free(s);
  return out;
}

struct ScenarioHandle
{
  advsim_scenario * ptr = nullptr;
  ~ScenarioHandle() { advsim_scenario_free(ptr); }
};

bool load_scenario(const std::string & path, ScenarioHandle & handle)
{
  const advsim_status st = advsim_scenario_load(path.c_str(), &handle.ptr);
  if (st != ADVSIM_OK) {
    report_failure(st, "loading " + path);
    return false;
  }
  return true;
}

// --agent accepts replay, idm, or policy:<checkpoint path>.
bool parse_agent(const std::string & spec, json & out, std::string & error)
{
  if (spec == "replay" || spec == "idm") {
    out = {{"kind", spec}};
    return true;
  }
  if (spec.rfind("policy:", 0) == 0) {
    const std::string path = spec.substr(7);
    if (path.empty()) {
      error = "--agent policy: requires a checkpoint path";
      return false;
    }
    out = {{"kind", "policy"}, {"policy_path", path}};
    return true;
  }
  error = "--agent expects replay, idm, or policy:<path>";
  return false;
}

bool write_text(const std::string & path, const std::string & text)
{
  std::ofstream out(path);
  out << text;
  if (!out) {
    std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
    return false;
  }
  return true;
}

bool read_text(const std::string & path, std::string & text)
{
  std::ifstream in(path);
  if (!in) {
    std::fprintf(stderr, "error: cannot read %s\n", path.c_str());
    return false;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  text = buf.str();
  return true;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"2D traffic scenario engine: safety-critical resampling of logged "
               "driving scenes and closed-loop policy training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", advsim_version());

  // ---- forge ----
  auto * forge = app.add_subcommand("forge", "Synthesize one scenario");
  std::string forge_template = "straight_multilane";
  std::uint64_t forge_seed = 0;
  int forge_background = 2;
  std::string forge_out;
  forge->add_option("--template", forge_template,
                    "straight_multilane, curve, t_junction, four_way_intersection, merge");
  forge->add_option("--seed", forge_seed, "Generator seed");
  forge->add_option("--background", forge_background, "Background vehicles (0-6)");
  forge->add_option("--out", forge_out, "Output file, or directory for a generated name");

  auto * corpus = forge->add_subcommand("corpus", "Synthesize a train/test corpus");
  int corpus_n = 100;
  double corpus_split = 0.8;
  std::uint64_t corpus_seed = 0;
  std::string corpus_out;
  corpus->add_option("--n", corpus_n, "Number of scenarios");
  corpus->add_option("--split", corpus_split, "Training fraction");
  corpus->add_option("--seed", corpus_seed, "Generator seed");
  corpus->add_option("--out", corpus_out, "Output directory")->required();

  // ---- predict ----
  auto * predict = app.add_subcommand("predict", "Sample trajectory candidates");
  std::string predict_scenario;
  std::string predict_vehicle;
  int predict_m = 32;
  std::uint64_t predict_seed = 0;
  std::string predict_out;
  predict->add_option("--scenario", predict_scenario, "Scenario file")->required();
  predict->add_option("--vehicle", predict_vehicle, "Vehicle id (default: the adversary)");
  predict->add_option("--m", predict_m, "Candidate count");
  predict->add_option("--seed", predict_seed, "Generator seed");
  predict->add_option("--out", predict_out, "Candidate document path")->required();

  // ---- attack ----
  auto * attack = app.add_subcommand("attack", "Resample one scene into an adversarial one");
  std::string attack_scenario;
  std::string attack_agent = "replay";
  int attack_m = 32;
  int attack_n = 1;
  double attack_alpha = 0.99;
  std::uint64_t attack_seed = 0;
  std::string attack_selector = "posterior";
  std::string attack_out;
  std::string attack_report;
  attack->add_option("--scenario", attack_scenario, "Scenario file")->required();
  attack->add_option("--agent", attack_agent, "replay, idm, or policy:<path>");
  attack->add_option("--m", attack_m, "Candidate count");
  attack->add_option("--n", attack_n, "Agent rollouts kept in the buffer");
  attack->add_option("--alpha", attack_alpha, "Collision likelihood decay");
  attack->add_option("--seed", attack_seed, "Generator seed");
  attack->add_option("--selector", attack_selector, "posterior or prior_argmax");
  attack->add_option("--out", attack_out, "Adversarial scenario path")->required();
  attack->add_option("--report", attack_report,
                     "Score report path (default: <out>.report.json)");

  // ---- rollout ----
  auto * rollout = app.add_subcommand("rollout", "Run one episode and record the trace");
  std::string rollout_scenario;
  std::string rollout_agent = "replay";
  std::string rollout_record;
  rollout->add_option("--scenario", rollout_scenario, "Scenario file")->required();
  rollout->add_option("--agent", rollout_agent, "replay, idm, or policy:<path>");
  rollout->add_option("--record", rollout_record, "Trace output path")->required();

  // ---- train ----
  auto * train = app.add_subcommand("train", "Train a policy over a scenario pool");
  std::string train_mode = "closed_loop";
  std::string train_pool;
  std::string train_split = "train";
  int train_steps = 100;
  std::uint64_t train_seed = 0;
  std::string train_out;
  int train_population = 32;
  int train_scenes = 4;
  int train_m = 32;
  int train_n = 5;
  double train_alpha = 0.99;
  int train_checkpoint_every = 10;
  std::string train_resume;
  train->add_option("--mode", train_mode, "no_adv, rule_based, open_loop, closed_loop");
  train->add_option("--pool", train_pool, "Scenario pool directory")->required();
  train->add_option("--split", train_split, "train, test, or all (default train)");
  train->add_option("--steps", train_steps, "Optimizer generations");
  train->add_option("--seed", train_seed, "Training seed");
  train->add_option("--out", train_out, "Run directory")->required();
  train->add_option("--population", train_population, "Optimizer population size");
  train->add_option("--scenes-per-gen", train_scenes, "Scenarios sampled per generation");
  train->add_option("--m", train_m, "Adversary candidates per generation");
  train->add_option("--n", train_n, "Ego rollouts kept per scenario");
  train->add_option("--alpha", train_alpha, "Collision likelihood decay");
  train->add_option("--checkpoint-every", train_checkpoint_every,
                    "Checkpoint cadence in generations (0 = final only)");
  train->add_option("--resume", train_resume, "Checkpoint to resume from");

  // ---- eval-attack ----
  auto * eval_attack = app.add_subcommand("eval-attack", "Attack success rate over a scene set");
  std::string ea_agent = "replay";
  std::string ea_scenes;
  std::string ea_split = "test";
  int ea_n = 1;
  int ea_m = 32;
  double ea_alpha = 0.99;
  std::uint64_t ea_seed = 0;
  std::string ea_selector = "posterior";
  bool ea_no_generate = false;
  std::string ea_out;
  eval_attack->add_option("--agent", ea_agent, "replay, idm, or policy:<path>");
  eval_attack->add_option("--scenes", ea_scenes, "Scene directory")->required();
  eval_attack->add_option("--split", ea_split, "train, test, or all (default test)");
  eval_attack->add_option("--n", ea_n, "Agent rollouts kept in the buffer");
  eval_attack->add_option("--m", ea_m, "Candidate count");
  eval_attack->add_option("--alpha", ea_alpha, "Collision likelihood decay");
  eval_attack->add_option("--seed", ea_seed, "Evaluation seed");
  eval_attack->add_option("--selector", ea_selector, "posterior or prior_argmax");
  eval_attack->add_flag("--no-generate", ea_no_generate,
                        "Replay the raw scenes without adversarial generation");
  eval_attack->add_option("--out", ea_out, "Report path")->required();

  // ---- eval-policy ----
  auto * eval_policy = app.add_subcommand("eval-policy", "Evaluate a policy checkpoint");
  std::string ep_ckpt;
  std::string ep_scenes;
  std::string ep_split = "test";
  std::string ep_mode = "log_replay";
  std::vector<std::uint64_t> ep_seeds{0, 1, 2};
  int ep_m = 32;
  double ep_alpha = 0.99;
  std::string ep_out;
  eval_policy->add_option("--ckpt", ep_ckpt, "Policy checkpoint")->required();
  eval_policy->add_option("--scenes", ep_scenes, "Scene directory")->required();
  eval_policy->add_option("--split", ep_split, "train, test, or all (default test)");
  eval_policy->add_option("--mode", ep_mode, "log_replay or safety_critical");
  eval_policy->add_option("--seeds", ep_seeds, "Evaluation seeds")->delimiter(',');
  eval_policy->add_option("--m", ep_m, "Candidate count");
  eval_policy->add_option("--alpha", ep_alpha, "Collision likelihood decay");
  eval_policy->add_option("--out", ep_out, "Report path")->required();

  // ---- render ----
  auto * render = app.add_subcommand("render", "Render a recorded trace as SVG");
  std::string render_trace;
  std::string render_out;
  render->add_option("--trace", render_trace, "Trace file from rollout")->required();
  render->add_option("--out", render_out, "SVG output path")->required();

  CLI11_PARSE(app, argc, argv);

  if (corpus->parsed()) {
    const advsim_status st =
      advsim_forge_corpus(corpus_n, corpus_split, corpus_seed, corpus_out.c_str());
    if (st != ADVSIM_OK) {
      return report_failure(st, "forging corpus");
    }
    std::printf("wrote %d scenarios and manifest.json under %s\n", corpus_n,
                corpus_out.c_str());
    return 0;
  }

  if (forge->parsed()) {
    if (forge_out.empty()) {
      std::fprintf(stderr, "error: forge requires --out\n");
      return 1;
    }
    ScenarioHandle scene;
    const advsim_status st = advsim_forge_scenario(
      forge_template.c_str(), forge_seed, forge_background, &scene.ptr);
    if (st != ADVSIM_OK) {
      return report_failure(st, "forging scenario");
    }
    fs::path out = forge_out;
    if (fs::is_directory(out) || forge_out.back() == '/') {
      out /= forge_template + "_" + std::to_string(forge_seed) + ".json";
    }
    const advsim_status save = advsim_scenario_save(scene.ptr, out.string().c_str());
    if (save != ADVSIM_OK) {
      return report_failure(save, "saving " + out.string());
    }
    std::printf("wrote %s\n", out.string().c_str());
    return 0;
  }

  if (predict->parsed()) {
    ScenarioHandle scene;
    if (!load_scenario(predict_scenario, scene)) {
      return 1;
    }
    const advsim_status st = advsim_predict(
      scene.ptr, predict_vehicle.empty() ? nullptr : predict_vehicle.c_str(), predict_m,
      predict_seed, predict_out.c_str());
    if (st != ADVSIM_OK) {
      return report_failure(st, "predicting candidates");
    }
    std::printf("wrote %d candidates to %s\n", predict_m, predict_out.c_str());
    return 0;
  }

  if (attack->parsed()) {
    ScenarioHandle scene;
    if (!load_scenario(attack_scenario, scene)) {
      return 1;
    }
    json agent;
    std::string error;
    if (!parse_agent(attack_agent, agent, error)) {
      std::fprintf(stderr, "error: %s\n", error.c_str());
      return 1;
    }
    const json options = {
      {"agent", agent},       {"m", attack_m},       {"n_buffer", attack_n},
      {"alpha", attack_alpha}, {"seed", attack_seed}, {"selector", attack_selector},
    };
    ScenarioHandle adversarial;
    char * info_text = nullptr;
    const advsim_status st = advsim_attack_scene(
      scene.ptr, options.dump().c_str(), &adversarial.ptr, &info_text);
    const std::string info = take_string(info_text);
    if (st != ADVSIM_OK) {
      return report_failure(st, "attacking scene");
    }
    const advsim_status save = advsim_scenario_save(adversarial.ptr, attack_out.c_str());
    if (save != ADVSIM_OK) {
      return report_failure(save, "saving " + attack_out);
    }
    const std::string report_path =
      attack_report.empty() ? attack_out + ".report.json" : attack_report;
    if (!write_text(report_path, info + "\n")) {
      return 1;
    }
    const json parsed = json::parse(info);
    std::printf("wrote %s (candidate %llu, posterior %.6g) and %s\n", attack_out.c_str(),
                static_cast<unsigned long long>(parsed["selected"].get<std::uint64_t>()),
                parsed["posterior"].get<double>(), report_path.c_str());
    return 0;
  }

  if (rollout->parsed()) {
    ScenarioHandle scene;
    if (!load_scenario(rollout_scenario, scene)) {
      return 1;
    }
    json agent;
    std::string error;
    if (!parse_agent(rollout_agent, agent, error)) {
      std::fprintf(stderr, "error: %s\n", error.c_str());
      return 1;
    }
    const json options = {{"agent", agent}};
    char * trace_text = nullptr;
    char * summary_text = nullptr;
    const advsim_status st =
      advsim_rollout(scene.ptr, options.dump().c_str(), &trace_text, &summary_text);
    const std::string trace = take_string(trace_text);
    const std::string summary = take_string(summary_text);
    if (st != ADVSIM_OK) {
      return report_failure(st, "rolling out episode");
    }
    // One self-contained document: the trace plus its summary.
    json doc = json::parse(trace);
    doc["summary"] = json::parse(summary);
    if (!write_text(rollout_record, doc.dump(2) + "\n")) {
      return 1;
    }
    std::printf("wrote %s\n%s\n", rollout_record.c_str(), summary.c_str());
    return 0;
  }

  if (train->parsed()) {
    json cfg = {
      {"pool_dir", train_pool},
      {"split", train_split},
      {"mode", train_mode},
      {"generations", train_steps},
      {"seed", train_seed},
      {"out_dir", train_out},
      {"population", train_population},
      {"scenes_per_gen", train_scenes},
      {"m", train_m},
      {"n", train_n},
      {"alpha", train_alpha},
      {"checkpoint_every", train_checkpoint_every},
    };
    if (!train_resume.empty()) {
      cfg["resume_from"] = train_resume;
    }
    char * summary_text = nullptr;
    const advsim_status st = advsim_train(cfg.dump().c_str(), &summary_text);
    const std::string summary = take_string(summary_text);
    if (st != ADVSIM_OK) {
      return report_failure(st, "training");
    }
    std::printf("%s\n", summary.c_str());
    return 0;
  }

  if (eval_attack->parsed()) {
    json agent;
    std::string error;
    if (!parse_agent(ea_agent, agent, error)) {
      std::fprintf(stderr, "error: %s\n", error.c_str());
      return 1;
    }
    const json cfg = {
      {"agent", agent},
      {"scenes_dir", ea_scenes},
      {"split", ea_split},
      {"n_buffer", ea_n},
      {"m", ea_m},
      {"alpha", ea_alpha},
      {"seed", ea_seed},
      {"selector", ea_selector},
      {"generate", !ea_no_generate},
    };
    char * report_text = nullptr;
    const advsim_status st = advsim_eval_attack(cfg.dump().c_str(), &report_text);
    const std::string report = take_string(report_text);
    if (st != ADVSIM_OK) {
      return report_failure(st, "evaluating attack");
    }
    if (!write_text(ea_out, report + "\n")) {
      return 1;
    }
    const json parsed = json::parse(report);
    std::printf("attack success rate %.1f%% (background %.1f%%), "
                "generation %.2f +/- %.2f ms, report %s\n",
                100.0 * parsed["success_rate"].get<double>(),
                100.0 * parsed["background_rate"].get<double>(),
                parsed["gen_time_mean_ms"].get<double>(),
                parsed["gen_time_std_ms"].get<double>(), ea_out.c_str());
    return 0;
  }

  if (eval_policy->parsed()) {
    const json cfg = {
      {"policy_path", ep_ckpt}, {"scenes_dir", ep_scenes}, {"split", ep_split},
      {"traffic", ep_mode},     {"seeds", ep_seeds},       {"m", ep_m},
      {"alpha", ep_alpha},
    };
    char * report_text = nullptr;
    const advsim_status st = advsim_eval_policy(cfg.dump().c_str(), &report_text);
    const std::string report = take_string(report_text);
    if (st != ADVSIM_OK) {
      return report_failure(st, "evaluating policy");
    }
    if (!write_text(ep_out, report + "\n")) {
      return 1;
    }
    const json parsed = json::parse(report);
    std::printf("crash rate %.1f%% +/- %.1f%%, route completion %.1f%% +/- %.1f%%, "
                "report %s\n",
                100.0 * parsed["crash_rate_mean"].get<double>(),
                100.0 * parsed["crash_rate_std"].get<double>(),
                100.0 * parsed["completion_mean"].get<double>(),
                100.0 * parsed["completion_std"].get<double>(), ep_out.c_str());
    return 0;
  }

  if (render->parsed()) {
    std::string trace;
    if (!read_text(render_trace, trace)) {
      return 1;
    }
    char * svg_text = nullptr;
    const advsim_status st = advsim_render(trace.c_str(), &svg_text);
    const std::string svg = take_string(svg_text);
    if (st != ADVSIM_OK) {
      return report_failure(st, "rendering trace");
    }
    if (!write_text(render_out, svg)) {
      return 1;
    }
    std::printf("wrote %s\n", render_out.c_str());
    return 0;
  }

  return 0;
}
