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

#ifndef ADVSIM_EVAL_HPP_
#define ADVSIM_EVAL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advsim/agents.hpp"
#include "advsim/pipeline.hpp"
#include "advsim/scenario.hpp"
#include "advsim/simulator.hpp"
#include "json.hpp"

namespace advsim::eval
{

/// Fixed (non-learning) agents the attack harness can target.
enum class AgentKind
{
  replay,  // retraces the logged ego track
  idm,     // car-following speed control with pure-pursuit steering
  policy,  // frozen neural policy, deterministic actions
};

const char * agent_kind_name(AgentKind k);
AgentKind agent_kind_from_name(const std::string & name);

struct AgentSpec
{
  AgentKind kind = AgentKind::replay;
  const agents::PolicyParams * policy = nullptr;  // required for kind policy
  agents::IdmParams idm{};
};

struct AttackConfig
{
  int m_candidates = 32;
  int n_buffer = 1;    // agent rollouts collected per scene before generation
  double alpha = 0.99;
  bool generate = true;  // false replays the raw scene (control condition)
  pipeline::CandidateSelector selector = pipeline::CandidateSelector::posterior;
  std::uint64_t seed = 0;
};

struct SceneAttackOutcome
{
  std::string name;
  bool adversary_collision = false;
  bool background_collision = false;
  int crash_step = -1;       // episode step of the first contact, -1 if clean
  double gen_time_ms = 0.0;  // predict + score + select only
};

struct AttackReport
{
  std::vector<SceneAttackOutcome> scenes;
  double success_rate = 0.0;      // ego-adversary collisions / scene count
  double background_rate = 0.0;   // collisions with replayed traffic instead
  double gen_time_mean_ms = 0.0;
  double gen_time_std_ms = 0.0;

  nlohmann::json to_json() const;
};

/// For every scene: fill the rollout buffer with `n_buffer` episodes of the
/// fixed agent on the raw scene, generate the adversarial variant (unless
/// disabled), replay the agent against it, and record who it hit. Each scene
/// slot draws from its own derived seed, so no scene's randomness leaks into
/// the next.
AttackReport attack_success_rate(
  const AgentSpec & agent, std::span<const pipeline::PoolEntry> scenes,
  const AttackConfig & cfg = {});

/// Traffic the policy is evaluated against.
enum class TrafficMode
{
  log_replay,       // raw logged scenes
  safety_critical,  // adversary resampled against the frozen policy, one
                    // rollout in the buffer
};

const char * traffic_mode_name(TrafficMode m);
TrafficMode traffic_mode_from_name(const std::string & name);

struct PolicyEvalConfig
{
  TrafficMode traffic = TrafficMode::log_replay;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  int m_candidates = 32;
  double alpha = 0.99;
};

struct SceneEpisodeSummary
{
  std::string name;
  std::uint64_t seed = 0;
  double route_completion = 0.0;
  bool crashed = false;
  bool out_of_road = false;
  bool arrived = false;
  int steps = 0;
  double episode_return = 0.0;
};

struct SeedAggregate
{
  std::uint64_t seed = 0;
  double crash_rate = 0.0;
  double route_completion = 0.0;
  double mean_return = 0.0;
};

struct PolicyReport
{
  TrafficMode traffic = TrafficMode::log_replay;
  std::vector<SceneEpisodeSummary> episodes;
  std::vector<SeedAggregate> per_seed;
  double crash_rate_mean = 0.0;
  double crash_rate_std = 0.0;
  double completion_mean = 0.0;
  double completion_std = 0.0;

  nlohmann::json to_json() const;
};

/// Deterministic rollouts of `policy` on every scene, once per seed, against
/// the configured traffic. Aggregates are means over scenes per seed, then
/// mean and population standard deviation across seeds.
PolicyReport eval_policy(
  const agents::PolicyParams & policy, std::span<const pipeline::PoolEntry> scenes,
  const PolicyEvalConfig & cfg = {});

/// Every vehicle's state at one executed frame, in scenario track order with
/// the ego slot holding its live (simulated) state.
struct TraceFrame
{
  std::vector<VehicleState> states;
};

/// Replayable record of one episode: the scenario plus the per-frame states
/// of every vehicle, starting at the reset frame.
struct EpisodeTrace
{
  Scenario scenario;
  std::vector<TraceFrame> frames;
  int crash_step = -1;     // index into frames, -1 when no collision
  int crash_partner = -1;  // track index the ego hit

  nlohmann::json to_json() const;
  static EpisodeTrace from_json(const nlohmann::json & j);
  void save_file(const std::string & path) const;
  static EpisodeTrace load_file(const std::string & path);
};

/// Runs `agent` on `scenario` and captures every frame. When `summary` is
/// non-null it receives the episode statistics (trajectory left empty).
EpisodeTrace record_episode(
  const Scenario & scenario, agents::Agent & agent,
  sim::EgoMode mode = sim::EgoMode::policy, sim::EpisodeResult * summary = nullptr);

/// One self-contained SVG 1.1 document: the map once, the ego and adversary
/// paths, and one group per captured frame with every vehicle as an oriented
/// rectangle (ego #CD0000, adversary #00B0F0). The crash frame circles the
/// colliding pair. Throws on an empty trace.
std::string render_episode(const EpisodeTrace & trace);

}  // namespace advsim::eval

#endif  // ADVSIM_EVAL_HPP_
