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

#include "advsim/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <utility>

#include "advsim/errors.hpp"
#include "advsim/geometry.hpp"
#include "json_util.hpp"

namespace advsim::eval
{

namespace
{

// Keeps derived per-scene seeds far apart so reports are independent of
// scene order.
constexpr std::uint64_t kSeedStride = 0x9E3779B97F4A7C15ULL;

std::unique_ptr<agents::Agent> make_agent(const AgentSpec & spec)
{
  switch (spec.kind) {
    case AgentKind::replay:
      return std::make_unique<agents::ReplayAgent>();
    case AgentKind::idm:
      return std::make_unique<agents::IdmAgent>(spec.idm);
    case AgentKind::policy:
      if (spec.policy == nullptr) {
        fail(ErrorCode::argument, "attack: policy agent requires weights");
      }
      return std::make_unique<agents::PolicyAgent>(
        *spec.policy, agents::ActMode::deterministic);
  }
  fail(ErrorCode::argument, "attack: unknown agent kind");
}

sim::EgoMode ego_mode(AgentKind kind)
{
  return kind == AgentKind::replay ? sim::EgoMode::replay : sim::EgoMode::policy;
}

struct MeanStd
{
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(std::span<const double> xs)
{
  MeanStd out;
  if (xs.empty()) {
    return out;
  }
  for (const double x : xs) {
    out.mean += x;
  }
  out.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (const double x : xs) {
    var += (x - out.mean) * (x - out.mean);
  }
  out.std = std::sqrt(var / static_cast<double>(xs.size()));
  return out;
}

nlohmann::json state_to_json(const VehicleState & s)
{
  return {
    {"x", s.pose.x},
    {"y", s.pose.y},
    {"heading", s.pose.heading},
    {"speed", s.speed},
    {"valid", s.valid},
  };
}

VehicleState state_from_json(const nlohmann::json & j, const std::string & path)
{
  VehicleState s;
  s.pose.x = jsonutil::get_number(j, "x", path);
  s.pose.y = jsonutil::get_number(j, "y", path);
  s.pose.heading = jsonutil::get_number(j, "heading", path);
  s.speed = jsonutil::get_number(j, "speed", path);
  s.valid = jsonutil::require_bool(jsonutil::require_key(j, "valid", path), path + ".valid");
  return s;
}

}  // namespace

const char * agent_kind_name(AgentKind k)
{
  switch (k) {
    case AgentKind::replay:
      return "replay";
    case AgentKind::idm:
      return "idm";
    case AgentKind::policy:
      return "policy";
  }
  fail(ErrorCode::argument, "unknown agent kind");
}

AgentKind agent_kind_from_name(const std::string & name)
{
  if (name == "replay") {
    return AgentKind::replay;
  }
  if (name == "idm") {
    return AgentKind::idm;
  }
  if (name == "policy") {
    return AgentKind::policy;
  }
  fail(ErrorCode::argument, "unknown agent kind: " + name);
}

const char * traffic_mode_name(TrafficMode m)
{
  switch (m) {
    case TrafficMode::log_replay:
      return "log_replay";
    case TrafficMode::safety_critical:
      return "safety_critical";
  }
  fail(ErrorCode::argument, "unknown traffic mode");
}

TrafficMode traffic_mode_from_name(const std::string & name)
{
  if (name == "log_replay") {
    return TrafficMode::log_replay;
  }
  if (name == "safety_critical") {
    return TrafficMode::safety_critical;
  }
  fail(ErrorCode::argument, "unknown traffic mode: " + name);
}

nlohmann::json AttackReport::to_json() const
{
  nlohmann::json scenes_j = nlohmann::json::array();
  for (const auto & s : scenes) {
    scenes_j.push_back({
      {"name", s.name},
      {"adversary_collision", s.adversary_collision},
      {"background_collision", s.background_collision},
      {"crash_step", s.crash_step},
      {"gen_time_ms", s.gen_time_ms},
    });
  }
  return {
    {"format_version", 1},
    {"scenes", std::move(scenes_j)},
    {"success_rate", success_rate},
    {"background_rate", background_rate},
    {"gen_time_mean_ms", gen_time_mean_ms},
    {"gen_time_std_ms", gen_time_std_ms},
  };
}

AttackReport attack_success_rate(
  const AgentSpec & agent, std::span<const pipeline::PoolEntry> scenes,
  const AttackConfig & cfg)
{
  if (scenes.empty()) {
    fail(ErrorCode::argument, "attack: empty scene set");
  }
  if (cfg.n_buffer < 1) {
    fail(ErrorCode::argument, "attack: n_buffer must be at least 1");
  }
  const sim::EgoMode mode = ego_mode(agent.kind);

  AttackReport report;
  std::vector<double> times;
  times.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scenario & raw = scenes[i].scenario;
    Rng rng(cfg.seed ^ (kSeedStride * (i + 1)));
    const auto driver = make_agent(agent);

    resample::EgoRolloutBuffer buffer(static_cast<std::size_t>(cfg.n_buffer));
    for (int k = 0; k < cfg.n_buffer; ++k) {
      sim::Simulator simulator(raw, {}, {}, mode);
      auto episode = agents::run_episode(simulator, *driver);
      buffer.push(std::move(episode.trajectory), episode.log_prob_sum);
    }

    SceneAttackOutcome outcome;
    outcome.name = scenes[i].name;
    std::optional<pipeline::GenerationOutcome> generated;
    if (cfg.generate) {
      generated = pipeline::generate_adversarial(
        raw, buffer, cfg.m_candidates, cfg.alpha, rng, cfg.selector);
      outcome.gen_time_ms = generated->gen_time_ms;
    }
    const Scenario & target = generated ? generated->scenario : raw;

    sim::Simulator simulator(target, {}, {}, mode);
    const auto episode = agents::run_episode(simulator, *driver);
    if (episode.crashed) {
      outcome.crash_step = episode.steps;
      if (episode.crash_partner == static_cast<int>(target.adversary_index())) {
        outcome.adversary_collision = true;
      } else {
        outcome.background_collision = true;
      }
    }
    report.success_rate += outcome.adversary_collision ? 1.0 : 0.0;
    report.background_rate += outcome.background_collision ? 1.0 : 0.0;
    times.push_back(outcome.gen_time_ms);
    report.scenes.push_back(std::move(outcome));
  }

  const double n = static_cast<double>(scenes.size());
  report.success_rate /= n;
  report.background_rate /= n;
  const MeanStd t = mean_std(times);
  report.gen_time_mean_ms = t.mean;
  report.gen_time_std_ms = t.std;
  return report;
}

nlohmann::json PolicyReport::to_json() const
{
  nlohmann::json episodes_j = nlohmann::json::array();
  for (const auto & e : episodes) {
    episodes_j.push_back({
      {"name", e.name},
      {"seed", e.seed},
      {"route_completion", e.route_completion},
      {"crashed", e.crashed},
      {"out_of_road", e.out_of_road},
      {"arrived", e.arrived},
      {"steps", e.steps},
      {"episode_return", e.episode_return},
    });
  }
  nlohmann::json seeds_j = nlohmann::json::array();
  for (const auto & s : per_seed) {
    seeds_j.push_back({
      {"seed", s.seed},
      {"crash_rate", s.crash_rate},
      {"route_completion", s.route_completion},
      {"mean_return", s.mean_return},
    });
  }
  return {
    {"format_version", 1},
    {"traffic", traffic_mode_name(traffic)},
    {"episodes", std::move(episodes_j)},
    {"per_seed", std::move(seeds_j)},
    {"crash_rate_mean", crash_rate_mean},
    {"crash_rate_std", crash_rate_std},
    {"completion_mean", completion_mean},
    {"completion_std", completion_std},
  };
}

PolicyReport eval_policy(
  const agents::PolicyParams & policy, std::span<const pipeline::PoolEntry> scenes,
  const PolicyEvalConfig & cfg)
{
  if (scenes.empty()) {
    fail(ErrorCode::argument, "eval_policy: empty scene set");
  }
  if (cfg.seeds.empty()) {
    fail(ErrorCode::argument, "eval_policy: at least one seed required");
  }

  PolicyReport report;
  report.traffic = cfg.traffic;
  std::vector<double> crash_rates;
  std::vector<double> completions;
  for (const std::uint64_t seed : cfg.seeds) {
    SeedAggregate agg;
    agg.seed = seed;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const Scenario & raw = scenes[i].scenario;
      std::optional<pipeline::GenerationOutcome> generated;
      if (cfg.traffic == TrafficMode::safety_critical) {
        // Resample the adversary against the frozen policy's own rollout.
        agents::PolicyAgent frozen(policy, agents::ActMode::deterministic);
        sim::Simulator probe(raw);
        auto rollout = agents::run_episode(probe, frozen);
        resample::EgoRolloutBuffer buffer(1);
        buffer.push(std::move(rollout.trajectory), rollout.log_prob_sum);
        Rng rng(seed ^ (kSeedStride * (i + 1)));
        generated = pipeline::generate_adversarial(
          raw, buffer, cfg.m_candidates, cfg.alpha, rng);
      }
      const Scenario & target = generated ? generated->scenario : raw;

      agents::PolicyAgent driver(policy, agents::ActMode::deterministic);
      sim::Simulator simulator(target);
      const auto episode = agents::run_episode(simulator, driver);

      SceneEpisodeSummary row;
      row.name = scenes[i].name;
      row.seed = seed;
      row.route_completion = episode.route_completion;
      row.crashed = episode.crashed;
      row.out_of_road = episode.out_of_road;
      row.arrived = episode.arrived;
      row.steps = episode.steps;
      row.episode_return = episode.episode_return;
      report.episodes.push_back(std::move(row));

      agg.crash_rate += episode.crashed ? 1.0 : 0.0;
      agg.route_completion += episode.route_completion;
      agg.mean_return += episode.episode_return;
    }
    const double n = static_cast<double>(scenes.size());
    agg.crash_rate /= n;
    agg.route_completion /= n;
    agg.mean_return /= n;
    crash_rates.push_back(agg.crash_rate);
    completions.push_back(agg.route_completion);
    report.per_seed.push_back(agg);
  }

  const MeanStd crash = mean_std(crash_rates);
  const MeanStd comp = mean_std(completions);
  report.crash_rate_mean = crash.mean;
  report.crash_rate_std = crash.std;
  report.completion_mean = comp.mean;
  report.completion_std = comp.std;
  return report;
}

nlohmann::json EpisodeTrace::to_json() const
{
  nlohmann::json frames_j = nlohmann::json::array();
  for (const auto & frame : frames) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto & s : frame.states) {
      row.push_back(state_to_json(s));
    }
    frames_j.push_back(std::move(row));
  }
  return {
    {"format_version", 1},
    {"scenario", scenario.to_json()},
    {"frames", std::move(frames_j)},
    {"crash_step", crash_step},
    {"crash_partner", crash_partner},
  };
}

EpisodeTrace EpisodeTrace::from_json(const nlohmann::json & j)
{
  if (jsonutil::get_int(j, "format_version", "trace") != 1) {
    fail(ErrorCode::schema, "trace.format_version: unsupported");
  }
  EpisodeTrace trace{
    Scenario::from_json(jsonutil::require_key(j, "scenario", "trace")), {}, -1, -1};
  const auto & frames_j =
    jsonutil::require_array(jsonutil::require_key(j, "frames", "trace"), "trace.frames");
  const std::size_t track_count = trace.scenario.tracks().size();
  for (std::size_t k = 0; k < frames_j.size(); ++k) {
    const std::string path = "trace.frames[" + std::to_string(k) + "]";
    const auto & row = jsonutil::require_array(frames_j[k], path);
    if (row.size() != track_count) {
      fail(ErrorCode::schema, path + ": expected one state per track");
    }
    TraceFrame frame;
    frame.states.reserve(track_count);
    for (const auto & s : row) {
      frame.states.push_back(state_from_json(s, path));
    }
    trace.frames.push_back(std::move(frame));
  }
  trace.crash_step = jsonutil::get_int(j, "crash_step", "trace");
  trace.crash_partner = jsonutil::get_int(j, "crash_partner", "trace");
  const int frame_count = static_cast<int>(trace.frames.size());
  if (trace.crash_step < -1 || trace.crash_step >= frame_count) {
    fail(ErrorCode::schema, "trace.crash_step: out of range");
  }
  if (trace.crash_partner < -1 || trace.crash_partner >= static_cast<int>(track_count)) {
    fail(ErrorCode::schema, "trace.crash_partner: out of range");
  }
  return trace;
}

void EpisodeTrace::save_file(const std::string & path) const
{
  jsonutil::save_json_file(to_json(), path);
}

EpisodeTrace EpisodeTrace::load_file(const std::string & path)
{
  return from_json(jsonutil::load_json_file(path));
}

EpisodeTrace record_episode(
  const Scenario & scenario, agents::Agent & agent, sim::EgoMode mode,
  sim::EpisodeResult * summary)
{
  sim::Simulator simulator(scenario, {}, {}, mode);
  std::vector<double> obs = simulator.reset();
  agent.begin_episode(simulator);

  EpisodeTrace trace{scenario, {}, -1, -1};
  const std::size_t track_count = scenario.tracks().size();
  const std::size_t ego = scenario.ego_index();
  const auto capture = [&]() {
    TraceFrame frame;
    frame.states.reserve(track_count);
    for (std::size_t t = 0; t < track_count; ++t) {
      frame.states.push_back(t == ego ? simulator.ego_state() : simulator.vehicle_state(t));
    }
    trace.frames.push_back(std::move(frame));
  };

  sim::EpisodeResult stats;
  capture();
  while (!simulator.done()) {
    const auto decision = agent.act(obs, simulator);
    auto result = simulator.step(decision.action);
    capture();
    stats.episode_return += result.reward;
    stats.log_prob_sum += decision.log_prob;
    ++stats.steps;
    stats.crashed |= result.info.crashed;
    stats.out_of_road |= result.info.out_of_road;
    stats.arrived |= result.info.arrived;
    if (result.info.crashed && trace.crash_step < 0) {
      trace.crash_step = static_cast<int>(trace.frames.size()) - 1;
      trace.crash_partner = result.info.crashed_with;
    }
    obs = std::move(result.observation);
  }
  if (summary != nullptr) {
    stats.crash_partner = trace.crash_partner;
    const double denom = simulator.remaining_route();
    if (stats.arrived) {
      stats.route_completion = 1.0;
    } else if (denom > 1e-9) {
      stats.route_completion =
        std::clamp((simulator.route_arc() - simulator.start_arc()) / denom, 0.0, 1.0);
    }
    *summary = std::move(stats);
  }
  return trace;
}

namespace
{

std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Bounds
{
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();

  void include(geom::Vec2 p)
  {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
};

constexpr const char * kEgoColor = "#CD0000";
constexpr const char * kAdversaryColor = "#00B0F0";
constexpr const char * kTrafficColor = "#9AA0A6";

}  // namespace

std::string render_episode(const EpisodeTrace & trace)
{
  if (trace.frames.empty()) {
    fail(ErrorCode::argument, "render: empty trace");
  }
  const Scenario & sc = trace.scenario;

  Bounds b;
  for (const auto & lane : sc.map().lanes) {
    for (const auto & p : lane.centerline.points()) {
      b.include(p);
    }
  }
  for (const auto & edge : sc.map().boundaries) {
    for (const auto & p : edge.points()) {
      b.include(p);
    }
  }
  for (const auto & frame : trace.frames) {
    for (const auto & s : frame.states) {
      if (s.valid) {
        b.include(s.pose.position());
      }
    }
  }
  b.include(sc.destination());

  const double pad = 10.0;
  const double width = b.max_x - b.min_x + 2.0 * pad;
  const double height = b.max_y - b.min_y + 2.0 * pad;
  // SVG y grows downward; flip so north stays up.
  const auto sx = [&](double x) { return x - b.min_x + pad; };
  const auto sy = [&](double y) { return b.max_y - y + pad; };
  const auto points_attr = [&](std::span<const geom::Vec2> pts) {
    std::string out;
    for (const auto & p : pts) {
      if (!out.empty()) {
        out += ' ';
      }
      out += num(sx(p.x)) + "," + num(sy(p.y));
    }
    return out;
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
      << num(width * 6.0) << "\" height=\"" << num(height * 6.0) << "\" viewBox=\"0 0 "
      << num(width) << " " << num(height) << "\">\n";
  svg << "  <defs>\n"
      << "    <marker id=\"tip-ego\" markerWidth=\"6\" markerHeight=\"6\" refX=\"3\""
      << " refY=\"3\" orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 Z\" fill=\"" << kEgoColor
      << "\"/></marker>\n"
      << "    <marker id=\"tip-adv\" markerWidth=\"6\" markerHeight=\"6\" refX=\"3\""
      << " refY=\"3\" orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 Z\" fill=\""
      << kAdversaryColor << "\"/></marker>\n"
      << "  </defs>\n";
  svg << "  <rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" fill=\"#FAFAFA\"/>\n";

  svg << "  <g class=\"map\">\n";
  for (const auto & lane : sc.map().lanes) {
    svg << "    <polyline points=\"" << points_attr(lane.centerline.points())
        << "\" fill=\"none\" stroke=\"#E0E0E0\" stroke-width=\"" << num(lane.lane_width)
        << "\" stroke-linecap=\"round\" stroke-linejoin=\"round\"/>\n";
  }
  for (const auto & lane : sc.map().lanes) {
    svg << "    <polyline points=\"" << points_attr(lane.centerline.points())
        << "\" fill=\"none\" stroke=\"#FFFFFF\" stroke-width=\"0.15\""
        << " stroke-dasharray=\"2 2\"/>\n";
  }
  for (const auto & edge : sc.map().boundaries) {
    svg << "    <polyline points=\"" << points_attr(edge.points())
        << "\" fill=\"none\" stroke=\"#555555\" stroke-width=\"0.25\"/>\n";
  }
  svg << "    <circle cx=\"" << num(sx(sc.destination().x)) << "\" cy=\""
      << num(sy(sc.destination().y)) << "\" r=\"1.5\" fill=\"none\" stroke=\"#2E7D32\""
      << " stroke-width=\"0.3\"/>\n";
  svg << "  </g>\n";

  const std::size_t ego = sc.ego_index();
  const std::size_t adversary = sc.adversary_index();
  const auto path_of = [&](std::size_t track) {
    std::vector<geom::Vec2> pts;
    for (const auto & frame : trace.frames) {
      if (frame.states[track].valid) {
        pts.push_back(frame.states[track].pose.position());
      }
    }
    return pts;
  };
  svg << "  <g class=\"paths\" fill=\"none\" stroke-width=\"0.3\" opacity=\"0.6\">\n";
  const auto ego_path = path_of(ego);
  if (ego_path.size() > 1) {
    svg << "    <polyline points=\"" << points_attr(ego_path) << "\" stroke=\"" << kEgoColor
        << "\" marker-end=\"url(#tip-ego)\"/>\n";
  }
  const auto adv_path = path_of(adversary);
  if (adv_path.size() > 1) {
    svg << "    <polyline points=\"" << points_attr(adv_path) << "\" stroke=\""
        << kAdversaryColor << "\" marker-end=\"url(#tip-adv)\"/>\n";
  }
  svg << "  </g>\n";

  const int last = static_cast<int>(trace.frames.size()) - 1;
  const int focus = trace.crash_step >= 0 ? trace.crash_step : last;
  for (int k = 0; k <= last; ++k) {
    const auto & frame = trace.frames[static_cast<std::size_t>(k)];
    svg << "  <g class=\"frame\" id=\"frame-" << k << "\" opacity=\""
        << (k == focus ? "1" : "0.12") << "\">\n";
    for (std::size_t t = 0; t < frame.states.size(); ++t) {
      const auto & s = frame.states[t];
      if (!s.valid) {
        continue;
      }
      const auto & track = sc.tracks()[t];
      const geom::OrientedBox box{s.pose, track.length, track.width};
      const auto corners = box.corners();
      const char * color =
        t == ego ? kEgoColor : (t == adversary ? kAdversaryColor : kTrafficColor);
      svg << "    <polygon points=\"" << points_attr(corners) << "\" fill=\"" << color
          << "\" stroke=\"#333333\" stroke-width=\"0.1\"/>\n";
    }
    if (k == trace.crash_step && trace.crash_partner >= 0) {
      for (const std::size_t t : {ego, static_cast<std::size_t>(trace.crash_partner)}) {
        const auto & s = frame.states[t];
        svg << "    <circle class=\"crash-mark\" cx=\"" << num(sx(s.pose.x)) << "\" cy=\""
            << num(sy(s.pose.y)) << "\" r=\"4\" fill=\"none\" stroke=\"#FF8C00\""
            << " stroke-width=\"0.4\"/>\n";
      }
    }
    svg << "  </g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace advsim::eval
