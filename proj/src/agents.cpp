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

#include "advsim/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>

#include "advsim/errors.hpp"
#include "json_util.hpp"

namespace advsim::agents
{

namespace
{

double softplus(double x)
{
  // Stable for large |x|.
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// log(1 - tanh(x)^2) without forming the catastrophic 1 - tanh^2.
double log_one_minus_tanh_sq(double x)
{
  return 2.0 * (std::numbers::ln2 - x - softplus(-2.0 * x));
}

}  // namespace

double idm_accel(
  double speed, std::optional<double> lead_speed, std::optional<double> gap,
  const IdmParams & p)
{
  if (speed < 0.0 || !std::isfinite(speed)) {
    fail(ErrorCode::argument, "idm_accel: speed must be finite and nonnegative");
  }
  if (lead_speed.has_value() != gap.has_value()) {
    fail(ErrorCode::argument, "idm_accel: lead_speed and gap go together");
  }
  if (p.v0 <= 0.0 || p.a_max <= 0.0 || p.b_comfort <= 0.0 || p.hard_brake <= 0.0) {
    fail(ErrorCode::argument, "idm_accel: parameters must be positive");
  }

  const double free_term = std::pow(speed / p.v0, p.delta);
  if (!gap.has_value()) {
    return p.a_max * (1.0 - free_term);
  }
  if (*gap <= 0.0) {
    return -p.hard_brake;
  }
  const double closing = speed - *lead_speed;
  const double desired_gap =
    p.min_gap +
    std::max(0.0, speed * p.headway +
                    speed * closing / (2.0 * std::sqrt(p.a_max * p.b_comfort)));
  const double ratio = desired_gap / *gap;
  return p.a_max * (1.0 - free_term - ratio * ratio);
}

std::size_t PolicyParams::weight_count(std::span<const int> layers)
{
  if (layers.size() < 2) {
    fail(ErrorCode::argument, "PolicyParams: need at least input and output layers");
  }
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (layers[i] <= 0 || layers[i + 1] <= 0) {
      fail(ErrorCode::argument, "PolicyParams: layer sizes must be positive");
    }
    n += static_cast<std::size_t>(layers[i]) * static_cast<std::size_t>(layers[i + 1]) +
         static_cast<std::size_t>(layers[i + 1]);
  }
  return n;
}

PolicyParams PolicyParams::zeros()
{
  PolicyParams p;
  p.weights.assign(weight_count(p.layers), 0.0);
  return p;
}

nlohmann::json PolicyParams::to_json() const
{
  nlohmann::json j;
  j["format_version"] = 1;
  j["layers"] = layers;
  j["stddev"] = stddev;
  j["weights"] = weights;
  return j;
}

PolicyParams PolicyParams::from_json(const nlohmann::json & j)
{
  using jsonutil::require_array;
  using jsonutil::require_key;
  using jsonutil::require_number;
  if (!j.is_object()) {
    fail(ErrorCode::schema, "policy: expected a JSON object");
  }
  const int version = jsonutil::get_int(j, "format_version", "policy");
  if (version != 1) {
    fail(
      ErrorCode::schema,
      "policy.format_version: unsupported version " + std::to_string(version));
  }
  PolicyParams p;
  p.layers.clear();
  for (const auto & v : require_array(require_key(j, "layers", "policy"), "policy.layers")) {
    p.layers.push_back(static_cast<int>(require_number(v, "policy.layers[]")));
  }
  const auto & sd = require_array(require_key(j, "stddev", "policy"), "policy.stddev");
  if (sd.size() != p.stddev.size()) {
    fail(ErrorCode::schema, "policy.stddev: expected 2 entries");
  }
  for (std::size_t i = 0; i < p.stddev.size(); ++i) {
    p.stddev[i] = require_number(sd[i], "policy.stddev[]");
  }
  p.weights.clear();
  for (const auto & v :
       require_array(require_key(j, "weights", "policy"), "policy.weights")) {
    p.weights.push_back(require_number(v, "policy.weights[]"));
  }
  if (p.weights.size() != weight_count(p.layers)) {
    fail(
      ErrorCode::invariant, "policy.weights: expected " +
                              std::to_string(weight_count(p.layers)) + " values, got " +
                              std::to_string(p.weights.size()));
  }
  return p;
}

void PolicyParams::save_file(const std::string & path) const
{
  jsonutil::save_json_file(to_json(), path);
}

PolicyParams PolicyParams::load_file(const std::string & path)
{
  return from_json(jsonutil::load_json_file(path));
}

Decision policy_act(
  const PolicyParams & params, std::span<const double> observation, ActMode mode,
  Rng * rng)
{
  if (params.layers.size() < 2 || params.layers.back() != 2) {
    fail(ErrorCode::argument, "policy_act: network must end in 2 action channels");
  }
  if (observation.size() != static_cast<std::size_t>(params.layers.front())) {
    fail(
      ErrorCode::argument, "policy_act: observation has " +
                             std::to_string(observation.size()) + " values, network takes " +
                             std::to_string(params.layers.front()));
  }
  if (params.weights.size() != PolicyParams::weight_count(params.layers)) {
    fail(ErrorCode::argument, "policy_act: weight vector does not match the layout");
  }
  if (mode == ActMode::stochastic && rng == nullptr) {
    fail(ErrorCode::argument, "policy_act: stochastic mode needs an rng");
  }

  std::vector<double> current(observation.begin(), observation.end());
  std::size_t offset = 0;
  for (std::size_t layer = 0; layer + 1 < params.layers.size(); ++layer) {
    const std::size_t in = static_cast<std::size_t>(params.layers[layer]);
    const std::size_t out = static_cast<std::size_t>(params.layers[layer + 1]);
    std::vector<double> next(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = 0.0;
      const double * row = params.weights.data() + offset + r * in;
      for (std::size_t c = 0; c < in; ++c) {
        acc += row[c] * current[c];
      }
      next[r] = acc + params.weights[offset + out * in + r];
    }
    offset += out * in + out;
    const bool hidden = layer + 2 < params.layers.size();
    if (hidden) {
      for (double & v : next) {
        v = std::tanh(v);
      }
    }
    current = std::move(next);
  }

  Decision d;
  std::array<double, 2> pre{current[0], current[1]};
  if (mode == ActMode::stochastic) {
    double log_prob = 0.0;
    for (std::size_t i = 0; i < pre.size(); ++i) {
      const double sigma = std::max(params.stddev[i], 1e-6);
      const double z = pre[i] + sigma * normal_sample(*rng);
      const double standardized = (z - pre[i]) / sigma;
      log_prob += -0.5 * standardized * standardized - std::log(sigma) -
                  0.5 * std::log(2.0 * std::numbers::pi) - log_one_minus_tanh_sq(z);
      pre[i] = z;
    }
    d.log_prob = log_prob;
  }
  d.action.steer = std::tanh(pre[0]);
  d.action.accel = std::tanh(pre[1]);
  return d;
}

Decision IdmAgent::act(std::span<const double>, const sim::Simulator & simulator)
{
  const Scenario & scenario = simulator.scenario();
  const VehicleState ego = simulator.ego_state();
  const auto & route = scenario.route_polyline();
  const double ego_arc = simulator.route_arc();
  const double ego_half = 0.5 * scenario.ego_track().length;

  // Nearest vehicle ahead inside the route corridor.
  std::optional<double> lead_speed;
  std::optional<double> lead_gap;
  for (std::size_t t = 0; t < scenario.tracks().size(); ++t) {
    if (t == scenario.ego_index()) {
      continue;
    }
    const VehicleState other = simulator.vehicle_state(t);
    if (!other.valid) {
      continue;
    }
    const auto proj = geom::project_to_polyline(other.pose.position(), route);
    const geom::Vec2 foot = route.point_at_arc(proj.arc_length);
    if (geom::distance(other.pose.position(), foot) > leader_corridor_) {
      continue;
    }
    const double bumper_gap = proj.arc_length - ego_arc - ego_half -
                              0.5 * scenario.tracks()[t].length;
    if (proj.arc_length <= ego_arc || bumper_gap > leader_range_) {
      continue;
    }
    if (!lead_gap || bumper_gap < *lead_gap) {
      lead_gap = bumper_gap;
      lead_speed = other.speed;
    }
  }

  const double accel = idm_accel(ego.speed, lead_speed, lead_gap, params_);

  // Pure pursuit toward a route point one lookahead ahead of the ego.
  const auto & limits = simulator.limits();
  const double lookahead =
    std::max(lookahead_min_, lookahead_gain_ * ego.speed);
  const geom::Vec2 target = route.point_at_arc(ego_arc + lookahead);
  const geom::Vec2 eye = ego.pose.position();
  const double alpha = geom::normalize_angle(
    std::atan2(target.y - eye.y, target.x - eye.x) - ego.pose.heading);
  const double wheel =
    std::atan2(2.0 * limits.wheelbase * std::sin(alpha), lookahead);

  Decision d;
  d.action.steer = std::clamp(wheel / limits.steer_max, -1.0, 1.0);
  d.action.accel = accel >= 0.0 ? std::min(accel / limits.accel_max, 1.0)
                                : std::max(accel / limits.brake_max, -1.0);
  return d;
}

sim::EpisodeResult run_episode(sim::Simulator & simulator, Agent & agent)
{
  std::vector<double> obs = simulator.reset();
  agent.begin_episode(simulator);

  sim::EpisodeResult result;
  const int window = simulator.scenario().future_steps();
  result.trajectory.reserve(static_cast<std::size_t>(window));
  while (!simulator.done()) {
    const Decision decision = agent.act(obs, simulator);
    const sim::StepResult r = simulator.step(decision.action);
    result.episode_return += r.reward;
    result.log_prob_sum += decision.log_prob;
    result.trajectory.push_back(simulator.ego_state());
    ++result.steps;
    result.crashed |= r.info.crashed;
    if (r.info.crashed && result.crash_partner < 0) {
      result.crash_partner = r.info.crashed_with;
    }
    result.out_of_road |= r.info.out_of_road;
    result.arrived |= r.info.arrived;
    obs = std::move(r.observation);
  }

  const double denom = simulator.remaining_route();
  if (result.arrived) {
    result.route_completion = 1.0;
  } else if (denom > 1e-9) {
    result.route_completion =
      std::clamp((simulator.route_arc() - simulator.start_arc()) / denom, 0.0, 1.0);
  }
  // Early endings repeat the final state so the trajectory always spans the
  // full prediction window.
  while (result.trajectory.size() < static_cast<std::size_t>(window)) {
    result.trajectory.push_back(result.trajectory.back());
  }
  return result;
}

CemOptimizer::CemOptimizer(std::vector<double> initial, CemConfig config)
: config_(config), params_(std::move(initial)), noise_(config.noise_init)
{
  if (params_.empty()) {
    fail(ErrorCode::argument, "CemOptimizer: empty parameter vector");
  }
  for (const double v : params_) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::argument, "CemOptimizer: parameters must be finite");
    }
  }
  if (config_.population < 2 || config_.population % 2 != 0) {
    fail(ErrorCode::argument, "CemOptimizer: population must be even and at least 2");
  }
  if (config_.elite_fraction <= 0.0 || config_.elite_fraction > 1.0) {
    fail(ErrorCode::argument, "CemOptimizer: elite_fraction must be in (0, 1]");
  }
  if (config_.noise_init <= 0.0 || config_.noise_decay <= 0.0 ||
      config_.noise_decay > 1.0 || config_.noise_floor < 0.0) {
    fail(ErrorCode::argument, "CemOptimizer: bad noise schedule");
  }
}

CemStats CemOptimizer::step(
  const std::function<double(std::span<const double>)> & evaluate, Rng & rng)
{
  const std::size_t pop = static_cast<std::size_t>(config_.population);
  const std::size_t dim = params_.size();

  // Antithetic perturbations: pair 2p/2p+1 share one draw with opposite sign.
  std::vector<std::vector<double>> deltas(pop, std::vector<double>(dim, 0.0));
  for (std::size_t p = 0; p + 1 < pop; p += 2) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double eps = noise_ * normal_sample(rng);
      deltas[p][d] = eps;
      deltas[p + 1][d] = -eps;
    }
  }

  std::vector<double> returns(pop, 0.0);
  std::vector<double> candidate(dim, 0.0);
  for (std::size_t i = 0; i < pop; ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      candidate[d] = params_[d] + deltas[i][d];
    }
    returns[i] = evaluate(candidate);
    if (!std::isfinite(returns[i])) {
      fail(ErrorCode::invariant, "CemOptimizer: evaluate returned a non-finite score");
    }
  }

  std::vector<std::size_t> order(pop);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return returns[a] > returns[b];
  });
  const std::size_t elite = std::max<std::size_t>(
    1, static_cast<std::size_t>(
         std::llround(config_.elite_fraction * static_cast<double>(pop))));

  // Recenters on the mean elite delta; with all-equal scores the stable order
  // keeps pairs adjacent and their deltas cancel exactly.
  CemStats stats;
  stats.elite_mean = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    double sum = 0.0;
    for (std::size_t e = 0; e < elite; ++e) {
      sum += deltas[order[e]][d];
    }
    params_[d] += sum / static_cast<double>(elite);
  }
  for (std::size_t e = 0; e < elite; ++e) {
    stats.elite_mean += returns[order[e]];
  }
  stats.elite_mean /= static_cast<double>(elite);
  stats.population_mean =
    std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(pop);
  stats.best = returns[order[0]];

  noise_ = std::max(config_.noise_floor, noise_ * config_.noise_decay);
  ++generation_;
  stats.generation = generation_;
  stats.noise = noise_;
  return stats;
}

nlohmann::json CemOptimizer::to_json() const
{
  nlohmann::json j;
  j["config"] = {
    {"population", config_.population},
    {"elite_fraction", config_.elite_fraction},
    {"noise_init", config_.noise_init},
    {"noise_decay", config_.noise_decay},
    {"noise_floor", config_.noise_floor},
  };
  j["params"] = params_;
  j["noise"] = noise_;
  j["generation"] = generation_;
  return j;
}

CemOptimizer CemOptimizer::from_json(const nlohmann::json & j)
{
  using jsonutil::get_int;
  using jsonutil::get_number;
  if (!j.is_object()) {
    fail(ErrorCode::schema, "cem: expected a JSON object");
  }
  const nlohmann::json & cfg_j = jsonutil::require_key(j, "config", "cem");
  CemConfig cfg;
  cfg.population = get_int(cfg_j, "population", "cem.config");
  cfg.elite_fraction = get_number(cfg_j, "elite_fraction", "cem.config");
  cfg.noise_init = get_number(cfg_j, "noise_init", "cem.config");
  cfg.noise_decay = get_number(cfg_j, "noise_decay", "cem.config");
  cfg.noise_floor = get_number(cfg_j, "noise_floor", "cem.config");

  std::vector<double> params;
  for (const auto & v :
       jsonutil::require_array(jsonutil::require_key(j, "params", "cem"), "cem.params")) {
    params.push_back(jsonutil::require_number(v, "cem.params[]"));
  }
  CemOptimizer opt(std::move(params), cfg);
  opt.noise_ = get_number(j, "noise", "cem");
  opt.generation_ = get_int(j, "generation", "cem");
  if (opt.noise_ <= 0.0 || opt.generation_ < 0) {
    fail(ErrorCode::invariant, "cem: noise and generation must be positive");
  }
  return opt;
}

}  // namespace advsim::agents
