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

#include "advsim/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <utility>

#include "advsim/errors.hpp"
#include "advsim/predictor.hpp"
#include "json_util.hpp"

namespace advsim::pipeline
{

namespace
{

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point from)
{
  return std::chrono::duration<double, std::milli>(Clock::now() - from).count();
}

// Solves the dense linear system A x = b in place; A is n x n row-major.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b)
{
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) {
        pivot = r;
      }
    }
    if (std::abs(a[pivot * n + col]) < 1e-12) {
      fail(ErrorCode::invariant, "rule_based_adversary: singular waypoint system");
    }
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(a[col * n + c], a[pivot * n + c]);
      }
      std::swap(b[col], b[pivot]);
    }
    const double inv = 1.0 / a[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = a[r * n + col] * inv;
      if (factor == 0.0) {
        continue;
      }
      for (std::size_t c = col; c < n; ++c) {
        a[r * n + c] -= factor * a[col * n + c];
      }
      b[r] -= factor * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t ri = n; ri-- > 0;) {
    double acc = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) {
      acc -= a[ri * n + c] * x[c];
    }
    x[ri] = acc / a[ri * n + ri];
  }
  return x;
}

double bernstein(int n, int j, double t)
{
  double coeff = 1.0;
  for (int i = 0; i < j; ++i) {
    coeff *= static_cast<double>(n - i) / static_cast<double>(i + 1);
  }
  return coeff * std::pow(t, j) * std::pow(1.0 - t, n - j);
}

// Control points of the Bezier curve that passes through every waypoint at
// chord-length parameters. The hull of raw control points would not reach
// interior waypoints, and the scripted adversary must actually occupy them.
std::vector<geom::Vec2> interpolating_controls(const std::vector<geom::Vec2> & waypoints)
{
  const std::size_t n = waypoints.size();
  std::vector<double> params(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    total += geom::distance(waypoints[i - 1], waypoints[i]);
    params[i] = total;
  }
  if (total < 1e-9) {
    fail(ErrorCode::invariant, "rule_based_adversary: waypoints collapse to a point");
  }
  for (double & t : params) {
    t /= total;
  }

  std::vector<double> matrix(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      matrix[i * n + j] =
        bernstein(static_cast<int>(n) - 1, static_cast<int>(j), params[i]);
    }
  }
  std::vector<double> bx(n, 0.0);
  std::vector<double> by(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    bx[i] = waypoints[i].x;
    by[i] = waypoints[i].y;
  }
  const auto cx = solve_dense(matrix, std::move(bx));
  const auto cy = solve_dense(std::move(matrix), std::move(by));
  std::vector<geom::Vec2> control(n);
  for (std::size_t i = 0; i < n; ++i) {
    control[i] = {cx[i], cy[i]};
  }
  return control;
}

}  // namespace

const char * mode_name(Mode m)
{
  switch (m) {
    case Mode::no_adv:
      return "no_adv";
    case Mode::rule_based:
      return "rule_based";
    case Mode::open_loop:
      return "open_loop";
    case Mode::closed_loop:
      return "closed_loop";
  }
  fail(ErrorCode::internal, "mode_name: unknown mode");
}

Mode mode_from_name(const std::string & name)
{
  if (name == "no_adv") {
    return Mode::no_adv;
  }
  if (name == "rule_based") {
    return Mode::rule_based;
  }
  if (name == "open_loop") {
    return Mode::open_loop;
  }
  if (name == "closed_loop") {
    return Mode::closed_loop;
  }
  fail(ErrorCode::argument, "unknown training mode '" + name + "'");
}

std::vector<VehicleState> logged_ego_future(const Scenario & s)
{
  const auto & states = s.ego_track().states;
  return {states.begin() + s.history_steps(), states.end()};
}

Scenario deconflict_background(const Scenario & spliced)
{
  Scenario::Data d;
  d.dt = spliced.dt();
  d.horizon_steps = spliced.horizon_steps();
  d.history_steps = spliced.history_steps();
  d.map = spliced.map();
  d.tracks.assign(spliced.tracks().begin(), spliced.tracks().end());
  d.ego_id = spliced.ego_id();
  d.adversary_id = spliced.adversary_id();
  d.ego_route.assign(spliced.ego_route().begin(), spliced.ego_route().end());
  d.destination = spliced.destination();

  const Track & adv = spliced.adversary_track();
  for (std::size_t t = 0; t < d.tracks.size(); ++t) {
    if (t == spliced.ego_index() || t == spliced.adversary_index()) {
      continue;
    }
    Track & track = d.tracks[t];
    for (int f = spliced.history_steps(); f < spliced.horizon_steps(); ++f) {
      const auto fi = static_cast<std::size_t>(f);
      if (!track.states[fi].valid || !adv.states[fi].valid) {
        continue;
      }
      const bool contact = geom::obb_overlap(
        {track.states[fi].pose, track.length, track.width},
        {adv.states[fi].pose, adv.length, adv.width});
      if (!contact) {
        continue;
      }
      // Freeze at the last clear frame for the rest of the horizon.
      VehicleState hold = track.states[fi - 1];
      hold.speed = 0.0;
      for (int k = f; k < spliced.horizon_steps(); ++k) {
        track.states[static_cast<std::size_t>(k)] = hold;
      }
      break;
    }
  }
  return Scenario(std::move(d));
}

GenerationOutcome generate_adversarial(
  const Scenario & raw, const resample::EgoRolloutBuffer & buffer, int m,
  double alpha, Rng & rng, CandidateSelector selector)
{
  if (m < 1) {
    fail(ErrorCode::argument, "generate_adversarial: m must be at least 1");
  }
  const auto start = Clock::now();
  const pred::CandidateSet set = pred::generate_candidates(
    raw.history(), raw.adversary_id(), static_cast<std::size_t>(m), rng);

  auto scores = resample::posterior_scores(
    set, buffer, raw.ego_track().size(), raw.adversary_track().size(), {alpha});
  std::size_t pick = 0;
  if (selector == CandidateSelector::posterior) {
    pick = resample::select_adversarial(scores);
  } else {
    for (std::size_t i = 1; i < set.candidates.size(); ++i) {
      if (set.candidates[i].probability > set.candidates[pick].probability) {
        pick = i;
      }
    }
  }
  const double posterior = scores[pick].posterior;
  const double gen_ms = elapsed_ms(start);

  const AdversarialScenario spliced =
    apply_adversary(raw, set.candidates[pick].states);
  GenerationOutcome out{
    deconflict_background(spliced.scenario()), pick, posterior,
    set.candidates[pick].probability, gen_ms, std::move(scores)};
  return out;
}

AdversarialScenario rule_based_adversary(const Scenario & s, int k_waypoints)
{
  if (k_waypoints < 1) {
    fail(ErrorCode::argument, "rule_based_adversary: need at least one waypoint");
  }
  const auto & route = s.route_polyline();
  if (route.length() < 10.0) {
    fail(ErrorCode::invariant, "rule_based_adversary: ego route shorter than 10 m");
  }
  const int history = s.history_steps();
  const int horizon = s.horizon_steps();
  const double dt = s.dt();
  const auto & ego_states = s.ego_track().states;
  const auto & adv_states = s.adversary_track().states;

  const auto arc_of = [&](const VehicleState & st) {
    return geom::project_to_polyline(st.pose.position(), route).arc_length;
  };
  const double arc_start = arc_of(ego_states[static_cast<std::size_t>(history - 1)]);
  const double arc_end = arc_of(ego_states[static_cast<std::size_t>(horizon - 1)]);
  const double progress = std::max(0.0, arc_end - arc_start);

  // First future point, K points on the ego route, the logged endpoint.
  std::vector<geom::Vec2> waypoints;
  waypoints.push_back(adv_states[static_cast<std::size_t>(history)].pose.position());
  for (int i = 1; i <= k_waypoints; ++i) {
    const double fraction = static_cast<double>(i) / (k_waypoints + 1.0);
    waypoints.push_back(route.point_at_arc(arc_start + fraction * progress));
  }
  waypoints.push_back(adv_states[static_cast<std::size_t>(horizon - 1)].pose.position());
  // Coincident waypoints (a parked ego) would make the fit singular.
  std::vector<geom::Vec2> distinct;
  for (const auto & w : waypoints) {
    if (distinct.empty() || geom::distance(distinct.back(), w) > 0.01) {
      distinct.push_back(w);
    }
  }
  if (distinct.size() < 2) {
    fail(ErrorCode::invariant, "rule_based_adversary: waypoints collapse to a point");
  }

  const geom::Polyline path =
    geom::bezier_fit(interpolating_controls(distinct), 160);

  // Reach the first route waypoint when the logged ego does.
  const double target_arc = arc_start + progress / (k_waypoints + 1.0);
  int meet_frame = horizon - 1;
  for (int f = history; f < horizon; ++f) {
    if (arc_of(ego_states[static_cast<std::size_t>(f)]) >= target_arc) {
      meet_frame = f;
      break;
    }
  }
  const double t_meet = std::max(3, meet_frame - history) * dt;
  const double s_meet =
    distinct.size() > 1
      ? geom::project_to_polyline(waypoints[1], path).arc_length
      : 0.0;
  const double v0 = adv_states[static_cast<std::size_t>(history - 1)].speed;
  const double accel =
    std::clamp(2.0 * (s_meet - v0 * t_meet) / (t_meet * t_meet), -8.0, 8.0);

  std::vector<VehicleState> future;
  future.reserve(static_cast<std::size_t>(horizon - history));
  double v = v0;
  double arc = 0.0;
  for (int k = 0; k < horizon - history; ++k) {
    const double capped = std::min(arc, path.length());
    const geom::Vec2 p = path.point_at_arc(capped);
    future.push_back({{p.x, p.y, path.heading_at_arc(capped)}, v, true});
    const double v_next = std::max(0.0, v + accel * dt);
    arc += 0.5 * (v + v_next) * dt;
    v = v_next;
  }
  return apply_adversary(s, future);
}

std::string metrics_csv(std::span<const GenerationMetrics> rows)
{
  std::ostringstream out;
  out << "generation,mean_return,crash_rate,route_completion,gen_time_ms\n";
  out << std::setprecision(10);
  for (const auto & r : rows) {
    out << r.generation << ',' << r.mean_return << ',' << r.crash_rate << ','
        << r.route_completion << ',' << r.gen_time_ms << '\n';
  }
  return out.str();
}

Trainer::Trainer(std::vector<PoolEntry> pool, CatConfig cfg)
: pool_(std::move(pool)),
  cfg_(cfg),
  rng_(cfg.seed),
  cem_(agents::PolicyParams::zeros().weights, cfg.cem),
  buffers_(pool_.size()),
  frozen_(pool_.size())
{
  if (pool_.empty()) {
    fail(ErrorCode::argument, "Trainer: scenario pool is empty");
  }
  if (cfg_.m_candidates < 1 || cfg_.n_buffer < 1) {
    fail(ErrorCode::argument, "Trainer: m and n must be at least 1");
  }
  if (cfg_.alpha <= 0.0 || cfg_.alpha > 1.0) {
    fail(ErrorCode::argument, "Trainer: alpha must be in (0, 1]");
  }
  if (cfg_.scenes_per_gen < 1) {
    fail(ErrorCode::argument, "Trainer: scenes_per_gen must be at least 1");
  }

  if (cfg_.mode == Mode::open_loop) {
    // One-off generation against the logged ego; the buffers stay untouched
    // afterwards, so the adversarial set is frozen for the whole run.
    Rng freeze_rng(cfg_.seed ^ 0x9E3779B97F4A7C15ULL);
    for (std::size_t i = 0; i < pool_.size(); ++i) {
      resample::EgoRolloutBuffer log_only(1);
      log_only.push(logged_ego_future(pool_[i].scenario), 0.0);
      try {
        frozen_[i] = generate_adversarial(
                       pool_[i].scenario, log_only, cfg_.m_candidates, cfg_.alpha,
                       freeze_rng)
                       .scenario;
      } catch (const Error & e) {
        std::cerr << "open_loop generation failed for " << pool_[i].name << ": "
                  << e.what() << "\n";
        ++skipped_;
      }
    }
  }
}

agents::PolicyParams Trainer::policy() const { return wrap_weights(cem_.params()); }

agents::PolicyParams Trainer::wrap_weights(std::span<const double> weights) const
{
  agents::PolicyParams p;
  p.stddev = cfg_.policy_stddev;
  p.weights.assign(weights.begin(), weights.end());
  if (p.weights.size() != agents::PolicyParams::weight_count(p.layers)) {
    fail(ErrorCode::internal, "Trainer: optimizer vector does not fit the network");
  }
  return p;
}

const resample::EgoRolloutBuffer * Trainer::buffer(std::size_t pool_index) const
{
  if (pool_index >= buffers_.size()) {
    fail(ErrorCode::argument, "Trainer: pool index out of range");
  }
  return buffers_[pool_index] ? &*buffers_[pool_index] : nullptr;
}

resample::EgoRolloutBuffer & Trainer::buffer_for(std::size_t index)
{
  if (!buffers_[index]) {
    buffers_[index].emplace(static_cast<std::size_t>(cfg_.n_buffer));
    buffers_[index]->push(logged_ego_future(pool_[index].scenario), 0.0);
  }
  return *buffers_[index];
}

Scenario Trainer::training_variant(std::size_t index, double & gen_ms)
{
  const Scenario & raw = pool_[index].scenario;
  gen_ms = 0.0;
  switch (cfg_.mode) {
    case Mode::no_adv:
      return raw;
    case Mode::rule_based: {
      const auto start = Clock::now();
      AdversarialScenario adv = rule_based_adversary(raw);
      gen_ms = elapsed_ms(start);
      return deconflict_background(adv.scenario());
    }
    case Mode::open_loop:
      return frozen_[index] ? *frozen_[index] : raw;
    case Mode::closed_loop: {
      const auto out = generate_adversarial(
        raw, buffer_for(index), cfg_.m_candidates, cfg_.alpha, rng_);
      gen_ms = out.gen_time_ms;
      return out.scenario;
    }
  }
  fail(ErrorCode::internal, "Trainer: unknown mode");
}

GenerationMetrics Trainer::step()
{
  std::vector<std::size_t> chosen;
  for (int b = 0; b < cfg_.scenes_per_gen; ++b) {
    chosen.push_back(uniform_index(rng_, pool_.size()));
  }

  std::vector<Scenario> variants;
  double gen_ms_sum = 0.0;
  for (const std::size_t idx : chosen) {
    double gen_ms = 0.0;
    try {
      variants.push_back(training_variant(idx, gen_ms));
    } catch (const Error & e) {
      // A bad scenario must not abort the run; fall back to its raw log.
      std::cerr << "generation failed for " << pool_[idx].name << ": " << e.what()
                << "\n";
      ++skipped_;
      variants.push_back(pool_[idx].scenario);
    }
    gen_ms_sum += gen_ms;
  }

  // Fresh rollouts of the current policy; appended to the buffers after the
  // update so the next visit resamples against what this policy actually did.
  struct Pending
  {
    std::size_t pool_index;
    sim::EpisodeResult episode;
  };
  std::vector<Pending> pending;
  if (cfg_.mode == Mode::closed_loop) {
    const agents::PolicyParams current = policy();
    for (std::size_t i = 0; i < variants.size(); ++i) {
      sim::Simulator simulator(variants[i]);
      agents::PolicyAgent agent(current, agents::ActMode::stochastic, &rng_);
      pending.push_back({chosen[i], agents::run_episode(simulator, agent)});
    }
  }

  int crashes = 0;
  int episodes = 0;
  double completion_sum = 0.0;
  const auto evaluate = [&](std::span<const double> weights) {
    const agents::PolicyParams candidate = wrap_weights(weights);
    double total = 0.0;
    for (const auto & variant : variants) {
      sim::Simulator simulator(variant);
      agents::PolicyAgent agent(candidate, agents::ActMode::deterministic);
      const auto episode = agents::run_episode(simulator, agent);
      total += episode.episode_return;
      crashes += episode.crashed ? 1 : 0;
      completion_sum += episode.route_completion;
      ++episodes;
    }
    return total / static_cast<double>(variants.size());
  };
  const agents::CemStats stats = cem_.step(evaluate, rng_);

  for (auto & p : pending) {
    buffer_for(p.pool_index).push(
      std::move(p.episode.trajectory), p.episode.log_prob_sum);
  }

  GenerationMetrics row;
  row.generation = stats.generation;
  row.mean_return = stats.population_mean;
  row.crash_rate = episodes > 0 ? static_cast<double>(crashes) / episodes : 0.0;
  row.route_completion = episodes > 0 ? completion_sum / episodes : 0.0;
  row.gen_time_ms = gen_ms_sum / static_cast<double>(cfg_.scenes_per_gen);
  history_.push_back(row);
  return row;
}

nlohmann::json Trainer::to_json() const
{
  nlohmann::json j;
  j["format_version"] = 1;
  j["config"] = {
    {"mode", mode_name(cfg_.mode)},
    {"m_candidates", cfg_.m_candidates},
    {"n_buffer", cfg_.n_buffer},
    {"alpha", cfg_.alpha},
    {"generations", cfg_.generations},
    {"scenes_per_gen", cfg_.scenes_per_gen},
    {"seed", cfg_.seed},
    {"policy_stddev", cfg_.policy_stddev},
    {"cem",
     {{"population", cfg_.cem.population},
      {"elite_fraction", cfg_.cem.elite_fraction},
      {"noise_init", cfg_.cem.noise_init},
      {"noise_decay", cfg_.cem.noise_decay},
      {"noise_floor", cfg_.cem.noise_floor}}},
  };
  j["rng"] = rng_state_to_string(rng_);
  j["optimizer"] = cem_.to_json();
  j["skipped"] = skipped_;

  nlohmann::json buffers = nlohmann::json::array();
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    nlohmann::json entry;
    entry["name"] = pool_[i].name;
    entry["buffer"] = buffers_[i] ? buffers_[i]->to_json() : nlohmann::json();
    buffers.push_back(std::move(entry));
  }
  j["buffers"] = std::move(buffers);

  nlohmann::json history = nlohmann::json::array();
  for (const auto & row : history_) {
    history.push_back(
      {{"generation", row.generation},
       {"mean_return", row.mean_return},
       {"crash_rate", row.crash_rate},
       {"route_completion", row.route_completion},
       {"gen_time_ms", row.gen_time_ms}});
  }
  j["history"] = std::move(history);
  return j;
}

Trainer Trainer::from_json(std::vector<PoolEntry> pool, const nlohmann::json & j)
{
  using jsonutil::get_int;
  using jsonutil::get_number;
  using jsonutil::get_string;
  using jsonutil::require_array;
  using jsonutil::require_key;
  if (!j.is_object()) {
    fail(ErrorCode::schema, "trainer: expected a JSON object");
  }
  if (get_int(j, "format_version", "trainer") != 1) {
    fail(ErrorCode::schema, "trainer.format_version: unsupported version");
  }
  const nlohmann::json & cfg_j = require_key(j, "config", "trainer");
  CatConfig cfg;
  cfg.mode = mode_from_name(get_string(cfg_j, "mode", "trainer.config"));
  cfg.m_candidates = get_int(cfg_j, "m_candidates", "trainer.config");
  cfg.n_buffer = get_int(cfg_j, "n_buffer", "trainer.config");
  cfg.alpha = get_number(cfg_j, "alpha", "trainer.config");
  cfg.generations = get_int(cfg_j, "generations", "trainer.config");
  cfg.scenes_per_gen = get_int(cfg_j, "scenes_per_gen", "trainer.config");
  const nlohmann::json & seed_j = require_key(cfg_j, "seed", "trainer.config");
  if (!seed_j.is_number_integer() && !seed_j.is_number_unsigned()) {
    fail(ErrorCode::schema, "trainer.config.seed: expected an integer");
  }
  cfg.seed = seed_j.get<std::uint64_t>();
  const auto & sd = require_array(
    require_key(cfg_j, "policy_stddev", "trainer.config"), "trainer.config.policy_stddev");
  if (sd.size() != 2) {
    fail(ErrorCode::schema, "trainer.config.policy_stddev: expected 2 entries");
  }
  cfg.policy_stddev = {
    jsonutil::require_number(sd[0], "trainer.config.policy_stddev[0]"),
    jsonutil::require_number(sd[1], "trainer.config.policy_stddev[1]")};
  const nlohmann::json & cem_j = require_key(cfg_j, "cem", "trainer.config");
  cfg.cem.population = get_int(cem_j, "population", "trainer.config.cem");
  cfg.cem.elite_fraction = get_number(cem_j, "elite_fraction", "trainer.config.cem");
  cfg.cem.noise_init = get_number(cem_j, "noise_init", "trainer.config.cem");
  cfg.cem.noise_decay = get_number(cem_j, "noise_decay", "trainer.config.cem");
  cfg.cem.noise_floor = get_number(cem_j, "noise_floor", "trainer.config.cem");

  Trainer t(std::move(pool), cfg);
  t.rng_ = rng_state_from_string(get_string(j, "rng", "trainer"));
  t.cem_ = agents::CemOptimizer::from_json(require_key(j, "optimizer", "trainer"));
  t.skipped_ = get_int(j, "skipped", "trainer");

  const auto & buffers = require_array(require_key(j, "buffers", "trainer"), "trainer.buffers");
  if (buffers.size() != t.pool_.size()) {
    fail(
      ErrorCode::invariant, "trainer.buffers: checkpoint has " +
                              std::to_string(buffers.size()) + " entries, pool has " +
                              std::to_string(t.pool_.size()));
  }
  for (std::size_t i = 0; i < t.pool_.size(); ++i) {
    const std::string where = "trainer.buffers[" + std::to_string(i) + "]";
    const std::string name = get_string(buffers[i], "name", where);
    if (name != t.pool_[i].name) {
      fail(
        ErrorCode::invariant,
        where + ": checkpoint scenario '" + name + "' does not match pool entry '" +
          t.pool_[i].name + "'");
    }
    const nlohmann::json & buf = require_key(buffers[i], "buffer", where);
    if (!buf.is_null()) {
      t.buffers_[i] = resample::EgoRolloutBuffer::from_json(buf);
    }
  }

  for (const auto & row :
       require_array(require_key(j, "history", "trainer"), "trainer.history")) {
    GenerationMetrics m;
    m.generation = get_int(row, "generation", "trainer.history[]");
    m.mean_return = get_number(row, "mean_return", "trainer.history[]");
    m.crash_rate = get_number(row, "crash_rate", "trainer.history[]");
    m.route_completion = get_number(row, "route_completion", "trainer.history[]");
    m.gen_time_ms = get_number(row, "gen_time_ms", "trainer.history[]");
    t.history_.push_back(m);
  }
  return t;
}

}  // namespace advsim::pipeline
