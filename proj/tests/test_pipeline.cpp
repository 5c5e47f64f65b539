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

#include <cmath>
#include <string>
#include <vector>

#include "advsim/errors.hpp"
#include "advsim/forge.hpp"
#include "advsim/pipeline.hpp"
#include "advsim/resampler.hpp"
#include "advsim/scenario.hpp"
#include "doctest.h"
#include "json.hpp"

namespace
{

using advsim::Rng;
using advsim::Scenario;
using advsim::Track;
using advsim::VehicleState;
using advsim::geom::Polyline;
using advsim::geom::Vec2;
namespace pipeline = advsim::pipeline;

Scenario forged(advsim::forge::Template tmpl, std::uint64_t seed, int background = 3)
{
  advsim::forge::ForgeConfig cfg;
  cfg.tmpl = tmpl;
  cfg.seed = seed;
  cfg.n_background = background;
  return advsim::forge::forge_scenario(cfg);
}

Track cruise_track(
  const std::string & id, Vec2 from, double heading, double speed,
  int frames = 91)
{
  Track t{id, 4.6, 1.9, {}};
  const Vec2 dir{std::cos(heading), std::sin(heading)};
  for (int k = 0; k < frames; ++k) {
    const Vec2 p = from + (speed * 0.1 * k) * dir;
    t.states.push_back({{p.x, p.y, heading}, speed, true});
  }
  return t;
}

pipeline::CatConfig small_config(pipeline::Mode mode, std::uint64_t seed)
{
  pipeline::CatConfig cfg;
  cfg.mode = mode;
  cfg.seed = seed;
  cfg.scenes_per_gen = 1;
  cfg.cem.population = 4;
  return cfg;
}

}  // namespace

TEST_CASE("mode names round trip and reject junk")
{
  for (const auto mode :
       {pipeline::Mode::no_adv, pipeline::Mode::rule_based, pipeline::Mode::open_loop,
        pipeline::Mode::closed_loop}) {
    CHECK(pipeline::mode_from_name(pipeline::mode_name(mode)) == mode);
  }
  CHECK_THROWS_AS(pipeline::mode_from_name("hybrid"), advsim::Error);
}

TEST_CASE("logged ego future is the exact post-cutoff slice")
{
  const Scenario s = forged(advsim::forge::Template::straight_multilane, 1);
  const auto future = pipeline::logged_ego_future(s);
  REQUIRE(future.size() == static_cast<std::size_t>(s.future_steps()));
  const auto & states = s.ego_track().states;
  for (std::size_t k = 0; k < future.size(); ++k) {
    CHECK(future[k].pose.x == states[11 + k].pose.x);
    CHECK(future[k].pose.y == states[11 + k].pose.y);
    CHECK(future[k].speed == states[11 + k].speed);
  }
}

TEST_CASE("rule-based adversary drives onto the ego route")
{
  const Scenario s = forged(advsim::forge::Template::straight_multilane, 4);
  const auto adv = pipeline::rule_based_adversary(s);

  REQUIRE(adv.override_future().size() == static_cast<std::size_t>(s.future_steps()));
  // The scripted path visits waypoints on the route centerline, so some
  // override state must come within a meter of it.
  const auto & route = s.route_polyline();
  double closest = 1e9;
  for (const auto & st : adv.override_future()) {
    const auto proj = advsim::geom::project_to_polyline(st.pose.position(), route);
    const Vec2 foot = route.point_at_arc(proj.arc_length);
    closest = std::min(closest, advsim::geom::distance(st.pose.position(), foot));
  }
  CHECK(closest < 1.0);

  // Deterministic: no randomness is involved.
  const auto again = pipeline::rule_based_adversary(s);
  CHECK(adv.scenario().to_json().dump() == again.scenario().to_json().dump());

  SUBCASE("a sub-10 m ego route is rejected")
  {
    Scenario::Data d;
    d.map.lanes.push_back({"stub", Polyline({{0.0, 0.0}, {8.0, 0.0}}), 3.5, {}});
    d.tracks.push_back(cruise_track("ego", {0.0, 0.0}, 0.0, 0.4));
    d.tracks.push_back(cruise_track("adv", {4.0, 0.0}, 0.0, 0.0));
    d.ego_id = "ego";
    d.adversary_id = "adv";
    d.ego_route = {"stub"};
    d.destination = {8.0, 0.0};
    const Scenario tiny(std::move(d));
    CHECK_THROWS_AS(pipeline::rule_based_adversary(tiny), advsim::Error);
  }
}

TEST_CASE("deconflict freezes a background car at its last clear frame")
{
  Scenario::Data d;
  d.map.lanes.push_back({"ego_lane", Polyline({{0.0, 0.0}, {400.0, 0.0}}), 3.5, {}});
  d.map.lanes.push_back({"side", Polyline({{0.0, 3.5}, {400.0, 3.5}}), 3.5, {}});
  d.tracks.push_back(cruise_track("ego", {0.0, 0.0}, 0.0, 5.0));
  // The "adversary" sits across the side lane, as if a resampled path
  // stopped there.
  d.tracks.push_back(cruise_track("adv", {40.0, 3.5}, 0.0, 0.0));
  d.tracks.push_back(cruise_track("bg", {0.0, 3.5}, 0.0, 10.0));
  d.tracks.push_back(cruise_track("far", {200.0, 3.5}, 0.0, 0.0));
  d.ego_id = "ego";
  d.adversary_id = "adv";
  d.ego_route = {"ego_lane"};
  d.destination = {400.0, 0.0};
  const Scenario spliced(std::move(d));

  const Scenario out = pipeline::deconflict_background(spliced);
  const Track * bg = out.find_track("bg");
  REQUIRE(bg != nullptr);
  // Centers close at 1 m per frame; boxes meet when 4.6 m apart: frame 36.
  CHECK(bg->states[35].pose.x == 35.0);
  CHECK(bg->states[35].speed == 10.0);
  for (int f = 36; f < 91; ++f) {
    CHECK(bg->states[static_cast<std::size_t>(f)].pose.x == 35.0);
    CHECK(bg->states[static_cast<std::size_t>(f)].speed == 0.0);
  }
  // Untouched tracks stay bit-identical.
  const Track * far_track = out.find_track("far");
  REQUIRE(far_track != nullptr);
  for (int f = 0; f < 91; ++f) {
    CHECK(far_track->states[static_cast<std::size_t>(f)].pose.x == 200.0);
  }
  CHECK(out.find_track("adv")->states[90].pose.x == 40.0);
}

TEST_CASE("adversarial generation splices the pick and preserves the rest")
{
  const Scenario raw = forged(advsim::forge::Template::straight_multilane, 9);
  advsim::resample::EgoRolloutBuffer buffer(5);
  buffer.push(pipeline::logged_ego_future(raw), 0.0);

  Rng rng(21);
  Rng rng_clone = rng;
  const auto out = pipeline::generate_adversarial(raw, buffer, 32, 0.99, rng);

  CHECK(out.gen_time_ms >= 0.0);
  CHECK(out.prior > 0.0);
  // Ego track and adversary history survive unchanged.
  const auto & ego_raw = raw.ego_track().states;
  const auto & ego_out = out.scenario.ego_track().states;
  for (int f = 0; f < 91; ++f) {
    CHECK(ego_out[static_cast<std::size_t>(f)].pose.x == ego_raw[static_cast<std::size_t>(f)].pose.x);
  }
  const auto & adv_raw = raw.adversary_track().states;
  const auto & adv_out = out.scenario.adversary_track().states;
  for (int f = 0; f < 11; ++f) {
    CHECK(adv_out[static_cast<std::size_t>(f)].pose.x == adv_raw[static_cast<std::size_t>(f)].pose.x);
  }
  // A positive posterior means a collision-bound candidate was found, which
  // cannot be the logged future: the log never collides.
  if (out.posterior > 0.0) {
    bool differs = false;
    for (int f = 11; f < 91; ++f) {
      differs |= adv_out[static_cast<std::size_t>(f)].pose.x !=
                 adv_raw[static_cast<std::size_t>(f)].pose.x;
      differs |= adv_out[static_cast<std::size_t>(f)].pose.y !=
                 adv_raw[static_cast<std::size_t>(f)].pose.y;
    }
    CHECK(differs);
  }

  SUBCASE("same generator state reproduces the same scenario")
  {
    const auto again = pipeline::generate_adversarial(raw, buffer, 32, 0.99, rng_clone);
    CHECK(again.selected == out.selected);
    CHECK(again.scenario.to_json().dump() == out.scenario.to_json().dump());
  }

  SUBCASE("prior-argmax selector ignores the buffer")
  {
    Rng a(77);
    Rng b(77);
    const auto by_prior = pipeline::generate_adversarial(
      raw, buffer, 32, 0.99, a, pipeline::CandidateSelector::prior_argmax);
    const auto candidates = advsim::pred::generate_candidates(raw.history(), raw.adversary_id(), 32, b);
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < candidates.candidates.size(); ++i) {
      if (candidates.candidates[i].probability > candidates.candidates[argmax].probability) {
        argmax = i;
      }
    }
    CHECK(by_prior.selected == argmax);
  }
}

TEST_CASE("no_adv training never builds buffers and emits the shared schema")
{
  std::vector<pipeline::PoolEntry> pool;
  pool.push_back({forged(advsim::forge::Template::straight_multilane, 2), "a"});
  pool.push_back({forged(advsim::forge::Template::curve, 3), "b"});
  pipeline::Trainer trainer(std::move(pool), small_config(pipeline::Mode::no_adv, 1));

  for (int i = 0; i < 3; ++i) {
    const auto row = trainer.step();
    CHECK(row.gen_time_ms == 0.0);
    CHECK(row.crash_rate >= 0.0);
    CHECK(row.crash_rate <= 1.0);
    CHECK(row.route_completion >= 0.0);
    CHECK(row.route_completion <= 1.0);
  }
  CHECK(trainer.buffer(0) == nullptr);
  CHECK(trainer.buffer(1) == nullptr);
  CHECK(trainer.generation() == 3);

  const std::string csv = pipeline::metrics_csv(trainer.history());
  CHECK(csv.rfind("generation,mean_return,crash_rate,route_completion,gen_time_ms\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("closed-loop training fills the buffer with log seed plus rollouts")
{
  std::vector<pipeline::PoolEntry> pool;
  pool.push_back({forged(advsim::forge::Template::straight_multilane, 6), "scene"});
  pipeline::Trainer trainer(std::move(pool), small_config(pipeline::Mode::closed_loop, 2));

  trainer.step();
  const auto * buffer = trainer.buffer(0);
  REQUIRE(buffer != nullptr);
  // Seeded with the logged future, then one policy rollout appended.
  CHECK(buffer->size() == 2);
  const auto logged = pipeline::logged_ego_future(trainer.pool()[0].scenario);
  CHECK(buffer->trajectory(0).front().pose.x == logged.front().pose.x);

  for (int i = 0; i < 9; ++i) {
    trainer.step();
  }
  // Ten visits, capacity five: only the newest five rollouts remain.
  CHECK(buffer->size() == 5);
  bool any_equals_log = false;
  for (std::size_t j = 0; j < buffer->size(); ++j) {
    any_equals_log |= buffer->trajectory(j).front().pose.x == logged.front().pose.x &&
                      buffer->trajectory(j).back().pose.x == logged.back().pose.x &&
                      buffer->trajectory(j).front().speed == logged.front().speed;
  }
  CHECK_FALSE(any_equals_log);
}

TEST_CASE("rule-based training keeps the predictor out of the loop")
{
  std::vector<pipeline::PoolEntry> pool;
  pool.push_back({forged(advsim::forge::Template::straight_multilane, 8), "scene"});
  pipeline::Trainer trainer(std::move(pool), small_config(pipeline::Mode::rule_based, 3));
  const auto row = trainer.step();
  // The scripted adversary is rebuilt per visit, but no candidate sets or
  // buffers are involved.
  CHECK(trainer.buffer(0) == nullptr);
  CHECK(row.gen_time_ms >= 0.0);
}

TEST_CASE("open-loop training freezes its adversarial set up front")
{
  std::vector<pipeline::PoolEntry> pool;
  pool.push_back({forged(advsim::forge::Template::straight_multilane, 12), "scene"});
  auto pool_copy = pool;

  pipeline::Trainer a(std::move(pool), small_config(pipeline::Mode::open_loop, 4));
  pipeline::Trainer b(std::move(pool_copy), small_config(pipeline::Mode::open_loop, 4));
  a.step();
  b.step();
  CHECK(a.to_json().dump() == b.to_json().dump());
  // Buffers are never created after the up-front generation.
  CHECK(a.buffer(0) == nullptr);
}

TEST_CASE("trainer checkpoints resume bit-exactly")
{
  std::vector<pipeline::PoolEntry> pool;
  pool.push_back({forged(advsim::forge::Template::straight_multilane, 5), "a"});
  pool.push_back({forged(advsim::forge::Template::curve, 6), "b"});
  auto pool_copy = pool;

  pipeline::Trainer original(std::move(pool), small_config(pipeline::Mode::closed_loop, 9));
  for (int i = 0; i < 3; ++i) {
    original.step();
  }
  const nlohmann::json snapshot = original.to_json();

  auto resumed = pipeline::Trainer::from_json(std::move(pool_copy), snapshot);
  CHECK(resumed.generation() == 3);

  const auto next_original = original.step();
  const auto next_resumed = resumed.step();
  CHECK(next_resumed.generation == next_original.generation);
  CHECK(next_resumed.mean_return == next_original.mean_return);
  CHECK(next_resumed.crash_rate == next_original.crash_rate);
  CHECK(next_resumed.route_completion == next_original.route_completion);

  const auto wa = original.policy().weights;
  const auto wb = resumed.policy().weights;
  REQUIRE(wa.size() == wb.size());
  for (std::size_t i = 0; i < wa.size(); ++i) {
    REQUIRE(wa[i] == wb[i]);
  }

  // Buffers advanced identically as well; gen_time_ms is wall-clock and is
  // excluded from the comparison.
  nlohmann::json ja = original.to_json();
  nlohmann::json jb = resumed.to_json();
  ja.erase("history");
  jb.erase("history");
  CHECK(ja.dump() == jb.dump());
}
