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
#include <limits>
#include <string>
#include <vector>

#include "advsim/errors.hpp"
#include "advsim/forge.hpp"
#include "advsim/geometry.hpp"
#include "advsim/rng.hpp"
#include "advsim/scenario.hpp"
#include "advsim/simulator.hpp"
#include "doctest.h"

namespace
{

using advsim::ErrorCode;
using advsim::Rng;
using advsim::Scenario;
using advsim::Track;
using advsim::VehicleState;
using advsim::geom::Polyline;
using advsim::geom::Pose2;
using advsim::geom::Vec2;
namespace sim = advsim::sim;

constexpr double kPi = advsim::geom::kPi;

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

struct RoadOptions
{
  double lane_len = 400.0;
  bool boundaries = true;
  double adv_x = 300.0;
  double adv_speed = 0.0;
};

// One straight lane along +x with the ego cruising mid-lane. The adversary
// sits far ahead by default so it does not disturb short-horizon oracles.
Scenario road_scene(double ego_speed, double ego_x0, RoadOptions opt = {})
{
  Scenario::Data d;
  d.map.lanes.push_back(
    {"main", Polyline({{0.0, 0.0}, {opt.lane_len, 0.0}}), 3.5, {}});
  if (opt.boundaries) {
    d.map.boundaries.push_back(
      Polyline({{-20.0, -1.75}, {opt.lane_len + 20.0, -1.75}}));
    d.map.boundaries.push_back(
      Polyline({{-20.0, 1.75}, {opt.lane_len + 20.0, 1.75}}));
  }
  d.tracks.push_back(cruise_track("ego", {ego_x0 - ego_speed, 0.0}, 0.0, ego_speed));
  d.tracks.push_back(cruise_track("adv", {opt.adv_x, 0.0}, 0.0, opt.adv_speed));
  d.ego_id = "ego";
  d.adversary_id = "adv";
  d.ego_route = {"main"};
  d.destination = {opt.lane_len, 0.0};
  return Scenario(std::move(d));
}

}  // namespace

TEST_CASE("lidar sees box edges and road edges at exact ranges")
{
  const Pose2 origin{0.0, 0.0, 0.0};

  SUBCASE("empty world saturates every ray")
  {
    const auto ranges = sim::lidar_scan(origin, {}, {});
    REQUIRE(ranges.size() == sim::kLidarRays);
    for (const double r : ranges) {
      CHECK(r == 1.0);
    }
  }

  SUBCASE("box dead ahead returns its nearest face")
  {
    // 4 m long box centered at x = 12: nearest face at x = 10.
    const std::vector<sim::LidarObstacle> cars = {{{12.0, 0.0, 0.0}, {4.0, 2.0}}};
    const auto ranges = sim::lidar_scan(origin, cars, {});
    CHECK(ranges[0] == doctest::Approx(10.0 / 50.0).epsilon(1e-12));
    CHECK(ranges[18] == 1.0);  // +90 degrees, clear
    CHECK(ranges[36] == 1.0);  // behind, clear
  }

  SUBCASE("rays rotate with the scanner heading")
  {
    const Pose2 north{0.0, 0.0, kPi / 2.0};
    const std::vector<sim::LidarObstacle> cars = {{{0.0, 12.0, 0.0}, {4.0, 4.0}}};
    const auto ranges = sim::lidar_scan(north, cars, {});
    CHECK(ranges[0] == doctest::Approx(10.0 / 50.0).epsilon(1e-12));
  }

  SUBCASE("boundary polyline reflects at the trigonometric distance")
  {
    const std::vector<Polyline> walls = {Polyline({{-100.0, 5.0}, {100.0, 5.0}})};
    const auto ranges = sim::lidar_scan(origin, {}, walls);
    CHECK(ranges[18] == doctest::Approx(5.0 / 50.0).epsilon(1e-12));
    // 45 degrees: hypotenuse to the same wall.
    CHECK(ranges[9] == doctest::Approx(5.0 / (50.0 * std::sin(kPi / 4.0))).epsilon(1e-9));
    CHECK(ranges[0] == 1.0);  // parallel ray never meets the wall
  }

  SUBCASE("obstacles beyond the radius are invisible")
  {
    const std::vector<sim::LidarObstacle> cars = {{{80.0, 0.0, 0.0}, {4.0, 2.0}}};
    const std::vector<Polyline> walls = {Polyline({{60.0, -30.0}, {60.0, 30.0}})};
    const auto ranges = sim::lidar_scan(origin, cars, walls);
    for (const double r : ranges) {
      CHECK(r == 1.0);
    }
  }
}

TEST_CASE("reset starts at the history cutoff with a normalized observation")
{
  const Scenario s = road_scene(10.0, 50.0);
  sim::Simulator simulator(s);
  const auto obs = simulator.reset();

  REQUIRE(obs.size() == sim::kObservationDim);
  for (const double v : obs) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  // The log puts the ego at x = 50 on frame 10 (one meter per frame).
  CHECK(simulator.frame() == 10);
  CHECK(simulator.ego_state().pose.x == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(simulator.route_arc() == doctest::Approx(50.0).epsilon(1e-9));
  CHECK(simulator.start_arc() == simulator.route_arc());
  CHECK(simulator.remaining_route() == doctest::Approx(350.0).epsilon(1e-9));

  CHECK(obs[0] == doctest::Approx(10.0 / 30.0).epsilon(1e-12));
  CHECK(obs[1] == 0.0);  // aligned with the route tangent
  CHECK(obs[2] == 0.0);
  CHECK(obs[3] == 0.0);
  // Checkpoints sit on the 10 m grid: next at arc 60, then 70, straight ahead.
  CHECK(obs[4] == doctest::Approx(10.0 / 50.0).epsilon(1e-9));
  CHECK(obs[5] == doctest::Approx(0.0));
  CHECK(obs[6] == doctest::Approx(20.0 / 50.0).epsilon(1e-9));
  CHECK(obs[7] == doctest::Approx(0.0));

  // Two fresh resets agree bit for bit.
  sim::Simulator other(s);
  CHECK(other.reset() == obs);

  SUBCASE("accessors before reset are rejected")
  {
    sim::Simulator cold(s);
    CHECK_THROWS_AS((void)cold.observation(), advsim::Error);
    CHECK_THROWS_AS((void)cold.step({}), advsim::Error);
  }
}

TEST_CASE("full throttle from 10 m/s advances 1.02 m in one step")
{
  // Midpoint rule: v' = 10 + 4 * 0.1 = 10.4, progress = 10.2 * 0.1.
  const Scenario s = road_scene(10.0, 50.0);
  sim::Simulator simulator(s);
  simulator.reset();
  const auto r = simulator.step({0.0, 1.0});

  CHECK(r.info.progress == doctest::Approx(1.02).epsilon(1e-12));
  CHECK(r.reward == doctest::Approx(1.02).epsilon(1e-12));
  CHECK(simulator.ego_state().speed == doctest::Approx(10.4).epsilon(1e-12));
  CHECK(simulator.ego_state().pose.x == doctest::Approx(51.02).epsilon(1e-12));
  CHECK_FALSE(r.done);
  CHECK(r.info.frame == 11);
  CHECK(r.observation[2] == 0.0);
  CHECK(r.observation[3] == 1.0);

  SUBCASE("full brake floors the speed at zero")
  {
    sim::Simulator braking(s);
    braking.reset();
    for (int k = 0; k < 30 && !braking.done(); ++k) {
      braking.step({0.0, -1.0});
      CHECK(braking.ego_state().speed >= 0.0);
    }
    CHECK(braking.ego_state().speed == 0.0);
  }

  SUBCASE("actions outside the unit range are clamped")
  {
    sim::Simulator wild(s);
    wild.reset();
    const auto result = wild.step({0.0, 7.0});
    CHECK(result.info.progress == doctest::Approx(1.02).epsilon(1e-12));
    CHECK(result.observation[3] == 1.0);
  }
}

TEST_CASE("driving into a parked car crashes and ends the episode")
{
  RoadOptions opt;
  opt.adv_x = 70.0;  // parked 20 m ahead of the reset position
  const Scenario s = road_scene(10.0, 50.0, opt);
  sim::Simulator simulator(s);
  simulator.reset();

  bool crashed = false;
  double crash_reward = 0.0;
  double crash_progress = 0.0;
  int steps = 0;
  while (!simulator.done()) {
    const auto r = simulator.step({0.0, 0.0});
    ++steps;
    if (r.info.crashed) {
      crashed = true;
      crash_reward = r.reward;
      crash_progress = r.info.progress;
      CHECK(r.done);
      CHECK_FALSE(r.info.arrived);
    }
    REQUIRE(steps < 80);
  }
  REQUIRE(crashed);
  // Crash penalty is 1 on top of whatever progress the step made.
  CHECK(crash_reward == doctest::Approx(crash_progress - 1.0).epsilon(1e-12));
  // Bumper gap: 20 m between centers minus two half lengths, at 1 m per step.
  CHECK(steps >= 14);
  CHECK(steps <= 17);

  CHECK_THROWS_AS(simulator.step({0.0, 0.0}), advsim::Error);
  try {
    simulator.step({0.0, 0.0});
  } catch (const advsim::Error & e) {
    CHECK(e.code() == ErrorCode::state);
  }
}

TEST_CASE("leaving the road costs the out-of-road penalty")
{
  SUBCASE("crossing a drawn road edge")
  {
    const Scenario s = road_scene(5.0, 50.0);
    sim::Simulator simulator(s);
    simulator.reset();
    bool out = false;
    int steps = 0;
    while (!simulator.done() && steps < 80) {
      // Hard left at constant speed curls the ego across the y = 1.75 edge.
      const auto r = simulator.step({1.0, 0.0});
      ++steps;
      if (r.info.out_of_road) {
        out = true;
        CHECK(r.done);
        CHECK(r.reward == doctest::Approx(r.info.progress - 10.0).epsilon(1e-12));
        CHECK(std::abs(simulator.ego_state().pose.y) > 1.6);
      }
    }
    CHECK(out);
  }

  SUBCASE("drifting outside the corridor when no edge is drawn")
  {
    RoadOptions opt;
    opt.boundaries = false;
    const Scenario s = road_scene(5.0, 50.0, opt);
    sim::Simulator simulator(s);
    simulator.reset();
    bool out = false;
    int steps = 0;
    while (!simulator.done() && steps < 80) {
      const auto r = simulator.step({1.0, 0.0});
      ++steps;
      if (r.info.out_of_road) {
        out = true;
        // Without an edge the trigger is distance from the lane, beyond its width.
        CHECK(std::abs(simulator.ego_state().pose.y) > 3.5);
      }
    }
    CHECK(out);
  }
}

TEST_CASE("reaching the destination ends the episode without penalty")
{
  RoadOptions opt;
  opt.lane_len = 120.0;
  opt.adv_x = -40.0;  // parked far behind
  const Scenario s = road_scene(10.0, 50.0, opt);
  sim::Simulator simulator(s);
  simulator.reset();

  bool arrived = false;
  int steps = 0;
  while (!simulator.done() && steps < 80) {
    const auto r = simulator.step({0.0, 0.0});
    ++steps;
    if (r.info.arrived) {
      arrived = true;
      CHECK(r.done);
      CHECK_FALSE(r.info.crashed);
      CHECK(r.reward == doctest::Approx(r.info.progress).epsilon(1e-12));
    }
  }
  REQUIRE(arrived);
  // 70 m to the end minus the 5 m arrival radius at 1 m per step.
  CHECK(steps >= 64);
  CHECK(steps <= 66);
  CHECK(
    advsim::geom::distance(simulator.ego_state().pose.position(), {120.0, 0.0}) <=
    sim::kArrivalRadius + 1e-9);
}

TEST_CASE("an idle episode truncates at the recorded horizon")
{
  RoadOptions opt;
  opt.adv_x = 300.0;
  const Scenario s = road_scene(0.0, 50.0, opt);
  sim::Simulator simulator(s);
  simulator.reset();
  int steps = 0;
  sim::StepResult last;
  while (!simulator.done()) {
    last = simulator.step({0.0, 0.0});
    ++steps;
    REQUIRE(steps <= 80);
  }
  CHECK(steps == s.future_steps());
  CHECK(last.info.truncated);
  CHECK_FALSE(last.info.crashed);
  CHECK(simulator.frame() == s.horizon_steps() - 1);
}

TEST_CASE("identical action sequences replay bit for bit")
{
  const Scenario s = road_scene(8.0, 40.0);
  Rng rng(17);
  std::vector<sim::Action> actions;
  for (int k = 0; k < 80; ++k) {
    actions.push_back(
      {advsim::uniform_range(rng, -1.0, 1.0), advsim::uniform_range(rng, -1.0, 1.0)});
  }

  sim::Simulator a(s);
  sim::Simulator b(s);
  auto obs_a = a.reset();
  auto obs_b = b.reset();
  REQUIRE(obs_a == obs_b);
  for (const auto & act : actions) {
    if (a.done()) {
      break;
    }
    const auto ra = a.step(act);
    const auto rb = b.step(act);
    REQUIRE(ra.observation == rb.observation);
    REQUIRE(ra.reward == rb.reward);
    REQUIRE(ra.done == rb.done);
  }
}

TEST_CASE("per-step progress telescopes to the net route advance")
{
  const Scenario s = road_scene(9.0, 30.0);
  sim::Simulator simulator(s);
  simulator.reset();
  Rng rng(5);
  double sum = 0.0;
  while (!simulator.done()) {
    const auto r = simulator.step(
      {advsim::uniform_range(rng, -0.3, 0.3), advsim::uniform_range(rng, -0.5, 1.0)});
    sum += r.info.progress;
  }
  CHECK(
    sum ==
    doctest::Approx(simulator.route_arc() - simulator.start_arc()).epsilon(1e-9));
}

TEST_CASE("speed stays nonnegative and poses stay finite under action abuse")
{
  const Scenario s = road_scene(12.0, 40.0);
  for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    sim::Simulator simulator(s);
    simulator.reset();
    Rng rng(seed);
    while (!simulator.done()) {
      const sim::Action act{
        advsim::uniform_range(rng, -5.0, 5.0), advsim::uniform_range(rng, -5.0, 5.0)};
      const auto r = simulator.step(act);
      const auto state = simulator.ego_state();
      REQUIRE(state.speed >= 0.0);
      REQUIRE(std::isfinite(state.pose.x));
      REQUIRE(std::isfinite(state.pose.y));
      REQUIRE(std::isfinite(state.pose.heading));
      for (const double v : r.observation) {
        REQUIRE(v >= -1.0);
        REQUIRE(v <= 1.0);
      }
    }
  }
}

TEST_CASE("replay mode retraces the log and never crashes on forged scenes")
{
  for (const auto tmpl : advsim::forge::all_templates()) {
    for (const std::uint64_t seed : {0ULL, 7ULL, 21ULL}) {
      advsim::forge::ForgeConfig cfg;
      cfg.tmpl = tmpl;
      cfg.seed = seed;
      cfg.n_background = 4;
      const Scenario s = advsim::forge::forge_scenario(cfg);

      sim::Simulator simulator(s, {}, {}, sim::EgoMode::replay);
      simulator.reset();
      const auto & log = s.ego_track().states;
      while (!simulator.done()) {
        const auto r = simulator.step({0.0, 0.0});
        REQUIRE_FALSE(r.info.crashed);
        REQUIRE_FALSE(r.info.out_of_road);
        const auto & expected = log[static_cast<std::size_t>(simulator.frame())];
        if (expected.valid) {
          REQUIRE(simulator.ego_state().pose.x == expected.pose.x);
          REQUIRE(simulator.ego_state().pose.y == expected.pose.y);
          REQUIRE(simulator.ego_state().speed == expected.speed);
        }
      }
    }
  }
}

TEST_CASE("vehicles with invalid frames vanish from sensing and collisions")
{
  Scenario::Data d;
  d.map.lanes.push_back({"main", Polyline({{0.0, 0.0}, {400.0, 0.0}}), 3.5, {}});
  d.tracks.push_back(cruise_track("ego", {48.0, 0.0}, 0.0, 2.0));
  d.tracks.push_back(cruise_track("adv", {300.0, 0.0}, 0.0, 0.0));
  // A parked car 20 m ahead whose recording stops at frame 30.
  Track walker = cruise_track("walker", {70.0, 0.0}, 0.0, 0.0);
  for (int k = 30; k < 91; ++k) {
    walker.states[static_cast<std::size_t>(k)].valid = false;
  }
  d.tracks.push_back(std::move(walker));
  d.ego_id = "ego";
  d.adversary_id = "adv";
  d.ego_route = {"main"};
  d.destination = {400.0, 0.0};
  const Scenario s(std::move(d));

  sim::Simulator simulator(s);
  const auto first = simulator.reset();
  // Forward ray: 20 m between centers minus the walker's half length.
  CHECK(first[8] == doctest::Approx((20.0 - 2.3) / 50.0).epsilon(1e-9));

  while (!simulator.done()) {
    const auto r = simulator.step({0.0, 0.0});
    REQUIRE_FALSE(r.info.crashed);  // the ego passes where the walker stood
    if (simulator.frame() >= 30) {
      CHECK(r.observation[8] == 1.0);
      CHECK_FALSE(simulator.vehicle_state(2).valid);
    }
  }
  // The ego ends well past the walker's recorded position.
  CHECK(simulator.ego_state().pose.x > 62.0);
}
