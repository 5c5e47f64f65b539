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

#include "advsim/forge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <utility>

#include "advsim/errors.hpp"
#include "advsim/rng.hpp"
#include "json_util.hpp"

namespace advsim::forge
{

namespace
{

using geom::Polyline;
using geom::Vec2;

constexpr double kDt = 0.1;
constexpr int kHorizon = 91;
constexpr int kHistory = 11;
constexpr double kLaneWidth = 3.5;
constexpr double kComfortBrake = 2.5;
constexpr double kDepartAccel = 1.5;

std::vector<Vec2> straight_points(Vec2 from, Vec2 to, double spacing = 20.0)
{
  const double len = geom::distance(from, to);
  const int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
  std::vector<Vec2> pts;
  pts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    pts.push_back(from + t * (to - from));
  }
  return pts;
}

LaneSegment straight_lane(
  const std::string & id, Vec2 from, Vec2 to, std::vector<std::string> successors)
{
  return {id, Polyline(straight_points(from, to)), kLaneWidth, std::move(successors)};
}

// Smooth connector between two directed endpoints, e.g. a turn inside an
// intersection. Tangent directions are unit vectors.
LaneSegment turn_lane(
  const std::string & id, Vec2 from, Vec2 from_dir, Vec2 to, Vec2 to_dir,
  std::vector<std::string> successors)
{
  const double pull = 0.45 * geom::distance(from, to);
  const std::vector<Vec2> ctrl{from, from + pull * from_dir, to - pull * to_dir, to};
  return {id, geom::bezier_fit(ctrl, 13), kLaneWidth, std::move(successors)};
}

LaneSegment arc_lane(
  const std::string & id, Vec2 center, double radius, double phi_begin,
  double phi_end, std::vector<std::string> successors)
{
  const int n = std::max(4, static_cast<int>(std::ceil(std::abs(phi_end - phi_begin) / 0.07)));
  std::vector<Vec2> pts;
  pts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double phi = phi_begin + (phi_end - phi_begin) * static_cast<double>(i) / n;
    pts.push_back(center + radius * Vec2{std::sin(phi), -std::cos(phi)});
  }
  return {id, Polyline(std::move(pts)), kLaneWidth, std::move(successors)};
}

struct VehiclePlan
{
  std::string id;
  double length = 4.6;
  double width = 1.95;
  std::vector<std::string> route;  // lane ids, concatenated for the path
  double start_arc = 0.0;
  double cruise = 8.0;
  double depart_delay = 0.0;            // seconds held at the start state
  std::optional<double> stop_arc;       // brake to a stop at this arc position
};

Polyline plan_path(const TrafficMap & map, const VehiclePlan & plan)
{
  std::vector<Vec2> pts;
  for (const std::string & id : plan.route) {
    const LaneSegment * lane = map.find_lane(id);
    if (lane == nullptr) {
      fail(ErrorCode::internal, "forge: plan references unknown lane " + id);
    }
    for (const Vec2 & p : lane->centerline.points()) {
      if (!pts.empty() && geom::distance(pts.back(), p) <= 1e-9) {
        continue;
      }
      pts.push_back(p);
    }
  }
  return Polyline(std::move(pts));
}

Track build_track(const TrafficMap & map, const VehiclePlan & plan)
{
  const Polyline path = plan_path(map, plan);
  Track track{plan.id, plan.length, plan.width, {}};
  track.states.reserve(kHorizon);
  double arc = plan.start_arc;
  double v = plan.depart_delay > 0.0 ? 0.0 : plan.cruise;
  for (int k = 0; k < kHorizon; ++k) {
    const Vec2 p = path.point_at_arc(arc);
    track.states.push_back({{p.x, p.y, path.heading_at_arc(arc)}, v, true});

    const double now = k * kDt;
    if (now < plan.depart_delay) {
      v = 0.0;
    } else {
      double accel = 0.0;
      const bool braking =
        plan.stop_arc.has_value() &&
        arc + v * v / (2.0 * kComfortBrake) >= *plan.stop_arc - 0.3;
      if (braking) {
        accel = -kComfortBrake;
      } else if (v < plan.cruise) {
        accel = std::min(kDepartAccel, (plan.cruise - v) / kDt);
      }
      v = std::max(0.0, v + accel * kDt);
    }
    const double next = std::min(arc + v * kDt, path.length() - 0.05);
    if (next == arc) {
      v = 0.0;  // pinned at the path end
    }
    arc = next;
  }
  return track;
}

std::vector<geom::Pose2> poses_of(const Track & t)
{
  std::vector<geom::Pose2> out;
  out.reserve(t.states.size());
  for (const VehicleState & s : t.states) {
    out.push_back(s.pose);
  }
  return out;
}

bool tracks_collide(const Track & a, const Track & b)
{
  const auto pa = poses_of(a);
  const auto pb = poses_of(b);
  return geom::earliest_collision_step(
           pa, {a.length, a.width}, pb, {b.length, b.width})
    .has_value();
}

struct SceneDraft
{
  TrafficMap map;
  VehiclePlan ego;
  VehiclePlan adversary;
  std::vector<VehiclePlan> background;
  std::vector<std::string> ego_route;
};

// Builds tracks and repairs residual log conflicts by delaying the non-ego
// party. Template placement already avoids conflicts; this is a backstop
// that keeps the zero-collision guarantee unconditional.
Scenario assemble(SceneDraft draft)
{
  for (int attempt = 0; attempt < 10; ++attempt) {
    Track ego = build_track(draft.map, draft.ego);
    Track adv = build_track(draft.map, draft.adversary);
    std::vector<Track> bg;
    for (const VehiclePlan & plan : draft.background) {
      bg.push_back(build_track(draft.map, plan));
    }
    int conflict = -1;  // -1 none, -2 adversary, >= 0 background index
    if (tracks_collide(ego, adv)) {
      conflict = -2;
    }
    for (std::size_t i = 0; conflict == -1 && i < bg.size(); ++i) {
      if (tracks_collide(ego, bg[i]) || tracks_collide(adv, bg[i])) {
        conflict = static_cast<int>(i);
      }
    }
    if (conflict == -1) {
      Scenario::Data d;
      d.dt = kDt;
      d.horizon_steps = kHorizon;
      d.history_steps = kHistory;
      d.map = draft.map;
      d.tracks.push_back(std::move(ego));
      d.tracks.push_back(std::move(adv));
      for (Track & t : bg) {
        d.tracks.push_back(std::move(t));
      }
      d.ego_id = draft.ego.id;
      d.adversary_id = draft.adversary.id;
      d.ego_route = draft.ego_route;
      const VehicleState & last = d.tracks[0].states.back();
      const Polyline route = plan_path(draft.map, draft.ego);
      d.destination = route.point_at_arc(
        geom::project_to_polyline(last.pose.position(), route).arc_length);
      return Scenario(std::move(d));
    }
    if (conflict == -2) {
      draft.adversary.depart_delay += 1.5;
    } else {
      draft.background[conflict].depart_delay += 1.5;
    }
  }
  fail(ErrorCode::internal, "forge: could not deconflict logged tracks");
}

double draw_dim_length(Rng & rng) { return uniform_range(rng, 4.3, 5.0); }
double draw_dim_width(Rng & rng) { return uniform_range(rng, 1.85, 2.05); }

VehiclePlan make_plan(
  Rng & rng, const std::string & id, std::vector<std::string> route,
  double start_arc, double cruise)
{
  VehiclePlan p;
  p.id = id;
  p.length = draw_dim_length(rng);
  p.width = draw_dim_width(rng);
  p.route = std::move(route);
  p.start_arc = start_arc;
  p.cruise = cruise;
  return p;
}

SceneDraft straight_multilane_draft(Rng & rng, int n_background)
{
  const double v_ego = uniform_range(rng, 7.0, 10.5);
  const double ego_start = 53.0;
  const double road_len = ego_start + v_ego * 9.0 + 37.0;
  SceneDraft d;
  for (int lane = 0; lane < 3; ++lane) {
    d.map.lanes.push_back(straight_lane(
      "lane_" + std::to_string(lane), {0.0, 3.5 * lane}, {road_len, 3.5 * lane}, {}));
  }
  d.map.boundaries.push_back(Polyline(straight_points({0.0, -1.75}, {road_len, -1.75})));
  d.map.boundaries.push_back(Polyline(straight_points({0.0, 8.75}, {road_len, 8.75})));

  d.ego = make_plan(rng, "ego", {"lane_1"}, ego_start, v_ego);
  d.ego_route = {"lane_1"};

  const bool adv_left = uniform_unit(rng) < 0.5;
  const std::string adv_lane = adv_left ? "lane_2" : "lane_0";
  const double adv_ahead = uniform_range(rng, 9.0, 22.0);
  const double v_adv = v_ego + uniform_range(rng, -1.5, 1.5);
  d.adversary = make_plan(rng, "adv", {adv_lane}, ego_start + adv_ahead, v_adv);

  const std::string other_lane = adv_left ? "lane_0" : "lane_2";
  const std::vector<std::pair<std::string, std::pair<double, double>>> slots{
    {other_lane, {ego_start + uniform_range(rng, 6.0, 30.0), v_ego + uniform_range(rng, -1.0, 1.0)}},
    {"lane_1", {ego_start - uniform_range(rng, 26.0, 36.0), v_ego - uniform_range(rng, 0.5, 1.5)}},
    {adv_lane, {ego_start + adv_ahead - uniform_range(rng, 30.0, 42.0), v_adv - uniform_range(rng, 0.3, 1.2)}},
    {other_lane, {ego_start - uniform_range(rng, 20.0, 30.0), v_ego - uniform_range(rng, 0.2, 1.0)}},
    {"lane_1", {ego_start + uniform_range(rng, 40.0, 55.0), v_ego + uniform_range(rng, 0.0, 1.0)}},
    {adv_lane, {ego_start + adv_ahead + uniform_range(rng, 25.0, 40.0), v_adv + uniform_range(rng, 0.0, 1.0)}}};
  for (int i = 0; i < n_background; ++i) {
    const auto & slot = slots[i % slots.size()];
    d.background.push_back(make_plan(
      rng, "veh_" + std::to_string(i), {slot.first}, slot.second.first,
      std::max(3.0, slot.second.second)));
  }
  return d;
}

SceneDraft curve_draft(Rng & rng, int n_background)
{
  const double radius = uniform_range(rng, 45.0, 65.0);
  const double tail = 40.0;  // road behind the ego, for following traffic
  const double phi0 = -tail / radius;
  const double sweep = 1.75;  // radians of arc ahead of phi = 0
  const double phi1 = sweep + 30.0 / radius;  // headroom past the ego's reach
  const Vec2 center{0.0, radius};
  SceneDraft d;
  d.map.lanes.push_back(arc_lane("inner", center, radius, phi0, phi1, {}));
  d.map.lanes.push_back(
    arc_lane("outer", center, radius + kLaneWidth, phi0, phi1, {}));
  d.map.boundaries.push_back(
    arc_lane("b0", center, radius - 0.5 * kLaneWidth, phi0, phi1, {}).centerline);
  d.map.boundaries.push_back(
    arc_lane("b1", center, radius + 1.5 * kLaneWidth, phi0, phi1, {}).centerline);

  const double ahead_len = radius * sweep;
  const double ego_start = tail + 7.0;
  const double v_ego =
    std::min(uniform_range(rng, 6.0, 9.5), (ahead_len - 14.0) / 9.0);
  d.ego = make_plan(rng, "ego", {"inner"}, ego_start, v_ego);
  d.ego_route = {"inner"};

  const double v_adv = v_ego + uniform_range(rng, -1.0, 1.2);
  d.adversary = make_plan(
    rng, "adv", {"outer"}, ego_start + uniform_range(rng, 7.0, 18.0), v_adv);

  const std::vector<std::pair<std::string, std::pair<double, double>>> slots{
    {"outer", {ego_start - uniform_range(rng, 22.0, 32.0), v_adv - uniform_range(rng, 0.2, 1.0)}},
    {"inner", {ego_start - uniform_range(rng, 26.0, 36.0), v_ego - uniform_range(rng, 0.4, 1.2)}},
    {"outer", {ego_start + uniform_range(rng, 30.0, 45.0), v_adv + uniform_range(rng, 0.0, 0.8)}},
    {"inner", {ego_start + uniform_range(rng, 42.0, 55.0), v_ego}},
  };
  for (int i = 0; i < n_background; ++i) {
    const auto & slot = slots[i % slots.size()];
    d.background.push_back(make_plan(
      rng, "veh_" + std::to_string(i), {slot.first}, slot.second.first,
      std::max(3.0, slot.second.second)));
  }
  return d;
}

SceneDraft four_way_intersection_draft(Rng & rng, int n_background)
{
  SceneDraft d;
  const double v_ego = uniform_range(rng, 7.0, 10.0);
  const double v_adv = uniform_range(rng, 7.0, 10.0);
  const double run_time = uniform_range(rng, 1.25, 1.9);
  const double adv_brake_dist = v_adv * v_adv / (2.0 * kComfortBrake);
  const double adv_app_len = 4.5 + v_adv * run_time + adv_brake_dist;

  // Held at its logged speed, the adversary would clear the crossing point
  // this many seconds before the ego reaches it. The logged brake-to-stop
  // keeps the raw scene clean either way; the margin matters because
  // resampled futures must close it to reach the ego.
  const double miss_margin = uniform_range(rng, 1.3, 2.3);
  const double adv_cross_time = run_time + v_adv / 5.0 + 6.75 / v_adv;
  const double entry_time = adv_cross_time - 7.75 / v_ego + miss_margin;
  // 45 m of road behind the ego leaves room for following traffic.
  const double ego_start = 49.0;
  const double approach_len = ego_start + v_ego * entry_time;
  const double exit_len = v_ego * (9.3 - entry_time) + 12.0;

  d.map.lanes.push_back(straight_lane(
    "ew_approach", {-6.0 - approach_len, -1.75}, {-6.0, -1.75},
    {"ew_through", "ew_left", "ew_right"}));
  d.map.lanes.push_back(straight_lane("ew_through", {-6.0, -1.75}, {6.0, -1.75}, {"ew_exit"}));
  d.map.lanes.push_back(
    straight_lane("ew_exit", {6.0, -1.75}, {6.0 + exit_len, -1.75}, {}));
  d.map.lanes.push_back(turn_lane(
    "ew_left", {-6.0, -1.75}, {1.0, 0.0}, {1.75, 6.0}, {0.0, 1.0}, {"ns_exit_n"}));
  d.map.lanes.push_back(turn_lane(
    "ew_right", {-6.0, -1.75}, {1.0, 0.0}, {-1.75, -6.0}, {0.0, -1.0}, {"ns_exit_s"}));
  d.map.lanes.push_back(straight_lane(
    "ns_approach", {1.75, -6.0 - adv_app_len}, {1.75, -6.0},
    {"ns_through", "ns_left", "ns_right"}));
  d.map.lanes.push_back(straight_lane("ns_through", {1.75, -6.0}, {1.75, 6.0}, {"ns_exit_n"}));
  d.map.lanes.push_back(straight_lane("ns_exit_n", {1.75, 6.0}, {1.75, 6.0 + 55.0}, {}));
  d.map.lanes.push_back(
    straight_lane("ns_exit_s", {-1.75, -6.0}, {-1.75, -6.0 - 45.0}, {}));
  d.map.lanes.push_back(turn_lane(
    "ns_left", {1.75, -6.0}, {0.0, 1.0}, {-6.0, 1.75}, {-1.0, 0.0}, {"we_exit"}));
  d.map.lanes.push_back(turn_lane(
    "ns_right", {1.75, -6.0}, {0.0, 1.0}, {6.0, -1.75}, {1.0, 0.0}, {"ew_exit"}));
  d.map.lanes.push_back(straight_lane(
    "we_lane", {6.0 + exit_len, 1.75}, {-6.0, 1.75}, {"we_exit"}));
  d.map.lanes.push_back(straight_lane(
    "we_exit", {-6.0, 1.75}, {-6.0 - approach_len, 1.75}, {}));

  // Road edges, drawn sparse; the junction interior is left open.
  d.map.boundaries.push_back(Polyline(
    straight_points({-6.0 - approach_len, -3.5}, {-7.0, -3.5})));
  d.map.boundaries.push_back(Polyline(
    straight_points({7.0, -3.5}, {6.0 + exit_len, -3.5})));
  d.map.boundaries.push_back(Polyline(
    straight_points({-6.0 - approach_len, 3.5}, {-7.0, 3.5})));
  d.map.boundaries.push_back(Polyline(
    straight_points({7.0, 3.5}, {6.0 + exit_len, 3.5})));

  d.ego = make_plan(
    rng, "ego", {"ew_approach", "ew_through", "ew_exit"}, ego_start, v_ego);
  d.ego_route = {"ew_approach", "ew_through", "ew_exit"};

  d.adversary = make_plan(rng, "adv", {"ns_approach"}, 2.0, v_adv);
  d.adversary.stop_arc = adv_app_len - 2.5;

  const std::vector<std::pair<std::vector<std::string>, std::pair<double, double>>> slots{
    {{"we_lane", "we_exit"}, {uniform_range(rng, 2.0, 20.0), uniform_range(rng, 7.0, 10.0)}},
    {{"ew_approach", "ew_through", "ew_exit"},
     {ego_start - uniform_range(rng, 24.0, 34.0), v_ego - uniform_range(rng, 0.4, 1.4)}},
    {{"ns_exit_n"}, {uniform_range(rng, 4.0, 18.0), uniform_range(rng, 6.0, 9.0)}},
    {{"we_lane", "we_exit"},
     {uniform_range(rng, 30.0, 50.0), uniform_range(rng, 7.0, 10.0)}},
    {{"ew_exit"}, {uniform_range(rng, 18.0, 30.0), v_ego + uniform_range(rng, 0.2, 1.0)}},
    {{"ns_exit_s"}, {uniform_range(rng, 6.0, 20.0), uniform_range(rng, 6.0, 9.0)}},
  };
  for (int i = 0; i < n_background; ++i) {
    const auto & slot = slots[i % slots.size()];
    d.background.push_back(make_plan(
      rng, "veh_" + std::to_string(i), slot.first, slot.second.first,
      std::max(3.0, slot.second.second)));
  }
  return d;
}

SceneDraft t_junction_draft(Rng & rng, int n_background)
{
  SceneDraft d;
  const double v_ego = uniform_range(rng, 7.0, 10.0);
  const double v_adv = uniform_range(rng, 6.5, 9.5);
  const double run_time = uniform_range(rng, 1.25, 1.9);
  const double adv_brake_dist = v_adv * v_adv / (2.0 * kComfortBrake);
  const double side_len = 4.5 + v_adv * run_time + adv_brake_dist;

  // Same timing scheme as the crossing: the adversary's logged speed would
  // put it through the junction ahead of the ego by this margin.
  const double miss_margin = uniform_range(rng, 1.3, 2.3);
  const double adv_cross_time = run_time + v_adv / 5.0 + 7.0 / v_adv;
  const double conflict_time = adv_cross_time - 11.5 / v_ego + miss_margin;
  const double ego_start = 49.0;
  const double main_west_len = ego_start + v_ego * conflict_time;  // to x=-10
  const double main_east_len = v_ego * (9.3 - conflict_time) + 16.0;

  d.map.lanes.push_back(straight_lane(
    "main_e_a", {-main_west_len - 10.0, -1.75}, {10.0, -1.75}, {"main_e_b"}));
  d.map.lanes.push_back(straight_lane(
    "main_e_b", {10.0, -1.75}, {10.0 + main_east_len, -1.75}, {}));
  d.map.lanes.push_back(straight_lane(
    "main_w_a", {10.0 + main_east_len, 1.75}, {-10.0, 1.75}, {"main_w_b"}));
  d.map.lanes.push_back(straight_lane(
    "main_w_b", {-10.0, 1.75}, {-main_west_len - 10.0, 1.75}, {}));
  d.map.lanes.push_back(straight_lane(
    "side_approach", {1.75, -6.0 - side_len}, {1.75, -6.0}, {"side_right", "side_left"}));
  d.map.lanes.push_back(turn_lane(
    "side_right", {1.75, -6.0}, {0.0, 1.0}, {10.0, -1.75}, {1.0, 0.0}, {"main_e_b"}));
  d.map.lanes.push_back(turn_lane(
    "side_left", {1.75, -6.0}, {0.0, 1.0}, {-10.0, 1.75}, {-1.0, 0.0}, {"main_w_b"}));

  d.map.boundaries.push_back(Polyline(
    straight_points({-main_west_len - 10.0, 3.5}, {10.0 + main_east_len, 3.5})));
  d.map.boundaries.push_back(Polyline(
    straight_points({-main_west_len - 10.0, -3.5}, {-5.0, -3.5})));
  d.map.boundaries.push_back(Polyline(
    straight_points({8.0, -3.5}, {10.0 + main_east_len, -3.5})));

  d.ego = make_plan(rng, "ego", {"main_e_a", "main_e_b"}, ego_start, v_ego);
  d.ego_route = {"main_e_a", "main_e_b"};

  d.adversary = make_plan(rng, "adv", {"side_approach"}, 2.0, v_adv);
  d.adversary.stop_arc = side_len - 2.5;

  const std::vector<std::pair<std::vector<std::string>, std::pair<double, double>>> slots{
    {{"main_w_a", "main_w_b"}, {uniform_range(rng, 2.0, 25.0), uniform_range(rng, 7.0, 10.0)}},
    {{"main_e_a", "main_e_b"},
     {ego_start - uniform_range(rng, 25.0, 35.0), v_ego - uniform_range(rng, 0.4, 1.4)}},
    {{"main_e_a", "main_e_b"},
     {ego_start + uniform_range(rng, 30.0, 45.0), v_ego + uniform_range(rng, 0.0, 1.0)}},
    {{"main_w_a", "main_w_b"},
     {uniform_range(rng, 40.0, 60.0), uniform_range(rng, 7.0, 10.0)}},
  };
  for (int i = 0; i < n_background; ++i) {
    const auto & slot = slots[i % slots.size()];
    d.background.push_back(make_plan(
      rng, "veh_" + std::to_string(i), slot.first, slot.second.first,
      std::max(3.0, slot.second.second)));
  }
  return d;
}

SceneDraft merge_draft(Rng & rng, int n_background)
{
  SceneDraft d;
  const double v_ego = uniform_range(rng, 7.5, 10.5);
  const double merge_time = uniform_range(rng, 4.0, 5.8);
  const double ego_start = 49.0;
  const double main_pre_len = ego_start + v_ego * merge_time;  // to merge point
  // Sized for the fastest participant (the merging adversary and the lead
  // vehicle both run a little hotter than the ego).
  const double main_post_len = (v_ego + 1.0) * (11.5 - merge_time) + 16.0;
  const Vec2 merge_point{0.0, 0.0};

  d.map.lanes.push_back(straight_lane(
    "main_a", {-main_pre_len, 0.0}, merge_point, {"main_b"}));
  d.map.lanes.push_back(straight_lane(
    "main_b", merge_point, {main_post_len, 0.0}, {}));
  const std::vector<Vec2> ramp_ctrl{
    {-main_pre_len - 6.0, -16.0}, {-main_pre_len * 0.45, -14.5}, {-18.0, -5.0}, {-7.0, -0.8},
    merge_point};
  d.map.lanes.push_back(
    {"ramp", geom::bezier_fit(ramp_ctrl, 25), kLaneWidth, {"main_b"}});

  d.map.boundaries.push_back(Polyline(
    straight_points({-main_pre_len, 1.75}, {main_post_len, 1.75})));
  d.map.boundaries.push_back(Polyline(
    straight_points({-main_pre_len, -1.75}, {-24.0, -1.75})));

  d.ego = make_plan(rng, "ego", {"main_a", "main_b"}, ego_start, v_ego);
  d.ego_route = {"main_a", "main_b"};

  // Logged, the slightly faster adversary merges ahead of the ego and pulls
  // away; only a slowed-down resample of it lands in the ego's window.
  const double ramp_len = d.map.find_lane("ramp")->centerline.length();
  const double v_adv = v_ego + uniform_range(rng, 0.2, 0.9);
  const double adv_merge_time = merge_time - uniform_range(rng, 1.3, 2.0);
  const double adv_start = std::max(2.0, ramp_len - v_adv * adv_merge_time);
  d.adversary = make_plan(rng, "adv", {"ramp", "main_b"}, adv_start, v_adv);

  const std::vector<std::pair<std::vector<std::string>, std::pair<double, double>>> slots{
    {{"main_a", "main_b"},
     {ego_start - uniform_range(rng, 25.0, 36.0), v_ego - uniform_range(rng, 0.4, 1.2)}},
    {{"main_a", "main_b"},
     {ego_start + uniform_range(rng, 48.0, 62.0), v_ego + uniform_range(rng, 0.0, 1.0)}},
    {{"ramp", "main_b"},
     {std::max(1.0, adv_start - uniform_range(rng, 24.0, 34.0)), v_adv - uniform_range(rng, 0.2, 1.0)}},
  };
  for (int i = 0; i < n_background; ++i) {
    const auto & slot = slots[i % slots.size()];
    d.background.push_back(make_plan(
      rng, "veh_" + std::to_string(i), slot.first, slot.second.first,
      std::max(3.0, slot.second.second)));
  }
  return d;
}

}  // namespace

const char * template_name(Template t)
{
  switch (t) {
    case Template::four_way_intersection:
      return "four_way_intersection";
    case Template::t_junction:
      return "t_junction";
    case Template::straight_multilane:
      return "straight_multilane";
    case Template::curve:
      return "curve";
    case Template::merge:
      return "merge";
  }
  return "unknown";
}

Template template_from_name(const std::string & name)
{
  for (Template t : all_templates()) {
    if (name == template_name(t)) {
      return t;
    }
  }
  fail(ErrorCode::argument, "unknown template '" + name + "'");
}

std::vector<Template> all_templates()
{
  return {
    Template::four_way_intersection, Template::t_junction,
    Template::straight_multilane, Template::curve, Template::merge};
}

Scenario forge_scenario(const ForgeConfig & config)
{
  Rng rng(config.seed * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull);
  const int n_bg = std::clamp(config.n_background, 0, 6);
  SceneDraft draft;
  switch (config.tmpl) {
    case Template::four_way_intersection:
      draft = four_way_intersection_draft(rng, n_bg);
      break;
    case Template::t_junction:
      draft = t_junction_draft(rng, n_bg);
      break;
    case Template::straight_multilane:
      draft = straight_multilane_draft(rng, n_bg);
      break;
    case Template::curve:
      draft = curve_draft(rng, n_bg);
      break;
    case Template::merge:
      draft = merge_draft(rng, n_bg);
      break;
  }
  Scenario s = assemble(std::move(draft));
  if (s.route_polyline().length() < 40.0) {
    fail(ErrorCode::internal, "forge: ego route shorter than 40 m");
  }
  return s;
}

Corpus forge_corpus(int n, double train_fraction, std::uint64_t seed)
{
  if (n < 1) {
    fail(ErrorCode::argument, "forge_corpus: n must be positive");
  }
  if (train_fraction < 0.0 || train_fraction > 1.0) {
    fail(ErrorCode::argument, "forge_corpus: train_fraction outside [0, 1]");
  }
  Corpus corpus;
  corpus.n = n;
  corpus.train_fraction = train_fraction;
  corpus.seed = seed;
  Rng rng(seed ^ 0xA02B9FE5E0FB4D41ull);
  const auto templates = all_templates();
  const int n_train = static_cast<int>(std::lround(n * train_fraction));
  for (int i = 0; i < n; ++i) {
    ForgeConfig cfg;
    cfg.tmpl = templates[i % templates.size()];
    cfg.seed = rng();
    cfg.n_background = static_cast<int>(uniform_index(rng, 4));
    char idx[16];
    std::snprintf(idx, sizeof(idx), "%04d", i);
    CorpusItem item{
      forge_scenario(cfg),
      std::string("scene_") + idx + "_" + template_name(cfg.tmpl)};
    if (i < n_train) {
      corpus.train.push_back(std::move(item));
    } else {
      corpus.test.push_back(std::move(item));
    }
  }
  return corpus;
}

void write_corpus(const Corpus & corpus, const std::string & directory)
{
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["n"] = corpus.n;
  manifest["train_fraction"] = corpus.train_fraction;
  manifest["seed"] = corpus.seed;
  manifest["train"] = nlohmann::json::array();
  manifest["test"] = nlohmann::json::array();
  for (const CorpusItem & item : corpus.train) {
    const std::string file = item.name + ".json";
    item.scenario.save_file((fs::path(directory) / file).string());
    manifest["train"].push_back(file);
  }
  for (const CorpusItem & item : corpus.test) {
    const std::string file = item.name + ".json";
    item.scenario.save_file((fs::path(directory) / file).string());
    manifest["test"].push_back(file);
  }
  jsonutil::save_json_file(manifest, (fs::path(directory) / "manifest.json").string());
}

}  // namespace advsim::forge
