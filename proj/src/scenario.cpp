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

#include "advsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "advsim/errors.hpp"
#include "json_util.hpp"

namespace advsim
{

using jsonutil::get_int;
using jsonutil::get_number;
using jsonutil::get_string;
using jsonutil::require_array;
using jsonutil::require_bool;
using jsonutil::require_key;
using jsonutil::require_number;

namespace
{

geom::Vec2 parse_point(const nlohmann::json & j, const std::string & path)
{
  require_array(j, path);
  if (j.size() != 2) {
    fail(ErrorCode::schema, path + ": expected [x, y]");
  }
  return {require_number(j[0], path + "[0]"), require_number(j[1], path + "[1]")};
}

geom::Polyline parse_polyline(const nlohmann::json & j, const std::string & path)
{
  require_array(j, path);
  std::vector<geom::Vec2> pts;
  pts.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    pts.push_back(parse_point(j[i], path + "[" + std::to_string(i) + "]"));
  }
  try {
    return geom::Polyline(std::move(pts));
  } catch (const Error & e) {
    fail(ErrorCode::invariant, path + ": " + e.what());
  }
}

nlohmann::json point_to_json(geom::Vec2 p)
{
  return nlohmann::json::array({p.x, p.y});
}

nlohmann::json polyline_to_json(const geom::Polyline & line)
{
  nlohmann::json arr = nlohmann::json::array();
  for (const geom::Vec2 & p : line.points()) {
    arr.push_back(point_to_json(p));
  }
  return arr;
}

geom::Polyline concatenate_route(
  const TrafficMap & map, std::span<const std::string> route)
{
  std::vector<geom::Vec2> pts;
  for (const std::string & id : route) {
    const LaneSegment * lane = map.find_lane(id);
    for (const geom::Vec2 & p : lane->centerline.points()) {
      if (!pts.empty() && geom::distance(pts.back(), p) <= 1e-9) {
        continue;  // shared joint vertex between consecutive lanes
      }
      pts.push_back(p);
    }
  }
  return geom::Polyline(std::move(pts));
}

}  // namespace

const LaneSegment * TrafficMap::find_lane(std::string_view id) const
{
  for (const LaneSegment & lane : lanes) {
    if (lane.id == id) {
      return &lane;
    }
  }
  return nullptr;
}

Scenario::Scenario(Data data)
: data_(std::move(data))
{
  if (data_.dt <= 0.0) {
    fail(ErrorCode::invariant, "dt: must be positive");
  }
  if (data_.history_steps < 1) {
    fail(ErrorCode::invariant, "history_steps: must be at least 1");
  }
  if (data_.horizon_steps <= data_.history_steps) {
    fail(ErrorCode::invariant, "horizon_steps: must exceed history_steps");
  }
  if (data_.map.lanes.empty()) {
    fail(ErrorCode::invariant, "map.lanes: at least one lane required");
  }
  for (std::size_t i = 0; i < data_.map.lanes.size(); ++i) {
    const LaneSegment & lane = data_.map.lanes[i];
    const std::string path = "map.lanes[" + std::to_string(i) + "]";
    if (lane.lane_width < 2.5 || lane.lane_width > 6.0) {
      fail(ErrorCode::invariant, path + ".lane_width: outside [2.5, 6]");
    }
    for (const std::string & succ : lane.successors) {
      if (data_.map.find_lane(succ) == nullptr) {
        fail(ErrorCode::invariant, path + ".successors: unknown lane '" + succ + "'");
      }
    }
  }
  std::set<std::string> seen_ids;
  for (std::size_t i = 0; i < data_.tracks.size(); ++i) {
    const Track & t = data_.tracks[i];
    const std::string path = "tracks[" + std::to_string(i) + "]";
    if (!seen_ids.insert(t.id).second) {
      fail(ErrorCode::invariant, path + ".id: duplicate '" + t.id + "'");
    }
    if (t.length <= 0.0 || t.width <= 0.0) {
      fail(ErrorCode::invariant, path + ": length and width must be positive");
    }
    if (static_cast<int>(t.states.size()) != data_.horizon_steps) {
      fail(
        ErrorCode::invariant, path + ".states: expected " +
        std::to_string(data_.horizon_steps) + " states, got " +
        std::to_string(t.states.size()));
    }
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      VehicleState & st = data_.tracks[i].states[k];
      if (st.speed < 0.0) {
        fail(
          ErrorCode::invariant,
          path + ".states[" + std::to_string(k) + "].speed: negative");
      }
      st.pose.heading = geom::normalize_angle(st.pose.heading);
    }
  }
  if (data_.ego_id == data_.adversary_id) {
    fail(ErrorCode::invariant, "ego_id and adversary_id name the same track");
  }
  const auto locate = [this](const std::string & id, const char * field) {
    for (std::size_t i = 0; i < data_.tracks.size(); ++i) {
      if (data_.tracks[i].id == id) {
        return i;
      }
    }
    fail(ErrorCode::invariant, std::string(field) + ": no track with id '" + id + "'");
  };
  ego_index_ = locate(data_.ego_id, "ego_id");
  adversary_index_ = locate(data_.adversary_id, "adversary_id");
  if (data_.ego_route.empty()) {
    fail(ErrorCode::invariant, "ego_route: must name at least one lane");
  }
  for (const std::string & id : data_.ego_route) {
    if (data_.map.find_lane(id) == nullptr) {
      fail(ErrorCode::invariant, "ego_route: unknown lane '" + id + "'");
    }
  }
  route_.emplace(concatenate_route(data_.map, data_.ego_route));
}

Scenario Scenario::from_json(const nlohmann::json & j)
{
  if (!j.is_object()) {
    fail(ErrorCode::schema, "scenario: expected a JSON object");
  }
  Data d;
  d.dt = get_number(j, "dt", "scenario");
  d.horizon_steps = get_int(j, "horizon_steps", "scenario");
  d.history_steps = get_int(j, "history_steps", "scenario");

  const nlohmann::json & map_j = require_key(j, "map", "scenario");
  const nlohmann::json & lanes_j =
    require_array(require_key(map_j, "lanes", "scenario.map"), "scenario.map.lanes");
  for (std::size_t i = 0; i < lanes_j.size(); ++i) {
    const std::string path = "scenario.map.lanes[" + std::to_string(i) + "]";
    const nlohmann::json & lane_j = lanes_j[i];
    LaneSegment lane{
      get_string(lane_j, "id", path),
      parse_polyline(require_key(lane_j, "centerline", path), path + ".centerline"),
      get_number(lane_j, "lane_width", path),
      {}};
    const nlohmann::json & succ = require_array(
      require_key(lane_j, "successors", path), path + ".successors");
    for (std::size_t s = 0; s < succ.size(); ++s) {
      lane.successors.push_back(
        jsonutil::require_string(succ[s], path + ".successors[" + std::to_string(s) + "]"));
    }
    d.map.lanes.push_back(std::move(lane));
  }
  const nlohmann::json & bounds_j = require_array(
    require_key(map_j, "boundaries", "scenario.map"), "scenario.map.boundaries");
  for (std::size_t i = 0; i < bounds_j.size(); ++i) {
    d.map.boundaries.push_back(
      parse_polyline(bounds_j[i], "scenario.map.boundaries[" + std::to_string(i) + "]"));
  }

  const nlohmann::json & tracks_j =
    require_array(require_key(j, "tracks", "scenario"), "scenario.tracks");
  for (std::size_t i = 0; i < tracks_j.size(); ++i) {
    const std::string path = "scenario.tracks[" + std::to_string(i) + "]";
    const nlohmann::json & track_j = tracks_j[i];
    Track t;
    t.id = get_string(track_j, "id", path);
    t.length = get_number(track_j, "length", path);
    t.width = get_number(track_j, "width", path);
    const nlohmann::json & states_j =
      require_array(require_key(track_j, "states", path), path + ".states");
    for (std::size_t k = 0; k < states_j.size(); ++k) {
      const std::string spath = path + ".states[" + std::to_string(k) + "]";
      const nlohmann::json & st = states_j[k];
      VehicleState v;
      v.pose.x = get_number(st, "x", spath);
      v.pose.y = get_number(st, "y", spath);
      v.pose.heading = get_number(st, "heading", spath);
      v.speed = get_number(st, "speed", spath);
      v.valid = require_bool(require_key(st, "valid", spath), spath + ".valid");
      t.states.push_back(v);
    }
    d.tracks.push_back(std::move(t));
  }

  d.ego_id = get_string(j, "ego_id", "scenario");
  d.adversary_id = get_string(j, "adversary_id", "scenario");
  const nlohmann::json & route_j =
    require_array(require_key(j, "ego_route", "scenario"), "scenario.ego_route");
  for (std::size_t i = 0; i < route_j.size(); ++i) {
    d.ego_route.push_back(
      jsonutil::require_string(route_j[i], "scenario.ego_route[" + std::to_string(i) + "]"));
  }
  d.destination = parse_point(
    require_key(j, "destination", "scenario"), "scenario.destination");

  Scenario s(std::move(d));
  s.raw_ = j;
  return s;
}

Scenario Scenario::load_file(const std::string & path)
{
  return from_json(jsonutil::load_json_file(path));
}

nlohmann::json Scenario::to_json() const
{
  // Start from the original document when available so unknown keys at every
  // level are carried through, then overwrite the fields this type owns.
  nlohmann::json j = raw_.has_value() ? *raw_ : nlohmann::json::object();
  j["dt"] = data_.dt;
  j["horizon_steps"] = data_.horizon_steps;
  j["history_steps"] = data_.history_steps;
  if (!j.contains("map") || !j["map"].is_object()) {
    j["map"] = nlohmann::json::object();
  }
  nlohmann::json & map_j = j["map"];
  if (!map_j.contains("lanes") || !map_j["lanes"].is_array() ||
      map_j["lanes"].size() != data_.map.lanes.size()) {
    map_j["lanes"] = nlohmann::json::array();
    map_j["lanes"].get_ref<nlohmann::json::array_t &>().resize(data_.map.lanes.size());
  }
  for (std::size_t i = 0; i < data_.map.lanes.size(); ++i) {
    const LaneSegment & lane = data_.map.lanes[i];
    nlohmann::json & lane_j = map_j["lanes"][i];
    if (!lane_j.is_object()) {
      lane_j = nlohmann::json::object();
    }
    lane_j["id"] = lane.id;
    lane_j["lane_width"] = lane.lane_width;
    lane_j["successors"] = lane.successors;
    lane_j["centerline"] = polyline_to_json(lane.centerline);
  }
  map_j["boundaries"] = nlohmann::json::array();
  for (const geom::Polyline & b : data_.map.boundaries) {
    map_j["boundaries"].push_back(polyline_to_json(b));
  }
  if (!j.contains("tracks") || !j["tracks"].is_array() ||
      j["tracks"].size() != data_.tracks.size()) {
    j["tracks"] = nlohmann::json::array();
    j["tracks"].get_ref<nlohmann::json::array_t &>().resize(data_.tracks.size());
  }
  for (std::size_t i = 0; i < data_.tracks.size(); ++i) {
    const Track & t = data_.tracks[i];
    nlohmann::json & track_j = j["tracks"][i];
    if (!track_j.is_object()) {
      track_j = nlohmann::json::object();
    }
    track_j["id"] = t.id;
    track_j["length"] = t.length;
    track_j["width"] = t.width;
    if (!track_j.contains("states") || !track_j["states"].is_array() ||
        track_j["states"].size() != t.states.size()) {
      track_j["states"] = nlohmann::json::array();
      track_j["states"].get_ref<nlohmann::json::array_t &>().resize(t.states.size());
    }
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      nlohmann::json & st = track_j["states"][k];
      if (!st.is_object()) {
        st = nlohmann::json::object();
      }
      st["x"] = t.states[k].pose.x;
      st["y"] = t.states[k].pose.y;
      st["heading"] = t.states[k].pose.heading;
      st["speed"] = t.states[k].speed;
      st["valid"] = t.states[k].valid;
    }
  }
  j["ego_id"] = data_.ego_id;
  j["adversary_id"] = data_.adversary_id;
  j["ego_route"] = data_.ego_route;
  j["destination"] = point_to_json(data_.destination);
  return j;
}

void Scenario::save_file(const std::string & path) const
{
  jsonutil::save_json_file(to_json(), path);
}

const Track * Scenario::find_track(std::string_view id) const
{
  for (const Track & t : data_.tracks) {
    if (t.id == id) {
      return &t;
    }
  }
  return nullptr;
}

std::size_t Scenario::track_index(std::string_view id) const
{
  for (std::size_t i = 0; i < data_.tracks.size(); ++i) {
    if (data_.tracks[i].id == id) {
      return i;
    }
  }
  fail(ErrorCode::argument, "no track with id '" + std::string(id) + "'");
}

HistoryView Scenario::history() const { return HistoryView(*this); }

geom::BoxSize HistoryView::track_size(std::string_view id) const
{
  const Track * t = scenario_->find_track(id);
  if (t == nullptr) {
    fail(ErrorCode::argument, "no track with id '" + std::string(id) + "'");
  }
  return t->size();
}

std::span<const VehicleState> HistoryView::states(std::string_view id) const
{
  const Track * t = scenario_->find_track(id);
  if (t == nullptr) {
    fail(ErrorCode::argument, "no track with id '" + std::string(id) + "'");
  }
  return std::span<const VehicleState>(t->states).first(history_steps());
}

std::span<const VehicleState> HistoryView::states(std::size_t track_index) const
{
  return std::span<const VehicleState>(scenario_->tracks()[track_index].states)
    .first(history_steps());
}

namespace
{

Scenario splice(const Scenario & base, std::span<const VehicleState> future)
{
  Scenario::Data d;
  d.dt = base.dt();
  d.horizon_steps = base.horizon_steps();
  d.history_steps = base.history_steps();
  d.map = base.map();
  d.tracks.assign(base.tracks().begin(), base.tracks().end());
  d.ego_id = base.ego_id();
  d.adversary_id = base.adversary_id();
  d.ego_route.assign(base.ego_route().begin(), base.ego_route().end());
  d.destination = base.destination();
  Track & adv = d.tracks[base.adversary_index()];
  std::copy(
    future.begin(), future.end(),
    adv.states.begin() + base.history_steps());
  return Scenario(std::move(d));
}

}  // namespace

AdversarialScenario::AdversarialScenario(
  Scenario base, std::vector<VehicleState> override_future)
: base_(std::move(base)),
  override_(std::move(override_future)),
  merged_(splice(base_, override_))
{
}

AdversarialScenario apply_adversary(
  const Scenario & base, std::span<const VehicleState> future)
{
  if (static_cast<int>(future.size()) != base.future_steps()) {
    fail(
      ErrorCode::argument,
      "apply_adversary: override has " + std::to_string(future.size()) +
      " states, scenario needs " + std::to_string(base.future_steps()));
  }
  const VehicleState & cutoff =
    base.adversary_track().states[base.history_steps() - 1];
  if (cutoff.valid && !future.empty()) {
    const geom::Vec2 expected{
      cutoff.pose.x + cutoff.speed * base.dt() * std::cos(cutoff.pose.heading),
      cutoff.pose.y + cutoff.speed * base.dt() * std::sin(cutoff.pose.heading)};
    const double jump = geom::distance(expected, future.front().pose.position());
    if (jump > 0.5) {
      fail(
        ErrorCode::invariant,
        "apply_adversary: override discontinuous at the cutoff (" +
        std::to_string(jump) + " m from the extrapolated logged state)");
    }
  }
  return AdversarialScenario(
    base, std::vector<VehicleState>(future.begin(), future.end()));
}

}  // namespace advsim
