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

#include "advsim/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "advsim/errors.hpp"

namespace advsim::sim
{

namespace
{

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

double point_segment_distance(geom::Vec2 p, geom::Vec2 a, geom::Vec2 b)
{
  const geom::Vec2 ab = b - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  if (len2 <= 0.0) {
    return geom::distance(p, a);
  }
  const double t = std::clamp(((p - a).x * ab.x + (p - a).y * ab.y) / len2, 0.0, 1.0);
  return geom::distance(p, a + t * ab);
}

}  // namespace

std::vector<double> lidar_scan(
  const geom::Pose2 & origin, std::span<const LidarObstacle> obstacles,
  std::span<const geom::Polyline> boundaries)
{
  const geom::Vec2 eye = origin.position();

  // Reject whole obstacles and boundary segments outside the scan radius once,
  // instead of per ray.
  struct Segment
  {
    geom::Vec2 a;
    geom::Vec2 b;
  };
  std::vector<Segment> segments;
  for (const auto & obstacle : obstacles) {
    const double half_diag =
      0.5 * std::hypot(obstacle.size.length, obstacle.size.width);
    if (geom::distance(eye, obstacle.pose.position()) > kLidarRadius + half_diag) {
      continue;
    }
    const geom::OrientedBox box{obstacle.pose, obstacle.size.length, obstacle.size.width};
    const auto corners = box.corners();
    for (std::size_t i = 0; i < corners.size(); ++i) {
      segments.push_back({corners[i], corners[(i + 1) % corners.size()]});
    }
  }
  for (const auto & boundary : boundaries) {
    const auto & pts = boundary.points();
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      if (point_segment_distance(eye, pts[i], pts[i + 1]) > kLidarRadius) {
        continue;
      }
      segments.push_back({pts[i], pts[i + 1]});
    }
  }

  std::vector<double> ranges(kLidarRays, 1.0);
  for (int i = 0; i < kLidarRays; ++i) {
    const double angle =
      origin.heading + 2.0 * std::numbers::pi * static_cast<double>(i) /
                         static_cast<double>(kLidarRays);
    const geom::Vec2 dir{std::cos(angle), std::sin(angle)};
    double best = kLidarRadius;
    for (const auto & seg : segments) {
      const auto hit = geom::ray_segment_intersection(eye, dir, seg.a, seg.b);
      if (hit && *hit < best) {
        best = *hit;
      }
    }
    ranges[static_cast<std::size_t>(i)] = best / kLidarRadius;
  }
  return ranges;
}

Simulator::Simulator(
  Scenario scenario, VehicleLimits limits, RewardConfig rewards, EgoMode mode)
: scenario_(std::move(scenario)), limits_(limits), rewards_(rewards), mode_(mode)
{
  if (
    limits_.steer_max <= 0.0 || limits_.accel_max <= 0.0 || limits_.brake_max <= 0.0 ||
    limits_.wheelbase <= 0.0) {
    fail(ErrorCode::argument, "Simulator: vehicle limits must be positive");
  }
  const double route_len = scenario_.route_polyline().length();
  for (double arc = kCheckpointSpacing; arc < route_len; arc += kCheckpointSpacing) {
    checkpoint_arcs_.push_back(arc);
  }
  checkpoint_arcs_.push_back(route_len);
}

std::vector<double> Simulator::reset()
{
  const int cutoff = scenario_.history_steps() - 1;
  const auto & ego = scenario_.ego_track();
  if (cutoff < 0 || static_cast<std::size_t>(cutoff) >= ego.states.size()) {
    fail(ErrorCode::invariant, "Simulator: ego track does not cover the history window");
  }
  const VehicleState & start = ego.states[static_cast<std::size_t>(cutoff)];
  if (!start.valid) {
    fail(ErrorCode::invariant, "Simulator: ego state at the history cutoff is invalid");
  }
  started_ = true;
  done_ = false;
  frame_ = cutoff;
  steps_ = 0;
  ego_pose_ = start.pose;
  ego_speed_ = start.speed;
  last_action_ = {};
  route_arc_ =
    geom::project_to_polyline(ego_pose_.position(), scenario_.route_polyline()).arc_length;
  start_arc_ = route_arc_;
  return observation();
}

StepResult Simulator::step(Action a)
{
  check_started();
  if (done_) {
    fail(ErrorCode::state, "Simulator: step() called after the episode ended");
  }

  a.steer = clamp_unit(a.steer);
  a.accel = clamp_unit(a.accel);
  const int next_frame = frame_ + 1;
  const double dt = scenario_.dt();
  const geom::Vec2 prev_position = ego_pose_.position();

  if (mode_ == EgoMode::policy) {
    // Kinematic bicycle: midpoint speed over the step drives both the
    // displacement (along the pre-step heading) and the yaw update.
    const double accel =
      limits_.accel_max * std::max(0.0, a.accel) - limits_.brake_max * std::max(0.0, -a.accel);
    const double v_new = std::max(0.0, ego_speed_ + accel * dt);
    const double v_avg = 0.5 * (ego_speed_ + v_new);
    const geom::Vec2 dir{std::cos(ego_pose_.heading), std::sin(ego_pose_.heading)};
    ego_pose_.x += v_avg * dt * dir.x;
    ego_pose_.y += v_avg * dt * dir.y;
    ego_pose_.heading = geom::normalize_angle(
      ego_pose_.heading +
      v_avg * std::tan(limits_.steer_max * a.steer) / limits_.wheelbase * dt);
    ego_speed_ = v_new;
  } else {
    const auto & states = scenario_.ego_track().states;
    const std::size_t idx =
      std::min(static_cast<std::size_t>(next_frame), states.size() - 1);
    if (states[idx].valid) {
      ego_pose_ = states[idx].pose;
      ego_speed_ = states[idx].speed;
    }
  }
  last_action_ = a;
  frame_ = next_frame;
  ++steps_;

  StepInfo info;
  info.frame = frame_;

  const geom::OrientedBox ego_box{
    ego_pose_, scenario_.ego_track().length, scenario_.ego_track().width};
  for (std::size_t t = 0; t < scenario_.tracks().size(); ++t) {
    if (t == scenario_.ego_index()) {
      continue;
    }
    const VehicleState other = vehicle_state(t);
    if (!other.valid) {
      continue;
    }
    const auto & track = scenario_.tracks()[t];
    if (geom::obb_overlap(ego_box, {other.pose, track.length, track.width})) {
      info.crashed = true;
      info.crashed_with = static_cast<int>(t);
      break;
    }
  }

  // Off-road when the ego leaves the route corridor or its motion segment
  // crosses a drawn road edge. Junction interiors carry no edges, so legal
  // crossing paths never trip the second test.
  double corridor_gap = std::numeric_limits<double>::infinity();
  for (const auto & lane_id : scenario_.ego_route()) {
    const LaneSegment * lane = scenario_.map().find_lane(lane_id);
    if (lane == nullptr) {
      continue;
    }
    const auto proj = geom::project_to_polyline(ego_pose_.position(), lane->centerline);
    const geom::Vec2 foot = lane->centerline.point_at_arc(proj.arc_length);
    corridor_gap = std::min(
      corridor_gap, geom::distance(ego_pose_.position(), foot) - lane->lane_width);
  }
  if (corridor_gap > 0.0) {
    info.out_of_road = true;
  }
  const geom::Vec2 motion = ego_pose_.position() - prev_position;
  if (!info.out_of_road && std::hypot(motion.x, motion.y) > 1e-12) {
    for (const auto & boundary : scenario_.map().boundaries) {
      const auto & pts = boundary.points();
      for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const auto hit =
          geom::ray_segment_intersection(prev_position, motion, pts[i], pts[i + 1]);
        if (hit && *hit <= 1.0) {
          info.out_of_road = true;
          break;
        }
      }
      if (info.out_of_road) {
        break;
      }
    }
  }

  if (!info.crashed) {
    info.arrived =
      geom::distance(ego_pose_.position(), scenario_.destination()) <= kArrivalRadius;
  }

  const double new_arc =
    geom::project_to_polyline(ego_pose_.position(), scenario_.route_polyline()).arc_length;
  info.progress = new_arc - route_arc_;
  route_arc_ = new_arc;

  info.truncated = frame_ >= scenario_.horizon_steps() - 1 && !info.crashed &&
                   !info.out_of_road && !info.arrived;
  done_ = info.crashed || info.out_of_road || info.arrived || info.truncated;

  StepResult result;
  result.reward = info.progress - rewards_.eta_crash * (info.crashed ? 1.0 : 0.0) -
                  rewards_.out_of_road_penalty * (info.out_of_road ? 1.0 : 0.0);
  result.done = done_;
  result.info = info;
  result.observation = observation();
  return result;
}

VehicleState Simulator::ego_state() const
{
  check_started();
  return {ego_pose_, ego_speed_, true};
}

VehicleState Simulator::vehicle_state(std::size_t track_index) const
{
  check_started();
  if (track_index >= scenario_.tracks().size()) {
    fail(ErrorCode::argument, "Simulator: track index out of range");
  }
  if (track_index == scenario_.ego_index()) {
    return ego_state();
  }
  const auto & states = scenario_.tracks()[track_index].states;
  // Recordings shorter than the episode hold their final state.
  const std::size_t idx = std::min(static_cast<std::size_t>(frame_), states.size() - 1);
  return states[idx];
}

double Simulator::remaining_route() const
{
  check_started();
  return scenario_.route_polyline().length() - start_arc_;
}

std::vector<double> Simulator::observation() const
{
  check_started();
  std::vector<double> obs(kObservationDim, 0.0);
  obs[0] = std::clamp(ego_speed_ / kSpeedNorm, -1.0, 1.0);

  const auto & route = scenario_.route_polyline();
  obs[1] = geom::normalize_angle(ego_pose_.heading - route.heading_at_arc(route_arc_)) /
           std::numbers::pi;
  obs[2] = last_action_.steer;
  obs[3] = last_action_.accel;

  // Next and next-next checkpoints ahead of the current arc; the route end
  // serves as the final checkpoint once the grid is exhausted.
  auto it = std::upper_bound(checkpoint_arcs_.begin(), checkpoint_arcs_.end(), route_arc_);
  if (it == checkpoint_arcs_.end()) {
    --it;
  }
  const double cp1 = *it;
  const double cp2 = (it + 1 != checkpoint_arcs_.end()) ? *(it + 1) : cp1;
  const geom::Vec2 eye = ego_pose_.position();
  int slot = 4;
  for (const double arc : {cp1, cp2}) {
    const geom::Vec2 target = route.point_at_arc(arc);
    obs[static_cast<std::size_t>(slot)] =
      std::clamp(geom::distance(eye, target) / kLidarRadius, 0.0, 1.0);
    obs[static_cast<std::size_t>(slot + 1)] =
      geom::normalize_angle(
        std::atan2(target.y - eye.y, target.x - eye.x) - ego_pose_.heading) /
      std::numbers::pi;
    slot += 2;
  }

  const auto ranges = lidar_scan(ego_pose_, current_obstacles(), scenario_.map().boundaries);
  std::copy(ranges.begin(), ranges.end(), obs.begin() + 8);
  return obs;
}

void Simulator::check_started() const
{
  if (!started_) {
    fail(ErrorCode::state, "Simulator: call reset() first");
  }
}

std::vector<LidarObstacle> Simulator::current_obstacles() const
{
  std::vector<LidarObstacle> obstacles;
  for (std::size_t t = 0; t < scenario_.tracks().size(); ++t) {
    if (t == scenario_.ego_index()) {
      continue;
    }
    const VehicleState state = vehicle_state(t);
    if (!state.valid) {
      continue;
    }
    obstacles.push_back({state.pose, scenario_.tracks()[t].size()});
  }
  return obstacles;
}

}  // namespace advsim::sim
