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

#ifndef ADVSIM_SIMULATOR_HPP_
#define ADVSIM_SIMULATOR_HPP_

#include <span>
#include <vector>

#include "advsim/geometry.hpp"
#include "advsim/scenario.hpp"

namespace advsim::sim
{

inline constexpr int kLidarRays = 72;
inline constexpr int kObservationDim = 8 + kLidarRays;
inline constexpr double kLidarRadius = 50.0;
inline constexpr double kSpeedNorm = 30.0;
inline constexpr double kCheckpointSpacing = 10.0;
inline constexpr double kArrivalRadius = 5.0;

/// Control ranges of the ego vehicle. The two action channels map to
/// steer_max * a1 radians of wheel angle and accel_max * max(0, a2) or
/// brake_max * max(0, -a2) of longitudinal acceleration.
struct VehicleLimits
{
  double steer_max = 0.6;
  double accel_max = 4.0;
  double brake_max = 8.0;
  double wheelbase = 2.8;
};

struct RewardConfig
{
  double eta_crash = 1.0;
  double out_of_road_penalty = 10.0;
};

/// Normalized control input; both channels clamp to [-1, 1] on entry.
struct Action
{
  double steer = 0.0;
  double accel = 0.0;
};

struct StepInfo
{
  bool crashed = false;
  bool out_of_road = false;
  bool arrived = false;
  bool truncated = false;
  int crashed_with = -1;  // track index hit this step, -1 when none
  int frame = 0;          // frame index just reached
  double progress = 0.0;  // route arc gained this step, meters
};

struct StepResult
{
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// How the ego moves: integrated from actions, or replayed from its logged
/// track (rewards and termination are evaluated identically in both).
enum class EgoMode
{
  policy,
  replay,
};

struct LidarObstacle
{
  geom::Pose2 pose;
  geom::BoxSize size;
};

/// Ranges of kLidarRays rays cast from `origin` at angles
/// origin.heading + 2*pi*i/kLidarRays, normalized by kLidarRadius and capped
/// at 1. Obstacle box edges and boundary polylines both reflect.
std::vector<double> lidar_scan(
  const geom::Pose2 & origin, std::span<const LidarObstacle> obstacles,
  std::span<const geom::Polyline> boundaries);

/// Outcome of one episode. The trajectory always spans the full prediction
/// window (future_steps states); episodes that end early repeat their final
/// state so buffered rollouts stay aligned with predicted candidates.
struct EpisodeResult
{
  double route_completion = 0.0;  // [0, 1]
  bool crashed = false;
  bool out_of_road = false;
  bool arrived = false;
  int crash_partner = -1;  // track index hit, -1 when no crash
  int steps = 0;
  double episode_return = 0.0;
  std::vector<VehicleState> trajectory;
  double log_prob_sum = 0.0;
};

/// Episodic driving environment over one scenario: the ego is controlled (or
/// replayed), every other vehicle replays its recorded track. The episode
/// starts at the history cutoff and ends on crash, leaving the road,
/// reaching the destination, or exhausting the recorded horizon.
class Simulator
{
public:
  explicit Simulator(
    Scenario scenario, VehicleLimits limits = {}, RewardConfig rewards = {},
    EgoMode mode = EgoMode::policy);

  std::vector<double> reset();

  /// Advances one frame. Throws after the episode is done.
  StepResult step(Action a);

  bool done() const { return done_; }
  bool started() const { return started_; }
  int frame() const { return frame_; }
  int steps_taken() const { return steps_; }
  const Scenario & scenario() const { return scenario_; }
  EgoMode mode() const { return mode_; }
  const VehicleLimits & limits() const { return limits_; }

  /// Current ego state (pose, speed).
  VehicleState ego_state() const;
  /// Recorded state of any track at the current frame; holds the last frame
  /// when the recording is shorter.
  VehicleState vehicle_state(std::size_t track_index) const;

  /// Ego projection onto the route, in arc meters.
  double route_arc() const { return route_arc_; }
  /// Arc at reset; progress and completion are measured from here.
  double start_arc() const { return start_arc_; }
  /// Route meters ahead of the reset position.
  double remaining_route() const;

  /// Observation of the current state (same vector step() returns).
  std::vector<double> observation() const;

private:
  void check_started() const;
  std::vector<LidarObstacle> current_obstacles() const;

  Scenario scenario_;
  VehicleLimits limits_;
  RewardConfig rewards_;
  EgoMode mode_;

  std::vector<double> checkpoint_arcs_;

  bool started_ = false;
  bool done_ = false;
  int frame_ = 0;
  int steps_ = 0;
  geom::Pose2 ego_pose_;
  double ego_speed_ = 0.0;
  Action last_action_;
  double route_arc_ = 0.0;
  double start_arc_ = 0.0;
};

}  // namespace advsim::sim

#endif  // ADVSIM_SIMULATOR_HPP_
