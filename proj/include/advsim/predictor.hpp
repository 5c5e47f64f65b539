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

#ifndef ADVSIM_PREDICTOR_HPP_
#define ADVSIM_PREDICTOR_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "advsim/geometry.hpp"
#include "advsim/rng.hpp"
#include "advsim/scenario.hpp"

namespace advsim::pred
{

/// One hypothetical future for a vehicle, spanning the prediction window
/// (future_steps states). Feasible by construction when generated here:
/// per-step acceleration stays within 6 m/s^2 and curvature times squared
/// speed within 8 m/s^2.
struct TrajectoryCandidate
{
  std::vector<VehicleState> states;
  double probability = 0.0;
};

/// A full candidate set for one vehicle. Probabilities sum to 1 within 1e-9.
struct CandidateSet
{
  std::vector<TrajectoryCandidate> candidates;
};

struct GoalProposal
{
  geom::Vec2 point;
  double score = 0.0;    // higher is more plausible; finite
  double heading = 0.0;  // lane tangent at the goal, or the vehicle heading
  double arc_ahead = 0.0;  // along-path distance from the vehicle
  std::string lane_id;     // empty for off-lane ballistic goals
};

struct PredictorConfig
{
  double temperature = 1.0;
  double weight_heading = 1.0;
  double weight_lateral = 0.5;
  double weight_speed = 0.2;
  double goal_spacing = 10.0;      // meters between goals along a lane chain
  double attach_lateral = 8.0;     // max offset for lane attachment
  double attach_heading = 1.35;    // max heading misalignment, radians
  double accel_limit = 5.9;        // command clamp, under the 6 feasibility cap
  double curve_speed_budget = 7.2; // v^2 * curvature ceiling, under the 8 cap
  double speed_factor_sigma = 0.22;
  double speed_factor_min = 0.45;
  double speed_factor_max = 1.5;
};

/// Candidate destinations for `vehicle_id` reachable within `horizon_s`
/// seconds at bounded acceleration: points along attached lane chains, the
/// vehicle's own position, and straight-ahead fallbacks when no lane is
/// attached. Requires at least two valid history states.
std::vector<GoalProposal> propose_goals(
  const HistoryView & x, const std::string & vehicle_id, double horizon_s,
  const PredictorConfig & config = {});

/// Exactly m candidates over the prediction window. Probabilities are the
/// softmax of goal scores; when fewer than m goals exist, top goals are
/// duplicated with randomly perturbed speed profiles. Deterministic for a
/// given view and generator state.
CandidateSet generate_candidates(
  const HistoryView & x, const std::string & vehicle_id, std::size_t m,
  Rng & rng, const PredictorConfig & config = {});

/// Candidates produced outside this process, e.g. by a learned model.
struct ExternalCandidates
{
  std::string vehicle_id;
  CandidateSet set;
};

/// Reads { vehicle_id, candidates: [ { probability, states: [...] } ] }.
/// Each trajectory must span expected_steps states and stay kinematically
/// feasible at time step dt; probabilities off by at most 1e-3 from unit sum
/// are renormalized, larger deviations are an error.
ExternalCandidates load_external_candidates(
  const std::string & path, double dt, std::size_t expected_steps);

void save_candidates(
  const CandidateSet & set, const std::string & vehicle_id,
  const std::string & path);

/// Throws when a trajectory breaks the feasibility invariants. `label` names
/// the candidate in error messages.
void validate_candidate_kinematics(
  const std::vector<VehicleState> & states, double dt,
  const std::string & label);

}  // namespace advsim::pred

#endif  // ADVSIM_PREDICTOR_HPP_
