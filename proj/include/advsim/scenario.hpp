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

#ifndef ADVSIM_SCENARIO_HPP_
#define ADVSIM_SCENARIO_HPP_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advsim/geometry.hpp"
#include "json.hpp"

namespace advsim
{

/// One recorded frame of a vehicle. `valid` is false where the log has no
/// observation for this vehicle; invalid frames are skipped by collision
/// checks and by the sensor model.
struct VehicleState
{
  geom::Pose2 pose;
  double speed = 0.0;
  bool valid = true;
};

struct Track
{
  std::string id;
  double length = 0.0;
  double width = 0.0;
  std::vector<VehicleState> states;

  geom::BoxSize size() const { return {length, width}; }
  geom::OrientedBox box_at(std::size_t step) const
  {
    return {states[step].pose, length, width};
  }
};

struct LaneSegment
{
  std::string id;
  geom::Polyline centerline;
  double lane_width = 3.5;  // meters, validated into [2.5, 6]
  std::vector<std::string> successors;
};

struct TrafficMap
{
  std::vector<LaneSegment> lanes;
  std::vector<geom::Polyline> boundaries;

  const LaneSegment * find_lane(std::string_view id) const;
};

class HistoryView;

/// Immutable logged scene: map, one track per vehicle covering
/// `horizon_steps` frames at `dt`, the ego's route and destination, and the
/// designated adversary. Unknown JSON keys survive a load/save round trip.
class Scenario
{
public:
  struct Data
  {
    double dt = 0.1;
    int horizon_steps = 91;
    int history_steps = 11;
    TrafficMap map;
    std::vector<Track> tracks;
    std::string ego_id;
    std::string adversary_id;
    std::vector<std::string> ego_route;
    geom::Vec2 destination;
  };

  explicit Scenario(Data data);

  static Scenario from_json(const nlohmann::json & j);
  static Scenario load_file(const std::string & path);
  nlohmann::json to_json() const;
  void save_file(const std::string & path) const;

  double dt() const { return data_.dt; }
  int horizon_steps() const { return data_.horizon_steps; }
  int history_steps() const { return data_.history_steps; }
  int future_steps() const { return data_.horizon_steps - data_.history_steps; }
  const TrafficMap & map() const { return data_.map; }
  std::span<const Track> tracks() const { return data_.tracks; }
  const std::string & ego_id() const { return data_.ego_id; }
  const std::string & adversary_id() const { return data_.adversary_id; }
  std::span<const std::string> ego_route() const { return data_.ego_route; }
  geom::Vec2 destination() const { return data_.destination; }

  const Track * find_track(std::string_view id) const;
  std::size_t track_index(std::string_view id) const;
  const Track & ego_track() const { return data_.tracks[ego_index_]; }
  const Track & adversary_track() const { return data_.tracks[adversary_index_]; }
  std::size_t ego_index() const { return ego_index_; }
  std::size_t adversary_index() const { return adversary_index_; }

  /// Concatenated centerline of the ego route lanes.
  const geom::Polyline & route_polyline() const { return *route_; }

  HistoryView history() const;

private:
  friend class AdversarialScenario;

  Data data_;
  std::size_t ego_index_ = 0;
  std::size_t adversary_index_ = 0;
  std::optional<geom::Polyline> route_;
  // Original document when loaded from JSON; known fields are patched back
  // on save so unrecognized keys are preserved.
  std::optional<nlohmann::json> raw_;
};

/// Read-only window over the first `history_steps` frames of a scenario. The
/// accessors never expose indices at or past the cutoff.
class HistoryView
{
public:
  explicit HistoryView(const Scenario & scenario) : scenario_(&scenario) {}

  const TrafficMap & map() const { return scenario_->map(); }
  double dt() const { return scenario_->dt(); }
  int history_steps() const { return scenario_->history_steps(); }
  int future_steps() const { return scenario_->future_steps(); }
  const std::string & ego_id() const { return scenario_->ego_id(); }
  const std::string & adversary_id() const { return scenario_->adversary_id(); }
  std::span<const std::string> ego_route() const { return scenario_->ego_route(); }
  geom::Vec2 destination() const { return scenario_->destination(); }
  const geom::Polyline & route_polyline() const { return scenario_->route_polyline(); }

  std::size_t track_count() const { return scenario_->tracks().size(); }
  const std::string & track_id(std::size_t i) const { return scenario_->tracks()[i].id; }
  geom::BoxSize track_size(std::size_t i) const { return scenario_->tracks()[i].size(); }
  geom::BoxSize track_size(std::string_view id) const;

  /// History frames of one vehicle, truncated at the cutoff.
  std::span<const VehicleState> states(std::string_view id) const;
  std::span<const VehicleState> states(std::size_t track_index) const;

private:
  const Scenario * scenario_;
};

/// Same operation as Scenario::history(); kept as a free function for
/// callers that prefer the verb form.
inline HistoryView slice_history(const Scenario & s) { return s.history(); }

/// A scenario with the adversary's future replaced. The base scenario is
/// kept verbatim; `scenario()` is the spliced result whose adversary track
/// is logged history ++ override.
class AdversarialScenario
{
public:
  AdversarialScenario(Scenario base, std::vector<VehicleState> override_future);

  const Scenario & base() const { return base_; }
  std::span<const VehicleState> override_future() const { return override_; }
  /// Spliced scenario, usable anywhere a Scenario is.
  const Scenario & scenario() const { return merged_; }

  nlohmann::json to_json() const { return merged_.to_json(); }
  void save_file(const std::string & path) const { merged_.save_file(path); }

private:
  Scenario base_;
  std::vector<VehicleState> override_;
  Scenario merged_;
};

/// Splices `future` onto the adversary's logged history. Requires exactly
/// horizon - history states and continuity at the cutoff: the first override
/// state may deviate at most 0.5 m from the constant-velocity extrapolation
/// of the last logged state. That allows normal motion at any speed while
/// rejecting teleports.
AdversarialScenario apply_adversary(
  const Scenario & base, std::span<const VehicleState> future);

}  // namespace advsim

#endif  // ADVSIM_SCENARIO_HPP_
