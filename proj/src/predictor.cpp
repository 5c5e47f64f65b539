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

#include "advsim/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <utility>

#include "advsim/errors.hpp"
#include "json_util.hpp"

namespace advsim::pred
{

namespace
{

using geom::Polyline;
using geom::Vec2;

struct CurrentState
{
  Vec2 position;
  double heading = 0.0;
  double speed = 0.0;
};

CurrentState current_state(const HistoryView & x, const std::string & vehicle_id)
{
  const auto history = x.states(vehicle_id);
  int valid = 0;
  const VehicleState * last = nullptr;
  for (const VehicleState & s : history) {
    if (s.valid) {
      ++valid;
      last = &s;
    }
  }
  if (valid < 2) {
    fail(
      ErrorCode::argument,
      "predictor: vehicle '" + vehicle_id + "' has fewer than 2 valid history states");
  }
  return {last->pose.position(), last->pose.heading, last->speed};
}

// One drivable run of lanes starting at a lane the vehicle is attached to.
struct Chain
{
  Polyline line;
  double start_arc = 0.0;  // vehicle projection onto the chain
  std::vector<std::string> lane_ids;
  // Arc where each lane of the chain begins, aligned with lane_ids.
  std::vector<double> lane_starts;

  const std::string & lane_at(double arc) const
  {
    std::size_t i = lane_starts.size() - 1;
    while (i > 0 && lane_starts[i] > arc) {
      --i;
    }
    return lane_ids[i];
  }
};

Polyline concatenate(const std::vector<const LaneSegment *> & lanes)
{
  std::vector<Vec2> pts;
  for (const LaneSegment * lane : lanes) {
    for (const Vec2 & p : lane->centerline.points()) {
      if (!pts.empty() && geom::distance(pts.back(), p) <= 1e-9) {
        continue;
      }
      pts.push_back(p);
    }
  }
  return Polyline(std::move(pts));
}

// Enumerates maximal successor runs from every attached lane. Lane graphs
// here are small, so full path enumeration (bounded by total arc) is cheap.
std::vector<Chain> attached_chains(
  const TrafficMap & map, const CurrentState & now, const PredictorConfig & cfg,
  double reach)
{
  std::vector<Chain> chains;
  for (const LaneSegment & root : map.lanes) {
    const auto proj = geom::project_to_polyline(now.position, root.centerline);
    // Full distance to the projected point, not the perpendicular component
    // alone: projections clamped to a lane end otherwise under-report how
    // far past the lane the vehicle is.
    const Vec2 foot = root.centerline.point_at_arc(proj.arc_length);
    if (geom::distance(now.position, foot) > cfg.attach_lateral) {
      continue;
    }
    const double lane_heading = root.centerline.heading_at_arc(proj.arc_length);
    if (
      std::abs(geom::normalize_angle(lane_heading - now.heading)) >
      cfg.attach_heading) {
      continue;
    }
    // Depth-first enumeration of lane runs, successor order preserved.
    struct Frame
    {
      std::vector<const LaneSegment *> lanes;
      double total = 0.0;
    };
    std::vector<Frame> stack{{{&root}, root.centerline.length()}};
    while (!stack.empty()) {
      Frame frame = std::move(stack.back());
      stack.pop_back();
      const LaneSegment * tail = frame.lanes.back();
      bool extended = false;
      if (frame.total - proj.arc_length < reach + 30.0) {
        // Push successors in reverse so the first successor is explored
        // first; skips lanes already in this run to stay cycle-safe.
        for (auto it = tail->successors.rbegin(); it != tail->successors.rend();
             ++it) {
          const LaneSegment * next = map.find_lane(*it);
          if (next == nullptr) {
            continue;
          }
          if (
            std::find(frame.lanes.begin(), frame.lanes.end(), next) !=
            frame.lanes.end()) {
            continue;
          }
          Frame longer = frame;
          longer.lanes.push_back(next);
          longer.total += next->centerline.length();
          stack.push_back(std::move(longer));
          extended = true;
        }
      }
      if (extended) {
        continue;
      }
      Chain chain{concatenate(frame.lanes), proj.arc_length, {}, {}};
      double offset = 0.0;
      for (const LaneSegment * lane : frame.lanes) {
        chain.lane_ids.push_back(lane->id);
        chain.lane_starts.push_back(offset);
        offset += lane->centerline.length();
      }
      chains.push_back(std::move(chain));
    }
  }
  return chains;
}

struct PlannedGoal
{
  GoalProposal goal;
  // Chain the goal lies on; npos marks off-lane ballistic goals.
  std::size_t chain = std::string::npos;
};

double goal_score(
  const CurrentState & now, const Vec2 & point, double goal_heading,
  double arc_ahead, double horizon_s, const PredictorConfig & cfg)
{
  const Vec2 offset = point - now.position;
  const Vec2 left{-std::sin(now.heading), std::cos(now.heading)};
  const double lateral = std::abs(geom::dot(left, offset));
  const double heading_gap =
    std::abs(geom::normalize_angle(goal_heading - now.heading));
  const double speed_gap = std::abs(arc_ahead / horizon_s - now.speed);
  return -(
    cfg.weight_heading * heading_gap + cfg.weight_lateral * lateral +
    cfg.weight_speed * speed_gap);
}

std::vector<PlannedGoal> plan_goals(
  const HistoryView & x, const std::string & vehicle_id, double horizon_s,
  const PredictorConfig & cfg, std::vector<Chain> * chains_out)
{
  if (horizon_s <= 0.0) {
    fail(ErrorCode::argument, "predictor: horizon must be positive");
  }
  const CurrentState now = current_state(x, vehicle_id);
  const double reach =
    now.speed * horizon_s + 0.5 * 6.0 * horizon_s * horizon_s;

  std::vector<Chain> chains = attached_chains(x.map(), now, cfg, reach);
  std::vector<PlannedGoal> planned;

  // Stop-where-you-are is always one of the hypotheses.
  {
    PlannedGoal stay;
    stay.goal.point = now.position;
    stay.goal.heading = now.heading;
    stay.goal.arc_ahead = 0.0;
    stay.goal.score =
      goal_score(now, now.position, now.heading, 0.0, horizon_s, cfg);
    if (!chains.empty()) {
      stay.chain = 0;
      stay.goal.lane_id = chains[0].lane_at(chains[0].start_arc);
    }
    planned.push_back(std::move(stay));
  }

  if (chains.empty()) {
    // Off-lane: straight-ahead goals at the regular spacing.
    const Vec2 dir{std::cos(now.heading), std::sin(now.heading)};
    for (double a = cfg.goal_spacing; a <= reach; a += cfg.goal_spacing) {
      PlannedGoal g;
      g.goal.point = now.position + a * dir;
      g.goal.heading = now.heading;
      g.goal.arc_ahead = a;
      g.goal.score =
        goal_score(now, g.goal.point, now.heading, a, horizon_s, cfg);
      planned.push_back(std::move(g));
    }
  } else {
    // Goals march along every chain; near-duplicate points (shared chain
    // prefixes before a fork, or one chain being a suffix of another) are
    // merged. The threshold stays below the 3.5 m lane spacing so goals on
    // parallel lanes remain distinct.
    std::vector<Vec2> seen{planned[0].goal.point};
    const auto is_new = [&seen](const Vec2 & p) {
      for (const Vec2 & q : seen) {
        if (geom::distance(p, q) < 2.0) {
          return false;
        }
      }
      seen.push_back(p);
      return true;
    };
    for (std::size_t c = 0; c < chains.size(); ++c) {
      const Chain & chain = chains[c];
      const double limit =
        std::min(chain.start_arc + reach, chain.line.length());
      for (double a = chain.start_arc + cfg.goal_spacing; a <= limit;
           a += cfg.goal_spacing) {
        const Vec2 p = chain.line.point_at_arc(a);
        if (!is_new(p)) {
          continue;
        }
        PlannedGoal g;
        g.chain = c;
        g.goal.point = p;
        g.goal.heading = chain.line.heading_at_arc(a);
        g.goal.arc_ahead = a - chain.start_arc;
        g.goal.lane_id = chain.lane_at(a);
        g.goal.score =
          goal_score(now, p, g.goal.heading, g.goal.arc_ahead, horizon_s, cfg);
        planned.push_back(std::move(g));
      }
      // The chain end is a destination of its own when within reach.
      if (chain.line.length() - chain.start_arc <= reach) {
        const double a = chain.line.length();
        const Vec2 p = chain.line.point_at_arc(a);
        if (is_new(p)) {
          PlannedGoal g;
          g.chain = c;
          g.goal.point = p;
          g.goal.heading = chain.line.heading_at_arc(a);
          g.goal.arc_ahead = a - chain.start_arc;
          g.goal.lane_id = chain.lane_at(a);
          g.goal.score =
            goal_score(now, p, g.goal.heading, g.goal.arc_ahead, horizon_s, cfg);
          planned.push_back(std::move(g));
        }
      }
    }
  }

  std::stable_sort(
    planned.begin(), planned.end(),
    [](const PlannedGoal & a, const PlannedGoal & b) {
      return a.goal.score > b.goal.score;
    });
  if (chains_out != nullptr) {
    *chains_out = std::move(chains);
  }
  return planned;
}

// The geometric route one candidate drives: a smooth pull-in from the
// vehicle pose onto the chain, the chain itself, and a straight run-out so
// speed profiles never hit a hard path end.
Polyline build_drive_path(
  const CurrentState & now, const Chain * chain, double reach)
{
  const Vec2 dir{std::cos(now.heading), std::sin(now.heading)};
  // Long enough that even the fastest speed-perturbed rollout never reaches
  // the path end.
  const double slack = 1.5 * reach + 60.0;
  std::vector<Vec2> pts;
  if (chain == nullptr) {
    pts = {now.position, now.position + slack * dir};
    return Polyline(std::move(pts));
  }

  // The merge distance grows with speed so the pull-in stays drivable: its
  // peak curvature falls quadratically with the distance while the braking
  // room ahead of the peak grows, which keeps the speed ceiling above the
  // logged entry speed even for the full 8 m lateral attachment range.
  const double desired = std::max(4.0, 2.6 * now.speed);
  const double remaining = chain->line.length() - chain->start_arc;
  const double lateral = geom::distance(
    now.position, chain->line.point_at_arc(chain->start_arc));
  if (remaining < 3.0 || (lateral > 1.0 && remaining < desired)) {
    // The chain ends before a drivable pull-in fits; keep the heading.
    pts = {now.position, now.position + slack * dir};
    return Polyline(std::move(pts));
  }
  const double merge_arc = std::min(
    chain->start_arc + desired, chain->line.length());
  const Vec2 q = chain->line.point_at_arc(merge_arc);
  const double qh = chain->line.heading_at_arc(merge_arc);
  const Vec2 qd{std::cos(qh), std::sin(qh)};
  const double pull =
    std::clamp(0.35 * geom::distance(now.position, q), 1.5, 12.0);
  const std::vector<Vec2> ctrl{
    now.position, now.position + pull * dir, q - pull * qd, q};
  const std::size_t samples = std::max<std::size_t>(
    8, static_cast<std::size_t>(std::ceil(geom::distance(now.position, q) / 0.5)));
  const Polyline approach = geom::bezier_fit(ctrl, samples);

  const auto approach_pts = approach.points();
  pts.assign(approach_pts.begin(), approach_pts.end());
  for (std::size_t i = 0; i < chain->line.points().size(); ++i) {
    if (chain->line.arc_at_vertex(i) <= merge_arc + 1e-6) {
      continue;
    }
    const Vec2 p = chain->line.points()[i];
    if (geom::distance(pts.back(), p) <= 1e-9) {
      continue;
    }
    pts.push_back(p);
  }
  // Straight run-out along the final tangent.
  const Vec2 a = pts[pts.size() - 2];
  const Vec2 b = pts.back();
  const Vec2 t = (1.0 / geom::distance(a, b)) * (b - a);
  pts.push_back(b + slack * t);
  return Polyline(std::move(pts));
}

// Arc-indexed view of a drive path. Headings are unwrapped and smoothed
// over a short window so they turn at the underlying curvature rate instead
// of jumping at polyline vertices; the feasibility cap on curvature times
// squared speed is then meaningful at any stride. The speed ceiling has
// braking distance propagated backwards so honoring it never needs more
// than 5 m/s^2 of deceleration.
class PathProfile
{
public:
  explicit PathProfile(Polyline path, double curve_budget)
  : path_(std::move(path))
  {
    const std::size_t n =
      static_cast<std::size_t>(std::ceil(path_.length() / kGrid)) + 2;
    heading_.resize(n);
    heading_[0] = path_.heading_at_arc(0.0);
    for (std::size_t i = 1; i < n; ++i) {
      const double raw = path_.heading_at_arc(i * kGrid);
      heading_[i] =
        heading_[i - 1] + geom::normalize_angle(raw - heading_[i - 1]);
    }
    std::vector<double> smooth(n);
    constexpr int kHalf = 4;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = i > kHalf ? i - kHalf : 0;
      const std::size_t hi = std::min(i + kHalf, n - 1);
      double acc = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) {
        acc += heading_[j];
      }
      smooth[i] = acc / static_cast<double>(hi - lo + 1);
    }
    heading_ = std::move(smooth);

    vlim_.assign(n, 40.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double kappa = std::abs(heading_[i + 1] - heading_[i]) / kGrid;
      if (kappa > 1e-6) {
        vlim_[i] = std::min(vlim_[i], std::sqrt(curve_budget / kappa));
      }
    }
    for (std::size_t i = n - 1; i-- > 0;) {
      vlim_[i] = std::min(
        vlim_[i], std::sqrt(vlim_[i + 1] * vlim_[i + 1] + 2.0 * 5.0 * kGrid));
    }
  }

  Vec2 point_at(double s) const { return path_.point_at_arc(s); }

  double heading_at(double s) const
  {
    const double cell = std::clamp(
      s / kGrid, 0.0, static_cast<double>(heading_.size() - 1));
    const std::size_t i =
      std::min(static_cast<std::size_t>(cell), heading_.size() - 2);
    const double t = cell - static_cast<double>(i);
    return geom::normalize_angle(
      heading_[i] + t * (heading_[i + 1] - heading_[i]));
  }

  double vlim_at(double s) const
  {
    const std::size_t i = std::min(
      static_cast<std::size_t>(std::max(s, 0.0) / kGrid), vlim_.size() - 1);
    return vlim_[i];
  }

private:
  static constexpr double kGrid = 0.5;
  Polyline path_;
  std::vector<double> heading_;
  std::vector<double> vlim_;
};

std::vector<VehicleState> roll_profile(
  const CurrentState & now, const PathProfile & profile, double v_target,
  int steps, double dt, double accel_limit)
{
  std::vector<VehicleState> states;
  states.reserve(steps);
  double s = 0.0;
  double v = now.speed;
  for (int k = 0; k < steps; ++k) {
    // The ceiling is scanned over the arc the next two steps can cover, so
    // the speed chosen now is already legal where it will be used; clamping
    // against the current cell alone lets braking ramps lag one step behind.
    double v_allow = std::min(v_target, profile.vlim_at(s));
    for (double u = 0.5; u <= 2.0 * v * dt + 0.2; u += 0.5) {
      v_allow = std::min(v_allow, profile.vlim_at(s + u));
    }
    const double a = std::clamp((v_allow - v) / dt, -accel_limit, accel_limit);
    const double v_new = std::max(0.0, v + a * dt);
    s += 0.5 * (v + v_new) * dt;
    v = v_new;
    const Vec2 p = profile.point_at(s);
    states.push_back({{p.x, p.y, profile.heading_at(s)}, v, true});
  }
  return states;
}

std::vector<double> softmax(const std::vector<double> & scores, double temperature)
{
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp((scores[i] - top) / temperature);
    sum += out[i];
  }
  for (double & p : out) {
    p /= sum;
  }
  return out;
}

}  // namespace

std::vector<GoalProposal> propose_goals(
  const HistoryView & x, const std::string & vehicle_id, double horizon_s,
  const PredictorConfig & config)
{
  std::vector<GoalProposal> out;
  for (PlannedGoal & g : plan_goals(x, vehicle_id, horizon_s, config, nullptr)) {
    out.push_back(std::move(g.goal));
  }
  return out;
}

CandidateSet generate_candidates(
  const HistoryView & x, const std::string & vehicle_id, std::size_t m,
  Rng & rng, const PredictorConfig & config)
{
  if (m < 1) {
    fail(ErrorCode::argument, "predictor: candidate count must be at least 1");
  }
  const double horizon_s = x.future_steps() * x.dt();
  const CurrentState now = current_state(x, vehicle_id);
  std::vector<Chain> chains;
  const std::vector<PlannedGoal> goals =
    plan_goals(x, vehicle_id, horizon_s, config, &chains);

  const double reach =
    now.speed * horizon_s + 0.5 * 6.0 * horizon_s * horizon_s;

  // Profiles are shared by every candidate of the same chain.
  std::vector<std::optional<PathProfile>> cache(chains.size() + 1);
  const auto profile_for = [&](std::size_t chain_index) -> const PathProfile & {
    const std::size_t slot =
      chain_index == std::string::npos ? chains.size() : chain_index;
    if (!cache[slot].has_value()) {
      const Chain * chain =
        chain_index == std::string::npos ? nullptr : &chains[chain_index];
      cache[slot].emplace(
        build_drive_path(now, chain, reach), config.curve_speed_budget);
    }
    return *cache[slot];
  };

  // Goals are picked round-robin across chains in score order. A straight
  // continuation can outscore a whole turning branch, and pure score order
  // would then starve that branch of candidates whenever goals outnumber m.
  std::vector<std::size_t> order;
  {
    std::vector<std::vector<std::size_t>> buckets;
    std::vector<std::size_t> bucket_of(chains.size() + 1, std::string::npos);
    for (std::size_t g = 0; g < goals.size(); ++g) {
      const std::size_t slot =
        goals[g].chain == std::string::npos ? chains.size() : goals[g].chain;
      if (bucket_of[slot] == std::string::npos) {
        bucket_of[slot] = buckets.size();
        buckets.emplace_back();
      }
      buckets[bucket_of[slot]].push_back(g);
    }
    for (std::size_t round = 0; order.size() < goals.size(); ++round) {
      for (const std::vector<std::size_t> & bucket : buckets) {
        if (round < bucket.size()) {
          order.push_back(bucket[round]);
        }
      }
    }
  }

  CandidateSet set;
  std::vector<double> scores;
  for (std::size_t i = 0; i < m; ++i) {
    const PlannedGoal & goal = goals[order[i % order.size()]];
    double factor = 1.0;
    if (i >= order.size()) {
      // Shortfall: revisit goals with a perturbed speed profile.
      factor = std::clamp(
        normal_sample(rng, 1.0, config.speed_factor_sigma),
        config.speed_factor_min, config.speed_factor_max);
    }
    const PathProfile & profile = profile_for(goal.chain);
    const double v_target = factor * (goal.goal.arc_ahead / horizon_s);
    TrajectoryCandidate cand;
    cand.states = roll_profile(
      now, profile, v_target, x.future_steps(), x.dt(), config.accel_limit);
    set.candidates.push_back(std::move(cand));
    scores.push_back(goal.goal.score);
  }

  const std::vector<double> probs = softmax(scores, config.temperature);
  for (std::size_t i = 0; i < m; ++i) {
    set.candidates[i].probability = probs[i];
  }
  return set;
}

void validate_candidate_kinematics(
  const std::vector<VehicleState> & states, double dt, const std::string & label)
{
  if (states.size() < 2) {
    fail(ErrorCode::invariant, label + ": trajectory needs at least 2 states");
  }
  for (std::size_t k = 0; k < states.size(); ++k) {
    const double v = states[k].speed;
    if (!std::isfinite(v) || v < 0.0) {
      fail(
        ErrorCode::invariant,
        label + ": invalid speed at step " + std::to_string(k));
    }
    if (k + 1 < states.size()) {
      const double accel = (states[k + 1].speed - v) / dt;
      if (std::abs(accel) > 6.0 + 1e-9) {
        fail(
          ErrorCode::invariant,
          label + ": acceleration " + std::to_string(accel) + " m/s^2 at step " +
            std::to_string(k) + " exceeds 6 m/s^2");
      }
      const double ds = geom::distance(
        states[k].pose.position(), states[k + 1].pose.position());
      if (ds > 1e-6) {
        const double kappa =
          std::abs(geom::normalize_angle(
            states[k + 1].pose.heading - states[k].pose.heading)) /
          ds;
        if (kappa * v * v > 8.0 + 1e-9) {
          fail(
            ErrorCode::invariant,
            label + ": curvature times squared speed " +
              std::to_string(kappa * v * v) + " at step " + std::to_string(k) +
              " exceeds 8 m/s^2");
        }
      }
    }
  }
}

ExternalCandidates load_external_candidates(
  const std::string & path, double dt, std::size_t expected_steps)
{
  const nlohmann::json doc = jsonutil::load_json_file(path);
  ExternalCandidates out;
  out.vehicle_id = jsonutil::get_string(doc, "vehicle_id", "root");
  const nlohmann::json & arr = jsonutil::require_array(
    jsonutil::require_key(doc, "candidates", "root"), "candidates");
  if (arr.empty()) {
    fail(ErrorCode::schema, "candidates: empty candidate list");
  }

  double sum = 0.0;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "candidates[" + std::to_string(i) + "]";
    const nlohmann::json & c = arr[i];
    TrajectoryCandidate cand;
    cand.probability = jsonutil::get_number(c, "probability", where);
    if (cand.probability < 0.0) {
      fail(ErrorCode::schema, where + ".probability: negative probability");
    }
    const nlohmann::json & states = jsonutil::require_array(
      jsonutil::require_key(c, "states", where), where + ".states");
    if (states.size() != expected_steps) {
      fail(
        ErrorCode::schema,
        where + ".states: expected " + std::to_string(expected_steps) +
          " states, got " + std::to_string(states.size()));
    }
    for (std::size_t k = 0; k < states.size(); ++k) {
      const std::string at = where + ".states[" + std::to_string(k) + "]";
      const nlohmann::json & s = states[k];
      VehicleState vs;
      vs.pose.x = jsonutil::get_number(s, "x", at);
      vs.pose.y = jsonutil::get_number(s, "y", at);
      vs.pose.heading =
        geom::normalize_angle(jsonutil::get_number(s, "heading", at));
      vs.speed = jsonutil::get_number(s, "speed", at);
      vs.valid = true;
      cand.states.push_back(vs);
    }
    validate_candidate_kinematics(cand.states, dt, where);
    sum += cand.probability;
    out.set.candidates.push_back(std::move(cand));
  }

  if (std::abs(sum - 1.0) > 1e-3) {
    fail(
      ErrorCode::invariant,
      "candidates: probabilities sum to " + std::to_string(sum) +
        ", further than 1e-3 from 1");
  }
  for (TrajectoryCandidate & c : out.set.candidates) {
    c.probability /= sum;
  }
  return out;
}

void save_candidates(
  const CandidateSet & set, const std::string & vehicle_id,
  const std::string & path)
{
  nlohmann::json doc;
  doc["vehicle_id"] = vehicle_id;
  nlohmann::json arr = nlohmann::json::array();
  for (const TrajectoryCandidate & c : set.candidates) {
    nlohmann::json jc;
    jc["probability"] = c.probability;
    nlohmann::json states = nlohmann::json::array();
    for (const VehicleState & s : c.states) {
      states.push_back(
        {{"x", s.pose.x},
         {"y", s.pose.y},
         {"heading", s.pose.heading},
         {"speed", s.speed}});
    }
    jc["states"] = std::move(states);
    arr.push_back(std::move(jc));
  }
  doc["candidates"] = std::move(arr);
  jsonutil::save_json_file(doc, path);
}

}  // namespace advsim::pred
