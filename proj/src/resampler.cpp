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

#include "advsim/resampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "advsim/errors.hpp"
#include "json_util.hpp"

namespace advsim::resample
{

namespace
{

using geom::Pose2;

// Invalid states are parked far apart so they can never overlap anything.
std::vector<Pose2> collision_poses(std::span<const VehicleState> states, double offset)
{
  std::vector<Pose2> poses;
  poses.reserve(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (states[k].valid) {
      poses.push_back(states[k].pose);
    } else {
      poses.push_back({1e9 + offset, 1e9 + 1e3 * static_cast<double>(k), 0.0});
    }
  }
  return poses;
}

std::optional<std::size_t> earliest_step(
  std::span<const VehicleState> ego, geom::BoxSize ego_dims,
  std::span<const VehicleState> op, geom::BoxSize op_dims)
{
  const std::vector<Pose2> ego_poses = collision_poses(ego, 0.0);
  const std::vector<Pose2> op_poses = collision_poses(op, 1e8);
  return geom::earliest_collision_step(ego_poses, ego_dims, op_poses, op_dims);
}

double closest_center_approach(
  std::span<const VehicleState> a, std::span<const VehicleState> b)
{
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t k = 0; k < n; ++k) {
    if (!a[k].valid || !b[k].valid) {
      continue;
    }
    best = std::min(
      best, geom::distance(a[k].pose.position(), b[k].pose.position()));
  }
  return best;
}

int earliest_collision_over_buffer(const PosteriorScore & score)
{
  int best = std::numeric_limits<int>::max();
  for (const CollisionTerm & term : score.per_ego) {
    if (term.step >= 0) {
      best = std::min(best, term.step);
    }
  }
  return best;
}

}  // namespace

EgoRolloutBuffer::EgoRolloutBuffer(std::size_t capacity) : capacity_(capacity)
{
  if (capacity < 1) {
    fail(ErrorCode::argument, "ego rollout buffer capacity must be at least 1");
  }
}

void EgoRolloutBuffer::push(
  std::vector<VehicleState> trajectory, double log_prob_sum)
{
  if (trajectory.empty()) {
    fail(ErrorCode::argument, "ego rollout buffer rejects empty trajectories");
  }
  if (!trajectories_.empty() && trajectory.size() != trajectories_[0].size()) {
    fail(
      ErrorCode::argument,
      "ego rollout of " + std::to_string(trajectory.size()) +
        " states does not match the buffered window of " +
        std::to_string(trajectories_[0].size()));
  }
  if (!std::isfinite(log_prob_sum)) {
    fail(ErrorCode::argument, "ego rollout log-probability must be finite");
  }
  trajectories_.push_back(std::move(trajectory));
  log_prob_sums_.push_back(log_prob_sum);
  if (trajectories_.size() > capacity_) {
    trajectories_.erase(trajectories_.begin());
    log_prob_sums_.erase(log_prob_sums_.begin());
  }
}

std::vector<double> EgoRolloutBuffer::weights() const
{
  std::vector<double> w(log_prob_sums_.size());
  if (w.empty()) {
    return w;
  }
  const double top =
    *std::max_element(log_prob_sums_.begin(), log_prob_sums_.end());
  double sum = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j] = std::exp(log_prob_sums_[j] - top);
    sum += w[j];
  }
  for (double & x : w) {
    x /= sum;
  }
  return w;
}

nlohmann::json EgoRolloutBuffer::to_json() const
{
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t j = 0; j < trajectories_.size(); ++j) {
    nlohmann::json states = nlohmann::json::array();
    for (const VehicleState & s : trajectories_[j]) {
      states.push_back(
        {{"x", s.pose.x},
         {"y", s.pose.y},
         {"heading", s.pose.heading},
         {"speed", s.speed}});
    }
    entries.push_back(
      {{"log_prob_sum", log_prob_sums_[j]}, {"states", std::move(states)}});
  }
  return {{"capacity", capacity_}, {"entries", std::move(entries)}};
}

EgoRolloutBuffer EgoRolloutBuffer::from_json(const nlohmann::json & j)
{
  EgoRolloutBuffer buf(
    static_cast<std::size_t>(jsonutil::get_int(j, "capacity", "buffer")));
  const nlohmann::json & entries = jsonutil::require_array(
    jsonutil::require_key(j, "entries", "buffer"), "buffer.entries");
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const std::string where = "buffer.entries[" + std::to_string(e) + "]";
    const nlohmann::json & entry = entries[e];
    std::vector<VehicleState> traj;
    const nlohmann::json & states = jsonutil::require_array(
      jsonutil::require_key(entry, "states", where), where + ".states");
    for (std::size_t k = 0; k < states.size(); ++k) {
      const std::string at = where + ".states[" + std::to_string(k) + "]";
      VehicleState s;
      s.pose.x = jsonutil::get_number(states[k], "x", at);
      s.pose.y = jsonutil::get_number(states[k], "y", at);
      s.pose.heading = jsonutil::get_number(states[k], "heading", at);
      s.speed = jsonutil::get_number(states[k], "speed", at);
      s.valid = true;
      traj.push_back(s);
    }
    buf.push(std::move(traj), jsonutil::get_number(entry, "log_prob_sum", where));
  }
  return buf;
}

double collision_likelihood(
  std::span<const VehicleState> ego, geom::BoxSize ego_dims,
  std::span<const VehicleState> op, geom::BoxSize op_dims,
  const DecayConfig & decay)
{
  if (!(decay.alpha > 0.0 && decay.alpha <= 1.0)) {
    fail(ErrorCode::argument, "collision decay alpha must be in (0, 1]");
  }
  if (ego.size() != op.size()) {
    fail(
      ErrorCode::argument,
      "collision likelihood needs aligned horizons, got " +
        std::to_string(ego.size()) + " vs " + std::to_string(op.size()));
  }
  const auto step = earliest_step(ego, ego_dims, op, op_dims);
  if (!step.has_value()) {
    return 0.0;
  }
  return std::pow(decay.alpha, static_cast<double>(*step));
}

std::vector<PosteriorScore> posterior_scores(
  const pred::CandidateSet & candidates, const EgoRolloutBuffer & buffer,
  geom::BoxSize ego_dims, geom::BoxSize op_dims, const DecayConfig & decay)
{
  if (!(decay.alpha > 0.0 && decay.alpha <= 1.0)) {
    fail(ErrorCode::argument, "collision decay alpha must be in (0, 1]");
  }
  if (buffer.empty()) {
    fail(
      ErrorCode::argument,
      "posterior scoring needs a non-empty ego buffer; seed it with the "
      "logged ego trajectory first");
  }
  if (candidates.candidates.empty()) {
    fail(ErrorCode::argument, "posterior scoring needs at least one candidate");
  }
  const std::size_t window = buffer.trajectory(0).size();
  const std::vector<double> weights = buffer.weights();

  std::vector<PosteriorScore> scores;
  scores.reserve(candidates.candidates.size());
  for (std::size_t i = 0; i < candidates.candidates.size(); ++i) {
    const pred::TrajectoryCandidate & cand = candidates.candidates[i];
    if (cand.states.size() != window) {
      fail(
        ErrorCode::argument,
        "candidate " + std::to_string(i) + " spans " +
          std::to_string(cand.states.size()) +
          " steps but the ego buffer window is " + std::to_string(window));
    }
    PosteriorScore score;
    score.index = i;
    score.prior = cand.probability;
    double mixture = 0.0;
    for (std::size_t j = 0; j < buffer.size(); ++j) {
      const std::vector<VehicleState> & ego = buffer.trajectory(j);
      CollisionTerm term;
      const auto step = earliest_step(ego, ego_dims, cand.states, op_dims);
      if (step.has_value()) {
        term.step = static_cast<int>(*step);
        term.likelihood = std::pow(decay.alpha, static_cast<double>(*step));
      }
      mixture += weights[j] * term.likelihood;
      score.min_gap =
        std::min(score.min_gap, closest_center_approach(ego, cand.states));
      score.per_ego.push_back(term);
    }
    score.posterior = score.prior * mixture;
    scores.push_back(std::move(score));
  }
  return scores;
}

std::size_t select_adversarial(const std::vector<PosteriorScore> & scores)
{
  if (scores.empty()) {
    fail(ErrorCode::argument, "adversary selection needs at least one score");
  }
  bool any_positive = false;
  for (const PosteriorScore & s : scores) {
    if (!(std::isfinite(s.posterior) && s.posterior >= 0.0)) {
      fail(
        ErrorCode::argument,
        "posterior " + std::to_string(s.posterior) + " at candidate " +
          std::to_string(s.index) + " is not a finite non-negative value");
    }
    any_positive |= s.posterior > 0.0;
  }

  if (!any_positive) {
    // Near-miss fallback: the candidate that passes closest to any
    // buffered ego trajectory.
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
      if (scores[i].min_gap < scores[best].min_gap) {
        best = i;
      }
    }
    return scores[best].index;
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    const PosteriorScore & a = scores[i];
    const PosteriorScore & b = scores[best];
    if (a.posterior != b.posterior) {
      if (a.posterior > b.posterior) {
        best = i;
      }
      continue;
    }
    if (a.prior != b.prior) {
      if (a.prior > b.prior) {
        best = i;
      }
      continue;
    }
    if (earliest_collision_over_buffer(a) < earliest_collision_over_buffer(b)) {
      best = i;
    }
  }
  return scores[best].index;
}

double factorization_check(const DiscreteJoint & joint)
{
  const std::size_t m = joint.op_prior.size();
  if (m == 0 || joint.ego_given_op.size() != m || joint.coll_given.size() != m) {
    fail(
      ErrorCode::argument,
      "joint table needs matching op prior and conditional row counts");
  }
  const std::size_t n = joint.ego_given_op[0].size();
  double prior_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (joint.ego_given_op[i].size() != n || joint.coll_given[i].size() != n) {
      fail(ErrorCode::argument, "joint table rows must have equal length");
    }
    if (joint.op_prior[i] < 0.0) {
      fail(ErrorCode::argument, "op prior entries must be non-negative");
    }
    prior_sum += joint.op_prior[i];
    double row_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = joint.ego_given_op[i][j];
      const double c = joint.coll_given[i][j];
      if (e < 0.0 || c < 0.0 || c > 1.0) {
        fail(
          ErrorCode::argument,
          "conditionals must be probabilities (ego row >= 0, collision in [0, 1])");
      }
      row_sum += e;
    }
    if (std::abs(row_sum - 1.0) > 1e-9) {
      fail(
        ErrorCode::argument,
        "ego conditional row " + std::to_string(i) + " sums to " +
          std::to_string(row_sum) + ", expected 1");
    }
  }
  if (std::abs(prior_sum - 1.0) > 1e-9) {
    fail(
      ErrorCode::argument,
      "op prior sums to " + std::to_string(prior_sum) + ", expected 1");
  }

  // The full joint over (op, ego, collided) is the primitive object both
  // routes start from.
  std::vector<std::vector<double>> with_coll(m, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> without_coll(m, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double mass = joint.op_prior[i] * joint.ego_given_op[i][j];
      with_coll[i][j] = mass * joint.coll_given[i][j];
      without_coll[i][j] = mass * (1.0 - joint.coll_given[i][j]);
    }
  }

  // Route one: condition on a collision by direct Bayes over the table.
  std::vector<std::vector<double>> bayes(m, std::vector<double>(n, 0.0));
  double p_coll = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      p_coll += with_coll[i][j];
    }
  }
  if (p_coll <= 0.0) {
    fail(
      ErrorCode::invariant,
      "collision has probability 0 under the table; the conditional is undefined");
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      bayes[i][j] = with_coll[i][j] / p_coll;
    }
  }

  // Route two: re-derive the three terms from the table by marginalization
  // and conditioning, multiply them, and normalize the product at the end.
  std::vector<std::vector<double>> product(m, std::vector<double>(n, 0.0));
  double z = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double op_marginal = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      op_marginal += with_coll[i][j] + without_coll[i][j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double pair_mass = with_coll[i][j] + without_coll[i][j];
      if (op_marginal <= 0.0 || pair_mass <= 0.0) {
        product[i][j] = 0.0;
        continue;
      }
      const double ego_given = pair_mass / op_marginal;
      const double coll_given = with_coll[i][j] / pair_mass;
      product[i][j] = op_marginal * ego_given * coll_given;
    }
  }
  for (const auto & row : product) {
    for (double x : row) {
      z += x;
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = bayes[i][j];
      const double b = product[i][j] / z;
      const double scale = std::max(std::abs(a), std::abs(b));
      if (scale > 0.0) {
        worst = std::max(worst, std::abs(a - b) / scale);
      }
    }
  }
  return worst;
}

}  // namespace advsim::resample
