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

#ifndef ADVSIM_RESAMPLER_HPP_
#define ADVSIM_RESAMPLER_HPP_

#include <cstddef>
#include <limits>
#include <vector>

#include "advsim/geometry.hpp"
#include "advsim/predictor.hpp"
#include "advsim/scenario.hpp"
#include "json.hpp"

namespace advsim::resample
{

/// Ring buffer of the latest ego rollouts over the prediction window, each
/// stored with the summed log-probability of the actions that produced it.
/// Normalized weights are exposed as a softmax over those sums, so a
/// deterministic agent (log-prob 0 everywhere) yields uniform weights and
/// long-horizon probability products never underflow.
class EgoRolloutBuffer
{
public:
  explicit EgoRolloutBuffer(std::size_t capacity);

  /// Appends a rollout, evicting the oldest entry beyond capacity. Every
  /// stored trajectory must have the same length.
  void push(std::vector<VehicleState> trajectory, double log_prob_sum);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return trajectories_.size(); }
  bool empty() const { return trajectories_.empty(); }
  const std::vector<VehicleState> & trajectory(std::size_t j) const
  {
    return trajectories_[j];
  }
  double log_prob_sum(std::size_t j) const { return log_prob_sums_[j]; }

  /// Softmax over the stored log-probability sums; sums to 1.
  std::vector<double> weights() const;

  nlohmann::json to_json() const;
  static EgoRolloutBuffer from_json(const nlohmann::json & j);

private:
  std::size_t capacity_;
  std::vector<std::vector<VehicleState>> trajectories_;
  std::vector<double> log_prob_sums_;
};

/// Per-step decay of the collision likelihood; collisions further in the
/// future count less.
struct DecayConfig
{
  double alpha = 0.99;  // in (0, 1]
};

/// Collision outcome of one (candidate, buffered ego) pair.
struct CollisionTerm
{
  int step = -1;  // earliest colliding prediction step, -1 when none
  double likelihood = 0.0;
};

/// Scoring breakdown of one candidate against the whole ego buffer. The
/// posterior is reconstructible as prior * sum_j weight_j * likelihood_j.
struct PosteriorScore
{
  std::size_t index = 0;
  double prior = 0.0;
  std::vector<CollisionTerm> per_ego;  // aligned with the buffer entries
  double posterior = 0.0;
  // Closest center-to-center approach to any buffered ego trajectory;
  // the selection key when every posterior is zero.
  double min_gap = std::numeric_limits<double>::infinity();
};

/// alpha^k at the earliest step k where the two box trajectories overlap
/// (k = 0 is the first predicted step), 0 when they never do. States marked
/// invalid never collide.
double collision_likelihood(
  std::span<const VehicleState> ego, geom::BoxSize ego_dims,
  std::span<const VehicleState> op, geom::BoxSize op_dims,
  const DecayConfig & decay = {});

/// Scores every candidate: prior times the buffer-weighted sum of collision
/// likelihoods against each stored ego rollout.
std::vector<PosteriorScore> posterior_scores(
  const pred::CandidateSet & candidates, const EgoRolloutBuffer & buffer,
  geom::BoxSize ego_dims, geom::BoxSize op_dims, const DecayConfig & decay = {});

/// Argmax posterior. Ties broken by larger prior, then smaller earliest
/// collision step over the buffer, then smaller index. When every posterior
/// is zero, returns the candidate with the smallest min_gap so the caller
/// still gets the most threatening near-miss.
std::size_t select_adversarial(const std::vector<PosteriorScore> & scores);

/// A finite two-vehicle world given by explicit conditionals, used to verify
/// the three-term factorization numerically against brute-force Bayes.
struct DiscreteJoint
{
  std::vector<double> op_prior;                    // P(op = i), sums to 1
  std::vector<std::vector<double>> ego_given_op;   // P(ego = j | op = i)
  std::vector<std::vector<double>> coll_given;     // P(coll | op = i, ego = j)
};

/// Builds the full joint table, conditions on a collision by direct Bayes,
/// and compares against the normalized three-term product. Returns the
/// maximum relative error over all (op, ego) pairs.
double factorization_check(const DiscreteJoint & joint);

}  // namespace advsim::resample

#endif  // ADVSIM_RESAMPLER_HPP_
