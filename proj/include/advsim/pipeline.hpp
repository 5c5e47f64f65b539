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

#ifndef ADVSIM_PIPELINE_HPP_
#define ADVSIM_PIPELINE_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advsim/agents.hpp"
#include "advsim/resampler.hpp"
#include "advsim/rng.hpp"
#include "advsim/scenario.hpp"
#include "json.hpp"

namespace advsim::pipeline
{

/// Traffic source used while training:
///  - no_adv: raw logged scenarios only
///  - rule_based: scripted cut-in adversary rebuilt per visit
///  - open_loop: adversaries generated once against the logged ego, frozen
///  - closed_loop: adversaries regenerated against the current policy's
///    recent rollouts every visit
enum class Mode
{
  no_adv,
  rule_based,
  open_loop,
  closed_loop,
};

const char * mode_name(Mode m);
Mode mode_from_name(const std::string & name);

struct PoolEntry
{
  Scenario scenario;
  std::string name;
};

struct CatConfig
{
  int m_candidates = 32;  // opponent futures sampled per generation
  int n_buffer = 5;       // ego rollouts retained per scenario
  double alpha = 0.99;    // per-step decay of the collision likelihood
  int generations = 100;
  int scenes_per_gen = 4;  // scenarios scored per optimizer generation
  Mode mode = Mode::closed_loop;
  std::uint64_t seed = 0;
  agents::CemConfig cem{};
  std::array<double, 2> policy_stddev{0.3, 0.3};
};

/// How the adversarial candidate is picked from the scored set.
enum class CandidateSelector
{
  posterior,     // prior times buffer-weighted collision likelihood
  prior_argmax,  // most likely candidate regardless of collisions
};

struct GenerationOutcome
{
  Scenario scenario;  // spliced and deconflicted, fully validated
  std::size_t selected = 0;
  double posterior = 0.0;
  double prior = 0.0;
  double gen_time_ms = 0.0;  // covers predict + score + select only
  // Full scoring table, aligned with the candidate indices.
  std::vector<resample::PosteriorScore> scores;
};

/// Resamples the adversary of `raw` into a safety-critical variant: predicts
/// `m` opponent candidates, scores them against the ego rollout buffer, picks
/// one, splices it over the adversary's future, and freezes any background
/// vehicle the new path runs into.
GenerationOutcome generate_adversarial(
  const Scenario & raw, const resample::EgoRolloutBuffer & buffer, int m,
  double alpha, Rng & rng, CandidateSelector selector = CandidateSelector::posterior);

/// The ego's logged future (every frame past the history cutoff), used to
/// seed rollout buffers.
std::vector<VehicleState> logged_ego_future(const Scenario & s);

/// Replayed background vehicles that intersect the adversary's new footprint
/// freeze at their last clear frame for the rest of the horizon.
Scenario deconflict_background(const Scenario & spliced);

/// Scripted adversary: a curve from its first logged future point through
/// `k_waypoints` points on the ego route (at even fractions of the ego's
/// logged progress) back to its own logged endpoint, driven at constant
/// acceleration timed to meet the ego at the first route waypoint.
AdversarialScenario rule_based_adversary(const Scenario & s, int k_waypoints = 3);

struct GenerationMetrics
{
  int generation = 0;
  double mean_return = 0.0;
  double crash_rate = 0.0;
  double route_completion = 0.0;
  double gen_time_ms = 0.0;
};

/// CSV with a header row; schema is identical across training modes.
std::string metrics_csv(std::span<const GenerationMetrics> rows);

/// Population-based policy training over a scenario pool. One step = one
/// optimizer generation: sample scenarios, derive their training variants per
/// the mode, roll out the current policy (closed loop only), score the
/// population, update, then append the rollouts to the per-scenario buffers.
/// State serializes to JSON and resumes bit-exactly.
class Trainer
{
public:
  Trainer(std::vector<PoolEntry> pool, CatConfig cfg);

  GenerationMetrics step();

  const CatConfig & config() const { return cfg_; }
  int generation() const { return cem_.generation(); }
  std::span<const PoolEntry> pool() const { return pool_; }
  std::span<const GenerationMetrics> history() const { return history_; }
  /// Current policy (optimizer mean) wrapped for acting.
  agents::PolicyParams policy() const;
  /// Buffer of one pool scenario; null until first visited.
  const resample::EgoRolloutBuffer * buffer(std::size_t pool_index) const;
  /// Scenarios skipped after generation failures, for diagnostics.
  int skipped_scenarios() const { return skipped_; }

  nlohmann::json to_json() const;
  /// Restores a checkpoint. `pool` must be the same pool (same names, same
  /// order) the checkpoint was written with.
  static Trainer from_json(std::vector<PoolEntry> pool, const nlohmann::json & j);

private:
  Scenario training_variant(std::size_t index, double & gen_ms);
  resample::EgoRolloutBuffer & buffer_for(std::size_t index);
  agents::PolicyParams wrap_weights(std::span<const double> weights) const;

  std::vector<PoolEntry> pool_;
  CatConfig cfg_;
  Rng rng_;
  agents::CemOptimizer cem_;
  std::vector<std::optional<resample::EgoRolloutBuffer>> buffers_;
  std::vector<std::optional<Scenario>> frozen_;  // open_loop variants
  std::vector<GenerationMetrics> history_;
  int skipped_ = 0;
};

}  // namespace advsim::pipeline

#endif  // ADVSIM_PIPELINE_HPP_
