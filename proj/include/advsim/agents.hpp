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

#ifndef ADVSIM_AGENTS_HPP_
#define ADVSIM_AGENTS_HPP_

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advsim/rng.hpp"
#include "advsim/simulator.hpp"
#include "json.hpp"

namespace advsim::agents
{

/// Intelligent-driver-model parameters. `hard_brake` caps the response when
/// the bumper gap has already closed.
struct IdmParams
{
  double v0 = 15.0;        // desired speed, m/s
  double headway = 1.5;    // desired time gap, s
  double min_gap = 2.0;    // jam distance, m
  double a_max = 1.5;      // comfortable acceleration, m/s^2
  double b_comfort = 2.0;  // comfortable braking, m/s^2
  double delta = 4.0;      // free-road exponent
  double hard_brake = 8.0; // m/s^2, returned as -hard_brake when gap <= 0
};

/// Longitudinal acceleration for a vehicle at `speed` given an optional
/// leader (`lead_speed`, bumper-to-bumper `gap`). Both optionals must be
/// engaged together. A non-positive gap returns -hard_brake.
double idm_accel(
  double speed, std::optional<double> lead_speed, std::optional<double> gap,
  const IdmParams & p = {});

/// Weights of the two-hidden-layer tanh network mapping observations to the
/// two action means. Flat layout per layer: row-major weight matrix, then
/// biases. `stddev` is the exploration scale of each squashed-Gaussian
/// channel; values are clamped to at least 1e-6 when sampling so the density
/// stays finite.
struct PolicyParams
{
  std::vector<int> layers{sim::kObservationDim, 64, 64, 2};
  std::vector<double> weights;
  std::array<double, 2> stddev{0.3, 0.3};

  static std::size_t weight_count(std::span<const int> layers);
  /// All-zero weights for the default architecture.
  static PolicyParams zeros();

  nlohmann::json to_json() const;
  static PolicyParams from_json(const nlohmann::json & j);
  void save_file(const std::string & path) const;
  static PolicyParams load_file(const std::string & path);
};

enum class ActMode
{
  deterministic,  // action = tanh(mean), log_prob = 0
  stochastic,     // tanh-squashed Gaussian sample with its exact log density
};

struct Decision
{
  sim::Action action;
  double log_prob = 0.0;
};

/// Runs the policy network on one observation. `rng` is required in
/// stochastic mode and ignored otherwise.
Decision policy_act(
  const PolicyParams & params, std::span<const double> observation, ActMode mode,
  Rng * rng = nullptr);

class Agent
{
public:
  virtual ~Agent() = default;
  virtual void begin_episode(const sim::Simulator &) {}
  virtual Decision act(
    std::span<const double> observation, const sim::Simulator & simulator) = 0;
};

/// Emits neutral actions; pair it with EgoMode::replay so the ego retraces
/// its recorded track.
class ReplayAgent : public Agent
{
public:
  Decision act(std::span<const double>, const sim::Simulator &) override
  {
    return {};
  }
};

/// Rule-based ego: IDM speed control against the nearest leader on the route
/// plus pure-pursuit steering toward a point ahead on the route.
class IdmAgent : public Agent
{
public:
  explicit IdmAgent(IdmParams params = {}) : params_(params) {}

  Decision act(
    std::span<const double> observation, const sim::Simulator & simulator) override;

private:
  IdmParams params_;
  double lookahead_gain_ = 1.2;   // seconds of travel ahead
  double lookahead_min_ = 4.0;    // m
  double leader_range_ = 40.0;    // m, bumper gap beyond which leaders are ignored
  double leader_corridor_ = 2.5;  // m, lateral distance from the route
};

/// Neural ego driving from observations only.
class PolicyAgent : public Agent
{
public:
  PolicyAgent(const PolicyParams & params, ActMode mode, Rng * rng = nullptr)
  : params_(&params), mode_(mode), rng_(rng)
  {
  }

  Decision act(std::span<const double> observation, const sim::Simulator &) override
  {
    return policy_act(*params_, observation, mode_, rng_);
  }

private:
  const PolicyParams * params_;
  ActMode mode_;
  Rng * rng_;
};

/// Resets the simulator and drives it to termination with `agent`.
sim::EpisodeResult run_episode(sim::Simulator & simulator, Agent & agent);

/// Cross-entropy-method settings. The population must be even: candidates
/// are antithetic pairs around the current mean.
struct CemConfig
{
  int population = 32;
  double elite_fraction = 0.25;
  double noise_init = 0.5;
  double noise_decay = 0.995;
  double noise_floor = 1e-3;
};

struct CemStats
{
  int generation = 0;
  double population_mean = 0.0;
  double elite_mean = 0.0;
  double best = 0.0;
  double noise = 0.0;
};

/// Derivative-free optimizer over a flat parameter vector. Each step draws
/// an antithetic population around the mean, scores it with `evaluate`
/// (higher is better), and recenters the mean on the elite average. With
/// identically zero scores the mean is reproduced exactly: elite selection
/// is stable and paired perturbations cancel.
class CemOptimizer
{
public:
  explicit CemOptimizer(std::vector<double> initial, CemConfig config = {});

  const std::vector<double> & params() const { return params_; }
  double noise() const { return noise_; }
  int generation() const { return generation_; }
  const CemConfig & config() const { return config_; }

  CemStats step(
    const std::function<double(std::span<const double>)> & evaluate, Rng & rng);

  nlohmann::json to_json() const;
  static CemOptimizer from_json(const nlohmann::json & j);

private:
  CemConfig config_;
  std::vector<double> params_;
  double noise_ = 0.0;
  int generation_ = 0;
};

}  // namespace advsim::agents

#endif  // ADVSIM_AGENTS_HPP_
