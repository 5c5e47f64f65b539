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

#ifndef ADVSIM_RNG_HPP_
#define ADVSIM_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace advsim
{

// All sampling goes through these helpers instead of <random> distributions.
// std distributions keep hidden per-object caches (normal_distribution holds a
// spare deviate), which would make resumed runs diverge from uninterrupted
// ones. These helpers consume a fixed number of engine draws per call, so the
// engine state alone captures the whole sampler.
using Rng = std::mt19937_64;

inline double uniform_unit(Rng & rng)
{
  // 53 uniform bits in [0, 1).
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng & rng, double lo, double hi)
{
  return lo + (hi - lo) * uniform_unit(rng);
}

inline std::uint64_t uniform_index(Rng & rng, std::uint64_t n)
{
  return n == 0 ? 0 : rng() % n;
}

inline double normal_sample(Rng & rng, double mean = 0.0, double stddev = 1.0)
{
  // Box-Muller, always two draws, spare discarded.
  double u1 = uniform_unit(rng);
  double u2 = uniform_unit(rng);
  if (u1 < 1e-300) {
    u1 = 1e-300;
  }
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
}

inline std::string rng_state_to_string(const Rng & rng)
{
  std::ostringstream out;
  out << rng;
  return out.str();
}

inline Rng rng_state_from_string(const std::string & text)
{
  Rng rng;
  std::istringstream in(text);
  in >> rng;
  return rng;
}

}  // namespace advsim

#endif  // ADVSIM_RNG_HPP_
