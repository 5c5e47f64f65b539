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

#ifndef ADVSIM_FORGE_HPP_
#define ADVSIM_FORGE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "advsim/scenario.hpp"

namespace advsim::forge
{

enum class Template {
  four_way_intersection,
  t_junction,
  straight_multilane,
  curve,
  merge,
};

const char * template_name(Template t);
Template template_from_name(const std::string & name);
std::vector<Template> all_templates();

struct ForgeConfig
{
  Template tmpl = Template::straight_multilane;
  std::uint64_t seed = 0;
  int n_background = 2;  // clamped to [0, 6]
};

/// Builds one synthetic logged scenario. Deterministic: the same config
/// produces a byte-identical serialization. The logged ego never collides
/// with any other logged vehicle, the ego route is at least 40 m long, and
/// the adversary follows a plausible non-conflicting log.
Scenario forge_scenario(const ForgeConfig & config);

struct CorpusItem
{
  Scenario scenario;
  std::string name;  // file stem, e.g. "scene_0004_curve"
};

struct Corpus
{
  std::vector<CorpusItem> train;
  std::vector<CorpusItem> test;
  int n = 0;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// Cycles templates across `n` scenarios and splits them deterministically:
/// the first round(n * train_fraction) go to the training set.
Corpus forge_corpus(int n, double train_fraction, std::uint64_t seed);

/// Writes every scenario as <name>.json plus a manifest.json that records
/// the split membership.
void write_corpus(const Corpus & corpus, const std::string & directory);

}  // namespace advsim::forge

#endif  // ADVSIM_FORGE_HPP_
