// Copyright 2026 The cfeval Authors.
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

// Synthetic leaderboards from a two-parameter logistic response model.
//
// Success probability of model m on instance j of task t:
//
//   p = logistic(a_j * (theta_m + s_{m,g(t)} + e_{f(m),t,j} - b_{t,j}))
//
// theta and s mix a family factor with a per-model factor, so models of one
// family resemble each other; e is a per-instance offset shared by a family.
// Tasks of one group share a base difficulty vector; each task adds a shift
// and per-instance jitter.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cfeval/store.hpp"

namespace cfeval {

struct GeneratorSpec {
  std::size_t n_models = 40;
  std::size_t n_tasks = 20;
  std::size_t instances_per_task = 200;
  // Task sizes are drawn uniformly from instances_per_task +- this.
  std::size_t instances_jitter = 0;
  MetricKind metric = MetricKind::kBinary;

  std::size_t n_families = 4;
  // Share of ability variance explained by the family factor.
  double family_correlation = 0.8;
  double ability_mean = 0.0;
  double ability_sd = 1.0;
  // Ability added linearly over release order, from -trend/2 to +trend/2.
  double release_trend = 0.5;
  // Model-by-task-group skill (family mixed like ability).
  double skill_sd = 0.5;

  std::size_t n_task_groups = 5;
  double difficulty_mean = 0.0;
  double difficulty_sd = 1.5;
  double task_shift_sd = 0.3;
  double task_jitter_sd = 0.3;
  // Per-(family, instance) ability offset.
  double family_item_sd = 1.0;
  // log a_j ~ N(discrimination_mean, discrimination_sd).
  double discrimination_mean = 1.5;
  double discrimination_sd = 0.3;

  // false: binary outcomes are p >= 0.5, continuous outcomes are p.
  bool noise = true;
  // Continuous mode: sd of the Gaussian truncated to [0,1] around p.
  double noise_sd = 0.1;

  std::uint64_t seed = 0;

  void validate() const;
};

struct GeneratedBenchmark {
  BenchmarkStore store;
  // Per task (store order): success probabilities, rows in roster order.
  std::vector<Eigen::MatrixXd> probabilities;
  std::vector<std::size_t> model_family;  // roster order
  std::vector<std::size_t> task_group;    // store order
};

GeneratedBenchmark generate_benchmark(const GeneratorSpec& spec);
BenchmarkStore generate(const GeneratorSpec& spec);

}  // namespace cfeval
