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

#include "cfeval/generator.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "cfeval/errors.hpp"

namespace cfeval {

void GeneratorSpec::validate() const {
  if (n_models < 1 || n_tasks < 1 || instances_per_task < 1) {
    throw ArgumentError("generator: model, task and instance counts must be positive");
  }
  if (instances_jitter >= instances_per_task) {
    throw ArgumentError("generator: instances_jitter must be below instances_per_task");
  }
  if (n_families < 1 || n_task_groups < 1) {
    throw ArgumentError("generator: family and task-group counts must be positive");
  }
  if (!(family_correlation >= 0.0 && family_correlation <= 1.0)) {
    throw ArgumentError("generator: family_correlation must lie in [0,1]");
  }
  for (double sd : {ability_sd, skill_sd, family_item_sd, difficulty_sd, task_shift_sd, task_jitter_sd,
                    discrimination_sd, noise_sd}) {
    if (!(sd >= 0.0) || !std::isfinite(sd)) {
      throw ArgumentError("generator: spreads must be finite and non-negative");
    }
  }
  for (double v : {ability_mean, difficulty_mean, release_trend, discrimination_mean}) {
    if (!std::isfinite(v)) throw ArgumentError("generator: non-finite location parameter");
  }
}

namespace {

std::string padded(char prefix, std::size_t i, std::size_t n) {
  const int width = static_cast<int>(std::to_string(n > 0 ? n - 1 : 0).size());
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%0*zu", prefix, width, i);
  return buf;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

GeneratedBenchmark generate_benchmark(const GeneratorSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  const auto nm = spec.n_models;
  const auto ng = spec.n_task_groups;
  const double wf = std::sqrt(spec.family_correlation);
  const double wm = std::sqrt(1.0 - spec.family_correlation);

  GeneratedBenchmark out;
  out.model_family.resize(nm);
  std::uniform_int_distribution<std::size_t> family_of(0, spec.n_families - 1);
  for (auto& f : out.model_family) f = family_of(rng);

  std::vector<double> family_ability(spec.n_families);
  for (auto& a : family_ability) a = z(rng);
  Eigen::MatrixXd family_skill(static_cast<Eigen::Index>(spec.n_families),
                               static_cast<Eigen::Index>(ng));
  for (Eigen::Index i = 0; i < family_skill.size(); ++i) family_skill(i) = z(rng);

  // theta: per model; skill: models x groups.
  Eigen::VectorXd theta(static_cast<Eigen::Index>(nm));
  Eigen::MatrixXd skill(static_cast<Eigen::Index>(nm), static_cast<Eigen::Index>(ng));
  for (std::size_t m = 0; m < nm; ++m) {
    const auto f = out.model_family[m];
    const double pos = nm > 1 ? static_cast<double>(m) / static_cast<double>(nm - 1) - 0.5 : 0.0;
    theta(static_cast<Eigen::Index>(m)) = spec.ability_mean + spec.release_trend * pos +
                                          spec.ability_sd * (wf * family_ability[f] + wm * z(rng));
    for (std::size_t g = 0; g < ng; ++g) {
      skill(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(g)) =
          spec.skill_sd * (wf * family_skill(static_cast<Eigen::Index>(f),
                                             static_cast<Eigen::Index>(g)) +
                           wm * z(rng));
    }
  }

  const std::size_t max_size = spec.instances_per_task + spec.instances_jitter;
  Eigen::MatrixXd group_difficulty(static_cast<Eigen::Index>(max_size),
                                   static_cast<Eigen::Index>(ng));
  Eigen::MatrixXd group_slope(static_cast<Eigen::Index>(max_size), static_cast<Eigen::Index>(ng));
  for (Eigen::Index i = 0; i < group_difficulty.size(); ++i) {
    group_difficulty(i) = spec.difficulty_mean + spec.difficulty_sd * z(rng);
    group_slope(i) = std::exp(spec.discrimination_mean + spec.discrimination_sd * z(rng));
  }

  std::vector<ModelRecord> models(nm);
  for (std::size_t m = 0; m < nm; ++m) {
    models[m].model_id = padded('m', m, nm);
    models[m].release_index = static_cast<std::int64_t>(m);
    models[m].display_name = "family-" + std::to_string(out.model_family[m]);
  }

  std::vector<TaskRecord> tasks;
  std::vector<EvalMatrix> matrices;
  std::uniform_int_distribution<std::size_t> size_of(spec.instances_per_task - spec.instances_jitter,
                                                     max_size);
  for (std::size_t t = 0; t < spec.n_tasks; ++t) {
    const std::size_t g = t % ng;
    out.task_group.push_back(g);
    const std::size_t n = spec.instances_jitter > 0 ? size_of(rng) : spec.instances_per_task;
    const double shift = spec.task_shift_sd * z(rng);

    TaskRecord task;
    task.task_id = padded('t', t, spec.n_tasks);
    task.metric_kind = spec.metric;
    for (std::size_t j = 0; j < n; ++j) task.instance_ids.push_back(task.task_id + "_" + padded('i', j, max_size));

    Eigen::VectorXd b(static_cast<Eigen::Index>(n));
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      b(j) = group_difficulty(j, static_cast<Eigen::Index>(g)) + shift + spec.task_jitter_sd * z(rng);
    }
    Eigen::MatrixXd family_item(static_cast<Eigen::Index>(spec.n_families),
                                static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < family_item.size(); ++i) {
      family_item(i) = spec.family_item_sd * z(rng);
    }
    Eigen::MatrixXd p(static_cast<Eigen::Index>(nm), static_cast<Eigen::Index>(n));
    Eigen::MatrixXd values(p.rows(), p.cols());
    for (Eigen::Index m = 0; m < p.rows(); ++m) {
      const double ability = theta(m) + skill(m, static_cast<Eigen::Index>(g));
      const auto f = static_cast<Eigen::Index>(out.model_family[static_cast<std::size_t>(m)]);
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double pr = logistic(group_slope(j, static_cast<Eigen::Index>(g)) *
                                   (ability + family_item(f, j) - b(j)));
        p(m, j) = pr;
        double v;
        if (spec.metric == MetricKind::kBinary) {
          v = spec.noise ? (u(rng) < pr ? 1.0 : 0.0) : (pr >= 0.5 ? 1.0 : 0.0);
        } else if (!spec.noise || spec.noise_sd == 0.0) {
          v = pr;
        } else {
          do {
            v = pr + spec.noise_sd * z(rng);
          } while (v < 0.0 || v > 1.0);
        }
        values(m, j) = v;
      }
    }
    EvalMatrix mat;
    mat.task_id = task.task_id;
    for (const auto& rec : models) mat.model_ids.push_back(rec.model_id);
    mat.instance_ids = task.instance_ids;
    mat.values = std::move(values);
    out.probabilities.push_back(std::move(p));
    tasks.push_back(std::move(task));
    matrices.push_back(std::move(mat));
  }
  out.store = BenchmarkStore::create(std::move(models), std::move(tasks), std::move(matrices));
  return out;
}

BenchmarkStore generate(const GeneratorSpec& spec) { return generate_benchmark(spec).store; }

}  // namespace cfeval
