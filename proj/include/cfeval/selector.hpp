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

// Adaptive probe-set construction for one target model on one task.
//
// The probe set starts with the instances most discriminative across all
// initial models. Each following iteration finds the initial models whose
// results on the current probes best match the target's (cosine), then adds
// the unselected instances with the highest blend of whole-population and
// similar-model importance. The target is only ever asked about instances
// that end up in the probe set, each exactly once.

#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfeval/importance.hpp"
#include "cfeval/store.hpp"

namespace cfeval {

struct SelectorConfig {
  double sample_ratio = 0.1;
  std::size_t min_subset_size = 20;
  // Share of the budget picked before the first similarity step.
  double initial_probe_fraction = 0.5;
  // Instances added per iteration; 0 means max(1, budget / 10).
  std::size_t q_select = 0;
  std::size_t n_similar = 5;
  double weight_alpha = 0.5;
  // After this many adaptive iterations the rest is filled by base scores.
  std::size_t max_iterations = 50;
  // Compute the similar set once after the initial probe instead of every
  // iteration.
  bool freeze_similar = false;
  // Mean-center probe vectors before the cosine (Pearson-style).
  bool center_similarity = false;
  ImportanceKind importance = ImportanceKind::kVariance;

  void validate() const;
};

// Tasks smaller than min_subset_size are used whole; otherwise
// max(min_subset_size, round(sample_ratio * size)), capped at the task size.
std::size_t selection_budget(std::size_t task_size, const SelectorConfig& cfg);
std::size_t initial_probe_size(std::size_t budget, const SelectorConfig& cfg);
std::size_t instances_per_iteration(std::size_t budget, const SelectorConfig& cfg);

// Supplies the target model's results on demand. Implementations must be
// deterministic and tolerate concurrent calls for different tasks.
class TargetOracle {
 public:
  virtual ~TargetOracle() = default;
  virtual std::vector<double> query(const std::string& task_id,
                                    std::span<const std::string> instance_ids) = 0;
};

// Replays recorded results and counts how many instances were revealed.
class RecordedOracle : public TargetOracle {
 public:
  explicit RecordedOracle(TargetResults results) : results_(std::move(results)) {}

  std::vector<double> query(const std::string& task_id,
                            std::span<const std::string> instance_ids) override;

  // Instances revealed for a task, counting repeats.
  std::size_t calls(const std::string& task_id) const;
  // True when some instance of the task was requested more than once.
  bool repeated(const std::string& task_id) const;
  std::size_t total_calls() const;

 private:
  TargetResults results_;
  mutable std::mutex mutex_;
  std::map<std::string, std::size_t, std::less<>> calls_;
  std::map<std::string, std::map<std::string, int>, std::less<>> seen_;
};

struct IterationRecord {
  std::vector<std::string> added_ids;
  // Similar set used to rank this step's additions (empty for the initial
  // probe).
  std::vector<std::string> similar_model_ids;
};

struct SelectionState {
  std::string task_id;
  std::size_t budget = 0;
  std::vector<std::string> probe_ids;
  std::vector<Eigen::Index> probe_columns;
  std::vector<double> probe_values;
  // Final similar set, computed from the full probe set unless frozen.
  std::vector<std::string> similar_model_ids;
  std::vector<Eigen::Index> similar_rows;
  std::vector<IterationRecord> trace;
};

// `initial` holds the initial models only, rows in release order.
std::vector<std::string> initial_probe(const EvalMatrix& initial, const SelectorConfig& cfg);

std::vector<std::string> find_similar_models(const EvalMatrix& initial,
                                             std::span<const std::string> probe_ids,
                                             std::span<const double> probe_values,
                                             std::size_t n_similar, bool centered = false);

// Row indices of the n most similar rows of `values` restricted to
// `columns`. Zero-norm vectors score 0; ties go to the lower row.
std::vector<Eigen::Index> similar_model_rows(const Eigen::MatrixXd& values,
                                             std::span<const Eigen::Index> columns,
                                             std::span<const double> target_values,
                                             std::size_t n_similar, bool centered);

SelectionState select_for_target(const EvalMatrix& initial, TargetOracle& oracle,
                                 const SelectorConfig& cfg);
// Same, reusing precomputed base importance scores of `initial`.
SelectionState select_for_target(const EvalMatrix& initial, const Eigen::VectorXd& base_scores,
                                 TargetOracle& oracle, const SelectorConfig& cfg);

}  // namespace cfeval
