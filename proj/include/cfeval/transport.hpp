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

// Cross-task synthetic instances.
//
// Tasks whose mean-performance profiles over the initial models point in the
// same direction are treated as related. The probed columns of related tasks
// are moved onto the current task's unprobed columns with a uniform-marginal
// optimal transport plan (Euclidean column cost). Each synthetic column is
// the plan-weighted average of source columns, for the initial models and
// for the target alike.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cfeval/selector.hpp"
#include "cfeval/store.hpp"

namespace cfeval {

struct TransportConfig {
  // Cosine floor on task profiles for two tasks to count as similar.
  double tau0 = 0.95;
  // Entropic regularization, relative to the mean transport cost.
  double epsilon_scale = 0.01;
  std::size_t max_iters = 1000;
  // Convergence when the largest marginal violation drops below this.
  double tolerance = 1e-9;
  // Use the plan as-is instead of normalizing each column to sum 1.
  bool raw_plan = false;
  // Synthesis re-solves exactly when scaling stops short of `tolerance`;
  // false propagates the ConvergenceError.
  bool exact_fallback = true;

  void validate() const;
};

struct TaskProfile {
  std::string task_id;
  // Mean result of each initial model over the task's instances.
  Eigen::VectorXd mean_vector;
};

std::vector<TaskProfile> task_profiles(const BenchmarkStore& store,
                                       std::span<const Eigen::Index> initial_rows);

// Tasks other than `task_id` whose profile cosine is >= tau0, most similar
// first (ties keep input order).
std::vector<std::string> similar_tasks(std::span<const TaskProfile> profiles,
                                       std::string_view task_id, double tau0);

struct TransportPlan {
  Eigen::MatrixXd plan;
  double cost = 0.0;
  std::size_t iterations = 0;
  // Largest marginal violation of the returned plan.
  double residual = 0.0;
  // Produced by the linear-program solver.
  bool exact = false;

  Eigen::Index rows() const { return plan.rows(); }
  Eigen::Index cols() const { return plan.cols(); }
};

// Uniform marginals: rows sum to 1/rows, columns to 1/cols. epsilon == 0
// solves the linear program exactly; epsilon > 0 runs Sinkhorn scaling.
// Throws NumericError on NaN costs, ConvergenceError when scaling hits
// max_iters.
TransportPlan solve_ot(const Eigen::MatrixXd& cost, double epsilon, std::size_t max_iters,
                       double tolerance = 1e-9);
TransportPlan solve_ot_exact(const Eigen::MatrixXd& cost);
TransportPlan solve_ot_entropic(const Eigen::MatrixXd& cost, double epsilon,
                                std::size_t max_iters, double tolerance = 1e-9);

double marginal_residual(const Eigen::MatrixXd& plan);

// 1 where the entry is >= 0.5, else 0.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>
threshold_binary(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return (m.array() >= Scalar(0.5)).template cast<Scalar>().matrix();
}

struct SyntheticBlock {
  std::string task_id;
  Eigen::MatrixXd values_initial;  // B x |unselected|
  Eigen::VectorXd values_target;   // |unselected|
  std::vector<std::string> source_task_ids;
  TransportPlan plan;
};

// Core construction on dense blocks. `source` is B x S with the target's
// values `source_target`; `unselected` is B x U, U >= 1, S >= 1.
SyntheticBlock synthesize_block(const Eigen::MatrixXd& source,
                                const Eigen::VectorXd& source_target,
                                const Eigen::MatrixXd& unselected, MetricKind kind,
                                const TransportConfig& cfg);

// Store-level form: pools the probed columns of every task similar to
// `task_id`. Returns nullopt when no similar task has probes or the task has
// no unselected instances.
std::optional<SyntheticBlock> synthesize(const BenchmarkStore& store, std::string_view task_id,
                                         const std::map<std::string, SelectionState>& selections,
                                         const Split& split, const TransportConfig& cfg);

}  // namespace cfeval
