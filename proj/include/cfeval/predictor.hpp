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

// Score estimation from a probe set.
//
// The task score is the exact sum over probed instances plus a predicted sum
// over the rest. Unprobed instances that barely separate the initial models
// take the initial models' mean. The others are routed by how closely their
// result column matches probed (or synthetic) columns: close matches take the
// target's own results on the nearest columns (item-based), the rest take
// the similar models' results on that instance (user-based).

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfeval/selector.hpp"
#include "cfeval/store.hpp"
#include "cfeval/transport.hpp"

namespace cfeval {

struct PredictorConfig {
  // Unprobed instances with importance below mean_probe_importance / tau1
  // are predicted by the initial-model mean.
  double tau1 = 2.0;
  // Floor for the item-based routing threshold.
  double tau2 = 0.9;
  // Quantile of the neighbour-similarity vector used as the adaptive
  // threshold.
  double quantile_q = 0.5;
  std::size_t k_items = 3;
  // Count synthetic columns in the score itself, not just in routing.
  bool include_synthetic_in_score = false;
  bool use_ot = true;
  TransportConfig transport;

  void validate() const;
};

struct FilterResult {
  std::vector<Eigen::Index> kept;      // positions into the unselected block
  std::vector<Eigen::Index> filtered;  // same
  double c0 = 0.0;
  double mean_importance = 0.0;
  double threshold = 0.0;
};

FilterResult filter_unimportant(const Eigen::MatrixXd& selected, const Eigen::MatrixXd& unselected,
                                double tau1);

enum class Branch { kFiltered, kItem, kUser };
std::string_view to_string(Branch branch);

struct InstanceAudit {
  Eigen::Index column = 0;  // position in the block handed to the router
  Branch branch = Branch::kUser;
  double mean_similarity = 0.0;
  double prediction = 0.0;
  std::vector<Eigen::Index> neighbors;  // selected-block columns used (item branch)
};

struct RoutingResult {
  double c1 = 0.0;
  double c2 = 0.0;
  double tau3 = 0.0;
  std::size_t n_item = 0;
  std::size_t n_user = 0;
  std::vector<InstanceAudit> audit;
};

// q-quantile by nearest rank on the ascending order: element ceil(q*n)
// (1-based, at least the first).
double nearest_rank_quantile(std::vector<double> values, double q);

// `selected` (B x S) includes synthetic columns; `target_values` aligns with
// its columns. `similar_rows` index rows of both blocks.
RoutingResult route_and_predict(const Eigen::MatrixXd& selected,
                                const Eigen::MatrixXd& unselected_kept,
                                const Eigen::VectorXd& target_values,
                                std::span<const Eigen::Index> similar_rows,
                                const PredictorConfig& cfg);

struct ScoreComponents {
  double a_s = 0.0;          // target's sum over real probes
  double a_synthetic = 0.0;  // target's sum over synthetic columns
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

struct ScoreCounts {
  std::size_t n_selected = 0;
  std::size_t n_unselected = 0;
  std::size_t n_synthetic = 0;
  std::size_t n_filtered_by_tau1 = 0;
  std::size_t n_item_cf = 0;
  std::size_t n_user_cf = 0;
};

double assemble_score(const ScoreComponents& parts, const ScoreCounts& counts,
                      const PredictorConfig& cfg);

// 1 + number of initial models strictly better; ties rank the target ahead.
std::size_t predict_rank(double p_hat, std::span<const double> initial_performance);

struct InstancePrediction {
  std::string instance_id;
  Branch branch = Branch::kUser;
  double prediction = 0.0;
  double mean_similarity = 0.0;
};

struct PredictionReport {
  std::string task_id;
  double p_hat = 0.0;
  std::size_t rank_hat = 0;
  ScoreComponents components;
  ScoreCounts counts;
  double tau3 = 0.0;
  double mean_probe_importance = 0.0;
  std::vector<std::string> source_task_ids;
  std::vector<InstancePrediction> instances;
  // Set when the task failed; other fields are then unspecified.
  std::optional<std::string> error;
  bool numeric_error = false;
};

// Per-(store, split) data shared by every target: initial-model blocks,
// their true scores and task profiles.
class PredictionContext {
 public:
  PredictionContext(const BenchmarkStore& store, const Split& split);

  const BenchmarkStore& store() const { return *store_; }
  // Initial models ordered by release.
  const std::vector<std::string>& initial_ids() const { return initial_ids_; }
  const std::vector<Eigen::Index>& initial_rows() const { return initial_rows_; }
  // Initial-model rows of a task, as an EvalMatrix.
  const EvalMatrix& initial_matrix(std::size_t task) const { return initial_[task]; }
  const std::vector<double>& initial_performance(std::size_t task) const {
    return initial_perf_[task];
  }
  const std::vector<TaskProfile>& profiles() const { return profiles_; }
  Eigen::Index initial_row(std::string_view model_id) const;

  // Fills missing column / row indices of a selection from its ids.
  SelectionState resolve(std::size_t task, const SelectionState& selection) const;

 private:
  const BenchmarkStore* store_;
  std::vector<std::string> initial_ids_;
  std::vector<Eigen::Index> initial_rows_;
  std::vector<EvalMatrix> initial_;
  std::vector<std::vector<double>> initial_perf_;
  std::vector<TaskProfile> profiles_;
  std::map<std::string, Eigen::Index, std::less<>> row_lookup_;
};

using SyntheticSink = std::function<void(const SyntheticBlock&)>;

// Throws on failure; predict_all captures per-task errors instead.
PredictionReport predict_task(const PredictionContext& ctx, std::size_t task,
                              const std::map<std::string, SelectionState>& selections,
                              const PredictorConfig& cfg, const SyntheticSink& sink = {});

std::vector<PredictionReport> predict_all(const PredictionContext& ctx,
                                          const std::map<std::string, SelectionState>& selections,
                                          const PredictorConfig& cfg,
                                          const SyntheticSink& sink = {});
std::vector<PredictionReport> predict_all(const BenchmarkStore& store, const Split& split,
                                          const std::map<std::string, SelectionState>& selections,
                                          const PredictorConfig& cfg);

}  // namespace cfeval
