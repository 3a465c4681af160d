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

// Experiment orchestration.
//
// Every cell is one (method, ratio, seed, test model). The test model's full
// results stay inside the store; methods see them only through a counting
// oracle, and a cell fails unless each task was charged exactly its budget.
// Cells run on a worker pool and are merged in key order, so the worker
// count never changes results.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cfeval/baselines.hpp"
#include "cfeval/predictor.hpp"
#include "cfeval/selector.hpp"
#include "cfeval/store.hpp"

namespace cfeval {

double mae(std::span<const double> truth, std::span<const double> predicted);
// sum(err_m / r_m) / sum(1 / r_m); ranks must be >= 1.
double weighted_mae(std::span<const double> errors, std::span<const double> ranks);

// Reveals one store row, counting every revealed instance per task.
class StoreOracle : public TargetOracle {
 public:
  StoreOracle(const BenchmarkStore& store, std::string_view model_id);

  std::vector<double> query(const std::string& task_id,
                            std::span<const std::string> instance_ids) override;
  // Column-index form used by the baselines.
  std::vector<double> query_columns(std::size_t task, std::span<const Eigen::Index> columns);

  std::size_t calls(std::size_t task) const;
  bool repeated(std::size_t task) const;
  const std::string& model_id() const { return store_->models()[row_].model_id; }

 private:
  const BenchmarkStore* store_;
  std::size_t row_;
  mutable std::mutex mutex_;
  std::vector<std::vector<char>> seen_;
  std::vector<std::size_t> calls_;
  std::vector<char> repeated_;
};

struct ExperimentConfig {
  SelectorConfig selector;
  PredictorConfig predictor;
  ClusterConfig cluster;
  std::vector<double> ratios = {0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<std::uint64_t> seeds = {0};
  std::size_t workers = 1;
};

// Shared read-only state for a (store, split) pair.
class ExperimentContext {
 public:
  ExperimentContext(const BenchmarkStore& store, const Split& split);

  const BenchmarkStore& store() const { return prediction_.store(); }
  const PredictionContext& prediction() const { return prediction_; }
  const std::vector<std::string>& test_ids() const { return test_ids_; }
  // Mean true score of a store model on a task.
  double true_performance(std::size_t task, std::string_view model_id) const;

 private:
  PredictionContext prediction_;
  std::vector<std::string> test_ids_;
  std::vector<Eigen::VectorXd> row_means_;  // per task, roster order
};

struct TaskEstimate {
  std::string task_id;
  double p_hat = 0.0;
  std::size_t budget = 0;
  std::optional<std::string> error;
};

struct MethodOutput {
  std::vector<TaskEstimate> tasks;  // store order
  double selection_seconds = 0.0;
  double prediction_seconds = 0.0;
};

// A subset-evaluation method. run() must query the target only through the
// oracle and be a pure function of its arguments.
class Method {
 public:
  virtual ~Method() = default;
  virtual std::string name() const = 0;
  // Seeds collapse to one evaluation when false.
  virtual bool uses_seed() const = 0;
  virtual void prepare(const ExperimentContext& ctx, const ExperimentConfig& cfg);
  virtual MethodOutput run(const ExperimentContext& ctx, const ExperimentConfig& cfg,
                           StoreOracle& oracle, double ratio, std::uint64_t seed) const = 0;
};

class CfMethod : public Method {
 public:
  std::string name() const override { return "cf"; }
  bool uses_seed() const override { return false; }
  void prepare(const ExperimentContext& ctx, const ExperimentConfig& cfg) override;
  MethodOutput run(const ExperimentContext& ctx, const ExperimentConfig& cfg, StoreOracle& oracle,
                   double ratio, std::uint64_t seed) const override;

 private:
  std::vector<Eigen::VectorXd> base_scores_;
};

class RandomMethod : public Method {
 public:
  std::string name() const override { return "random"; }
  bool uses_seed() const override { return true; }
  MethodOutput run(const ExperimentContext& ctx, const ExperimentConfig& cfg, StoreOracle& oracle,
                   double ratio, std::uint64_t seed) const override;
};

class ClusterMethod : public Method {
 public:
  // Optional external features, one matrix (d x instances) per task id.
  explicit ClusterMethod(std::map<std::string, Eigen::MatrixXd> features = {})
      : features_(std::move(features)) {}
  std::string name() const override { return "cluster"; }
  bool uses_seed() const override { return true; }
  MethodOutput run(const ExperimentContext& ctx, const ExperimentConfig& cfg, StoreOracle& oracle,
                   double ratio, std::uint64_t seed) const override;

 private:
  // Clusterings do not depend on the target; cached per (ratio, seed, task).
  const ClusterModel& clustering(const ExperimentContext& ctx, const ExperimentConfig& cfg,
                                 double ratio, std::uint64_t seed, std::size_t task) const;

  std::map<std::string, Eigen::MatrixXd> features_;
  mutable std::mutex mutex_;
  mutable std::map<std::tuple<double, std::uint64_t, std::size_t>, ClusterModel> cache_;
};

// Replays externally produced estimates, keyed by (ratio, model, task).
// Queries nothing, so its cells carry budget 0.
class ExternalMethod : public Method {
 public:
  ExternalMethod(std::string name,
                 std::map<std::tuple<double, std::string, std::string>, double> estimates)
      : name_(std::move(name)), estimates_(std::move(estimates)) {}
  std::string name() const override { return name_; }
  bool uses_seed() const override { return false; }
  MethodOutput run(const ExperimentContext& ctx, const ExperimentConfig& cfg, StoreOracle& oracle,
                   double ratio, std::uint64_t seed) const override;

 private:
  std::string name_;
  std::map<std::tuple<double, std::string, std::string>, double> estimates_;
};

// CSV with header model_id,task_id,ratio,p_hat.
std::unique_ptr<Method> load_external_method(const std::string& name,
                                             const std::filesystem::path& path);

// "cf", "random" or "cluster".
std::unique_ptr<Method> make_method(std::string_view name,
                                    std::map<std::string, Eigen::MatrixXd> features = {});

struct CellRecord {
  std::uint64_t seed = 0;
  std::string model_id;
  std::string task_id;
  double p_true = 0.0;
  double p_hat = 0.0;
  std::size_t rank_true = 0;
  std::size_t rank_hat = 0;
  std::size_t budget = 0;
  std::size_t oracle_calls = 0;
  std::optional<std::string> error;

  double abs_error() const { return std::abs(p_hat - p_true); }
  double rank_error() const {
    return std::abs(static_cast<double>(rank_hat) - static_cast<double>(rank_true));
  }
};

struct ExperimentResult {
  std::string method;
  double ratio = 0.0;
  // Sorted by (seed, model_id, task_id).
  std::vector<CellRecord> cells;
  double mae = 0.0;
  double weighted_mae = 0.0;
  double rank_mae = 0.0;
  std::size_t failed_cells = 0;
  double selection_seconds = 0.0;
  double prediction_seconds = 0.0;
  double total_seconds = 0.0;
};

struct Aggregates {
  double mae = 0.0;
  double weighted_mae = 0.0;
  double rank_mae = 0.0;
  std::size_t failed = 0;
};

// Seed-averaged metrics over successful cells. The weighted form weights
// each test model's mean task error by 1 / (its rank among the test models
// by mean true score).
Aggregates aggregate(std::span<const CellRecord> cells);

std::vector<ExperimentResult> run_experiment(const ExperimentContext& ctx,
                                             std::span<Method* const> methods,
                                             const ExperimentConfig& cfg);
std::vector<ExperimentResult> run_experiment(const BenchmarkStore& store, const Split& split,
                                             std::span<Method* const> methods,
                                             const ExperimentConfig& cfg);

// Names accepted by set_sweep_parameter.
std::span<const std::string_view> sweep_parameters();
void set_sweep_parameter(ExperimentConfig& cfg, std::string_view name, double value);

struct SweepRow {
  std::string parameter;
  double value = 0.0;
  double mae = 0.0;
  double weighted_mae = 0.0;
  double rank_mae = 0.0;
  std::size_t failed_cells = 0;
};

// One-at-a-time sweep of the cf method around `base` at a single ratio.
std::vector<SweepRow> sweep(const ExperimentContext& ctx,
                            const std::vector<std::pair<std::string, std::vector<double>>>& grid,
                            double ratio, const ExperimentConfig& base);

struct DistancePair {
  std::string instance_id;
  std::string neighbor_id;
  double semantic_distance = 0.0;
  double result_distance = 0.0;
};

// For each instance, its nearest neighbour in `semantic` (columns are
// instances, ties to the lower index), paired with the Euclidean distance of
// the same two instances in `results`.
std::vector<DistancePair> export_distance_pairs(const Eigen::MatrixXd& results,
                                                const Eigen::MatrixXd& semantic,
                                                std::span<const std::string> instance_ids);

}  // namespace cfeval
