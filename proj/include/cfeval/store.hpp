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

// Benchmark data model: models, tasks and their model x instance result
// matrices, plus ingestion, persistence and release-order splits.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cfeval/errors.hpp"

namespace cfeval {

enum class MetricKind { kContinuous, kBinary };

std::string_view to_string(MetricKind kind);
MetricKind parse_metric_kind(std::string_view text);

struct ModelRecord {
  std::string model_id;
  std::int64_t release_index = 0;
  std::string display_name;

  bool operator==(const ModelRecord&) const = default;
};

struct TaskRecord {
  std::string task_id;
  std::vector<std::string> instance_ids;
  MetricKind metric_kind = MetricKind::kContinuous;

  bool operator==(const TaskRecord&) const = default;
};

// Rows are models, columns are instances; every entry is finite and in [0,1].
struct EvalMatrix {
  std::string task_id;
  std::vector<std::string> model_ids;
  std::vector<std::string> instance_ids;
  Eigen::MatrixXd values;

  bool operator==(const EvalMatrix& other) const {
    return task_id == other.task_id && model_ids == other.model_ids &&
           instance_ids == other.instance_ids &&
           values.rows() == other.values.rows() &&
           values.cols() == other.values.cols() && values == other.values;
  }
};

struct Split {
  std::vector<std::string> initial_model_ids;
  std::vector<std::string> test_model_ids;

  bool operator==(const Split&) const = default;
};

// Immutable after construction. Models are kept sorted by release order and
// every matrix has exactly one row per model, in roster order.
class BenchmarkStore {
 public:
  BenchmarkStore() = default;

  // Validates all invariants; throws DataError with task/row/column context.
  // Matrix rows are reordered into roster order. Release-index ties are
  // broken by model_id and the indices renumbered densely.
  static BenchmarkStore create(std::vector<ModelRecord> models,
                               std::vector<TaskRecord> tasks,
                               std::vector<EvalMatrix> matrices);

  const std::vector<ModelRecord>& models() const { return models_; }
  const std::vector<TaskRecord>& tasks() const { return tasks_; }
  const std::vector<EvalMatrix>& matrices() const { return matrices_; }

  std::size_t num_models() const { return models_.size(); }
  std::size_t num_tasks() const { return tasks_.size(); }

  std::size_t model_index(std::string_view model_id) const;
  std::size_t task_index(std::string_view task_id) const;
  bool has_model(std::string_view model_id) const;
  bool has_task(std::string_view task_id) const;

  const TaskRecord& task(std::string_view task_id) const {
    return tasks_[task_index(task_id)];
  }
  const EvalMatrix& matrix(std::string_view task_id) const {
    return matrices_[task_index(task_id)];
  }

  bool operator==(const BenchmarkStore& other) const {
    return models_ == other.models_ && tasks_ == other.tasks_ &&
           matrices_ == other.matrices_;
  }

 private:
  std::vector<ModelRecord> models_;
  std::vector<TaskRecord> tasks_;
  std::vector<EvalMatrix> matrices_;
  std::map<std::string, std::size_t, std::less<>> model_lookup_;
  std::map<std::string, std::size_t, std::less<>> task_lookup_;
};

enum class StoreFormat { kCsvDir, kJson };

// Picks kJson for regular files ending in .json, kCsvDir otherwise.
StoreFormat detect_store_format(const std::filesystem::path& path);

BenchmarkStore load_store(const std::filesystem::path& path,
                          StoreFormat format);
BenchmarkStore load_store(const std::filesystem::path& path);
void save_store(const BenchmarkStore& store, const std::filesystem::path& path,
                StoreFormat format);

// |initial| = round(initial_fraction * n) clamped to [1, n-1], half away from
// zero; the earliest released models form the initial set.
Split split_by_release(const BenchmarkStore& store, double initial_fraction);

void validate_split(const BenchmarkStore& store, const Split& split);
Split load_split(const std::filesystem::path& path);
void save_split(const Split& split, const std::filesystem::path& path);

// Copies the requested rows and columns in the requested order.
EvalMatrix task_submatrix(const BenchmarkStore& store, std::string_view task_id,
                          std::span<const std::string> model_ids,
                          std::span<const std::string> instance_ids);

// Row positions of the given models within a task matrix.
std::vector<Eigen::Index> model_rows(const BenchmarkStore& store,
                                     std::span<const std::string> model_ids);

// Per-task single-row results for one model, keyed by task id. This is the
// replayable target format: a directory of task_<id>.csv files with one body
// row each.
struct TargetResults {
  std::string model_id;
  std::map<std::string, std::map<std::string, double>, std::less<>> values;
};

TargetResults load_target_results(const std::filesystem::path& dir);
void save_target_results(const TargetResults& results,
                         const std::filesystem::path& dir);
// Extracts one store model's rows as target results.
TargetResults target_results_from_store(const BenchmarkStore& store,
                                        std::string_view model_id);

// Shortest decimal text that reads back as the same double.
std::string format_number(double value);

}  // namespace cfeval
