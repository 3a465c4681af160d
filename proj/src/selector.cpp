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

#include "cfeval/selector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cfeval {

void SelectorConfig::validate() const {
  if (!(sample_ratio > 0.0 && sample_ratio <= 1.0)) {
    throw ArgumentError("selector.sample_ratio must lie in (0,1]");
  }
  if (min_subset_size < 1) throw ArgumentError("selector.min_subset_size must be positive");
  if (!(initial_probe_fraction > 0.0 && initial_probe_fraction <= 1.0)) {
    throw ArgumentError("selector.initial_probe_fraction must lie in (0,1]");
  }
  if (n_similar < 1) throw ArgumentError("selector.n_similar must be positive");
  if (!(weight_alpha >= 0.0 && weight_alpha <= 1.0)) {
    throw ArgumentError("selector.weight_alpha must lie in [0,1]");
  }
  if (max_iterations < 1) throw ArgumentError("selector.max_iterations must be positive");
}

std::size_t selection_budget(std::size_t task_size, const SelectorConfig& cfg) {
  if (task_size < cfg.min_subset_size) return task_size;
  const auto scaled = static_cast<std::size_t>(
      std::round(cfg.sample_ratio * static_cast<double>(task_size)));
  return std::min(task_size, std::max(cfg.min_subset_size, scaled));
}

std::size_t initial_probe_size(std::size_t budget, const SelectorConfig& cfg) {
  if (budget == 0) return 0;
  const auto k = static_cast<std::size_t>(
      std::ceil(cfg.initial_probe_fraction * static_cast<double>(budget) - 1e-9));
  return std::clamp<std::size_t>(k, 1, budget);
}

std::size_t instances_per_iteration(std::size_t budget, const SelectorConfig& cfg) {
  if (cfg.q_select > 0) return cfg.q_select;
  return std::max<std::size_t>(1, budget / 10);
}

// ---------------------------------------------------------------------------

std::vector<double> RecordedOracle::query(const std::string& task_id,
                                          std::span<const std::string> instance_ids) {
  auto task = results_.values.find(task_id);
  if (task == results_.values.end()) {
    throw DataError("target results have no task '" + task_id + "'");
  }
  std::vector<double> out;
  out.reserve(instance_ids.size());
  for (const auto& id : instance_ids) {
    auto it = task->second.find(id);
    if (it == task->second.end()) {
      throw DataError("target results for task '" + task_id + "' lack instance '" + id + "'");
    }
    out.push_back(it->second);
  }
  std::lock_guard lock(mutex_);
  calls_[task_id] += instance_ids.size();
  auto& seen = seen_[task_id];
  for (const auto& id : instance_ids) ++seen[id];
  return out;
}

std::size_t RecordedOracle::calls(const std::string& task_id) const {
  std::lock_guard lock(mutex_);
  auto it = calls_.find(task_id);
  return it == calls_.end() ? 0 : it->second;
}

bool RecordedOracle::repeated(const std::string& task_id) const {
  std::lock_guard lock(mutex_);
  auto it = seen_.find(task_id);
  if (it == seen_.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(),
                     [](const auto& kv) { return kv.second > 1; });
}

std::size_t RecordedOracle::total_calls() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& [_, c] : calls_) n += c;
  return n;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> ids_of(const std::vector<std::string>& names,
                                std::span<const Eigen::Index> idx) {
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(names[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<Eigen::Index> column_positions(const EvalMatrix& m,
                                           std::span<const std::string> ids) {
  std::map<std::string_view, Eigen::Index> lookup;
  for (std::size_t c = 0; c < m.instance_ids.size(); ++c) {
    lookup.emplace(m.instance_ids[c], static_cast<Eigen::Index>(c));
  }
  std::vector<Eigen::Index> out;
  for (const auto& id : ids) {
    auto it = lookup.find(id);
    if (it == lookup.end()) {
      throw DataError("task '" + m.task_id + "': unknown instance '" + id + "'");
    }
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

std::vector<Eigen::Index> similar_model_rows(const Eigen::MatrixXd& values,
                                             std::span<const Eigen::Index> columns,
                                             std::span<const double> target_values,
                                             std::size_t n_similar, bool centered) {
  if (columns.empty()) throw ArgumentError("find_similar_models: empty probe set");
  if (columns.size() != target_values.size()) {
    throw ArgumentError("find_similar_models: probe ids and values differ in length");
  }
  if (n_similar > static_cast<std::size_t>(values.rows())) {
    throw ArgumentError("find_similar_models: n_similar exceeds the number of initial models");
  }
  std::vector<Eigen::Index> cols(columns.begin(), columns.end());
  Eigen::MatrixXd rows = values(Eigen::all, cols);
  Eigen::VectorXd target =
      Eigen::Map<const Eigen::VectorXd>(target_values.data(),
                                        static_cast<Eigen::Index>(target_values.size()));
  if (centered) {
    rows.colwise() -= rows.rowwise().mean();
    target.array() -= target.mean();
  }
  const double target_norm = target.norm();
  Eigen::VectorXd sim(rows.rows());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const double n = rows.row(r).norm();
    sim(r) = (n == 0.0 || target_norm == 0.0) ? 0.0 : rows.row(r).dot(target) / (n * target_norm);
  }
  return top_k_indices(sim, n_similar);
}

std::vector<std::string> find_similar_models(const EvalMatrix& initial,
                                             std::span<const std::string> probe_ids,
                                             std::span<const double> probe_values,
                                             std::size_t n_similar, bool centered) {
  const auto cols = column_positions(initial, probe_ids);
  const auto rows = similar_model_rows(initial.values, cols, probe_values, n_similar, centered);
  return ids_of(initial.model_ids, rows);
}

std::vector<std::string> initial_probe(const EvalMatrix& initial, const SelectorConfig& cfg) {
  cfg.validate();
  const auto budget = selection_budget(initial.instance_ids.size(), cfg);
  if (budget == 0) throw ArgumentError("initial_probe: empty task");
  const Eigen::VectorXd scores = column_importance(initial.values, cfg.importance);
  return ids_of(initial.instance_ids, top_k_indices(scores, initial_probe_size(budget, cfg)));
}

SelectionState select_for_target(const EvalMatrix& initial, TargetOracle& oracle,
                                 const SelectorConfig& cfg) {
  const Eigen::VectorXd base = column_importance(initial.values, cfg.importance);
  return select_for_target(initial, base, oracle, cfg);
}

SelectionState select_for_target(const EvalMatrix& initial, const Eigen::VectorXd& base_scores,
                                 TargetOracle& oracle, const SelectorConfig& cfg) {
  cfg.validate();
  const auto n_instances = initial.instance_ids.size();
  if (static_cast<std::size_t>(base_scores.size()) != n_instances) {
    throw ArgumentError("select_for_target: base scores do not match the task");
  }
  const auto n_models = static_cast<std::size_t>(initial.values.rows());
  const bool personalized = cfg.weight_alpha < 1.0;
  if (personalized && cfg.n_similar < 2 && cfg.importance == ImportanceKind::kVariance) {
    throw ArgumentError("select_for_target: variance importance over the similar set needs "
                        "n_similar >= 2");
  }
  if (cfg.n_similar > n_models) {
    throw ArgumentError("select_for_target: n_similar (" + std::to_string(cfg.n_similar) +
                        ") exceeds the number of initial models (" +
                        std::to_string(n_models) + ")");
  }

  SelectionState state;
  state.task_id = initial.task_id;
  state.budget = selection_budget(n_instances, cfg);
  if (state.budget == 0) return state;

  std::vector<bool> taken(n_instances, false);
  auto reveal = [&](const std::vector<Eigen::Index>& cols) -> std::vector<std::string> {
    auto ids = ids_of(initial.instance_ids, cols);
    const auto values = oracle.query(state.task_id, ids);
    if (values.size() != ids.size()) {
      throw DataError("task '" + state.task_id + "': oracle returned " +
                      std::to_string(values.size()) + " values for " +
                      std::to_string(ids.size()) + " instances");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i]) || values[i] < 0.0 || values[i] > 1.0) {
        throw DataError("task '" + state.task_id + "' column '" + ids[i] +
                        "': oracle value out of range [0,1]");
      }
      taken[static_cast<std::size_t>(cols[i])] = true;
      state.probe_columns.push_back(cols[i]);
      state.probe_ids.push_back(ids[i]);
      state.probe_values.push_back(values[i]);
    }
    return ids;
  };
  auto similar_now = [&] {
    return similar_model_rows(initial.values, state.probe_columns, state.probe_values,
                              cfg.n_similar, cfg.center_similarity);
  };

  const auto first = top_k_indices(base_scores, initial_probe_size(state.budget, cfg), &taken);
  state.trace.push_back({reveal(first), {}});

  const auto step = instances_per_iteration(state.budget, cfg);
  std::vector<Eigen::Index> similar;
  bool have_similar = false;
  std::size_t iteration = 0;
  while (state.probe_columns.size() < state.budget) {
    const auto remaining = state.budget - state.probe_columns.size();
    if (!personalized || iteration >= cfg.max_iterations) {
      // Base scores only. Past max_iterations the rest is taken at once.
      const bool valve = iteration >= cfg.max_iterations;
      const auto take = valve ? remaining : std::min(step, remaining);
      auto cols = top_k_indices(base_scores, take, &taken);
      IterationRecord rec;
      if (have_similar) rec.similar_model_ids = ids_of(initial.model_ids, similar);
      rec.added_ids = reveal(cols);
      state.trace.push_back(std::move(rec));
      ++iteration;
      continue;
    }
    if (!have_similar || !cfg.freeze_similar) {
      similar = similar_now();
      have_similar = true;
    }
    const Eigen::VectorXd similar_scores =
        column_importance(initial.values(similar, Eigen::all), cfg.importance);
    Eigen::VectorXd combined;
    if (cfg.weight_alpha == 0.0) {
      combined = similar_scores;
    } else {
      combined = cfg.weight_alpha * base_scores + (1.0 - cfg.weight_alpha) * similar_scores;
    }
    auto cols = top_k_indices(combined, std::min(step, remaining), &taken);
    IterationRecord rec;
    rec.similar_model_ids = ids_of(initial.model_ids, similar);
    rec.added_ids = reveal(cols);
    state.trace.push_back(std::move(rec));
    ++iteration;
  }

  if (!(cfg.freeze_similar && have_similar)) similar = similar_now();
  state.similar_rows = similar;
  state.similar_model_ids = ids_of(initial.model_ids, similar);
  return state;
}

}  // namespace cfeval
