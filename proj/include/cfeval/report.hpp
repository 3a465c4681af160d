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

// JSON and CSV encodings of selections, prediction reports and experiment
// results.
//
// Selection report:
//   {"model_id": str, "tasks": [{"task_id", "budget", "probe_ids",
//    "probe_values", "similar_model_ids",
//    "trace": [{"added_ids", "similar_model_ids"}]}]}
//
// Prediction report:
//   {"model_id": str, "tasks": [{"task_id", "p_hat", "rank_hat",
//    "components": {"a_s", "a_synthetic", "c0", "c1", "c2"},
//    "counts": {"n_selected", "n_unselected", "n_synthetic",
//               "n_filtered_by_tau1", "n_item_cf", "n_user_cf"},
//    "tau3", "mean_probe_importance", "source_task_ids",
//    "instances": [{"instance_id", "branch", "prediction",
//                   "mean_similarity"}], "error"?}]}

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfeval/harness.hpp"
#include "cfeval/predictor.hpp"
#include "cfeval/selector.hpp"

namespace cfeval {

// Floats are emitted in shortest round-trip form; non-finite values become
// null.
nlohmann::json number_json(double value);

nlohmann::json selections_to_json(const std::string& model_id,
                                  const std::map<std::string, SelectionState>& selections);
// Returns selections keyed by task id; sets `model_id` when non-null.
std::map<std::string, SelectionState> selections_from_json(const nlohmann::json& doc,
                                                           std::string* model_id = nullptr);

nlohmann::json predictions_to_json(const std::string& model_id,
                                   std::span<const PredictionReport> reports);

nlohmann::json experiment_to_json(std::span<const ExperimentResult> results, bool with_cells,
                                  bool with_timing);

// Header method,ratio,mae,weighted_mae,rank_mae[,total_seconds].
void write_summary_csv(std::ostream& out, std::span<const ExperimentResult> results,
                       bool with_timing);
// Header method,ratio,seed,model_id,task_id,p_true,p_hat,abs_error,rank_true,
// rank_hat,budget,oracle_calls,error.
void write_cells_csv(std::ostream& out, std::span<const ExperimentResult> results);

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cfeval
