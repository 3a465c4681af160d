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

#include "cfeval/report.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "csv.hpp"

namespace cfeval {

using nlohmann::json;

json number_json(double value) {
  if (!std::isfinite(value)) return nullptr;
  return value;
}

json selections_to_json(const std::string& model_id,
                        const std::map<std::string, SelectionState>& selections) {
  json tasks = json::array();
  for (const auto& [id, s] : selections) {
    json trace = json::array();
    for (const auto& step : s.trace) {
      trace.push_back({{"added_ids", step.added_ids},
                       {"similar_model_ids", step.similar_model_ids}});
    }
    tasks.push_back({{"task_id", id},
                     {"budget", s.budget},
                     {"probe_ids", s.probe_ids},
                     {"probe_values", s.probe_values},
                     {"similar_model_ids", s.similar_model_ids},
                     {"trace", std::move(trace)}});
  }
  return {{"model_id", model_id}, {"tasks", std::move(tasks)}};
}

std::map<std::string, SelectionState> selections_from_json(const json& doc,
                                                           std::string* model_id) {
  std::map<std::string, SelectionState> out;
  try {
    if (model_id) *model_id = doc.value("model_id", std::string());
    for (const auto& t : doc.at("tasks")) {
      SelectionState s;
      s.task_id = t.at("task_id").get<std::string>();
      s.budget = t.value("budget", std::size_t{0});
      s.probe_ids = t.at("probe_ids").get<std::vector<std::string>>();
      s.probe_values = t.value("probe_values", std::vector<double>{});
      s.similar_model_ids = t.at("similar_model_ids").get<std::vector<std::string>>();
      if (t.contains("trace")) {
        for (const auto& step : t.at("trace")) {
          s.trace.push_back({step.at("added_ids").get<std::vector<std::string>>(),
                             step.at("similar_model_ids").get<std::vector<std::string>>()});
        }
      }
      if (s.budget == 0) s.budget = s.probe_ids.size();
      const auto id = s.task_id;
      if (!out.emplace(id, std::move(s)).second) {
        throw DataError("selection report lists task '" + id + "' twice");
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed selection report: ") + e.what());
  }
  return out;
}

json predictions_to_json(const std::string& model_id, std::span<const PredictionReport> reports) {
  json tasks = json::array();
  for (const auto& r : reports) {
    json t{{"task_id", r.task_id}};
    if (r.error) {
      t["error"] = *r.error;
      t["numeric_error"] = r.numeric_error;
      tasks.push_back(std::move(t));
      continue;
    }
    t["p_hat"] = number_json(r.p_hat);
    t["rank_hat"] = r.rank_hat;
    t["components"] = {{"a_s", r.components.a_s},
                       {"a_synthetic", r.components.a_synthetic},
                       {"c0", r.components.c0},
                       {"c1", r.components.c1},
                       {"c2", r.components.c2}};
    t["counts"] = {{"n_selected", r.counts.n_selected},
                   {"n_unselected", r.counts.n_unselected},
                   {"n_synthetic", r.counts.n_synthetic},
                   {"n_filtered_by_tau1", r.counts.n_filtered_by_tau1},
                   {"n_item_cf", r.counts.n_item_cf},
                   {"n_user_cf", r.counts.n_user_cf}};
    t["tau3"] = r.tau3;
    t["mean_probe_importance"] = r.mean_probe_importance;
    t["source_task_ids"] = r.source_task_ids;
    json inst = json::array();
    for (const auto& i : r.instances) {
      inst.push_back({{"instance_id", i.instance_id},
                      {"branch", std::string(to_string(i.branch))},
                      {"prediction", i.prediction},
                      {"mean_similarity", i.mean_similarity}});
    }
    t["instances"] = std::move(inst);
    tasks.push_back(std::move(t));
  }
  return {{"model_id", model_id}, {"tasks", std::move(tasks)}};
}

json experiment_to_json(std::span<const ExperimentResult> results, bool with_cells,
                        bool with_timing) {
  json out = json::array();
  for (const auto& r : results) {
    json j{{"method", r.method},
           {"ratio", r.ratio},
           {"mae", number_json(r.mae)},
           {"weighted_mae", number_json(r.weighted_mae)},
           {"rank_mae", number_json(r.rank_mae)},
           {"failed_cells", r.failed_cells}};
    if (with_timing) {
      j["selection_seconds"] = r.selection_seconds;
      j["prediction_seconds"] = r.prediction_seconds;
      j["total_seconds"] = r.total_seconds;
    }
    if (with_cells) {
      json cells = json::array();
      for (const auto& c : r.cells) {
        json cj{{"seed", c.seed},         {"model_id", c.model_id},
                {"task_id", c.task_id},   {"p_true", c.p_true},
                {"p_hat", number_json(c.p_hat)}, {"rank_true", c.rank_true},
                {"rank_hat", c.rank_hat}, {"budget", c.budget},
                {"oracle_calls", c.oracle_calls}};
        if (c.error) cj["error"] = *c.error;
        cells.push_back(std::move(cj));
      }
      j["cells"] = std::move(cells);
    }
    out.push_back(std::move(j));
  }
  return out;
}

namespace {

std::string num(double v) { return std::isfinite(v) ? format_number(v) : "nan"; }

}  // namespace

void write_summary_csv(std::ostream& out, std::span<const ExperimentResult> results,
                       bool with_timing) {
  csv::Row header{"method", "ratio", "mae", "weighted_mae", "rank_mae"};
  if (with_timing) header.push_back("total_seconds");
  csv::write_row(out, header);
  for (const auto& r : results) {
    csv::Row row{r.method, num(r.ratio), num(r.mae), num(r.weighted_mae), num(r.rank_mae)};
    if (with_timing) row.push_back(num(r.total_seconds));
    csv::write_row(out, row);
  }
}

void write_cells_csv(std::ostream& out, std::span<const ExperimentResult> results) {
  csv::write_row(out, {"method", "ratio", "seed", "model_id", "task_id", "p_true", "p_hat",
                       "abs_error", "rank_true", "rank_hat", "budget", "oracle_calls", "error"});
  for (const auto& r : results) {
    for (const auto& c : r.cells) {
      csv::write_row(out, {r.method, num(r.ratio), std::to_string(c.seed), c.model_id, c.task_id,
                           num(c.p_true), c.error ? "nan" : num(c.p_hat),
                           c.error ? "nan" : num(c.abs_error()), std::to_string(c.rank_true),
                           std::to_string(c.rank_hat), std::to_string(c.budget),
                           std::to_string(c.oracle_calls), c.error.value_or("")});
    }
  }
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed json: " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace cfeval
