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

#include "cfeval/store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "csv.hpp"

namespace cfeval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kTaskFilePrefix = "task_";

std::string squote(std::string_view s) { return "'" + std::string(s) + "'"; }

void check_identifier(std::string_view id, std::string_view what) {
  if (id.empty()) throw DataError("empty " + std::string(what) + " id");
  if (id.find_first_of("/\\") != std::string_view::npos || id == "." || id == "..") {
    throw DataError(std::string(what) + " id " + squote(id) +
                    " contains a path separator");
  }
}

void check_value(double v, MetricKind kind, std::string_view task_id,
                 std::string_view row, std::string_view column) {
  auto where = [&] {
    return "task " + squote(task_id) + " row " + squote(row) + " column " +
           squote(column);
  };
  if (!std::isfinite(v)) throw DataError(where() + ": non-finite value");
  if (v < 0.0 || v > 1.0) {
    throw DataError(where() + ": value out of range [0,1] (" +
                    format_number(v) + ")");
  }
  if (kind == MetricKind::kBinary && v != 0.0 && v != 1.0) {
    throw DataError(where() + ": non-binary value in binary task (" +
                    format_number(v) + ")");
  }
}

}  // namespace

std::string_view to_string(MetricKind kind) {
  return kind == MetricKind::kBinary ? "binary" : "continuous";
}

MetricKind parse_metric_kind(std::string_view text) {
  if (text == "binary") return MetricKind::kBinary;
  if (text == "continuous") return MetricKind::kContinuous;
  throw DataError("unknown metric_kind " + squote(text) +
                  " (expected continuous or binary)");
}

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw NumericError("cannot format number");
  return std::string(buf, ptr);
}

BenchmarkStore BenchmarkStore::create(std::vector<ModelRecord> models,
                                      std::vector<TaskRecord> tasks,
                                      std::vector<EvalMatrix> matrices) {
  BenchmarkStore store;

  for (const auto& m : models) {
    check_identifier(m.model_id, "model");
    if (m.release_index < 0) {
      throw DataError("model " + squote(m.model_id) +
                      ": release_index must be non-negative");
    }
  }
  std::sort(models.begin(), models.end(), [](const auto& a, const auto& b) {
    return std::tie(a.release_index, a.model_id) <
           std::tie(b.release_index, b.model_id);
  });
  bool ties = false;
  std::set<std::string_view> seen_models;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (!seen_models.insert(models[i].model_id).second) {
      throw DataError("duplicate model id " + squote(models[i].model_id));
    }
    if (i > 0 && models[i].release_index == models[i - 1].release_index) ties = true;
  }
  if (ties) {
    for (std::size_t i = 0; i < models.size(); ++i) {
      models[i].release_index = static_cast<std::int64_t>(i);
    }
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    store.model_lookup_.emplace(models[i].model_id, i);
  }

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    check_identifier(task.task_id, "task");
    if (!store.task_lookup_.emplace(task.task_id, t).second) {
      throw DataError("duplicate task id " + squote(task.task_id));
    }
    std::set<std::string_view> ids;
    for (const auto& id : task.instance_ids) {
      if (id.empty()) {
        throw DataError("task " + squote(task.task_id) + ": empty instance id");
      }
      if (!ids.insert(id).second) {
        throw DataError("task " + squote(task.task_id) +
                        ": duplicate instance id " + squote(id));
      }
    }
  }

  std::vector<std::optional<EvalMatrix>> ordered(tasks.size());
  for (auto& mat : matrices) {
    auto it = store.task_lookup_.find(mat.task_id);
    if (it == store.task_lookup_.end()) {
      throw DataError("matrix references unknown task " + squote(mat.task_id));
    }
    const auto& task = tasks[it->second];
    if (ordered[it->second]) {
      throw DataError("duplicate matrix for task " + squote(mat.task_id));
    }
    if (mat.instance_ids != task.instance_ids) {
      throw DataError("task " + squote(mat.task_id) +
                      ": matrix columns do not match the task's instance list");
    }
    const auto rows = static_cast<Eigen::Index>(mat.model_ids.size());
    const auto cols = static_cast<Eigen::Index>(mat.instance_ids.size());
    if (mat.values.rows() != rows || mat.values.cols() != cols) {
      throw DataError("task " + squote(mat.task_id) + ": dimension mismatch (" +
                      std::to_string(mat.values.rows()) + "x" +
                      std::to_string(mat.values.cols()) + " values for " +
                      std::to_string(rows) + " models x " +
                      std::to_string(cols) + " instances)");
    }
    if (mat.model_ids.size() != models.size()) {
      throw DataError("task " + squote(mat.task_id) + ": has " +
                      std::to_string(mat.model_ids.size()) + " model rows, roster has " +
                      std::to_string(models.size()) + " (missing entries are not allowed)");
    }
    Eigen::MatrixXd values(rows, cols);
    std::vector<bool> filled(models.size(), false);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto& mid = mat.model_ids[static_cast<std::size_t>(r)];
      auto m = store.model_lookup_.find(mid);
      if (m == store.model_lookup_.end()) {
        throw DataError("task " + squote(mat.task_id) + " row " + squote(mid) +
                        ": model not in roster");
      }
      if (filled[m->second]) {
        throw DataError("task " + squote(mat.task_id) + " row " + squote(mid) +
                        ": duplicate model row");
      }
      filled[m->second] = true;
      for (Eigen::Index c = 0; c < cols; ++c) {
        check_value(mat.values(r, c), task.metric_kind, mat.task_id, mid,
                    mat.instance_ids[static_cast<std::size_t>(c)]);
      }
      values.row(static_cast<Eigen::Index>(m->second)) = mat.values.row(r);
    }
    EvalMatrix out;
    out.task_id = mat.task_id;
    out.instance_ids = std::move(mat.instance_ids);
    out.model_ids.reserve(models.size());
    for (const auto& m : models) out.model_ids.push_back(m.model_id);
    out.values = std::move(values);
    ordered[it->second] = std::move(out);
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (!ordered[t]) {
      throw DataError("task " + squote(tasks[t].task_id) + " has no matrix");
    }
    store.matrices_.push_back(std::move(*ordered[t]));
  }
  store.models_ = std::move(models);
  store.tasks_ = std::move(tasks);
  return store;
}

std::size_t BenchmarkStore::model_index(std::string_view model_id) const {
  auto it = model_lookup_.find(model_id);
  if (it == model_lookup_.end()) throw DataError("unknown model " + squote(model_id));
  return it->second;
}

std::size_t BenchmarkStore::task_index(std::string_view task_id) const {
  auto it = task_lookup_.find(task_id);
  if (it == task_lookup_.end()) throw DataError("unknown task " + squote(task_id));
  return it->second;
}

bool BenchmarkStore::has_model(std::string_view model_id) const {
  return model_lookup_.find(model_id) != model_lookup_.end();
}

bool BenchmarkStore::has_task(std::string_view task_id) const {
  return task_lookup_.find(task_id) != task_lookup_.end();
}

// ---------------------------------------------------------------------------
// csv-dir format

namespace {

std::vector<csv::Row> read_table(const fs::path& path,
                                 const std::vector<std::string>& header) {
  auto rows = csv::read_file(path);
  if (rows.empty()) throw DataError(path.string() + ": empty file");
  if (rows.front() != header) {
    std::string want;
    for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
    throw DataError(path.string() + ": expected header '" + want + "'");
  }
  rows.erase(rows.begin());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(i + 2) +
                      " has " + std::to_string(rows[i].size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
  }
  return rows;
}

struct MatrixFile {
  std::vector<std::string> instance_ids;
  std::vector<std::string> model_ids;
  Eigen::MatrixXd values;
};

MatrixFile read_matrix_file(const fs::path& path, std::string_view task_id) {
  auto rows = csv::read_file(path);
  if (rows.empty()) throw DataError(path.string() + ": empty file");
  const auto& header = rows.front();
  if (header.empty() || header.front() != "model_id") {
    throw DataError(path.string() + ": header must start with model_id");
  }
  MatrixFile out;
  out.instance_ids.assign(header.begin() + 1, header.end());
  const auto n_rows = static_cast<Eigen::Index>(rows.size() - 1);
  const auto n_cols = static_cast<Eigen::Index>(out.instance_ids.size());
  out.values.resize(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r + 1)];
    if (row.size() != header.size()) {
      throw DataError("task " + squote(task_id) + " (" + path.string() + ") row " +
                      std::to_string(r + 2) + ": dimension mismatch, " +
                      std::to_string(row.size()) + " fields for " +
                      std::to_string(header.size()) + " header columns");
    }
    out.model_ids.push_back(row.front());
    for (Eigen::Index c = 0; c < n_cols; ++c) {
      const std::string context = "task " + squote(task_id) + " row " +
                                  squote(row.front()) + " column " +
                                  squote(out.instance_ids[static_cast<std::size_t>(c)]);
      out.values(r, c) = csv::parse_double(row[static_cast<std::size_t>(c + 1)], context);
    }
  }
  return out;
}

void write_matrix_file(const fs::path& path, const std::vector<std::string>& model_ids,
                       const std::vector<std::string>& instance_ids,
                       const Eigen::MatrixXd& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  csv::Row header{"model_id"};
  header.insert(header.end(), instance_ids.begin(), instance_ids.end());
  csv::write_row(out, header);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    csv::Row row{model_ids[static_cast<std::size_t>(r)]};
    for (Eigen::Index c = 0; c < values.cols(); ++c) row.push_back(format_number(values(r, c)));
    csv::write_row(out, row);
  }
}

BenchmarkStore load_csv_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(dir.string() + ": not a directory");
  std::vector<ModelRecord> models;
  for (const auto& row :
       read_table(dir / "roster.csv", {"model_id", "release_index", "display_name"})) {
    ModelRecord m;
    m.model_id = row[0];
    m.release_index = csv::parse_integer(row[1], "roster.csv model " + squote(row[0]));
    m.display_name = row[2];
    models.push_back(std::move(m));
  }

  std::vector<TaskRecord> tasks;
  std::vector<EvalMatrix> matrices;
  std::set<std::string> listed;
  for (const auto& row : read_table(dir / "tasks.csv", {"task_id", "metric_kind"})) {
    check_identifier(row[0], "task");
    TaskRecord task;
    task.task_id = row[0];
    task.metric_kind = parse_metric_kind(row[1]);
    listed.insert(task.task_id);
    const auto path = dir / (std::string(kTaskFilePrefix) + task.task_id + ".csv");
    if (!fs::exists(path)) {
      throw DataError("task " + squote(task.task_id) + ": missing file " + path.string());
    }
    auto file = read_matrix_file(path, task.task_id);
    task.instance_ids = file.instance_ids;
    EvalMatrix mat{task.task_id, std::move(file.model_ids), std::move(file.instance_ids),
                   std::move(file.values)};
    tasks.push_back(std::move(task));
    matrices.push_back(std::move(mat));
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with(kTaskFilePrefix) && entry.path().extension() == ".csv") {
      const auto id = name.substr(kTaskFilePrefix.size(),
                                  name.size() - kTaskFilePrefix.size() - 4);
      if (!listed.count(id)) {
        throw DataError(entry.path().string() + ": task not listed in tasks.csv");
      }
    }
  }
  return BenchmarkStore::create(std::move(models), std::move(tasks), std::move(matrices));
}

void save_csv_dir(const BenchmarkStore& store, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "roster.csv", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "roster.csv").string());
    csv::write_row(out, {"model_id", "release_index", "display_name"});
    for (const auto& m : store.models()) {
      csv::write_row(out, {m.model_id, std::to_string(m.release_index), m.display_name});
    }
  }
  {
    std::ofstream out(dir / "tasks.csv", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "tasks.csv").string());
    csv::write_row(out, {"task_id", "metric_kind"});
    for (const auto& t : store.tasks()) {
      csv::write_row(out, {t.task_id, std::string(to_string(t.metric_kind))});
    }
  }
  for (const auto& mat : store.matrices()) {
    write_matrix_file(dir / (std::string(kTaskFilePrefix) + mat.task_id + ".csv"),
                      mat.model_ids, mat.instance_ids, mat.values);
  }
}

// ---------------------------------------------------------------------------
// json format

template <typename T>
T get_field(const json& j, const char* key, std::string_view where) {
  if (!j.is_object() || !j.contains(key)) {
    throw DataError(std::string(where) + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string(where) + ": field '" + key + "': " + e.what());
  }
}

BenchmarkStore load_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed json: " + e.what());
  }
  std::vector<ModelRecord> models;
  for (const auto& m : get_field<json>(doc, "models", "store")) {
    ModelRecord rec;
    rec.model_id = get_field<std::string>(m, "model_id", "model");
    rec.release_index = get_field<std::int64_t>(m, "release_index", rec.model_id);
    rec.display_name = m.value("display_name", std::string());
    models.push_back(std::move(rec));
  }
  std::vector<TaskRecord> tasks;
  for (const auto& t : get_field<json>(doc, "tasks", "store")) {
    TaskRecord rec;
    rec.task_id = get_field<std::string>(t, "task_id", "task");
    rec.instance_ids = get_field<std::vector<std::string>>(t, "instance_ids", rec.task_id);
    rec.metric_kind = parse_metric_kind(get_field<std::string>(t, "metric_kind", rec.task_id));
    tasks.push_back(std::move(rec));
  }
  std::vector<EvalMatrix> matrices;
  for (const auto& m : get_field<json>(doc, "matrices", "store")) {
    EvalMatrix mat;
    mat.task_id = get_field<std::string>(m, "task_id", "matrix");
    const std::string where = "task " + squote(mat.task_id);
    mat.model_ids = get_field<std::vector<std::string>>(m, "model_ids", where);
    if (m.contains("instance_ids")) {
      mat.instance_ids = get_field<std::vector<std::string>>(m, "instance_ids", where);
    } else {
      for (const auto& t : tasks) {
        if (t.task_id == mat.task_id) mat.instance_ids = t.instance_ids;
      }
    }
    const auto rows = get_field<std::vector<std::vector<double>>>(m, "values", where);
    if (rows.size() != mat.model_ids.size()) {
      throw DataError(where + ": dimension mismatch, " + std::to_string(rows.size()) +
                      " value rows for " + std::to_string(mat.model_ids.size()) + " models");
    }
    const auto cols = static_cast<Eigen::Index>(mat.instance_ids.size());
    mat.values.resize(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != cols) {
        throw DataError(where + " row " + squote(mat.model_ids[r]) +
                        ": dimension mismatch, " + std::to_string(rows[r].size()) +
                        " values for " + std::to_string(cols) + " instances");
      }
      for (Eigen::Index c = 0; c < cols; ++c) {
        mat.values(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
      }
    }
    matrices.push_back(std::move(mat));
  }
  return BenchmarkStore::create(std::move(models), std::move(tasks), std::move(matrices));
}

void save_json(const BenchmarkStore& store, const fs::path& path) {
  json doc;
  doc["models"] = json::array();
  for (const auto& m : store.models()) {
    doc["models"].push_back({{"model_id", m.model_id},
                             {"release_index", m.release_index},
                             {"display_name", m.display_name}});
  }
  doc["tasks"] = json::array();
  for (const auto& t : store.tasks()) {
    doc["tasks"].push_back({{"task_id", t.task_id},
                            {"instance_ids", t.instance_ids},
                            {"metric_kind", std::string(to_string(t.metric_kind))}});
  }
  doc["matrices"] = json::array();
  for (const auto& mat : store.matrices()) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < mat.values.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < mat.values.cols(); ++c) row.push_back(mat.values(r, c));
      rows.push_back(std::move(row));
    }
    doc["matrices"].push_back({{"task_id", mat.task_id},
                               {"model_ids", mat.model_ids},
                               {"instance_ids", mat.instance_ids},
                               {"values", std::move(rows)}});
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

}  // namespace

StoreFormat detect_store_format(const fs::path& path) {
  if (path.extension() == ".json" && !fs::is_directory(path)) return StoreFormat::kJson;
  return StoreFormat::kCsvDir;
}

BenchmarkStore load_store(const fs::path& path, StoreFormat format) {
  if (!fs::exists(path)) throw DataError(path.string() + ": no such file or directory");
  return format == StoreFormat::kJson ? load_json(path) : load_csv_dir(path);
}

BenchmarkStore load_store(const fs::path& path) {
  return load_store(path, detect_store_format(path));
}

void save_store(const BenchmarkStore& store, const fs::path& path, StoreFormat format) {
  if (format == StoreFormat::kJson) {
    save_json(store, path);
  } else {
    save_csv_dir(store, path);
  }
}

// ---------------------------------------------------------------------------
// splits and extraction

Split split_by_release(const BenchmarkStore& store, double initial_fraction) {
  const auto n = store.num_models();
  if (n < 2) throw ArgumentError("split_by_release needs at least 2 models");
  if (!(initial_fraction > 0.0 && initial_fraction < 1.0)) {
    throw ArgumentError("initial_fraction must lie in (0,1)");
  }
  auto k = static_cast<long long>(std::round(initial_fraction * static_cast<double>(n)));
  k = std::clamp<long long>(k, 1, static_cast<long long>(n) - 1);
  Split split;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = static_cast<long long>(i) < k ? split.initial_model_ids : split.test_model_ids;
    dst.push_back(store.models()[i].model_id);
  }
  return split;
}

void validate_split(const BenchmarkStore& store, const Split& split) {
  if (split.initial_model_ids.empty()) throw DataError("split has no initial models");
  std::set<std::string_view> seen;
  std::int64_t max_initial = -1;
  for (const auto& id : split.initial_model_ids) {
    if (!seen.insert(id).second) throw DataError("split lists model " + squote(id) + " twice");
    max_initial = std::max(max_initial, store.models()[store.model_index(id)].release_index);
  }
  for (const auto& id : split.test_model_ids) {
    if (!seen.insert(id).second) throw DataError("split lists model " + squote(id) + " twice");
    if (store.models()[store.model_index(id)].release_index <= max_initial) {
      throw DataError("test model " + squote(id) +
                      " is not released after every initial model");
    }
  }
}

Split load_split(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    const auto doc = json::parse(in);
    Split split;
    split.initial_model_ids = get_field<std::vector<std::string>>(doc, "initial_model_ids", "split");
    split.test_model_ids = get_field<std::vector<std::string>>(doc, "test_model_ids", "split");
    return split;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed json: " + e.what());
  }
}

void save_split(const Split& split, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const json doc{{"initial_model_ids", split.initial_model_ids},
                 {"test_model_ids", split.test_model_ids}};
  out << doc.dump(1) << '\n';
}

std::vector<Eigen::Index> model_rows(const BenchmarkStore& store,
                                     std::span<const std::string> model_ids) {
  std::vector<Eigen::Index> rows;
  rows.reserve(model_ids.size());
  for (const auto& id : model_ids) {
    rows.push_back(static_cast<Eigen::Index>(store.model_index(id)));
  }
  return rows;
}

EvalMatrix task_submatrix(const BenchmarkStore& store, std::string_view task_id,
                          std::span<const std::string> model_ids,
                          std::span<const std::string> instance_ids) {
  const auto& mat = store.matrix(task_id);
  const auto rows = model_rows(store, model_ids);
  std::map<std::string_view, Eigen::Index> col_lookup;
  for (std::size_t c = 0; c < mat.instance_ids.size(); ++c) {
    col_lookup.emplace(mat.instance_ids[c], static_cast<Eigen::Index>(c));
  }
  std::vector<Eigen::Index> cols;
  cols.reserve(instance_ids.size());
  for (const auto& id : instance_ids) {
    auto it = col_lookup.find(id);
    if (it == col_lookup.end()) {
      throw DataError("task " + squote(task_id) + ": unknown instance " + squote(id));
    }
    cols.push_back(it->second);
  }
  EvalMatrix out;
  out.task_id = std::string(task_id);
  out.model_ids.assign(model_ids.begin(), model_ids.end());
  out.instance_ids.assign(instance_ids.begin(), instance_ids.end());
  out.values = mat.values(rows, cols);
  return out;
}

// ---------------------------------------------------------------------------
// target results

TargetResults load_target_results(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(dir.string() + ": not a directory");
  TargetResults out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with(kTaskFilePrefix) && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    const auto name = path.filename().string();
    const auto task_id = name.substr(kTaskFilePrefix.size(),
                                     name.size() - kTaskFilePrefix.size() - 4);
    auto file = read_matrix_file(path, task_id);
    if (file.model_ids.size() != 1) {
      throw DataError(path.string() + ": target results need exactly one model row, found " +
                      std::to_string(file.model_ids.size()));
    }
    if (out.model_id.empty()) {
      out.model_id = file.model_ids.front();
    } else if (out.model_id != file.model_ids.front()) {
      throw DataError(path.string() + ": model " + squote(file.model_ids.front()) +
                      " differs from " + squote(out.model_id));
    }
    auto& values = out.values[task_id];
    for (std::size_t c = 0; c < file.instance_ids.size(); ++c) {
      const double v = file.values(0, static_cast<Eigen::Index>(c));
      check_value(v, MetricKind::kContinuous, task_id, out.model_id, file.instance_ids[c]);
      if (!values.emplace(file.instance_ids[c], v).second) {
        throw DataError("task " + squote(task_id) + ": duplicate instance " +
                        squote(file.instance_ids[c]));
      }
    }
  }
  if (out.values.empty()) throw DataError(dir.string() + ": no task_<id>.csv files");
  return out;
}

void save_target_results(const TargetResults& results, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& [task_id, values] : results.values) {
    std::vector<std::string> ids;
    Eigen::MatrixXd row(1, static_cast<Eigen::Index>(values.size()));
    Eigen::Index c = 0;
    for (const auto& [id, v] : values) {
      ids.push_back(id);
      row(0, c++) = v;
    }
    write_matrix_file(dir / (std::string(kTaskFilePrefix) + task_id + ".csv"),
                      {results.model_id}, ids, row);
  }
}

TargetResults target_results_from_store(const BenchmarkStore& store,
                                        std::string_view model_id) {
  TargetResults out;
  out.model_id = std::string(model_id);
  const auto row = static_cast<Eigen::Index>(store.model_index(model_id));
  for (const auto& mat : store.matrices()) {
    auto& values = out.values[mat.task_id];
    for (std::size_t c = 0; c < mat.instance_ids.size(); ++c) {
      values.emplace(mat.instance_ids[c], mat.values(row, static_cast<Eigen::Index>(c)));
    }
  }
  return out;
}

}  // namespace cfeval
