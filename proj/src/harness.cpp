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

#include "cfeval/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>
#include <set>
#include <thread>

#include "cfeval/importance.hpp"
#include "csv.hpp"

namespace cfeval {

double mae(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.size() != predicted.size()) {
    throw ArgumentError("mae: lengths differ (" + std::to_string(truth.size()) + " vs " +
                        std::to_string(predicted.size()) + ")");
  }
  if (truth.empty()) throw ArgumentError("mae: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += std::abs(truth[i] - predicted[i]);
  return s / static_cast<double>(truth.size());
}

double weighted_mae(std::span<const double> errors, std::span<const double> ranks) {
  if (errors.size() != ranks.size()) throw ArgumentError("weighted_mae: lengths differ");
  if (errors.empty()) throw ArgumentError("weighted_mae: empty input");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!(ranks[i] >= 1.0)) throw ArgumentError("weighted_mae: ranks must be >= 1");
    num += errors[i] / ranks[i];
    den += 1.0 / ranks[i];
  }
  return num / den;
}

// --------------------------------------------------------------- oracle ---

StoreOracle::StoreOracle(const BenchmarkStore& store, std::string_view model_id)
    : store_(&store), row_(store.model_index(model_id)) {
  calls_.assign(store.num_tasks(), 0);
  repeated_.assign(store.num_tasks(), 0);
  for (const auto& t : store.tasks()) seen_.emplace_back(t.instance_ids.size(), 0);
}

std::vector<double> StoreOracle::query_columns(std::size_t task,
                                               std::span<const Eigen::Index> columns) {
  const auto& values = store_->matrices()[task].values;
  std::vector<double> out;
  out.reserve(columns.size());
  std::lock_guard lock(mutex_);
  for (auto c : columns) {
    if (c < 0 || c >= values.cols()) throw ArgumentError("oracle: column out of range");
    auto& s = seen_[task][static_cast<std::size_t>(c)];
    if (s) repeated_[task] = 1;
    s = 1;
    ++calls_[task];
    out.push_back(values(static_cast<Eigen::Index>(row_), c));
  }
  return out;
}

std::vector<double> StoreOracle::query(const std::string& task_id,
                                       std::span<const std::string> instance_ids) {
  const auto task = store_->task_index(task_id);
  const auto& ids = store_->tasks()[task].instance_ids;
  std::vector<Eigen::Index> cols;
  cols.reserve(instance_ids.size());
  for (const auto& id : instance_ids) {
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw DataError("oracle: unknown instance '" + id + "'");
    cols.push_back(static_cast<Eigen::Index>(it - ids.begin()));
  }
  return query_columns(task, cols);
}

std::size_t StoreOracle::calls(std::size_t task) const {
  std::lock_guard lock(mutex_);
  return calls_[task];
}

bool StoreOracle::repeated(std::size_t task) const {
  std::lock_guard lock(mutex_);
  return repeated_[task] != 0;
}

// -------------------------------------------------------------- context ---

ExperimentContext::ExperimentContext(const BenchmarkStore& store, const Split& split)
    : prediction_(store, split), test_ids_(split.test_model_ids) {
  std::sort(test_ids_.begin(), test_ids_.end());
  for (const auto& m : store.matrices()) {
    row_means_.push_back(m.values.cols() > 0 ? Eigen::VectorXd(m.values.rowwise().mean())
                                             : Eigen::VectorXd::Zero(m.values.rows()));
  }
}

double ExperimentContext::true_performance(std::size_t task, std::string_view model_id) const {
  return row_means_[task](static_cast<Eigen::Index>(store().model_index(model_id)));
}

// -------------------------------------------------------------- methods ---

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

SelectorConfig selector_at(const ExperimentConfig& cfg, double ratio) {
  SelectorConfig s = cfg.selector;
  s.sample_ratio = ratio;
  return s;
}

}  // namespace

void Method::prepare(const ExperimentContext&, const ExperimentConfig&) {}

void CfMethod::prepare(const ExperimentContext& ctx, const ExperimentConfig& cfg) {
  base_scores_.clear();
  for (std::size_t t = 0; t < ctx.store().num_tasks(); ++t) {
    base_scores_.push_back(
        column_importance(ctx.prediction().initial_matrix(t).values, cfg.selector.importance));
  }
}

MethodOutput CfMethod::run(const ExperimentContext& ctx, const ExperimentConfig& cfg,
                           StoreOracle& oracle, double ratio, std::uint64_t) const {
  if (base_scores_.size() != ctx.store().num_tasks()) {
    throw ArgumentError("cf method used before prepare()");
  }
  const SelectorConfig sc = selector_at(cfg, ratio);
  MethodOutput out;
  std::map<std::string, SelectionState> selections;
  std::map<std::string, std::string> selection_errors;
  const auto t0 = Clock::now();
  for (std::size_t t = 0; t < ctx.store().num_tasks(); ++t) {
    const auto& initial = ctx.prediction().initial_matrix(t);
    try {
      selections.emplace(initial.task_id,
                         select_for_target(initial, base_scores_[t], oracle, sc));
    } catch (const std::exception& e) {
      selection_errors.emplace(initial.task_id, e.what());
    }
  }
  out.selection_seconds = seconds_since(t0);

  const auto t1 = Clock::now();
  const auto reports = predict_all(ctx.prediction(), selections, cfg.predictor);
  out.prediction_seconds = seconds_since(t1);

  for (std::size_t t = 0; t < reports.size(); ++t) {
    const auto& r = reports[t];
    TaskEstimate e;
    e.task_id = r.task_id;
    e.p_hat = r.p_hat;
    auto s = selections.find(r.task_id);
    e.budget = s != selections.end() ? s->second.budget : 0;
    if (auto se = selection_errors.find(r.task_id); se != selection_errors.end()) {
      e.error = "selection: " + se->second;
    } else if (r.error) {
      e.error = "prediction: " + *r.error;
    }
    out.tasks.push_back(std::move(e));
  }
  return out;
}

MethodOutput RandomMethod::run(const ExperimentContext& ctx, const ExperimentConfig& cfg,
                               StoreOracle& oracle, double ratio, std::uint64_t seed) const {
  const SelectorConfig sc = selector_at(cfg, ratio);
  sc.validate();
  MethodOutput out;
  const auto t0 = Clock::now();
  for (std::size_t t = 0; t < ctx.store().num_tasks(); ++t) {
    const auto& task = ctx.store().tasks()[t];
    TaskEstimate e;
    e.task_id = task.task_id;
    e.budget = selection_budget(task.instance_ids.size(), sc);
    // Distinct stream per task so tasks do not share samples.
    const auto cols = random_select(task.instance_ids.size(), e.budget,
                                    task_stream_seed(seed, t));
    const auto values = oracle.query_columns(t, cols);
    e.p_hat = random_predict(values);
    out.tasks.push_back(std::move(e));
  }
  out.selection_seconds = seconds_since(t0);
  return out;
}

const ClusterModel& ClusterMethod::clustering(const ExperimentContext& ctx,
                                              const ExperimentConfig& cfg, double ratio,
                                              std::uint64_t seed, std::size_t task) const {
  const auto key = std::make_tuple(ratio, seed, task);
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const auto& rec = ctx.store().tasks()[task];
  const SelectorConfig sc = selector_at(cfg, ratio);
  const auto k = selection_budget(rec.instance_ids.size(), sc);
  const auto f = features_.find(rec.task_id);
  const Eigen::MatrixXd& x =
      f != features_.end() ? f->second : ctx.prediction().initial_matrix(task).values;
  if (x.cols() != static_cast<Eigen::Index>(rec.instance_ids.size())) {
    throw DataError("cluster features for task '" + rec.task_id + "' cover " +
                    std::to_string(x.cols()) + " of " + std::to_string(rec.instance_ids.size()) +
                    " instances");
  }
  auto model = cluster_select(x, k, task_stream_seed(seed, task),
                              cfg.cluster);
  model.task_id = rec.task_id;
  std::lock_guard lock(mutex_);
  return cache_.emplace(key, std::move(model)).first->second;
}

MethodOutput ClusterMethod::run(const ExperimentContext& ctx, const ExperimentConfig& cfg,
                                StoreOracle& oracle, double ratio, std::uint64_t seed) const {
  selector_at(cfg, ratio).validate();
  MethodOutput out;
  for (std::size_t t = 0; t < ctx.store().num_tasks(); ++t) {
    TaskEstimate e;
    e.task_id = ctx.store().tasks()[t].task_id;
    const auto t0 = Clock::now();
    const auto& model = clustering(ctx, cfg, ratio, seed, t);
    const auto values = oracle.query_columns(t, model.representatives);
    out.selection_seconds += seconds_since(t0);
    const auto t1 = Clock::now();
    e.budget = model.k;
    e.p_hat = cluster_predict(model, values);
    out.prediction_seconds += seconds_since(t1);
    out.tasks.push_back(std::move(e));
  }
  return out;
}

MethodOutput ExternalMethod::run(const ExperimentContext& ctx, const ExperimentConfig&,
                                 StoreOracle& oracle, double ratio, std::uint64_t) const {
  MethodOutput out;
  for (const auto& task : ctx.store().tasks()) {
    TaskEstimate e;
    e.task_id = task.task_id;
    auto it = estimates_.find(std::make_tuple(ratio, oracle.model_id(), task.task_id));
    if (it == estimates_.end()) {
      e.p_hat = std::numeric_limits<double>::quiet_NaN();
      e.error = "no external estimate";
    } else {
      e.p_hat = it->second;
    }
    out.tasks.push_back(std::move(e));
  }
  return out;
}

std::unique_ptr<Method> load_external_method(const std::string& name,
                                             const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  const std::string src = path.string();
  if (rows.empty() || rows[0] != csv::Row{"model_id", "task_id", "ratio", "p_hat"}) {
    throw DataError(src + ": header must be model_id,task_id,ratio,p_hat");
  }
  std::map<std::tuple<double, std::string, std::string>, double> est;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = src + " line " + std::to_string(r + 1);
    if (row.size() != 4) throw DataError(where + ": expected 4 fields");
    const double ratio = csv::parse_double(row[2], where);
    const double p = csv::parse_double(row[3], where);
    if (p < 0.0 || p > 1.0) throw DataError(where + ": p_hat out of range [0,1]");
    if (!est.emplace(std::make_tuple(ratio, row[0], row[1]), p).second) {
      throw DataError(where + ": duplicate estimate");
    }
  }
  return std::make_unique<ExternalMethod>(name, std::move(est));
}

std::unique_ptr<Method> make_method(std::string_view name,
                                    std::map<std::string, Eigen::MatrixXd> features) {
  if (name == "cf") return std::make_unique<CfMethod>();
  if (name == "random") return std::make_unique<RandomMethod>();
  if (name == "cluster") return std::make_unique<ClusterMethod>(std::move(features));
  throw ArgumentError("unknown method '" + std::string(name) + "' (expected cf, random or cluster)");
}

// ------------------------------------------------------------ aggregate ---

Aggregates aggregate(std::span<const CellRecord> cells) {
  Aggregates out;
  // seed -> model -> (sum of true scores, task count, error sum, ok count)
  struct ModelAcc {
    double p_true = 0.0;
    std::size_t n = 0;
    double err = 0.0;
    std::size_t ok = 0;
  };
  std::map<std::uint64_t, std::map<std::string, ModelAcc>> by_seed;
  std::map<std::uint64_t, std::pair<double, double>> seed_err;  // abs, rank
  std::map<std::uint64_t, std::size_t> seed_ok;
  for (const auto& c : cells) {
    auto& m = by_seed[c.seed][c.model_id];
    m.p_true += c.p_true;
    ++m.n;
    if (c.error) {
      ++out.failed;
      continue;
    }
    m.err += c.abs_error();
    ++m.ok;
    seed_err[c.seed].first += c.abs_error();
    seed_err[c.seed].second += c.rank_error();
    ++seed_ok[c.seed];
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::size_t seeds = 0;
  for (const auto& [seed, models] : by_seed) {
    const auto ok = seed_ok[seed];
    if (ok == 0) continue;
    ++seeds;
    out.mae += seed_err[seed].first / static_cast<double>(ok);
    out.rank_mae += seed_err[seed].second / static_cast<double>(ok);
    std::vector<double> means;
    for (const auto& [id, m] : models) means.push_back(m.p_true / static_cast<double>(m.n));
    std::vector<double> errs;
    std::vector<double> ranks;
    std::size_t i = 0;
    for (const auto& [id, m] : models) {
      const double mine = means[i++];
      if (m.ok == 0) continue;
      const auto better = std::count_if(means.begin(), means.end(),
                                        [&](double v) { return v > mine; });
      errs.push_back(m.err / static_cast<double>(m.ok));
      ranks.push_back(1.0 + static_cast<double>(better));
    }
    out.weighted_mae += weighted_mae(errs, ranks);
  }
  if (seeds == 0) return {nan, nan, nan, out.failed};
  out.mae /= static_cast<double>(seeds);
  out.rank_mae /= static_cast<double>(seeds);
  out.weighted_mae /= static_cast<double>(seeds);
  return out;
}

// ------------------------------------------------------------ experiment ---

namespace {

struct Job {
  std::size_t method;
  std::size_t ratio;
  std::uint64_t seed;
  std::size_t model;
};

struct JobResult {
  std::vector<CellRecord> cells;
  double selection_seconds = 0.0;
  double prediction_seconds = 0.0;
};

JobResult run_job(const ExperimentContext& ctx, const Method& method, const ExperimentConfig& cfg,
                  double ratio, std::uint64_t seed, const std::string& model_id) {
  JobResult out;
  const auto n_tasks = ctx.store().num_tasks();
  std::vector<CellRecord> cells(n_tasks);
  for (std::size_t t = 0; t < n_tasks; ++t) {
    auto& c = cells[t];
    c.seed = seed;
    c.model_id = model_id;
    c.task_id = ctx.store().tasks()[t].task_id;
    c.p_true = ctx.true_performance(t, model_id);
    c.rank_true = predict_rank(c.p_true, ctx.prediction().initial_performance(t));
  }
  StoreOracle oracle(ctx.store(), model_id);
  try {
    const auto res = method.run(ctx, cfg, oracle, ratio, seed);
    out.selection_seconds = res.selection_seconds;
    out.prediction_seconds = res.prediction_seconds;
    if (res.tasks.size() != n_tasks) throw ArgumentError("method returned wrong task count");
    for (std::size_t t = 0; t < n_tasks; ++t) {
      auto& c = cells[t];
      const auto& e = res.tasks[t];
      c.budget = e.budget;
      c.oracle_calls = oracle.calls(t);
      c.p_hat = e.p_hat;
      if (e.error) {
        c.error = e.error;
      } else if (c.oracle_calls != c.budget || oracle.repeated(t)) {
        c.error = "oracle charged " + std::to_string(c.oracle_calls) + " instances for budget " +
                  std::to_string(c.budget);
      } else if (!std::isfinite(c.p_hat)) {
        c.error = "non-finite estimate";
      } else {
        c.rank_hat = predict_rank(c.p_hat, ctx.prediction().initial_performance(t));
      }
    }
  } catch (const std::exception& e) {
    for (auto& c : cells) {
      c.error = e.what();
      c.oracle_calls = 0;
    }
  }
  out.cells = std::move(cells);
  return out;
}

}  // namespace

std::vector<ExperimentResult> run_experiment(const ExperimentContext& ctx,
                                             std::span<Method* const> methods,
                                             const ExperimentConfig& cfg) {
  if (cfg.ratios.empty()) throw ArgumentError("run_experiment: no ratios");
  if (cfg.seeds.empty()) throw ArgumentError("run_experiment: no seeds");
  for (double r : cfg.ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw ArgumentError("run_experiment: ratio must lie in (0,1]");
  }
  cfg.selector.validate();
  cfg.predictor.validate();
  const std::set<std::uint64_t> distinct(cfg.seeds.begin(), cfg.seeds.end());
  for (auto* m : methods) m->prepare(ctx, cfg);

  std::vector<Job> jobs;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (std::size_t ri = 0; ri < cfg.ratios.size(); ++ri) {
      for (auto seed : distinct) {
        if (!methods[mi]->uses_seed() && seed != *distinct.begin()) continue;
        for (std::size_t m = 0; m < ctx.test_ids().size(); ++m) jobs.push_back({mi, ri, seed, m});
      }
    }
  }

  std::vector<JobResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const auto& job = jobs[j];
      results[j] = run_job(ctx, *methods[job.method], cfg, cfg.ratios[job.ratio], job.seed,
                           ctx.test_ids()[job.model]);
    }
  };
  const auto workers = std::clamp<std::size_t>(cfg.workers, 1, std::max<std::size_t>(jobs.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<ExperimentResult> out;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (std::size_t ri = 0; ri < cfg.ratios.size(); ++ri) {
      ExperimentResult r;
      r.method = methods[mi]->name();
      r.ratio = cfg.ratios[ri];
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].method != mi || jobs[j].ratio != ri) continue;
        r.cells.insert(r.cells.end(), results[j].cells.begin(), results[j].cells.end());
        r.selection_seconds += results[j].selection_seconds;
        r.prediction_seconds += results[j].prediction_seconds;
      }
      std::sort(r.cells.begin(), r.cells.end(), [](const auto& a, const auto& b) {
        return std::tie(a.seed, a.model_id, a.task_id) < std::tie(b.seed, b.model_id, b.task_id);
      });
      r.total_seconds = r.selection_seconds + r.prediction_seconds;
      const auto agg = aggregate(r.cells);
      r.mae = agg.mae;
      r.weighted_mae = agg.weighted_mae;
      r.rank_mae = agg.rank_mae;
      r.failed_cells = agg.failed;
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<ExperimentResult> run_experiment(const BenchmarkStore& store, const Split& split,
                                             std::span<Method* const> methods,
                                             const ExperimentConfig& cfg) {
  const ExperimentContext ctx(store, split);
  return run_experiment(ctx, methods, cfg);
}

// ----------------------------------------------------------------- sweep ---

namespace {

constexpr std::string_view kSweepParameters[] = {
    "n_similar", "weight_alpha", "iterations", "tau0", "tau1", "tau2", "quantile_q", "k_items"};

std::size_t as_count(std::string_view name, double value) {
  if (!(value >= 1.0) || value != std::floor(value) || value > 1e9) {
    throw ArgumentError("sweep parameter " + std::string(name) + " needs a positive integer");
  }
  return static_cast<std::size_t>(value);
}

}  // namespace

std::span<const std::string_view> sweep_parameters() { return kSweepParameters; }

void set_sweep_parameter(ExperimentConfig& cfg, std::string_view name, double value) {
  if (name == "n_similar") {
    cfg.selector.n_similar = as_count(name, value);
  } else if (name == "weight_alpha") {
    cfg.selector.weight_alpha = value;
  } else if (name == "iterations") {
    cfg.selector.max_iterations = as_count(name, value);
  } else if (name == "tau0") {
    cfg.predictor.transport.tau0 = value;
  } else if (name == "tau1") {
    cfg.predictor.tau1 = value;
  } else if (name == "tau2") {
    cfg.predictor.tau2 = value;
  } else if (name == "quantile_q") {
    cfg.predictor.quantile_q = value;
  } else if (name == "k_items") {
    cfg.predictor.k_items = as_count(name, value);
  } else {
    throw ArgumentError("unknown sweep parameter '" + std::string(name) + "'");
  }
}

std::vector<SweepRow> sweep(const ExperimentContext& ctx,
                            const std::vector<std::pair<std::string, std::vector<double>>>& grid,
                            double ratio, const ExperimentConfig& base) {
  if (grid.empty()) throw ArgumentError("sweep: empty grid");
  std::vector<SweepRow> out;
  for (const auto& [param, values] : grid) {
    if (values.empty()) throw ArgumentError("sweep: no values for " + param);
    for (double v : values) {
      ExperimentConfig cfg = base;
      cfg.ratios = {ratio};
      set_sweep_parameter(cfg, param, v);
      CfMethod method;
      Method* methods[] = {&method};
      const auto res = run_experiment(ctx, methods, cfg);
      out.push_back({param, v, res[0].mae, res[0].weighted_mae, res[0].rank_mae,
                     res[0].failed_cells});
    }
  }
  return out;
}

// ------------------------------------------------------------- distances ---

std::vector<DistancePair> export_distance_pairs(const Eigen::MatrixXd& results,
                                                const Eigen::MatrixXd& semantic,
                                                std::span<const std::string> instance_ids) {
  const auto n = static_cast<Eigen::Index>(instance_ids.size());
  if (results.cols() != n || semantic.cols() != n) {
    throw DataError("export_distance_pairs: feature sets cover " + std::to_string(results.cols()) +
                    " and " + std::to_string(semantic.cols()) + " of " + std::to_string(n) +
                    " instances");
  }
  if (n < 2) throw ArgumentError("export_distance_pairs: need at least two instances");
  std::vector<DistancePair> out;
  out.reserve(instance_ids.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = (semantic.col(i) - semantic.col(j)).norm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out.push_back({instance_ids[static_cast<std::size_t>(i)],
                   instance_ids[static_cast<std::size_t>(best)], best_d,
                   (results.col(i) - results.col(best)).norm()});
  }
  return out;
}

}  // namespace cfeval
