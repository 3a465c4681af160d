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

#include "cfeval/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfeval/importance.hpp"
#include "cfeval/similarity.hpp"

namespace cfeval {

void PredictorConfig::validate() const {
  if (!(tau1 > 0.0)) throw ArgumentError("predictor.tau1 must be > 0");
  if (!(tau2 >= 0.0 && tau2 <= 1.0)) throw ArgumentError("predictor.tau2 must lie in [0,1]");
  if (!(quantile_q >= 0.0 && quantile_q <= 1.0)) {
    throw ArgumentError("predictor.quantile_q must lie in [0,1]");
  }
  if (k_items < 1) throw ArgumentError("predictor.k_items must be positive");
  transport.validate();
}

std::string_view to_string(Branch branch) {
  switch (branch) {
    case Branch::kFiltered: return "filtered";
    case Branch::kItem: return "item";
    case Branch::kUser: return "user";
  }
  return "user";
}

FilterResult filter_unimportant(const Eigen::MatrixXd& selected, const Eigen::MatrixXd& unselected,
                                double tau1) {
  if (!(tau1 > 0.0)) throw ArgumentError("filter_unimportant: tau1 must be > 0");
  if (selected.cols() < 1) throw ArgumentError("filter_unimportant: empty selected block");
  if (selected.rows() != unselected.rows()) {
    throw ArgumentError("filter_unimportant: blocks differ in model count");
  }
  FilterResult out;
  out.mean_importance = column_variance(selected).mean();
  out.threshold = out.mean_importance / tau1;
  if (unselected.cols() == 0) return out;
  const Eigen::VectorXd v = column_variance(unselected);
  const Eigen::RowVectorXd col_mean = unselected.colwise().mean();
  for (Eigen::Index j = 0; j < unselected.cols(); ++j) {
    if (v(j) < out.threshold) {
      out.filtered.push_back(j);
      out.c0 += col_mean(j);
    } else {
      out.kept.push_back(j);
    }
  }
  return out;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("quantile of an empty vector");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

RoutingResult route_and_predict(const Eigen::MatrixXd& selected,
                                const Eigen::MatrixXd& unselected_kept,
                                const Eigen::VectorXd& target_values,
                                std::span<const Eigen::Index> similar_rows,
                                const PredictorConfig& cfg) {
  if (selected.cols() < 1) throw ArgumentError("route_and_predict: empty selected block");
  if (similar_rows.empty()) throw ArgumentError("route_and_predict: empty similar-model set");
  if (target_values.size() != selected.cols()) {
    throw ArgumentError("route_and_predict: target values do not match the selected block");
  }
  if (selected.rows() != unselected_kept.rows()) {
    throw ArgumentError("route_and_predict: blocks differ in model count");
  }
  RoutingResult out;
  const auto n = unselected_kept.cols();
  if (n == 0) return out;

  const Eigen::MatrixXd sim = column_cosine(unselected_kept, selected);
  const auto k = std::min<std::size_t>(cfg.k_items, static_cast<std::size_t>(selected.cols()));
  std::vector<double> mean_sim(static_cast<std::size_t>(n));
  out.audit.resize(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    auto& a = out.audit[static_cast<std::size_t>(j)];
    a.column = j;
    a.neighbors = top_k_indices(sim.row(j).transpose(), k);
    double s = 0.0;
    for (auto c : a.neighbors) s += sim(j, c);
    a.mean_similarity = s / static_cast<double>(k);
    mean_sim[static_cast<std::size_t>(j)] = a.mean_similarity;
  }
  out.tau3 = std::max(cfg.tau2, nearest_rank_quantile(mean_sim, cfg.quantile_q));

  std::vector<Eigen::Index> rows(similar_rows.begin(), similar_rows.end());
  for (auto& a : out.audit) {
    if (a.mean_similarity >= out.tau3) {
      double s = 0.0;
      for (auto c : a.neighbors) s += target_values(c);
      a.prediction = s / static_cast<double>(a.neighbors.size());
      a.branch = Branch::kItem;
      out.c1 += a.prediction;
      ++out.n_item;
    } else {
      a.prediction = unselected_kept(rows, a.column).mean();
      a.neighbors.clear();
      a.branch = Branch::kUser;
      out.c2 += a.prediction;
      ++out.n_user;
    }
  }
  return out;
}

double assemble_score(const ScoreComponents& parts, const ScoreCounts& counts,
                      const PredictorConfig& cfg) {
  if (counts.n_filtered_by_tau1 + counts.n_item_cf + counts.n_user_cf != counts.n_unselected) {
    throw ArgumentError("assemble_score: bucket counts do not add up to the unselected count");
  }
  double num = parts.a_s + parts.c0 + parts.c1 + parts.c2;
  auto den = static_cast<double>(counts.n_selected + counts.n_unselected);
  if (cfg.include_synthetic_in_score) {
    num += parts.a_synthetic;
    den += static_cast<double>(counts.n_synthetic);
  }
  if (den == 0.0) throw ArgumentError("assemble_score: zero denominator");
  return std::clamp(num / den, 0.0, 1.0);
}

std::size_t predict_rank(double p_hat, std::span<const double> initial_performance) {
  return 1 + static_cast<std::size_t>(std::count_if(initial_performance.begin(),
                                                    initial_performance.end(),
                                                    [&](double p) { return p > p_hat; }));
}

// ---------------------------------------------------------------------------

PredictionContext::PredictionContext(const BenchmarkStore& store, const Split& split)
    : store_(&store) {
  validate_split(store, split);
  initial_ids_ = split.initial_model_ids;
  std::sort(initial_ids_.begin(), initial_ids_.end(), [&](const auto& a, const auto& b) {
    return store.model_index(a) < store.model_index(b);
  });
  initial_rows_ = model_rows(store, initial_ids_);
  for (std::size_t i = 0; i < initial_ids_.size(); ++i) {
    row_lookup_.emplace(initial_ids_[i], static_cast<Eigen::Index>(i));
  }
  for (const auto& mat : store.matrices()) {
    EvalMatrix m;
    m.task_id = mat.task_id;
    m.model_ids = initial_ids_;
    m.instance_ids = mat.instance_ids;
    m.values = mat.values(initial_rows_, Eigen::all);
    std::vector<double> perf(initial_ids_.size(), 0.0);
    if (m.values.cols() > 0) {
      const Eigen::VectorXd means = m.values.rowwise().mean();
      perf.assign(means.data(), means.data() + means.size());
    }
    initial_perf_.push_back(std::move(perf));
    initial_.push_back(std::move(m));
  }
  profiles_ = task_profiles(store, initial_rows_);
}

Eigen::Index PredictionContext::initial_row(std::string_view model_id) const {
  auto it = row_lookup_.find(model_id);
  if (it == row_lookup_.end()) {
    throw DataError("model '" + std::string(model_id) + "' is not an initial model");
  }
  return it->second;
}

SelectionState PredictionContext::resolve(std::size_t task, const SelectionState& sel) const {
  const auto& mat = initial_[task];
  SelectionState out = sel;
  if (sel.probe_values.size() != sel.probe_ids.size()) {
    throw DataError("task '" + mat.task_id + "': selection has " +
                    std::to_string(sel.probe_ids.size()) + " probe ids but " +
                    std::to_string(sel.probe_values.size()) + " values");
  }
  std::map<std::string_view, Eigen::Index> cols;
  for (std::size_t c = 0; c < mat.instance_ids.size(); ++c) {
    cols.emplace(mat.instance_ids[c], static_cast<Eigen::Index>(c));
  }
  out.probe_columns.clear();
  std::vector<bool> seen(mat.instance_ids.size(), false);
  for (const auto& id : sel.probe_ids) {
    auto it = cols.find(id);
    if (it == cols.end()) {
      throw DataError("task '" + mat.task_id + "': selection names unknown instance '" + id + "'");
    }
    if (seen[static_cast<std::size_t>(it->second)]) {
      throw DataError("task '" + mat.task_id + "': instance '" + id + "' selected twice");
    }
    seen[static_cast<std::size_t>(it->second)] = true;
    out.probe_columns.push_back(it->second);
  }
  out.similar_rows.clear();
  for (const auto& id : sel.similar_model_ids) out.similar_rows.push_back(initial_row(id));
  return out;
}

PredictionReport predict_task(const PredictionContext& ctx, std::size_t task,
                              const std::map<std::string, SelectionState>& selections,
                              const PredictorConfig& cfg, const SyntheticSink& sink) {
  cfg.validate();
  const auto& mat = ctx.initial_matrix(task);
  auto found = selections.find(mat.task_id);
  if (found == selections.end()) throw DataError("no selection for task '" + mat.task_id + "'");
  const auto sel = ctx.resolve(task, found->second);

  PredictionReport report;
  report.task_id = mat.task_id;
  const auto n_instances = static_cast<std::size_t>(mat.values.cols());
  std::vector<bool> taken(n_instances, false);
  for (auto c : sel.probe_columns) taken[static_cast<std::size_t>(c)] = true;
  std::vector<Eigen::Index> unselected;
  for (std::size_t c = 0; c < n_instances; ++c) {
    if (!taken[c]) unselected.push_back(static_cast<Eigen::Index>(c));
  }

  report.counts.n_selected = sel.probe_columns.size();
  report.counts.n_unselected = unselected.size();
  report.components.a_s =
      std::accumulate(sel.probe_values.begin(), sel.probe_values.end(), 0.0);

  if (!unselected.empty()) {
    if (sel.probe_columns.empty()) {
      throw DataError("task '" + mat.task_id + "': empty probe set with unselected instances");
    }
    if (sel.similar_rows.empty()) {
      throw DataError("task '" + mat.task_id + "': selection has no similar models");
    }
    const Eigen::MatrixXd rest = mat.values(Eigen::all, unselected);
    Eigen::MatrixXd selected = mat.values(Eigen::all, sel.probe_columns);
    Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(
        sel.probe_values.data(), static_cast<Eigen::Index>(sel.probe_values.size()));

    if (cfg.use_ot) {
      std::vector<std::string> sources;
      std::vector<Eigen::Index> source_task;
      Eigen::Index total = 0;
      for (const auto& other : similar_tasks(ctx.profiles(), mat.task_id, cfg.transport.tau0)) {
        auto s = selections.find(other);
        if (s == selections.end() || s->second.probe_ids.empty()) continue;
        sources.push_back(other);
        total += static_cast<Eigen::Index>(s->second.probe_ids.size());
      }
      if (!sources.empty()) {
        Eigen::MatrixXd source(selected.rows(), total);
        Eigen::VectorXd source_target(total);
        Eigen::Index offset = 0;
        for (const auto& other : sources) {
          const auto idx = ctx.store().task_index(other);
          const auto other_sel = ctx.resolve(idx, selections.at(other));
          const auto w = static_cast<Eigen::Index>(other_sel.probe_columns.size());
          source.middleCols(offset, w) =
              ctx.initial_matrix(idx).values(Eigen::all, other_sel.probe_columns);
          source_target.segment(offset, w) = Eigen::Map<const Eigen::VectorXd>(
              other_sel.probe_values.data(), w);
          offset += w;
        }
        auto block = synthesize_block(source, source_target, rest,
                                      ctx.store().task(mat.task_id).metric_kind, cfg.transport);
        block.task_id = mat.task_id;
        block.source_task_ids = sources;
        report.source_task_ids = sources;
        report.counts.n_synthetic = static_cast<std::size_t>(block.values_initial.cols());
        report.components.a_synthetic = block.values_target.sum();

        Eigen::MatrixXd joined(selected.rows(), selected.cols() + block.values_initial.cols());
        joined << selected, block.values_initial;
        Eigen::VectorXd joined_target(target.size() + block.values_target.size());
        joined_target << target, block.values_target;
        selected = std::move(joined);
        target = std::move(joined_target);
        if (sink) sink(block);
      }
    }

    const auto filter = filter_unimportant(selected, rest, cfg.tau1);
    report.mean_probe_importance = filter.mean_importance;
    report.components.c0 = filter.c0;
    report.counts.n_filtered_by_tau1 = filter.filtered.size();

    const Eigen::MatrixXd kept = rest(Eigen::all, filter.kept);
    const auto routed = route_and_predict(selected, kept, target, sel.similar_rows, cfg);
    report.components.c1 = routed.c1;
    report.components.c2 = routed.c2;
    report.counts.n_item_cf = routed.n_item;
    report.counts.n_user_cf = routed.n_user;
    report.tau3 = routed.tau3;

    const Eigen::RowVectorXd rest_mean = rest.colwise().mean();
    for (auto j : filter.filtered) {
      report.instances.push_back({mat.instance_ids[static_cast<std::size_t>(unselected[j])],
                                  Branch::kFiltered, rest_mean(j), 0.0});
    }
    for (const auto& a : routed.audit) {
      const auto col = unselected[static_cast<std::size_t>(filter.kept[a.column])];
      report.instances.push_back({mat.instance_ids[static_cast<std::size_t>(col)], a.branch,
                                  a.prediction, a.mean_similarity});
    }
    std::sort(report.instances.begin(), report.instances.end(),
              [&](const auto& x, const auto& y) { return x.instance_id < y.instance_id; });
  }

  report.p_hat = assemble_score(report.components, report.counts, cfg);
  report.rank_hat = predict_rank(report.p_hat, ctx.initial_performance(task));
  return report;
}

std::vector<PredictionReport> predict_all(const PredictionContext& ctx,
                                          const std::map<std::string, SelectionState>& selections,
                                          const PredictorConfig& cfg, const SyntheticSink& sink) {
  std::vector<PredictionReport> out;
  out.reserve(ctx.store().num_tasks());
  for (std::size_t t = 0; t < ctx.store().num_tasks(); ++t) {
    try {
      out.push_back(predict_task(ctx, t, selections, cfg, sink));
    } catch (const NumericError& e) {
      PredictionReport r;
      r.task_id = ctx.store().tasks()[t].task_id;
      r.p_hat = std::numeric_limits<double>::quiet_NaN();
      r.error = e.what();
      r.numeric_error = true;
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      PredictionReport r;
      r.task_id = ctx.store().tasks()[t].task_id;
      r.p_hat = std::numeric_limits<double>::quiet_NaN();
      r.error = e.what();
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<PredictionReport> predict_all(const BenchmarkStore& store, const Split& split,
                                          const std::map<std::string, SelectionState>& selections,
                                          const PredictorConfig& cfg) {
  const PredictionContext ctx(store, split);
  return predict_all(ctx, selections, cfg);
}

}  // namespace cfeval
