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

#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "cfeval/baselines.hpp"
#include "cfeval/generator.hpp"
#include "cfeval/harness.hpp"
#include "cfeval/predictor.hpp"
#include "cfeval/report.hpp"
#include "cfeval/selector.hpp"
#include "cfeval/store.hpp"
#include "config.hpp"
#include "csv.hpp"

#ifndef CFEVAL_VERSION
#define CFEVAL_VERSION "0.0.0"
#endif

namespace cfeval::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  // Shared.
  std::string config_path;
  std::vector<std::string> sets;
  bool json_output = false;
  bool dump_config = false;
  std::string log_level = "info";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;

  std::string store;
  std::string split;
  std::string out;
  std::string out_dir;
  std::string format;
  std::string target_results;
  std::string target_model;
  std::string selection;
  std::string dump_transport;
  std::string features;
  std::string method;
  std::string methods = "cf,random,cluster";
  std::string task;
  std::string seeds;
  std::string ratios;
  std::optional<double> ratio;
  std::optional<double> fraction;
  std::vector<std::string> params;
  std::vector<std::string> externals;

  std::optional<std::size_t> n_models;
  std::optional<std::size_t> n_tasks;
  std::optional<std::size_t> n_instances;
  std::optional<std::size_t> n_families;
  std::optional<std::size_t> n_groups;
  std::string metric;
};

class Runner {
 public:
  Runner(const Options& opt, std::ostream& out, std::ostream& err) : opt_(opt), out_(out) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    log_ = std::make_shared<spdlog::logger>("cfeval", sink);
    log_->set_pattern("ts=%Y-%m-%dT%H:%M:%S.%e level=%l %v");
    log_->set_level(spdlog::level::from_str(opt.log_level));
    if (opt.log_level != "off" && log_->level() == spdlog::level::off) {
      throw ArgumentError("unknown log level '" + opt.log_level + "'");
    }
  }

  void load_config() {
    if (!opt_.config_path.empty()) apply_config_file(cfg_, opt_.config_path);
    for (const auto& s : opt_.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got '" + s + "'");
      set_config_value(cfg_, s.substr(0, eq), s.substr(eq + 1));
    }
    if (opt_.seed) {
      cfg_.seed = *opt_.seed;
      cfg_.generator.seed = *opt_.seed;
      cfg_.experiment.seeds = {*opt_.seed};
    } else {
      cfg_.generator.seed = cfg_.seed;
    }
    if (opt_.workers) cfg_.experiment.workers = *opt_.workers;
    if (opt_.ratio) cfg_.experiment.selector.sample_ratio = *opt_.ratio;
    if (opt_.fraction) cfg_.initial_fraction = *opt_.fraction;
    if (!opt_.seeds.empty()) set_config_value(cfg_, "run.seeds", opt_.seeds);
    if (!opt_.ratios.empty()) {
      set_config_value(cfg_, "run.ratios", opt_.ratios);
    } else if (opt_.ratio) {
      cfg_.experiment.ratios = {*opt_.ratio};
    }
  }

  int dump_config() {
    out_ << cli::dump_config(cfg_);
    return kOk;
  }

  int generate() {
    auto& g = cfg_.generator;
    if (opt_.n_models) g.n_models = *opt_.n_models;
    if (opt_.n_tasks) g.n_tasks = *opt_.n_tasks;
    if (opt_.n_instances) g.instances_per_task = *opt_.n_instances;
    if (opt_.n_families) g.n_families = *opt_.n_families;
    if (opt_.n_groups) g.n_task_groups = *opt_.n_groups;
    if (!opt_.metric.empty()) set_config_value(cfg_, "generator.metric", opt_.metric);
    const auto store = cfeval::generate(g);
    const fs::path path = require(opt_.out, "--out");
    const auto fmt = output_format(path);
    save_store(store, path, fmt);
    log_->info("event=generate path={} models={} tasks={} seed={}", path.string(),
               store.num_models(), store.num_tasks(), g.seed);
    if (opt_.json_output) {
      out_ << json{{"path", path.string()},
                   {"models", store.num_models()},
                   {"tasks", store.num_tasks()},
                   {"seed", g.seed}}
                  .dump()
           << '\n';
    } else {
      out_ << path.string() << '\n';
    }
    return kOk;
  }

  int split() {
    const auto store = load();
    const auto split = split_by_release(store, cfg_.initial_fraction);
    const json doc{{"initial_model_ids", split.initial_model_ids},
                   {"test_model_ids", split.test_model_ids}};
    if (!opt_.out.empty()) {
      save_split(split, opt_.out);
      log_->info("event=split path={} initial={} test={}", opt_.out, split.initial_model_ids.size(),
                 split.test_model_ids.size());
      if (opt_.json_output) {
        out_ << json{{"path", opt_.out},
                     {"initial", split.initial_model_ids.size()},
                     {"test", split.test_model_ids.size()}}
                    .dump()
             << '\n';
      } else {
        out_ << split.initial_model_ids.size() << " initial, " << split.test_model_ids.size()
             << " test\n";
      }
    } else {
      out_ << doc.dump(1) << '\n';
    }
    return kOk;
  }

  int select() {
    const auto store = load();
    auto target = load_target(store);
    const PredictionContext ctx(store, target_split(store, target.model_id));
    RecordedOracle oracle(target);
    const auto& sc = cfg_.experiment.selector;
    std::map<std::string, SelectionState> selections;
    for (std::size_t t = 0; t < store.num_tasks(); ++t) {
      const auto& initial = ctx.initial_matrix(t);
      auto s = select_for_target(initial, oracle, sc);
      if (oracle.calls(initial.task_id) != s.budget || oracle.repeated(initial.task_id)) {
        throw NumericError("task '" + initial.task_id + "': oracle charged " +
                           std::to_string(oracle.calls(initial.task_id)) + " for budget " +
                           std::to_string(s.budget));
      }
      selections.emplace(initial.task_id, std::move(s));
    }
    log_->info("event=select model={} tasks={} oracle_calls={} ratio={}", target.model_id,
               selections.size(), oracle.total_calls(), format_number(sc.sample_ratio));
    const auto doc = selections_to_json(target.model_id, selections);
    if (emit_document(doc)) return kOk;
    if (opt_.json_output) {
      json rows = json::array();
      for (const auto& [id, s] : selections) {
        rows.push_back({{"task_id", id}, {"budget", s.budget}});
      }
      out_ << json{{"path", opt_.out}, {"tasks", rows}}.dump() << '\n';
    } else {
      csv::write_row(out_, {"task_id", "budget", "similar_model_ids"});
      for (const auto& [id, s] : selections) {
        std::string sim;
        for (const auto& m : s.similar_model_ids) sim += (sim.empty() ? "" : " ") + m;
        csv::write_row(out_, {id, std::to_string(s.budget), sim});
      }
    }
    return kOk;
  }

  int predict() {
    const auto store = load();
    std::string model_id;
    auto selections = selections_from_json(read_json(require(opt_.selection, "--selection")),
                                           &model_id);
    if (!opt_.target_results.empty() || !opt_.target_model.empty()) {
      const auto target = load_target(store);
      model_id = target.model_id;
      for (auto& [task, s] : selections) {
        auto it = target.values.find(task);
        if (it == target.values.end()) {
          throw DataError("target results lack task '" + task + "'");
        }
        s.probe_values.clear();
        for (const auto& id : s.probe_ids) {
          auto v = it->second.find(id);
          if (v == it->second.end()) {
            throw DataError("target results lack task '" + task + "' instance '" + id + "'");
          }
          s.probe_values.push_back(v->second);
        }
      }
    }
    const PredictionContext ctx(store, target_split(store, model_id));
    SyntheticSink sink;
    if (!opt_.dump_transport.empty()) {
      fs::create_directories(opt_.dump_transport);
      sink = [&](const SyntheticBlock& b) { dump_block(b); };
    }
    const auto reports = predict_all(ctx, selections, cfg_.experiment.predictor, sink);
    int code = kOk;
    for (const auto& r : reports) {
      if (!r.error) continue;
      log_->error("event=predict_failed task={} numeric={} message=\"{}\"", r.task_id,
                  r.numeric_error, *r.error);
      code = std::max(code, r.numeric_error ? int{kNumeric} : int{kData});
    }
    log_->info("event=predict model={} tasks={}", model_id, reports.size());
    const auto doc = predictions_to_json(model_id, reports);
    if (!emit_document(doc)) {
      if (opt_.json_output) {
        json rows = json::array();
        for (const auto& r : reports) {
          rows.push_back({{"task_id", r.task_id},
                          {"p_hat", number_json(r.p_hat)},
                          {"rank_hat", r.rank_hat}});
        }
        out_ << json{{"path", opt_.out}, {"tasks", rows}}.dump() << '\n';
      } else {
        csv::write_row(out_, {"task_id", "p_hat", "rank_hat", "n_selected", "n_unselected",
                              "n_synthetic", "n_filtered_by_tau1", "n_item_cf", "n_user_cf"});
        for (const auto& r : reports) {
          const auto& c = r.counts;
          csv::write_row(out_, {r.task_id, r.error ? "nan" : format_number(r.p_hat),
                                std::to_string(r.rank_hat), std::to_string(c.n_selected),
                                std::to_string(c.n_unselected), std::to_string(c.n_synthetic),
                                std::to_string(c.n_filtered_by_tau1), std::to_string(c.n_item_cf),
                                std::to_string(c.n_user_cf)});
        }
      }
    }
    return code;
  }

  int baseline() {
    if (opt_.method != "random" && opt_.method != "cluster") {
      throw ArgumentError("--method must be random or cluster");
    }
    const auto store = load();
    const auto target = load_target(store);
    const PredictionContext ctx(store, target_split(store, target.model_id));
    RecordedOracle oracle(target);
    const auto& sc = cfg_.experiment.selector;
    sc.validate();
    json tasks = json::array();
    std::vector<std::pair<std::string, double>> rows;
    for (std::size_t t = 0; t < store.num_tasks(); ++t) {
      const auto& rec = store.tasks()[t];
      const auto budget = selection_budget(rec.instance_ids.size(), sc);
      const auto seed = task_stream_seed(cfg_.seed, t);
      std::vector<Eigen::Index> cols;
      std::optional<ClusterModel> model;
      if (opt_.method == "random") {
        cols = random_select(rec.instance_ids.size(), budget, seed);
      } else {
        const Eigen::MatrixXd x =
            opt_.features.empty()
                ? ctx.initial_matrix(t).values
                : load_instance_features(opt_.features, rec.task_id, rec.instance_ids);
        model = cluster_select(x, budget, seed, cfg_.experiment.cluster);
        cols = model->representatives;
      }
      std::vector<std::string> ids;
      for (auto c : cols) ids.push_back(rec.instance_ids[static_cast<std::size_t>(c)]);
      const auto values = oracle.query(rec.task_id, ids);
      const double p = model ? cluster_predict(*model, values) : random_predict(values);
      json tj{{"task_id", rec.task_id},
              {"budget", budget},
              {"probe_ids", ids},
              {"probe_values", values},
              {"p_hat", p},
              {"rank_hat", predict_rank(p, ctx.initial_performance(t))}};
      if (model) tj["cluster_sizes"] = model->sizes;
      tasks.push_back(std::move(tj));
      rows.emplace_back(rec.task_id, p);
    }
    log_->info("event=baseline method={} model={} oracle_calls={}", opt_.method, target.model_id,
               oracle.total_calls());
    const json doc{{"method", opt_.method}, {"model_id", target.model_id}, {"tasks", tasks}};
    if (emit_document(doc)) return kOk;
    if (opt_.json_output) {
      out_ << json{{"path", opt_.out}, {"tasks", rows.size()}}.dump() << '\n';
    } else {
      csv::write_row(out_, {"task_id", "p_hat"});
      for (const auto& [id, p] : rows) csv::write_row(out_, {id, format_number(p)});
    }
    return kOk;
  }

  int evaluate() {
    const auto store = load();
    const auto split = experiment_split(store);
    const ExperimentContext ctx(store, split);
    std::vector<std::unique_ptr<Method>> owned;
    for (const auto& name : list(opt_.methods)) owned.push_back(make_method(name, features(store)));
    for (const auto& e : opt_.externals) {
      const auto eq = e.find('=');
      if (eq == std::string::npos) throw ArgumentError("--external expects name=path");
      owned.push_back(load_external_method(e.substr(0, eq), e.substr(eq + 1)));
    }
    if (owned.empty()) throw ArgumentError("no methods given");
    std::vector<Method*> methods;
    for (auto& m : owned) methods.push_back(m.get());
    const auto results = run_experiment(ctx, methods, cfg_.experiment);
    for (const auto& r : results) {
      log_->info("event=evaluate method={} ratio={} mae={} failed_cells={} seconds={:.3f}",
                 r.method, format_number(r.ratio), format_number(r.mae), r.failed_cells,
                 r.total_seconds);
      if (r.failed_cells > 0) {
        for (const auto& c : r.cells) {
          if (c.error) {
            log_->warn("event=cell_failed method={} model={} task={} message=\"{}\"", r.method,
                       c.model_id, c.task_id, *c.error);
            break;
          }
        }
      }
    }
    const std::string dir = !opt_.out_dir.empty() ? opt_.out_dir : cfg_.out_dir;
    if (!dir.empty()) {
      std::ostringstream summary, cells;
      write_summary_csv(summary, results, false);
      write_cells_csv(cells, results);
      write_text(fs::path(dir) / "summary.csv", summary.str());
      write_text(fs::path(dir) / "cells.csv", cells.str());
      write_text(fs::path(dir) / "results.json",
                 experiment_to_json(results, true, false).dump(1) + "\n");
    }
    if (opt_.json_output) {
      out_ << experiment_to_json(results, false, true).dump() << '\n';
    } else {
      write_summary_csv(out_, results, true);
    }
    return kOk;
  }

  int sweep() {
    const auto store = load();
    const ExperimentContext ctx(store, experiment_split(store));
    std::vector<std::pair<std::string, std::vector<double>>> grid;
    for (const auto& p : opt_.params) {
      const auto eq = p.find('=');
      if (eq == std::string::npos) throw ArgumentError("--param expects name=v1,v2,...");
      std::vector<double> values;
      for (const auto& v : list(p.substr(eq + 1))) values.push_back(csv::parse_double(v, p));
      grid.emplace_back(p.substr(0, eq), std::move(values));
    }
    if (grid.empty()) {
      grid = {{"n_similar", {3, 5, 10}},     {"weight_alpha", {0, 0.5, 1}},
              {"iterations", {1, 5, 50}},    {"tau0", {0.9, 0.95, 0.99}},
              {"tau1", {1, 2, 4}},           {"tau2", {0.8, 0.9, 0.95}},
              {"quantile_q", {0.25, 0.5, 0.75}}};
    }
    const auto rows = cfeval::sweep(ctx, grid, cfg_.experiment.selector.sample_ratio,
                                    cfg_.experiment);
    log_->info("event=sweep rows={} ratio={}", rows.size(),
               format_number(cfg_.experiment.selector.sample_ratio));
    std::ostringstream text;
    if (opt_.json_output) {
      json arr = json::array();
      for (const auto& r : rows) {
        arr.push_back({{"param", r.parameter},
                       {"value", r.value},
                       {"mae", number_json(r.mae)},
                       {"weighted_mae", number_json(r.weighted_mae)},
                       {"rank_mae", number_json(r.rank_mae)}});
      }
      text << arr.dump() << '\n';
    } else {
      csv::write_row(text, {"param", "value", "mae", "weighted_mae", "rank_mae"});
      for (const auto& r : rows) {
        csv::write_row(text, {r.parameter, format_number(r.value), format_number(r.mae),
                              format_number(r.weighted_mae), format_number(r.rank_mae)});
      }
    }
    if (!opt_.out.empty()) {
      write_text(opt_.out, text.str());
    } else {
      out_ << text.str();
    }
    return kOk;
  }

  int export_distances() {
    const auto store = load();
    const auto& task = require(opt_.task, "--task");
    const auto& rec = store.task(task);
    const Eigen::MatrixXd semantic =
        load_instance_features(require(opt_.features, "--features"), task, rec.instance_ids);
    Eigen::MatrixXd results = store.matrix(task).values;
    const auto split_path = !opt_.split.empty() ? opt_.split : cfg_.split_path;
    if (!split_path.empty()) {
      const auto split = load_split(split_path);
      validate_split(store, split);
      results = results(model_rows(store, split.initial_model_ids), Eigen::all).eval();
    }
    const auto pairs = export_distance_pairs(results, semantic, rec.instance_ids);
    log_->info("event=export_distances task={} rows={}", task, pairs.size());
    std::ostringstream text;
    if (opt_.json_output) {
      json arr = json::array();
      for (const auto& p : pairs) {
        arr.push_back({{"instance_id", p.instance_id},
                       {"neighbor_id", p.neighbor_id},
                       {"semantic_distance", p.semantic_distance},
                       {"result_distance", p.result_distance}});
      }
      text << arr.dump() << '\n';
    } else {
      csv::write_row(text, {"instance_id", "neighbor_id", "semantic_distance", "result_distance"});
      for (const auto& p : pairs) {
        csv::write_row(text, {p.instance_id, p.neighbor_id, format_number(p.semantic_distance),
                              format_number(p.result_distance)});
      }
    }
    if (!opt_.out.empty()) {
      write_text(opt_.out, text.str());
    } else {
      out_ << text.str();
    }
    return kOk;
  }

 private:
  static const std::string& require(const std::string& value, const char* flag) {
    if (value.empty()) throw ArgumentError(std::string(flag) + " is required");
    return value;
  }

  static std::vector<std::string> list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  StoreFormat output_format(const fs::path& path) const {
    if (opt_.format.empty()) return path.extension() == ".json" ? StoreFormat::kJson : StoreFormat::kCsvDir;
    if (opt_.format == "json") return StoreFormat::kJson;
    if (opt_.format == "csv-dir") return StoreFormat::kCsvDir;
    throw ArgumentError("--format must be csv-dir or json");
  }

  BenchmarkStore load() {
    const fs::path path = !opt_.store.empty() ? opt_.store : cfg_.store_path;
    if (path.empty()) throw ArgumentError("--store is required");
    auto store = opt_.format.empty() ? load_store(path) : load_store(path, output_format(path));
    log_->info("event=load_store path={} models={} tasks={}", path.string(), store.num_models(),
               store.num_tasks());
    return store;
  }

  TargetResults load_target(const BenchmarkStore& store) const {
    if (!opt_.target_results.empty() && !opt_.target_model.empty()) {
      throw ArgumentError("--target-results and --target-model are exclusive");
    }
    if (!opt_.target_results.empty()) return load_target_results(opt_.target_results);
    if (!opt_.target_model.empty()) return target_results_from_store(store, opt_.target_model);
    throw ArgumentError("--target-results or --target-model is required");
  }

  // The loaded split when given; otherwise every other store model is an
  // initial model.
  Split target_split(const BenchmarkStore& store, const std::string& model_id) const {
    const auto path = !opt_.split.empty() ? opt_.split : cfg_.split_path;
    if (!path.empty()) {
      auto split = load_split(path);
      validate_split(store, split);
      if (std::find(split.initial_model_ids.begin(), split.initial_model_ids.end(), model_id) !=
          split.initial_model_ids.end()) {
        throw DataError("target model '" + model_id + "' is an initial model of the split");
      }
      return split;
    }
    Split split;
    for (const auto& m : store.models()) {
      if (m.model_id != model_id) split.initial_model_ids.push_back(m.model_id);
    }
    return split;
  }

  Split experiment_split(const BenchmarkStore& store) const {
    const auto path = !opt_.split.empty() ? opt_.split : cfg_.split_path;
    if (path.empty()) return split_by_release(store, cfg_.initial_fraction);
    auto split = load_split(path);
    validate_split(store, split);
    return split;
  }

  std::map<std::string, Eigen::MatrixXd> features(const BenchmarkStore& store) const {
    std::map<std::string, Eigen::MatrixXd> out;
    if (opt_.features.empty()) return out;
    for (const auto& t : store.tasks()) {
      out.emplace(t.task_id, load_instance_features(opt_.features, t.task_id, t.instance_ids));
    }
    return out;
  }

  // Writes `doc` to --out and returns true, or prints it and returns false
  // when no --out was given.
  bool emit_document(const json& doc) {
    if (opt_.out.empty()) {
      out_ << doc.dump(1) << '\n';
      return true;
    }
    write_text(opt_.out, doc.dump(1) + "\n");
    return false;
  }

  void dump_block(const SyntheticBlock& b) const {
    auto write_matrix = [](const fs::path& path, const Eigen::MatrixXd& m) {
      std::ostringstream s;
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        csv::Row row;
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(format_number(m(i, j)));
        csv::write_row(s, row);
      }
      write_text(path, s.str());
    };
    const fs::path dir = opt_.dump_transport;
    write_matrix(dir / ("plan_" + b.task_id + ".csv"), b.plan.plan);
    write_matrix(dir / ("synthetic_" + b.task_id + ".csv"), b.values_initial);
    write_matrix(dir / ("synthetic_target_" + b.task_id + ".csv"), b.values_target.transpose());
  }

  const Options& opt_;
  std::ostream& out_;
  std::shared_ptr<spdlog::logger> log_;
  RunConfig cfg_;
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Estimate benchmark scores of new models from small instance subsets.", "cfeval"};
  app.set_version_flag("--version", std::string("cfeval ") + CFEVAL_VERSION);
  app.fallthrough();
  app.require_subcommand(0, 1);
  app.add_option("--config", opt.config_path, "config file (key = value lines)");
  app.add_option("--set", opt.sets, "override one config key, key=value")->take_all();
  app.add_flag("--json", opt.json_output, "machine-readable output");
  app.add_flag("--dump-config", opt.dump_config, "print the effective configuration");
  app.add_option("--log-level", opt.log_level, "off, error, warn, info or debug");
  app.add_option("--seed", opt.seed, "run seed");
  app.add_option("--workers", opt.workers, "worker threads");

  auto* gen = app.add_subcommand("generate", "write a synthetic store");
  gen->add_option("--out", opt.out, "output path (directory or .json)");
  gen->add_option("--format", opt.format, "csv-dir or json");
  gen->add_option("--models", opt.n_models);
  gen->add_option("--tasks", opt.n_tasks);
  gen->add_option("--instances", opt.n_instances);
  gen->add_option("--families", opt.n_families);
  gen->add_option("--groups", opt.n_groups, "task groups");
  gen->add_option("--metric", opt.metric, "binary or continuous");

  auto* split = app.add_subcommand("split", "split models by release order");
  split->add_option("--store", opt.store);
  split->add_option("--fraction", opt.fraction, "initial share of models");
  split->add_option("--out", opt.out);

  auto* select = app.add_subcommand("select", "build probe sets for one target model");
  select->add_option("--store", opt.store);
  select->add_option("--split", opt.split);
  select->add_option("--target-model", opt.target_model, "use this store model as the target");
  select->add_option("--target-results", opt.target_results, "directory of task_<id>.csv");
  select->add_option("--ratio", opt.ratio);
  select->add_option("--out", opt.out);

  auto* predict = app.add_subcommand("predict", "estimate scores from a selection");
  predict->add_option("--store", opt.store);
  predict->add_option("--split", opt.split);
  predict->add_option("--selection", opt.selection);
  predict->add_option("--target-model", opt.target_model, "use this store model as the target");
  predict->add_option("--target-results", opt.target_results);
  predict->add_option("--dump-transport", opt.dump_transport, "write plans as CSV here");
  predict->add_option("--out", opt.out);

  auto* baseline = app.add_subcommand("baseline", "random or clustering estimate");
  baseline->add_option("--method", opt.method, "random or cluster")->required();
  baseline->add_option("--store", opt.store);
  baseline->add_option("--split", opt.split);
  baseline->add_option("--target-model", opt.target_model, "use this store model as the target");
  baseline->add_option("--target-results", opt.target_results);
  baseline->add_option("--features", opt.features, "instance feature CSV");
  baseline->add_option("--ratio", opt.ratio);
  baseline->add_option("--out", opt.out);

  auto* evaluate = app.add_subcommand("evaluate", "run methods over test models");
  evaluate->add_option("--store", opt.store);
  evaluate->add_option("--split", opt.split);
  evaluate->add_option("--methods", opt.methods, "comma-separated: cf, random, cluster");
  evaluate->add_option("--external", opt.externals, "name=path of replayed estimates");
  evaluate->add_option("--ratio", opt.ratio);
  evaluate->add_option("--ratios", opt.ratios, "comma-separated ratios");
  evaluate->add_option("--seeds", opt.seeds, "comma-separated seeds");
  evaluate->add_option("--features", opt.features);
  evaluate->add_option("--out-dir", opt.out_dir);

  auto* sweep = app.add_subcommand("sweep", "one-at-a-time hyperparameter sweep");
  sweep->add_option("--store", opt.store);
  sweep->add_option("--split", opt.split);
  sweep->add_option("--param", opt.params, "name=v1,v2,...");
  sweep->add_option("--ratio", opt.ratio);
  sweep->add_option("--seeds", opt.seeds);
  sweep->add_option("--out", opt.out);

  auto* dist = app.add_subcommand("export-distances", "semantic vs result-space neighbour pairs");
  dist->add_option("--store", opt.store);
  dist->add_option("--split", opt.split);
  dist->add_option("--task", opt.task);
  dist->add_option("--features", opt.features);
  dist->add_option("--out", opt.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    Runner runner(opt, out, err);
    runner.load_config();
    if (opt.dump_config) return runner.dump_config();
    if (gen->parsed()) return runner.generate();
    if (split->parsed()) return runner.split();
    if (select->parsed()) return runner.select();
    if (predict->parsed()) return runner.predict();
    if (baseline->parsed()) return runner.baseline();
    if (evaluate->parsed()) return runner.evaluate();
    if (sweep->parsed()) return runner.sweep();
    if (dist->parsed()) return runner.export_distances();
    err << "error: a subcommand is required\n\n" << app.help();
    return kUsage;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace cfeval::cli
