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

#include "config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "csv.hpp"

namespace cfeval::cli {
namespace {

struct KeyDef {
  std::string key;
  std::string doc;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_double(std::string_view v, std::string_view key) {
  try {
    return csv::parse_double(trim(v), key);
  } catch (const DataError& e) {
    throw ArgumentError(std::string("config ") + e.what());
  }
}

std::uint64_t to_unsigned(std::string_view v, std::string_view key) {
  long long n = 0;
  try {
    n = csv::parse_integer(trim(v), key);
  } catch (const DataError& e) {
    throw ArgumentError(std::string("config ") + e.what());
  }
  if (n < 0) throw ArgumentError("config " + std::string(key) + ": must be non-negative");
  return static_cast<std::uint64_t>(n);
}

bool to_bool(std::string_view v, std::string_view key) {
  const auto t = trim(v);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ArgumentError("config " + std::string(key) + ": expected true or false, got '" + t + "'");
}

template <typename Access>
KeyDef real(std::string key, std::string doc, Access access) {
  return {key, std::move(doc),
          [access, key](RunConfig& c, std::string_view v) { access(c) = to_double(v, key); },
          [access](const RunConfig& c) { return format_number(access(c)); }};
}

template <typename Access>
KeyDef count(std::string key, std::string doc, Access access) {
  return {key, std::move(doc),
          [access, key](RunConfig& c, std::string_view v) {
            using T = std::remove_reference_t<decltype(access(c))>;
            access(c) = static_cast<T>(to_unsigned(v, key));
          },
          [access](const RunConfig& c) {
            return std::to_string(access(c));
          }};
}

template <typename Access>
KeyDef flag(std::string key, std::string doc, Access access) {
  return {key, std::move(doc),
          [access, key](RunConfig& c, std::string_view v) { access(c) = to_bool(v, key); },
          [access](const RunConfig& c) {
            return std::string(access(c) ? "true" : "false");
          }};
}

template <typename Access>
KeyDef text(std::string key, std::string doc, Access access) {
  return {key, std::move(doc), [access](RunConfig& c, std::string_view v) { access(c) = trim(v); },
          [access](const RunConfig& c) { return access(c); }};
}

const std::vector<KeyDef>& table() {
  static const std::vector<KeyDef> defs = [] {
    std::vector<KeyDef> d;
#define CF_FIELD(expr) [](auto& c) -> auto& { return c.expr; }
    d.push_back(real("selector.sample_ratio", "share of each task revealed to the target, (0,1]",
                     CF_FIELD(experiment.selector.sample_ratio)));
    d.push_back(count("selector.min_subset_size", "budget floor; smaller tasks are used whole",
                      CF_FIELD(experiment.selector.min_subset_size)));
    d.push_back(real("selector.initial_probe_fraction", "share of the budget in the initial probe",
                     CF_FIELD(experiment.selector.initial_probe_fraction)));
    d.push_back(count("selector.q_select", "instances added per iteration, 0 = max(1, budget/10)",
                      CF_FIELD(experiment.selector.q_select)));
    d.push_back(count("selector.n_similar", "size of the similar-model set",
                      CF_FIELD(experiment.selector.n_similar)));
    d.push_back(real("selector.weight_alpha", "weight of whole-population importance, [0,1]",
                     CF_FIELD(experiment.selector.weight_alpha)));
    d.push_back(count("selector.max_iterations", "adaptive iterations before filling by base score",
                      CF_FIELD(experiment.selector.max_iterations)));
    d.push_back(flag("selector.freeze_similar", "compute the similar set only once",
                     CF_FIELD(experiment.selector.freeze_similar)));
    d.push_back(flag("selector.center_similarity", "mean-center vectors before the cosine",
                     CF_FIELD(experiment.selector.center_similarity)));
    d.push_back({"selector.importance", "variance | binary-count",
                 [](RunConfig& c, std::string_view v) {
                   const auto t = trim(v);
                   if (t == "variance") {
                     c.experiment.selector.importance = ImportanceKind::kVariance;
                   } else if (t == "binary-count") {
                     c.experiment.selector.importance = ImportanceKind::kBinaryCount;
                   } else {
                     throw ArgumentError("config selector.importance: expected variance or "
                                         "binary-count, got '" + t + "'");
                   }
                 },
                 [](const RunConfig& c) -> std::string {
                   return c.experiment.selector.importance == ImportanceKind::kVariance
                              ? "variance"
                              : "binary-count";
                 }});

    d.push_back(real("predictor.tau1", "unprobed instances below mean importance / tau1 are filtered",
                     CF_FIELD(experiment.predictor.tau1)));
    d.push_back(real("predictor.tau2", "floor of the item-based routing threshold",
                     CF_FIELD(experiment.predictor.tau2)));
    d.push_back(real("predictor.quantile_q", "quantile of neighbour similarity for the threshold",
                     CF_FIELD(experiment.predictor.quantile_q)));
    d.push_back(count("predictor.k_items", "neighbours averaged by the item branch",
                      CF_FIELD(experiment.predictor.k_items)));
    d.push_back(flag("predictor.include_synthetic_in_score",
                     "count synthetic columns in the score itself",
                     CF_FIELD(experiment.predictor.include_synthetic_in_score)));
    d.push_back(flag("predictor.use_ot", "build synthetic columns from similar tasks",
                     CF_FIELD(experiment.predictor.use_ot)));

    d.push_back(real("transport.tau0", "profile cosine needed for two tasks to be similar",
                     CF_FIELD(experiment.predictor.transport.tau0)));
    d.push_back(real("transport.epsilon_scale", "entropic regularization / mean cost, 0 = exact",
                     CF_FIELD(experiment.predictor.transport.epsilon_scale)));
    d.push_back(count("transport.max_iters", "scaling iteration cap",
                      CF_FIELD(experiment.predictor.transport.max_iters)));
    d.push_back(real("transport.tolerance", "largest marginal violation accepted",
                     CF_FIELD(experiment.predictor.transport.tolerance)));
    d.push_back(flag("transport.raw_plan", "skip column normalization of the plan",
                     CF_FIELD(experiment.predictor.transport.raw_plan)));
    d.push_back(flag("transport.exact_fallback",
                     "solve exactly when scaling misses the tolerance (false: numeric error)",
                     CF_FIELD(experiment.predictor.transport.exact_fallback)));

    d.push_back(count("cluster.restarts", "k-means restarts, best objective kept",
                      CF_FIELD(experiment.cluster.restarts)));
    d.push_back(count("cluster.max_iterations", "Lloyd iterations per restart",
                      CF_FIELD(experiment.cluster.max_iterations)));

    d.push_back(count("generator.n_models", "models in a generated store",
                      CF_FIELD(generator.n_models)));
    d.push_back(count("generator.n_tasks", "tasks", CF_FIELD(generator.n_tasks)));
    d.push_back(count("generator.instances_per_task", "instances per task",
                      CF_FIELD(generator.instances_per_task)));
    d.push_back(count("generator.instances_jitter", "task sizes vary by up to this much",
                      CF_FIELD(generator.instances_jitter)));
    d.push_back({"generator.metric", "binary | continuous",
                 [](RunConfig& c, std::string_view v) {
                   try {
                     c.generator.metric = parse_metric_kind(trim(v));
                   } catch (const DataError& e) {
                     throw ArgumentError(std::string("config generator.metric: ") + e.what());
                   }
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.generator.metric)); }});
    d.push_back(count("generator.n_families", "model families", CF_FIELD(generator.n_families)));
    d.push_back(real("generator.family_correlation", "share of ability variance from the family",
                     CF_FIELD(generator.family_correlation)));
    d.push_back(real("generator.ability_mean", "mean latent ability", CF_FIELD(generator.ability_mean)));
    d.push_back(real("generator.ability_sd", "latent ability spread", CF_FIELD(generator.ability_sd)));
    d.push_back(real("generator.release_trend", "ability gain from first to last release",
                     CF_FIELD(generator.release_trend)));
    d.push_back(real("generator.skill_sd", "model-by-task-group skill spread",
                     CF_FIELD(generator.skill_sd)));
    d.push_back(count("generator.n_task_groups", "groups of tasks sharing difficulties",
                      CF_FIELD(generator.n_task_groups)));
    d.push_back(real("generator.difficulty_mean", "mean instance difficulty",
                     CF_FIELD(generator.difficulty_mean)));
    d.push_back(real("generator.difficulty_sd", "instance difficulty spread",
                     CF_FIELD(generator.difficulty_sd)));
    d.push_back(real("generator.task_shift_sd", "per-task difficulty shift",
                     CF_FIELD(generator.task_shift_sd)));
    d.push_back(real("generator.task_jitter_sd", "per-instance difficulty jitter within a group",
                     CF_FIELD(generator.task_jitter_sd)));
    d.push_back(real("generator.family_item_sd", "per-instance ability offset shared by a family",
                     CF_FIELD(generator.family_item_sd)));
    d.push_back(real("generator.discrimination_mean", "mean log slope of instances",
                     CF_FIELD(generator.discrimination_mean)));
    d.push_back(real("generator.discrimination_sd", "log-normal spread of instance slopes",
                     CF_FIELD(generator.discrimination_sd)));
    d.push_back(flag("generator.noise", "sample outcomes; false = deterministic",
                     CF_FIELD(generator.noise)));
    d.push_back(real("generator.noise_sd", "continuous outcome noise", CF_FIELD(generator.noise_sd)));

    d.push_back(real("run.initial_fraction", "share of models, by release, used as initial models",
                     CF_FIELD(initial_fraction)));
    d.push_back(count("run.seed", "seed for generation and stochastic methods", CF_FIELD(seed)));
    d.push_back(count("run.workers", "worker threads for experiments",
                      CF_FIELD(experiment.workers)));
    d.push_back({"run.ratios", "comma-separated ratios evaluated by evaluate",
                 [](RunConfig& c, std::string_view v) {
                   std::vector<double> r;
                   for (const auto& s : split_list(v)) r.push_back(to_double(s, "run.ratios"));
                   if (r.empty()) throw ArgumentError("config run.ratios: empty list");
                   c.experiment.ratios = std::move(r);
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (double r : c.experiment.ratios) s += (s.empty() ? "" : ",") + format_number(r);
                   return s;
                 }});
    d.push_back({"run.seeds", "comma-separated method seeds",
                 [](RunConfig& c, std::string_view v) {
                   std::vector<std::uint64_t> r;
                   for (const auto& s : split_list(v)) r.push_back(to_unsigned(s, "run.seeds"));
                   if (r.empty()) throw ArgumentError("config run.seeds: empty list");
                   c.experiment.seeds = std::move(r);
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (auto r : c.experiment.seeds) s += (s.empty() ? "" : ",") + std::to_string(r);
                   return s;
                 }});
    d.push_back(text("paths.store", "store used when --store is absent", CF_FIELD(store_path)));
    d.push_back(text("paths.split", "split used when --split is absent", CF_FIELD(split_path)));
    d.push_back(text("paths.out_dir", "output directory used when --out-dir is absent",
                     CF_FIELD(out_dir)));
#undef CF_FIELD
    return d;
  }();
  return defs;
}

const KeyDef& find(std::string_view key) {
  for (const auto& d : table()) {
    if (d.key == key) return d;
  }
  throw ArgumentError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

std::vector<ConfigKey> config_keys() {
  std::vector<ConfigKey> out;
  for (const auto& d : table()) out.push_back({d.key, d.doc});
  return out;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  find(trim(key)).set(cfg, value);
}

std::string get_config_value(const RunConfig& cfg, std::string_view key) {
  return find(key).get(cfg);
}

void apply_config_text(RunConfig& cfg, std::string_view text, std::string_view source) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ArgumentError(std::string(source) + ":" + std::to_string(line_no) +
                          ": expected key = value");
    }
    try {
      set_config_value(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ArgumentError& e) {
      throw ArgumentError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path.string());
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& d : table()) {
    const auto s = d.key.substr(0, d.key.find('.'));
    if (s != section) {
      if (!section.empty()) out += "\n";
      section = s;
    }
    out += "# " + d.doc + "\n" + d.key + " = " + d.get(cfg) + "\n";
  }
  return out;
}

}  // namespace cfeval::cli
