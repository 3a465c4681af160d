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

#include "cfeval/baselines.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "cfeval/errors.hpp"
#include "csv.hpp"

namespace cfeval {

std::vector<Eigen::Index> random_select(std::size_t task_size, std::size_t budget,
                                        std::uint64_t seed) {
  if (budget > task_size) {
    throw ArgumentError("random_select: budget " + std::to_string(budget) +
                        " exceeds task size " + std::to_string(task_size));
  }
  std::vector<Eigen::Index> idx(task_size);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `budget` slots are the sample.
  for (std::size_t i = 0; i < budget; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, task_size - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(budget);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double random_predict(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("random_predict: empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

namespace {

struct Lloyd {
  std::vector<std::size_t> assign;
  Eigen::MatrixXd centers;
  double objective = 0.0;
  std::vector<double> trace;
};

double sq_dist(const Eigen::MatrixXd& x, Eigen::Index i, const Eigen::MatrixXd& c, Eigen::Index j) {
  return (x.col(i) - c.col(j)).squaredNorm();
}

Eigen::MatrixXd seed_centers(const Eigen::MatrixXd& x, std::size_t k, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(x.cols());
  Eigen::MatrixXd centers(x.rows(), static_cast<Eigen::Index>(k));
  std::vector<char> chosen(n, 0);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t pick = first(rng);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng);
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (chosen[i] || d2[i] == 0.0) continue;
          pick = i;
          r -= d2[i];
          if (r <= 0.0) break;
        }
      } else {
        // Every remaining point coincides with a center.
        std::vector<std::size_t> free;
        for (std::size_t i = 0; i < n; ++i) {
          if (!chosen[i]) free.push_back(i);
        }
        std::uniform_int_distribution<std::size_t> any(0, free.size() - 1);
        pick = free[any(rng)];
      }
    }
    chosen[pick] = 1;
    centers.col(static_cast<Eigen::Index>(c)) = x.col(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(x, static_cast<Eigen::Index>(i), centers,
                                      static_cast<Eigen::Index>(c)));
    }
  }
  return centers;
}

// Moves the worst-served point of a multi-member cluster into each empty
// cluster; each move strictly lowers or keeps the objective.
void fill_empty(const Eigen::MatrixXd& x, Lloyd& s, std::size_t k) {
  const auto n = s.assign.size();
  std::vector<std::size_t> size(k, 0);
  for (auto a : s.assign) ++size[a];
  for (std::size_t c = 0; c < k; ++c) {
    if (size[c] > 0) continue;
    std::size_t worst = n;
    double worst_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (size[s.assign[i]] < 2) continue;
      const double d = sq_dist(x, static_cast<Eigen::Index>(i), s.centers,
                               static_cast<Eigen::Index>(s.assign[i]));
      if (d > worst_d) {
        worst_d = d;
        worst = i;
      }
    }
    --size[s.assign[worst]];
    s.assign[worst] = c;
    size[c] = 1;
    s.centers.col(static_cast<Eigen::Index>(c)) = x.col(static_cast<Eigen::Index>(worst));
  }
}

void update_centers(const Eigen::MatrixXd& x, Lloyd& s, std::size_t k) {
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(x.rows(), static_cast<Eigen::Index>(k));
  std::vector<std::size_t> size(k, 0);
  for (std::size_t i = 0; i < s.assign.size(); ++i) {
    sum.col(static_cast<Eigen::Index>(s.assign[i])) += x.col(static_cast<Eigen::Index>(i));
    ++size[s.assign[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    s.centers.col(static_cast<Eigen::Index>(c)) =
        sum.col(static_cast<Eigen::Index>(c)) / static_cast<double>(size[c]);
  }
}

double objective(const Eigen::MatrixXd& x, const Lloyd& s) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.assign.size(); ++i) {
    total += sq_dist(x, static_cast<Eigen::Index>(i), s.centers,
                     static_cast<Eigen::Index>(s.assign[i]));
  }
  return total;
}

Lloyd run_lloyd(const Eigen::MatrixXd& x, std::size_t k, std::mt19937_64& rng,
                std::size_t max_iterations) {
  const auto n = static_cast<std::size_t>(x.cols());
  Lloyd s;
  s.centers = seed_centers(x, k, rng);
  s.assign.assign(n, k);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      // A point only leaves its cluster for a strictly closer center, so
      // duplicate points cannot cycle between equal centers.
      std::size_t best = s.assign[i];
      double best_d = best < k ? sq_dist(x, static_cast<Eigen::Index>(i), s.centers,
                                         static_cast<Eigen::Index>(best))
                               : std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist(x, static_cast<Eigen::Index>(i), s.centers,
                                 static_cast<Eigen::Index>(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (s.assign[i] != best) {
        s.assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    fill_empty(x, s, k);
    update_centers(x, s, k);
    s.trace.push_back(objective(x, s));
  }
  s.objective = objective(x, s);
  return s;
}

}  // namespace

ClusterModel cluster_select(const Eigen::MatrixXd& features, std::size_t k, std::uint64_t seed,
                            const ClusterConfig& cfg) {
  const auto n = static_cast<std::size_t>(features.cols());
  if (k < 1) throw ArgumentError("cluster_select: k must be positive");
  if (k > n) {
    throw ArgumentError("cluster_select: k = " + std::to_string(k) + " exceeds " +
                        std::to_string(n) + " instances");
  }
  if (!features.allFinite()) throw DataError("cluster_select: non-finite feature value");
  std::mt19937_64 rng(seed);
  Lloyd best;
  bool have = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(cfg.restarts, 1); ++r) {
    Lloyd s = run_lloyd(features, k, rng, std::max<std::size_t>(cfg.max_iterations, 1));
    if (!have || s.objective < best.objective) {
      best = std::move(s);
      have = true;
    }
  }

  ClusterModel out;
  out.k = k;
  out.assignments = best.assign;
  out.objective = best.objective;
  out.objective_trace = best.trace;
  out.sizes.assign(k, 0);
  out.representatives.assign(k, -1);
  std::vector<double> rep_d(k, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = best.assign[i];
    ++out.sizes[c];
    const double d = sq_dist(features, static_cast<Eigen::Index>(i), best.centers,
                             static_cast<Eigen::Index>(c));
    if (d < rep_d[c]) {
      rep_d[c] = d;
      out.representatives[c] = static_cast<Eigen::Index>(i);
    }
  }
  return out;
}

double cluster_predict(const ClusterModel& model, std::span<const double> values) {
  if (values.size() != model.representatives.size() || model.sizes.size() != values.size()) {
    throw ArgumentError("cluster_predict: expected " +
                        std::to_string(model.representatives.size()) + " values, got " +
                        std::to_string(values.size()));
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t c = 0; c < values.size(); ++c) {
    num += static_cast<double>(model.sizes[c]) * values[c];
    den += static_cast<double>(model.sizes[c]);
  }
  if (den == 0.0) throw ArgumentError("cluster_predict: empty clustering");
  return num / den;
}

Eigen::MatrixXd load_instance_features(const std::filesystem::path& path,
                                       const std::string& task_id,
                                       std::span<const std::string> instance_ids) {
  const auto rows = csv::read_file(path);
  const std::string src = path.string();
  if (rows.empty() || rows[0].size() < 3 || rows[0][0] != "task_id" || rows[0][1] != "instance_id") {
    throw DataError(src + ": header must be task_id,instance_id,<features...>");
  }
  const auto dim = static_cast<Eigen::Index>(rows[0].size() - 2);
  std::map<std::string, Eigen::Index, std::less<>> col;
  for (std::size_t j = 0; j < instance_ids.size(); ++j) {
    col.emplace(instance_ids[j], static_cast<Eigen::Index>(j));
  }
  Eigen::MatrixXd out(dim, static_cast<Eigen::Index>(instance_ids.size()));
  std::vector<char> filled(instance_ids.size(), 0);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != rows[0].size()) {
      throw DataError(src + " line " + std::to_string(r + 1) + ": expected " +
                      std::to_string(rows[0].size()) + " fields");
    }
    if (row[0] != task_id) continue;
    auto it = col.find(row[1]);
    if (it == col.end()) {
      throw DataError(src + ": task '" + task_id + "' has unknown instance '" + row[1] + "'");
    }
    auto& f = filled[static_cast<std::size_t>(it->second)];
    if (f) throw DataError(src + ": duplicate features for instance '" + row[1] + "'");
    f = 1;
    for (Eigen::Index d = 0; d < dim; ++d) {
      out(d, it->second) = csv::parse_double(row[static_cast<std::size_t>(d) + 2],
                                             src + " instance '" + row[1] + "'");
    }
  }
  for (std::size_t j = 0; j < filled.size(); ++j) {
    if (!filled[j]) {
      throw DataError(src + ": no features for task '" + task_id + "' instance '" +
                      instance_ids[j] + "'");
    }
  }
  return out;
}

}  // namespace cfeval
