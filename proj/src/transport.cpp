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

#include "cfeval/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cfeval/similarity.hpp"

namespace cfeval {

void TransportConfig::validate() const {
  if (!(tau0 >= -1.0 && tau0 <= 1.0)) throw ArgumentError("transport.tau0 must lie in [-1,1]");
  if (!(epsilon_scale >= 0.0)) throw ArgumentError("transport.epsilon_scale must be >= 0");
  if (max_iters < 1) throw ArgumentError("transport.max_iters must be positive");
  if (!(tolerance > 0.0)) throw ArgumentError("transport.tolerance must be positive");
}

std::vector<TaskProfile> task_profiles(const BenchmarkStore& store,
                                       std::span<const Eigen::Index> initial_rows) {
  std::vector<Eigen::Index> rows(initial_rows.begin(), initial_rows.end());
  std::vector<TaskProfile> out;
  out.reserve(store.num_tasks());
  for (const auto& mat : store.matrices()) {
    TaskProfile p;
    p.task_id = mat.task_id;
    if (mat.values.cols() == 0) {
      p.mean_vector = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
    } else {
      p.mean_vector = mat.values(rows, Eigen::all).rowwise().mean();
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::string> similar_tasks(std::span<const TaskProfile> profiles,
                                       std::string_view task_id, double tau0) {
  auto self = std::find_if(profiles.begin(), profiles.end(),
                           [&](const auto& p) { return p.task_id == task_id; });
  if (self == profiles.end()) throw DataError("unknown task '" + std::string(task_id) + "'");
  std::vector<std::pair<double, std::size_t>> hits;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (profiles[i].task_id == task_id) continue;
    const double s = cosine_similarity(self->mean_vector, profiles[i].mean_vector);
    if (s >= tau0) hits.emplace_back(s, i);
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::string> out;
  for (const auto& [_, i] : hits) out.push_back(profiles[i].task_id);
  return out;
}

// ---------------------------------------------------------------------------
// Sinkhorn scaling

double marginal_residual(const Eigen::MatrixXd& plan) {
  const double a = 1.0 / static_cast<double>(plan.rows());
  const double b = 1.0 / static_cast<double>(plan.cols());
  const double rows = (plan.rowwise().sum().array() - a).abs().maxCoeff();
  const double cols = (plan.colwise().sum().array() - b).abs().maxCoeff();
  return std::max(rows, cols);
}

namespace {

void check_cost(const Eigen::MatrixXd& cost) {
  if (cost.rows() < 1 || cost.cols() < 1) throw ArgumentError("transport cost must be non-empty");
  if (cost.hasNaN()) throw NumericError("transport cost contains NaN");
  if (!cost.allFinite()) throw NumericError("transport cost contains infinite entries");
  if ((cost.array() < 0.0).any()) throw ArgumentError("transport cost must be non-negative");
}

// Projects an approximately feasible non-negative plan onto the exact
// marginals while keeping it non-negative.
void round_to_marginals(Eigen::MatrixXd& plan) {
  const double a = 1.0 / static_cast<double>(plan.rows());
  const double b = 1.0 / static_cast<double>(plan.cols());
  const Eigen::ArrayXd row_sum = plan.rowwise().sum().array();
  const Eigen::ArrayXd x = (row_sum > a).select(a / row_sum, 1.0);
  plan = x.matrix().asDiagonal() * plan;
  const Eigen::ArrayXd col_sum = plan.colwise().sum().transpose().array();
  const Eigen::ArrayXd y = (col_sum > b).select(b / col_sum, 1.0);
  plan = plan * y.matrix().asDiagonal();
  // Both deficits are non-negative up to rounding; clamp so the update is too.
  const Eigen::VectorXd err_r = (a - plan.rowwise().sum().array()).cwiseMax(0.0).matrix();
  const Eigen::VectorXd err_c =
      (b - plan.colwise().sum().transpose().array()).cwiseMax(0.0).matrix();
  const double mass = err_r.sum();
  if (mass > 0.0) plan += err_r * err_c.transpose() / mass;
}

TransportPlan finish(const Eigen::MatrixXd& cost, Eigen::MatrixXd plan, std::size_t iterations) {
  round_to_marginals(plan);
  TransportPlan out;
  out.cost = (cost.array() * plan.array()).sum();
  out.residual = marginal_residual(plan);
  out.iterations = iterations;
  out.plan = std::move(plan);
  return out;
}

struct ScalingResult {
  Eigen::MatrixXd plan;
  std::size_t iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  bool ok = false;
};

// Sweeps between progress checks. Scaling hands over to the Newton polish
// when the last window's contraction, extrapolated over the remaining
// budget, would not reach the tolerance.
constexpr std::size_t kStallWindow = 100;

bool too_slow(double residual, double checkpoint, std::size_t done, std::size_t max_iters,
              double tolerance) {
  if (!std::isfinite(checkpoint) || !(checkpoint > 0.0)) return false;
  const double rate = residual / checkpoint;
  if (rate >= 1.0) return true;
  const double windows =
      static_cast<double>(max_iters - done) / static_cast<double>(kStallWindow);
  return std::log(residual) + windows * std::log(rate) >= std::log(tolerance);
}
// Newton steps factor a dense system of the smaller side's size; above this
// that is too costly.
constexpr Eigen::Index kNewtonMaxSize = 2000;

// Solves [diag(d1) P; P^T diag(d2)] x = y through the Schur complement of
// the larger diagonal block, so the dense factor is min(r, c) square.
Eigen::VectorXd solve_dual_system(const Eigen::MatrixXd& p, const Eigen::VectorXd& d1,
                                  const Eigen::VectorXd& d2, const Eigen::VectorXd& y) {
  const auto r = p.rows();
  const auto c = p.cols();
  Eigen::VectorXd x(r + c);
  if (c <= r) {
    const Eigen::MatrixXd scaled = d1.cwiseInverse().asDiagonal() * p;
    Eigen::MatrixXd schur = -(p.transpose() * scaled);
    schur.diagonal() += d2;
    x.tail(c) = schur.ldlt().solve(y.tail(c) - scaled.transpose() * y.head(r));
    x.head(r) = (y.head(r) - p * x.tail(c)).cwiseQuotient(d1);
  } else {
    const Eigen::MatrixXd scaled = p * d2.cwiseInverse().asDiagonal();
    Eigen::MatrixXd schur = -(scaled * p.transpose());
    schur.diagonal() += d1;
    x.head(r) = schur.ldlt().solve(y.head(r) - scaled * y.tail(c));
    x.tail(c) = (y.tail(c) - p.transpose() * x.head(r)).cwiseQuotient(d2);
  }
  return x;
}

Eigen::MatrixXd plan_from_potentials(const Eigen::MatrixXd& cost, double eps,
                                     const Eigen::ArrayXd& f, const Eigen::ArrayXd& g) {
  return ((f.matrix().replicate(1, cost.cols()) + g.matrix().transpose().replicate(cost.rows(), 1) -
           cost) /
          eps)
      .array()
      .exp()
      .matrix();
}

// Newton ascent on the entropic dual, for near-degenerate costs where
// scaling contracts too slowly. Each step counts as one iteration of the
// shared budget, so `used` sweeps leave max_iters - used steps.
ScalingResult newton_polish(const Eigen::MatrixXd& cost, double eps, Eigen::ArrayXd f,
                            Eigen::ArrayXd g, std::size_t used, std::size_t max_iters,
                            double tolerance) {
  const auto r = cost.rows();
  const auto c = cost.cols();
  const Eigen::ArrayXd a = Eigen::ArrayXd::Constant(r, 1.0 / static_cast<double>(r));
  const Eigen::ArrayXd b = Eigen::ArrayXd::Constant(c, 1.0 / static_cast<double>(c));
  auto dual = [&](const Eigen::ArrayXd& ff, const Eigen::ArrayXd& gg, const Eigen::MatrixXd& p) {
    return (a * ff).sum() + (b * gg).sum() - eps * p.sum();
  };
  auto residual_of = [&](const Eigen::MatrixXd& p) {
    const double rows = (p.rowwise().sum().array() - a).abs().maxCoeff();
    const double cols = (p.colwise().sum().transpose().array() - b).abs().maxCoeff();
    return std::max(rows, cols);
  };

  ScalingResult res;
  res.iterations = used;
  Eigen::MatrixXd plan = plan_from_potentials(cost, eps, f, g);
  res.residual = residual_of(plan);
  if (std::min(r, c) > kNewtonMaxSize) {
    res.plan = std::move(plan);
    res.ok = res.plan.allFinite();
    return res;
  }
  const Eigen::Index n = r + c;
  while (res.iterations < max_iters && !(res.residual < tolerance)) {
    const Eigen::VectorXd row_sum = plan.rowwise().sum();
    const Eigen::VectorXd col_sum = plan.colwise().sum().transpose();
    Eigen::VectorXd grad(n);
    grad << a.matrix() - row_sum, b.matrix() - col_sum;
    // Negated dual Hessian is [diag(row_sum) P; P^T diag(col_sum)] / eps,
    // positive semidefinite with null vector (1, -1); a relative ridge makes
    // it definite.
    const double ridge = 1e-12 * std::max(row_sum.maxCoeff(), col_sum.maxCoeff());
    const Eigen::VectorXd step =
        eps * solve_dual_system(plan, row_sum.array() + ridge, col_sum.array() + ridge, grad);
    if (!step.allFinite()) break;

    const double d0 = dual(f, g, plan);
    const double slope = grad.dot(step);
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 40; ++k, t *= 0.5) {
      const Eigen::ArrayXd f1 = f + t * step.head(r).array();
      const Eigen::ArrayXd g1 = g + t * step.tail(c).array();
      Eigen::MatrixXd p1 = plan_from_potentials(cost, eps, f1, g1);
      if (!p1.allFinite()) continue;
      if (dual(f1, g1, p1) >= d0 + 1e-4 * t * slope) {
        f = f1;
        g = g1;
        plan = std::move(p1);
        moved = true;
        break;
      }
    }
    ++res.iterations;
    res.residual = residual_of(plan);
    if (!moved) break;
  }
  res.plan = std::move(plan);
  res.ok = res.plan.allFinite();
  return res;
}

// Plain scaling with the Gibbs kernel; needs exp(-C/eps) representable.
ScalingResult kernel_scaling(const Eigen::MatrixXd& cost, double epsilon, std::size_t max_iters,
                             double tolerance) {
  const auto r = cost.rows();
  const auto c = cost.cols();
  const double a = 1.0 / static_cast<double>(r);
  const double b = 1.0 / static_cast<double>(c);
  const Eigen::MatrixXd kernel = (-cost.array() / epsilon).exp().matrix();
  Eigen::VectorXd u = Eigen::VectorXd::Ones(r);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(c);
  ScalingResult res;
  double checkpoint = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= max_iters; ++it) {
    const Eigen::VectorXd kv = kernel * v;
    if (it > 1) {
      res.residual = (u.array() * kv.array() - a).abs().maxCoeff();
      res.iterations = it - 1;
      if (res.residual < tolerance) break;
      if (res.iterations % kStallWindow == 0) {
        if (too_slow(res.residual, checkpoint, res.iterations, max_iters, tolerance) &&
            (u.array() > 0.0).all() && (v.array() > 0.0).all()) {
          const Eigen::ArrayXd f = epsilon * u.array().log();
          const Eigen::ArrayXd g = epsilon * v.array().log();
          return newton_polish(cost, epsilon, f, g, res.iterations, max_iters, tolerance);
        }
        checkpoint = res.residual;
      }
    }
    u = (a / kv.array()).matrix();
    v = (b / (kernel.transpose() * u).array()).matrix();
    if (!u.allFinite() || !v.allFinite()) return res;
    res.iterations = it;
  }
  if (res.iterations == max_iters) {
    const Eigen::VectorXd kv = kernel * v;
    res.residual = (u.array() * kv.array() - a).abs().maxCoeff();
  }
  res.plan = u.asDiagonal() * kernel * v.asDiagonal();
  res.ok = res.plan.allFinite();
  return res;
}

double log_sum_exp(const Eigen::ArrayXd& x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x - m).exp().sum());
}

// Log-domain scaling with epsilon annealing from the cost scale down to the
// requested epsilon. Stable for any epsilon > 0.
ScalingResult log_scaling(const Eigen::MatrixXd& cost, double epsilon, std::size_t max_iters,
                          double tolerance) {
  const auto r = cost.rows();
  const auto c = cost.cols();
  const double log_a = -std::log(static_cast<double>(r));
  const double log_b = -std::log(static_cast<double>(c));
  Eigen::ArrayXd f = Eigen::ArrayXd::Zero(r);
  Eigen::ArrayXd g = Eigen::ArrayXd::Zero(c);
  const Eigen::ArrayXXd cost_a = cost.array();

  auto sweep = [&](double eps) {
    for (Eigen::Index i = 0; i < r; ++i) {
      f(i) = eps * log_a - eps * log_sum_exp((g - cost_a.row(i).transpose()) / eps);
    }
    for (Eigen::Index j = 0; j < c; ++j) {
      g(j) = eps * log_b - eps * log_sum_exp((f - cost_a.col(j)) / eps);
    }
  };
  auto row_residual = [&](double eps) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < r; ++i) {
      const double s =
          ((f(i) + g - cost_a.row(i).transpose()) / eps).exp().sum();
      worst = std::max(worst, std::abs(s - std::exp(log_a)));
    }
    return worst;
  };

  ScalingResult res;
  double eps = std::max(epsilon, cost.maxCoeff());
  while (eps > epsilon) {
    for (std::size_t it = 0; it < 50; ++it) {
      sweep(eps);
      if (row_residual(eps) < 1e-3 * std::exp(log_a)) break;
    }
    eps = std::max(epsilon, eps / 4.0);
  }
  double checkpoint = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= max_iters; ++it) {
    sweep(epsilon);
    res.iterations = it;
    res.residual = row_residual(epsilon);
    if (res.residual < tolerance) break;
    if (it % kStallWindow == 0) {
      if (too_slow(res.residual, checkpoint, it, max_iters, tolerance)) {
        return newton_polish(cost, epsilon, f, g, it, max_iters, tolerance);
      }
      checkpoint = res.residual;
    }
  }
  res.plan = plan_from_potentials(cost, epsilon, f, g);
  res.ok = res.plan.allFinite();
  return res;
}

}  // namespace

TransportPlan solve_ot_entropic(const Eigen::MatrixXd& cost, double epsilon,
                                std::size_t max_iters, double tolerance) {
  check_cost(cost);
  if (!(epsilon > 0.0)) throw ArgumentError("entropic transport needs epsilon > 0");
  if (max_iters < 1) throw ArgumentError("transport max_iters must be positive");
  const auto r = cost.rows();
  const auto c = cost.cols();
  if (cost.maxCoeff() == 0.0) {
    // Every feasible plan is optimal; the entropic optimum is uniform.
    return finish(cost, Eigen::MatrixXd::Constant(r, c, 1.0 / static_cast<double>(r * c)), 0);
  }

  constexpr double kKernelRange = 400.0;
  ScalingResult res;
  if (cost.maxCoeff() / epsilon <= kKernelRange) {
    res = kernel_scaling(cost, epsilon, max_iters, tolerance);
  }
  if (!res.ok) res = log_scaling(cost, epsilon, max_iters, tolerance);
  if (!res.ok) throw NumericError("entropic transport produced non-finite values");
  if (!(res.residual < tolerance)) {
    throw ConvergenceError("entropic transport did not converge after " +
                               std::to_string(res.iterations) +
                               " iterations (marginal residual " + format_number(res.residual) +
                               ")",
                           res.residual);
  }
  return finish(cost, std::move(res.plan), res.iterations);
}

TransportPlan solve_ot(const Eigen::MatrixXd& cost, double epsilon, std::size_t max_iters,
                       double tolerance) {
  if (epsilon < 0.0 || std::isnan(epsilon)) throw ArgumentError("epsilon must be >= 0");
  if (epsilon == 0.0) return solve_ot_exact(cost);
  return solve_ot_entropic(cost, epsilon, max_iters, tolerance);
}

// ---------------------------------------------------------------------------
// synthesis

SyntheticBlock synthesize_block(const Eigen::MatrixXd& source,
                                const Eigen::VectorXd& source_target,
                                const Eigen::MatrixXd& unselected, MetricKind kind,
                                const TransportConfig& cfg) {
  cfg.validate();
  if (source.cols() < 1) throw ArgumentError("synthesize: no source columns");
  if (unselected.cols() < 1) throw ArgumentError("synthesize: no unselected columns");
  if (source.rows() != unselected.rows()) {
    throw ArgumentError("synthesize: source and unselected blocks differ in model count");
  }
  if (source_target.size() != source.cols()) {
    throw ArgumentError("synthesize: target values do not match the source columns");
  }
  const Eigen::MatrixXd cost = column_distances(source, unselected);
  const double mean_cost = cost.mean();

  SyntheticBlock block;
  if (mean_cost == 0.0 || cfg.epsilon_scale == 0.0) {
    block.plan = solve_ot_exact(cost);
  } else {
    try {
      block.plan = solve_ot_entropic(cost, cfg.epsilon_scale * mean_cost, cfg.max_iters,
                                     cfg.tolerance);
    } catch (const ConvergenceError&) {
      if (!cfg.exact_fallback) throw;
      block.plan = solve_ot_exact(cost);
    }
  }
  Eigen::MatrixXd weights = block.plan.plan;
  if (!cfg.raw_plan) {
    const Eigen::RowVectorXd col_sum = weights.colwise().sum();
    for (Eigen::Index j = 0; j < weights.cols(); ++j) weights.col(j) /= col_sum(j);
  }
  block.values_initial = source * weights;
  block.values_target = weights.transpose() * source_target;
  if (kind == MetricKind::kBinary) {
    block.values_initial = threshold_binary(block.values_initial);
    block.values_target = threshold_binary(block.values_target);
  } else if (!cfg.raw_plan) {
    // Convex combinations of [0,1] values; clip rounding noise.
    block.values_initial = block.values_initial.cwiseMax(0.0).cwiseMin(1.0);
    block.values_target = block.values_target.cwiseMax(0.0).cwiseMin(1.0);
  }
  return block;
}

std::optional<SyntheticBlock> synthesize(const BenchmarkStore& store, std::string_view task_id,
                                         const std::map<std::string, SelectionState>& selections,
                                         const Split& split, const TransportConfig& cfg) {
  const auto rows = model_rows(store, split.initial_model_ids);
  const auto profiles = task_profiles(store, rows);
  const auto& mat = store.matrix(task_id);
  auto own = selections.find(std::string(task_id));
  if (own == selections.end()) {
    throw DataError("no selection for task '" + std::string(task_id) + "'");
  }
  std::vector<bool> selected(mat.instance_ids.size(), false);
  for (auto c : own->second.probe_columns) selected[static_cast<std::size_t>(c)] = true;
  std::vector<Eigen::Index> unselected;
  for (std::size_t c = 0; c < selected.size(); ++c) {
    if (!selected[c]) unselected.push_back(static_cast<Eigen::Index>(c));
  }
  if (unselected.empty()) return std::nullopt;

  std::vector<std::string> sources;
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<double> target;
  Eigen::Index total = 0;
  for (const auto& other : similar_tasks(profiles, task_id, cfg.tau0)) {
    auto sel = selections.find(other);
    if (sel == selections.end() || sel->second.probe_columns.empty()) continue;
    blocks.push_back(store.matrix(other).values(rows, sel->second.probe_columns));
    target.insert(target.end(), sel->second.probe_values.begin(), sel->second.probe_values.end());
    total += blocks.back().cols();
    sources.push_back(other);
  }
  if (sources.empty()) return std::nullopt;

  Eigen::MatrixXd source(static_cast<Eigen::Index>(rows.size()), total);
  Eigen::Index offset = 0;
  for (const auto& b : blocks) {
    source.middleCols(offset, b.cols()) = b;
    offset += b.cols();
  }
  auto block = synthesize_block(
      source, Eigen::Map<const Eigen::VectorXd>(target.data(), static_cast<Eigen::Index>(target.size())),
      mat.values(rows, unselected), store.task(task_id).metric_kind, cfg);
  block.task_id = std::string(task_id);
  block.source_task_ids = std::move(sources);
  return block;
}

}  // namespace cfeval
